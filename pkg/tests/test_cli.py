from __future__ import annotations

import json
import subprocess
import sys

import pytest

import sygus_checker
from homcalc.benchmarks import benchmark
from homcalc.cli import run_cli


def _run(capsys, *argv):
    code = run_cli(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_homomorphic_exit_zero(capsys):
    code, out, _ = _run(capsys, "check", benchmark("max_bid").path)
    assert code == 0
    assert out.startswith("HOMOMORPHIC\nmerge: (lambda")


def test_refuted_json(capsys):
    code, out, _ = _run(capsys, "check", benchmark("clickstream").path, "--json")
    assert code == 1
    report = json.loads(out)
    assert report["status"] == "REFUTED" and report["seed"] == 0
    assert report["counterexample"]["kind"] == "HomRefute"


def test_unknown_exit_two(capsys):
    code, out, _ = _run(capsys, "check", benchmark("count").path, "--budget-oracle", "1e-9")
    assert code == 2
    assert "reason: oracle: budget exhausted" in out


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("HOMCALC_SEED", "17")
    _, out, _ = _run(capsys, "check", benchmark("count").path, "--json")
    assert json.loads(out)["seed"] == 17
    _, out, _ = _run(capsys, "check", benchmark("count").path, "--json", "--seed", "3")
    assert json.loads(out)["seed"] == 3


def test_timings_flag(capsys):
    _, out, _ = _run(capsys, "check", benchmark("count").path, "--json", "--timings")
    timings = json.loads(out)["timings"]
    assert set(timings) == {"parse_ms", "refute_ms", "decomp_ms", "synth_ms", "oracle_ms"}
    assert all(isinstance(v, int) and v >= 0 for v in timings.values())


def test_emit_sygus_writes_checked_files(capsys, tmp_path):
    out_dir = tmp_path / "sl"
    code, _, err = _run(capsys, "check", benchmark("bid_aggregator").path, "--emit-sygus", str(out_dir))
    assert code == 0
    files = sorted(p.name for p in out_dir.iterdir())
    assert files == ["root.1.sl", "root.2.sl", "root.3.elem.sl"]
    assert err.count("wrote ") == 3
    for f in out_dir.iterdir():
        sygus_checker.check(f.read_text())


def test_dump_decomp(capsys):
    _, _, err = _run(capsys, "check", benchmark("sum_frequency").path, "--dump-decomp")
    assert err.startswith("-- root\n")


def test_require_commutative(capsys, tmp_path):
    code, _, _ = _run(capsys, "check", benchmark("sum_frequency").path, "--require-commutative",
                      "--emit-sygus", str(tmp_path))
    assert code == 0
    assert all("(h b2 b1)" in f.read_text() for f in tmp_path.iterdir())


def test_missing_file(capsys, tmp_path):
    code, _, err = _run(capsys, "check", str(tmp_path / "nope.hc"))
    assert code == 66 and "cannot read" in err


def test_parse_error(capsys, tmp_path):
    bad = tmp_path / "bad.hc"
    bad.write_text("(program (input t (df (v int)))\n  (aggregate (lambda ((s int)) s) (int 0)))")
    code, _, err = _run(capsys, "check", str(bad))
    assert code == 65 and "bad.hc" in err


def test_type_error(capsys, tmp_path):
    bad = tmp_path / "bad.hc"
    bad.write_text("(program (input t (df (v int)))\n"
                   "  (aggregate (lambda ((s int) (x int)) (and s x)) (int 0)))")
    code, _, _ = _run(capsys, "check", str(bad))
    assert code == 65


@pytest.mark.parametrize("argv", [
    [],
    ["check"],
    ["check", "x.hc", "--trials", "-1"],
    ["check", "x.hc", "--budget-leaf", "0"],
    ["check", "x.hc", "--frobnicate"],
    ["check", "x.hc", "--trials", "0"],
])
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as info:
        code = run_cli(argv)
        raise SystemExit(code)
    assert info.value.code == 64


def test_unwritable_sygus_dir(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, _ = _run(capsys, "check", benchmark("count").path, "--emit-sygus", str(blocker / "sub"))
    assert code == 73


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "homcalc.cli", "check", benchmark("count").path, "--json"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["status"] == "HOMOMORPHIC"
