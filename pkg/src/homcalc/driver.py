"""End-to-end homomorphism check for a whole program.

The order is fixed: refute homomorphism directly, refute normalizer
existence, synthesize a normalizer (decomposing where possible), lift it to
the program and validate the lifted merge against random dataframe pairs.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any

from .core import DataFrame, EvalError, StrV, Value, concat_df
from .decomposer import decompose
from .frontend import show
from .gen import Constants, Gen, GenConfig, greedy_shrink, shrink_rows
from .interp import apply_fn, init_value, run_program
from .refuter import Counterexample, Deadline, refute_hom, refute_norm, replay
from .synth import Budget, Normalizer, Provenance, Refuted, SynthLog, SynthProblem, synth_normalizer
from .syntax import Lam, Program, Select

HOMOMORPHIC = "HOMOMORPHIC"
REFUTED = "REFUTED"
UNKNOWN = "UNKNOWN"
ORACLE = "Oracle"

EXIT_CODES = {HOMOMORPHIC: 0, REFUTED: 1, UNKNOWN: 2}
PHASES = ("parse", "refute", "decomp", "synth", "oracle")


@dataclass(frozen=True)
class Verdict:
    status: str
    seed: int
    trace: tuple[str, ...] = ()
    merge: Lam | None = None
    provenance: Provenance | None = None
    counterexample: Counterexample | None = None
    reason: str | None = None
    timings: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        present = (self.merge is not None, self.counterexample is not None, self.reason is not None)
        expected = {HOMOMORPHIC: (True, False, False), REFUTED: (False, True, False),
                    UNKNOWN: (False, False, True)}
        if expected.get(self.status) != present:
            raise ValueError(f"fields do not match status {self.status}")

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    def to_json(self, with_timings: bool = False) -> dict[str, Any]:
        out: dict[str, Any] = {"status": self.status}
        if self.merge is not None:
            out["merge_text"] = show(self.merge)
        if self.counterexample is not None:
            ce = self.counterexample
            out["counterexample"] = {
                "kind": ce.kind,
                "witnesses": [{"name": n, "value": str(w)} for n, w in ce.witnesses],
                "lhs": str(ce.lhs),
                "rhs": str(ce.rhs),
            }
        if self.reason is not None:
            out["reason"] = self.reason
        out["trace"] = list(self.trace)
        times = dict(self.timings)
        out["timings"] = {f"{k}_ms": (round(times.get(k, 0.0) * 1000) if with_timings else 0) for k in PHASES}
        out["seed"] = self.seed
        return out

    def json_text(self, with_timings: bool = False) -> str:
        return json.dumps(self.to_json(with_timings), indent=2, sort_keys=False)

    def describe(self) -> str:
        lines = [self.status]
        if self.merge is not None:
            lines.append(f"merge: {show(self.merge)}")
            lines.append(f"derived by: {self.provenance}")
            lines.append("verified up to the testing budget")
        if self.counterexample is not None:
            ce = self.counterexample
            lines.append(f"counterexample ({ce.kind}):")
            lines.extend(f"  {n} = {w}" for n, w in ce.witnesses)
            lines.append(f"  {ce.lhs} != {ce.rhs}")
        if self.reason is not None:
            lines.append(f"reason: {self.reason}")
        return "\n".join(lines)


@dataclass
class _Clock:
    spent: dict[str, float] = field(default_factory=dict)

    def run(self, phase: str, fn):
        t = time.perf_counter()
        try:
            return fn()
        finally:
            self.spent[phase] = self.spent.get(phase, 0.0) + time.perf_counter() - t

    def items(self) -> tuple[tuple[str, float], ...]:
        return tuple(self.spent.items())


def lift_rules(p: Program) -> list[str]:
    """Rule names of the derivation from the program down to its input."""
    rules = ["Top", "Agg"]
    rules.extend("Rel-Select" if isinstance(s, Select) else "Rel-Project" for s in reversed(p.pipeline))
    rules.append("Var")
    return rules


def is_homomorphism(p: Program, cfg: GenConfig = GenConfig(), budget: Budget = Budget(),
                    log: SynthLog | None = None, parse_seconds: float = 0.0) -> Verdict:
    log = log if log is not None else SynthLog()
    clock = _Clock({"parse": parse_seconds})
    trace: list[str] = []

    def verdict(status: str, **kw: Any) -> Verdict:
        return Verdict(status, cfg.seed, tuple(trace), timings=clock.items(), **kw)

    init = init_value(p)
    consts = Constants.of_program(p)
    ce = clock.run("refute", lambda: refute_hom(p, cfg, budget.refute_seconds))
    if ce is not None:
        trace.append("Hom-Refute")
        return verdict(REFUTED, counterexample=ce)
    ce = clock.run("refute", lambda: refute_norm(p.f, init, cfg, budget.refute_seconds, consts))
    if ce is not None:
        trace.append("Norm-Refute-1" if ce.kind == "NormRefute1" else "Norm-Refute-2")
        return verdict(REFUTED, counterexample=ce)

    dec = clock.run("decomp", lambda: decompose(p.f))
    trace.append("CanApplyDecomp" if dec.decomposable else "NoDecomp")
    problem = SynthProblem(p.f, init, "root", consts)
    res = clock.run("synth", lambda: synth_normalizer(problem, cfg, budget, log, refuted_checked=True))
    trace.extend(log.trace)
    if isinstance(res, Refuted):
        # only reachable through a refuted sub-problem whose fallback also refuted
        return verdict(UNKNOWN, reason=f"synth: refuted sub-problem at {res.path} with no whole-state normalizer")
    if not isinstance(res, Normalizer):
        return verdict(UNKNOWN, reason=f"synth: {res.reason} at {res.path}")

    trace.extend(lift_rules(p))
    ce, done = clock.run("oracle", lambda: _oracle(p, res.h, cfg, budget.oracle_seconds))
    if ce is not None:
        trace.append("Oracle-Failed")
        return verdict(UNKNOWN, reason=f"oracle: lifted merge failed on {ce.describe()}")
    if done < cfg.trials:
        return verdict(UNKNOWN, reason=f"oracle: budget exhausted after {done} of {cfg.trials} pairs")
    trace.append("Oracle-Passed")
    return verdict(HOMOMORPHIC, merge=res.h, provenance=res.provenance)


def oracle_check(p: Program, merge: Lam, cfg: GenConfig = GenConfig(),
                 budget: float | None = None) -> Counterexample | None:
    """Compare P(D1 ++ D2) with merge(P(D1), P(D2)) on ``cfg.trials`` random
    frame pairs. None means every pair agreed."""
    return _oracle(p, merge, cfg, budget)[0]


def _merge_violation(p: Program, merge: Lam, d1: DataFrame, d2: DataFrame) -> tuple[Value, Value] | None:
    try:
        lhs = run_program(p, concat_df(d1, d2))
        a, b = run_program(p, d1), run_program(p, d2)
    except EvalError:
        # the program itself fails, so this pair says nothing about the merge
        return None
    try:
        rhs = apply_fn(merge, (a, b))
    except EvalError as e:
        return lhs, _error_value(e)
    return None if lhs == rhs else (lhs, rhs)


def _error_value(e: EvalError) -> Value:
    return StrV(f"error: {e.kind}")


def _oracle(p: Program, merge: Lam, cfg: GenConfig, budget: float | None) -> tuple[Counterexample | None, int]:
    deadline = Deadline(budget)
    gen = Gen(cfg, cfg.rng("oracle"), Constants.of_program(p))
    empty = DataFrame(p.columns)
    done = 0
    for i in range(cfg.trials):
        if deadline.passed():
            break
        # every fourth pair has an empty side, so Phi1 is exercised at program level
        d1 = empty if i % 4 == 1 else gen.dataframe(p.columns)
        d2 = empty if i % 4 == 3 else gen.dataframe(p.columns)
        if _merge_violation(p, merge, d1, d2) is not None:
            return _finish_oracle(p, merge, (d1, d2)), done
        done += 1
    return None, done


def _finish_oracle(p: Program, merge: Lam, pair: tuple[DataFrame, DataFrame]) -> Counterexample:
    def candidates(q: tuple[DataFrame, DataFrame]):
        for i, d in enumerate(q):
            for rows in shrink_rows(d.rows):
                yield q[:i] + (d.with_rows(rows),) + q[i + 1:]

    small = greedy_shrink(pair, candidates, lambda q: _merge_violation(p, merge, *q) is not None)
    found = _merge_violation(p, merge, *small)
    assert found is not None
    return Counterexample(ORACLE, (("D1", small[0]), ("D2", small[1])), found[0], found[1])


def replay_verdict(v: Verdict, p: Program) -> bool:
    """Re-check a REFUTED verdict's counterexample against the interpreter."""
    assert v.counterexample is not None
    return replay(v.counterexample, program=p)


__all__ = [
    "HOMOMORPHIC",
    "REFUTED",
    "UNKNOWN",
    "Verdict",
    "is_homomorphism",
    "lift_rules",
    "oracle_check",
    "replay_verdict",
]
