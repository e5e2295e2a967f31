"""The bundled benchmark programs and hand-written reference merges."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .frontend import check_lambda, load_program, parse
from .syntax import Lam, Program


@dataclass(frozen=True)
class Benchmark:
    name: str
    homomorphic: bool
    summary: str

    @property
    def path(self) -> str:
        return str(resources.files("homcalc.corpus") / f"{self.name}.hc")

    def text(self) -> str:
        return (resources.files("homcalc.corpus") / f"{self.name}.hc").read_text("utf-8")

    def program(self) -> Program:
        return load_program(self.text())


BENCHMARKS = (
    Benchmark("bid_aggregator", True, "max bid, high-bid count, per-item counts after filtering"),
    Benchmark("sum_frequency", True, "running sum with a frequency map"),
    Benchmark("avg_temperature", True, "last key with sum and count"),
    Benchmark("count", True, "row count"),
    Benchmark("latest_flag", True, "seen flag with the latest row"),
    Benchmark("max_bid", True, "maximum"),
    Benchmark("high_bid_count", True, "guarded counter"),
    Benchmark("item_counts", True, "per-key counts"),
    Benchmark("clickstream", False, "checkout counter copies the running count"),
    Benchmark("reset_on_match", False, "resets when the row equals the state"),
    Benchmark("stuck_empty", False, "never leaves the empty list"),
    Benchmark("seeded_list", False, "first row is replaced by a constant"),
)

BY_NAME = {b.name: b for b in BENCHMARKS}


def benchmark(name: str) -> Benchmark:
    return BY_NAME[name]


def _lambda(text: str) -> Lam:
    e = parse(text)
    assert isinstance(e, Lam)
    return check_lambda(e, {})


# Merges written by hand, used to audit the synthesized ones.
BID_MERGE = _lambda("""
(lambda ((a (tuple float int (map int int))) (b (tuple float int (map int int))))
  (tuple
    (max (proj 1 a) (proj 1 b))
    (+ (proj 2 a) (proj 2 b))
    (fold (lambda ((acc (map int int)) (k int) (v int))
            (update acc k (+ v (getOrElse (proj 3 a) k (int 0)))))
          (proj 3 a) (proj 3 b))))
""")

AVG_MERGE_BUGGY = _lambda("""
(lambda ((b1 (tuple str int int)) (b2 (tuple str int int)))
  (tuple (proj 1 b2) (+ (proj 2 b1) (proj 2 b2)) (+ (proj 3 b1) (proj 3 b2))))
""")

AVG_MERGE_FIXED = _lambda("""
(lambda ((b1 (tuple str int int)) (b2 (tuple str int int)))
  (tuple (ite (> (proj 3 b2) (int 0)) (proj 1 b2) (proj 1 b1))
    (+ (proj 2 b1) (proj 2 b2)) (+ (proj 3 b1) (proj 3 b2))))
""")
