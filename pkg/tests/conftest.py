from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from homcalc.benchmarks import BENCHMARKS
from homcalc.core import FALSE, INT_MAX, INT_MIN, EvalError, IntV, Value, lift
from homcalc.decomposer import convert_back, decompose
from homcalc.frontend import check_lambda, parse, typecheck
from homcalc.gen import Constants, Gen, GenConfig
from homcalc.interp import apply_fn, eval_expr
from homcalc.synth import reachable_states
from homcalc.syntax import Expr, Lam

settings.register_profile("homcalc", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("homcalc")


def lam(text: str) -> Lam:
    """Parse and type-check a closed lambda."""
    e = parse(text)
    assert isinstance(e, Lam)
    return check_lambda(e, {})


def expr(text: str) -> Expr:
    e = parse(text)
    assert isinstance(e, Expr)
    out = typecheck(e)
    assert isinstance(out, Expr)
    return out


def ev(text: str) -> Value:
    return eval_expr(expr(text))


def _outcome(f: Lam, s: Value, x: Value) -> Value | str:
    try:
        return apply_fn(f, (s, x))
    except EvalError as e:
        return f"error:{e.kind}"


def round_trip_mismatches(f: Lam, init: Value, seed: int, pairs: int) -> list[tuple[Value, Value]]:
    """(state, row) pairs where f and its canonical form disagree; states
    mix random values with ones reachable from ``init``."""
    g = convert_back(decompose(f))
    assert isinstance(g, Lam)
    cfg = GenConfig(seed=seed)
    consts = Constants.harvest([f])
    gen = Gen(cfg, cfg.rng("round-trip"), consts)
    st_t, row_t = f.params[0][1], f.params[1][1]
    reach = reachable_states(f, init, cfg, consts)
    bad = []
    for i in range(pairs):
        s = reach[i % len(reach)] if i % 2 else gen.value(st_t)
        x = gen.value(row_t)
        if _outcome(f, s, x) != _outcome(g, s, x):
            bad.append((s, x))
    return bad


@pytest.fixture(scope="session")
def corpus():
    return {b.name: b.program() for b in BENCHMARKS}


# (name, accumulator, initial state, a known merge). Every known merge has
# grammar size at most 7; map-merge is one production of cost 2.
PLANTED = [
    ("max", "(lambda ((s int) (x int)) (max s x))", IntV(INT_MIN),
     "(lambda ((a int) (b int)) (max a b))"),
    ("sum", "(lambda ((s int) (x int)) (+ s x))", IntV(0),
     "(lambda ((a int) (b int)) (+ a b))"),
    ("guarded-count", "(lambda ((s int) (x float)) (ite (> x (float 1000.0)) (+ s (int 1)) s))", IntV(0),
     "(lambda ((a int) (b int)) (+ a b))"),
    ("min", "(lambda ((s int) (x int)) (min s x))", IntV(INT_MAX),
     "(lambda ((a int) (b int)) (min a b))"),
    ("any-positive", "(lambda ((s bool) (x int)) (or s (> x (int 0))))", FALSE,
     "(lambda ((a bool) (b bool)) (or a b))"),
    ("select-newer", "(lambda ((s (tuple bool int)) (x int)) (tuple (bool true) x))", lift((False, 0)),
     "(lambda ((a (tuple bool int)) (b (tuple bool int))) (ite (proj 1 b) b a))"),
    ("last-nonempty", "(lambda ((s str) (x str)) (ite (= x (str \"\")) s x))", lift(""),
     "(lambda ((a str) (b str)) (ite (= b (str \"\")) a b))"),
    ("last-positive", "(lambda ((s int) (x int)) (ite (> x (int 0)) x s))", IntV(0),
     "(lambda ((a int) (b int)) (ite (> b (int 0)) b a))"),
    ("seen-key", "(lambda ((s (tuple str int)) (x str)) (tuple x (int 1)))", lift(("", 0)),
     "(lambda ((a (tuple str int)) (b (tuple str int))) (ite (< (int 0) (proj 2 b)) b a))"),
    ("distinct", "(lambda ((s (set int)) (x int)) (insert s x))", lift(set()),
     "(lambda ((a (set int)) (b (set int))) (union a b))"),
    ("per-key-count", "(lambda ((s (map int int)) (x int)) (update s x (+ (getOrElse s x (int 0)) (int 1))))",
     lift({}),
     "(lambda ((a (map int int)) (b (map int int))) (map (lambda ((k int) (p (tuple int int)))"
     " (+ (fill (proj 1 p) (int 0)) (fill (proj 2 p) (int 0)))) (outer-join a b)))"),
]
