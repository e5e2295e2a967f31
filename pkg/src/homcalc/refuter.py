"""Property-based refutation of homomorphism and of normalizer existence.

Every counterexample is shrunk and then replayed through the interpreter
before it is returned.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Union

from .core import DataFrame, EvalError, Value, concat_df
from .gen import Constants, Gen, GenConfig, greedy_shrink, shrink_rows, shrink_value
from .interp import apply_fn, init_value, run_program
from .syntax import Const, Lam, Program

__all__ = [
    "Counterexample",
    "GenConfig",
    "refute_hom",
    "refute_norm",
    "replay",
]

Witness = Union[Value, DataFrame]

HOM = "HomRefute"
NORM1 = "NormRefute1"
NORM2 = "NormRefute2"


@dataclass(frozen=True)
class Counterexample:
    kind: str
    witnesses: tuple[tuple[str, Witness], ...]
    lhs: Value
    rhs: Value

    def get(self, name: str) -> Witness:
        return dict(self.witnesses)[name]

    def describe(self) -> str:
        ws = ", ".join(f"{n} = {w}" for n, w in self.witnesses)
        return f"{self.kind}: {ws}; {self.lhs} != {self.rhs}"


class Deadline:
    def __init__(self, seconds: float | None):
        self.end = None if seconds is None else time.monotonic() + seconds

    def passed(self) -> bool:
        return self.end is not None and time.monotonic() > self.end


def _safe(fn: Callable[[], Value]) -> Value | None:
    try:
        return fn()
    except EvalError:
        return None


# ----------------------------------------------------- homomorphism


def _hom_violation(p: Program, d1: DataFrame, d1p: DataFrame, d2: DataFrame, d2p: DataFrame):
    """(lhs, rhs) when the quadruple violates function consistency, else None."""
    try:
        if run_program(p, d1) != run_program(p, d1p):
            return None
        if run_program(p, d2) != run_program(p, d2p):
            return None
        lhs = run_program(p, concat_df(d1, d2))
        rhs = run_program(p, concat_df(d1p, d2p))
    except EvalError:
        return None
    return (lhs, rhs) if lhs != rhs else None


def refute_hom(p: Program, cfg: GenConfig, budget: float | None = None) -> Counterexample | None:
    """Look for D1,D1',D2,D2' with P(D1)=P(D1'), P(D2)=P(D2') but
    P(D1++D2) != P(D1'++D2').

    Random frames are bucketed by their result so that equal-result pairs,
    which uniform sampling almost never produces, are available directly.
    """
    deadline = Deadline(budget)
    gen = Gen(cfg, cfg.rng("hom"), Constants.of_program(p))
    empty = DataFrame(p.columns)
    pool: list[DataFrame] = [empty]
    seen_rows = {()}
    for _ in range(cfg.trials):
        d = gen.dataframe(p.columns)
        if d.rows not in seen_rows:
            seen_rows.add(d.rows)
            pool.append(d)
    buckets: dict[Value, list[DataFrame]] = {}
    outputs: list[tuple[DataFrame, Value]] = []
    for d in pool:
        if deadline.passed():
            break
        out = _safe(lambda: run_program(p, d))
        if out is None:
            continue
        buckets.setdefault(out, []).append(d)
        outputs.append((d, out))
    pairs: list[tuple[DataFrame, DataFrame]] = []
    for members in buckets.values():
        for other in members[1:4]:
            pairs.append((members[0], other))
    if not pairs:
        return None
    frames = [d for d, _ in outputs]
    rng = cfg.rng("hom-pairs")
    for i in range(cfg.trials):
        if deadline.passed():
            return None
        x, xp = pairs[i % len(pairs)]
        y = rng.choice(frames)
        quads = [(x, xp, y, y), (y, y, x, xp)]
        if i % 3 == 2:
            z, zp = rng.choice(pairs)
            quads.append((x, xp, z, zp))
        for q in quads:
            if _hom_violation(p, *q):
                return _finish_hom(p, q)
    return None


def _finish_hom(p: Program, quad: tuple[DataFrame, ...]) -> Counterexample:
    def candidates(q: tuple[DataFrame, ...]):
        # equal sides of a pair shrink together, otherwise P(D) = P(D') breaks
        for i in (0, 2):
            if q[i] == q[i + 1]:
                for rows in shrink_rows(q[i].rows):
                    nd = q[i].with_rows(rows)
                    yield q[:i] + (nd, nd) + q[i + 2:]
        for i, d in enumerate(q):
            for rows in shrink_rows(d.rows):
                yield q[:i] + (d.with_rows(rows),) + q[i + 1:]

    small = greedy_shrink(quad, candidates, lambda q: _hom_violation(p, *q) is not None)
    found = _hom_violation(p, *small)
    assert found is not None
    names = ("D1", "D1'", "D2", "D2'")
    ce = Counterexample(HOM, tuple(zip(names, small)), found[0], found[1])
    if not replay(ce, program=p):
        raise AssertionError("homomorphism counterexample failed to replay")
    return ce


# -------------------------------------------------------- normalizers


def refute_norm(f: Lam, init: Value, cfg: GenConfig, budget: float | None = None,
                consts: Constants | None = None) -> Counterexample | None:
    """Search for violations of the two necessary conditions:
    f(I,x) = I but f(s,x) != s, and f(I,x) = f(I,x') but f(s,x) != f(s,x')."""
    deadline = Deadline(budget)
    state_t, row_t = f.params[0][1], f.params[1][1]
    gen = Gen(cfg, cfg.rng("norm"), consts if consts is not None else Constants.harvest([f, Const(init, state_t)]))
    by_image: dict[Value, Value] = {}
    states = [gen.value(state_t) for _ in range(8)]

    def app(s: Value, x: Value) -> Value | None:
        return _safe(lambda: apply_fn(f, (s, x)))

    for i in range(cfg.trials):
        if deadline.passed():
            return None
        x = gen.value(row_t)
        fx = app(init, x)
        if fx is None:
            continue
        s = gen.value(state_t)
        states[i % len(states)] = s
        if fx == init:
            for cand in (s, *states):
                out = app(cand, x)
                if out is not None and out != cand:
                    return _finish_norm1(f, init, cand, x)
        prev = by_image.get(fx)
        if prev is None:
            by_image[fx] = x
        elif prev != x:
            for cand in (s, *states):
                a, b = app(cand, x), app(cand, prev)
                if a is not None and b is not None and a != b:
                    return _finish_norm2(f, init, cand, x, prev)
    return None


def _norm1(f: Lam, init: Value, s: Value, x: Value):
    try:
        if apply_fn(f, (init, x)) != init:
            return None
        out = apply_fn(f, (s, x))
    except EvalError:
        return None
    return (out, s) if out != s else None


def _norm2(f: Lam, init: Value, s: Value, x: Value, xp: Value):
    try:
        if apply_fn(f, (init, x)) != apply_fn(f, (init, xp)):
            return None
        a, b = apply_fn(f, (s, x)), apply_fn(f, (s, xp))
    except EvalError:
        return None
    return (a, b) if a != b else None


def _tuple_candidates(t: tuple[Value, ...]):
    for i, v in enumerate(t):
        for c in shrink_value(v):
            yield t[:i] + (c,) + t[i + 1:]


def _finish_norm1(f: Lam, init: Value, s: Value, x: Value) -> Counterexample:
    s, x = greedy_shrink((s, x), _tuple_candidates, lambda q: _norm1(f, init, *q) is not None)
    lhs, rhs = _norm1(f, init, s, x)  # type: ignore[misc]
    ce = Counterexample(NORM1, (("s", s), ("x", x)), lhs, rhs)
    if not replay(ce, f=f, init=init):
        raise AssertionError("counterexample failed to replay")
    return ce


def _finish_norm2(f: Lam, init: Value, s: Value, x: Value, xp: Value) -> Counterexample:
    s, x, xp = greedy_shrink((s, x, xp), _tuple_candidates, lambda q: _norm2(f, init, *q) is not None)
    lhs, rhs = _norm2(f, init, s, x, xp)  # type: ignore[misc]
    ce = Counterexample(NORM2, (("s", s), ("x", x), ("x'", xp)), lhs, rhs)
    if not replay(ce, f=f, init=init):
        raise AssertionError("counterexample failed to replay")
    return ce


# ------------------------------------------------------------ replay


def replay(ce: Counterexample, program: Program | None = None, f: Lam | None = None,
           init: Value | None = None) -> bool:
    """Re-run the witnesses and confirm the claimed inequality."""
    w = dict(ce.witnesses)
    if ce.kind == HOM:
        assert program is not None
        found = _hom_violation(program, w["D1"], w["D1'"], w["D2"], w["D2'"])  # type: ignore[arg-type]
        return found is not None and found == (ce.lhs, ce.rhs)
    if program is not None and f is None:
        f, init = program.f, init_value(program)
    assert f is not None and init is not None
    if ce.kind == NORM1:
        found = _norm1(f, init, w["s"], w["x"])  # type: ignore[arg-type]
    elif ce.kind == NORM2:
        found = _norm2(f, init, w["s"], w["x"], w["x'"])  # type: ignore[arg-type]
    else:
        return False
    return found is not None and found == (ce.lhs, ce.rhs)
