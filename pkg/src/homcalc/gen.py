"""Seeded random values, dataframes and shrinking."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .core import (
    FALSE,
    INT_MAX,
    INT_MIN,
    NULL,
    BoolT,
    BoolV,
    DataFrame,
    FloatT,
    FloatV,
    IntT,
    IntV,
    ListT,
    ListV,
    MapT,
    MapV,
    NullT,
    SetT,
    SetV,
    StrT,
    StrV,
    TupleT,
    TupleV,
    Type,
    Value,
    make_map,
    make_set,
)
from .syntax import Const, Expr, Program, walk


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    trials: int = 1000
    max_rows: int = 6
    int_lo: int = -8
    int_hi: int = 8
    # floats are k / float_denom for integer k with |k| <= float_span
    float_denom: int = 4
    float_span: int = 32
    alphabet: str = "abcd"
    max_str: int = 2
    max_coll: int = 4

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.int_lo > self.int_hi or self.max_rows < 0 or not self.alphabet:
            raise ValueError("generator ranges must be non-empty")

    def rng(self, label: str) -> random.Random:
        """Independent stream per purpose, derived from the seed."""
        return random.Random(f"{self.seed}/{label}")


@dataclass(frozen=True)
class Constants:
    """Literals found in a program; generators mix them in so guarded
    branches such as ``x > 1000`` actually get exercised."""

    ints: tuple[int, ...] = ()
    floats: tuple[float, ...] = ()
    strs: tuple[str, ...] = ()

    @staticmethod
    def harvest(exprs: Iterable[Expr]) -> Constants:
        ints: set[int] = set()
        floats: set[float] = set()
        strs: set[str] = set()
        for e in exprs:
            for n in walk(e):
                if not isinstance(n, Const):
                    continue
                for v in _scalars(n.value):
                    if isinstance(v, IntV):
                        ints.update(c for c in (v.v - 1, v.v, v.v + 1) if INT_MIN <= c <= INT_MAX)
                    elif isinstance(v, FloatV) and math.isfinite(v.v):
                        floats.update((v.v - 1.0, v.v, v.v + 1.0))
                    elif isinstance(v, StrV):
                        strs.add(v.v)
        return Constants(tuple(sorted(ints)), tuple(sorted(floats)), tuple(sorted(strs)))

    @staticmethod
    def of_program(p: Program) -> Constants:
        exprs: list[Expr] = [p.f, p.init]
        for s in p.pipeline:
            exprs.append(getattr(s, "pred", None) or getattr(s, "fn"))
        return Constants.harvest(exprs)


def _scalars(v: Value) -> Iterator[Value]:
    if isinstance(v, (TupleV, ListV, SetV)):
        for i in v.items:
            yield from _scalars(i)
    elif isinstance(v, MapV):
        for k, x in v.entries:
            yield from _scalars(k)
            yield from _scalars(x)
    else:
        yield v


@dataclass
class Gen:
    cfg: GenConfig
    rng: random.Random
    consts: Constants = field(default_factory=Constants)
    p_const: float = 0.25

    def value(self, t: Type) -> Value:
        r = self.rng
        if isinstance(t, IntT):
            if self.consts.ints and r.random() < self.p_const:
                return IntV(r.choice(self.consts.ints))
            return IntV(r.randint(self.cfg.int_lo, self.cfg.int_hi))
        if isinstance(t, BoolT):
            return BoolV(r.random() < 0.5)
        if isinstance(t, FloatT):
            if self.consts.floats and r.random() < self.p_const:
                return FloatV(r.choice(self.consts.floats))
            k = r.randint(-self.cfg.float_span, self.cfg.float_span)
            return FloatV(k / self.cfg.float_denom)
        if isinstance(t, StrT):
            if self.consts.strs and r.random() < self.p_const + 0.1:
                return StrV(r.choice(self.consts.strs))
            n = r.randint(0, self.cfg.max_str)
            return StrV("".join(r.choice(self.cfg.alphabet) for _ in range(n)))
        if isinstance(t, NullT):
            return NULL
        if isinstance(t, TupleT):
            return TupleV(tuple(self.value(e) for e in t.elems))
        n = r.randint(0, self.cfg.max_coll)
        if isinstance(t, ListT):
            return ListV(tuple(self.value(t.elem) for _ in range(n)))
        if isinstance(t, SetT):
            return make_set(self.value(t.elem) for _ in range(n))
        if isinstance(t, MapT):
            return make_map((self.value(t.key), self.value(t.val)) for _ in range(n))
        raise ValueError(f"cannot generate values of type {t}")

    def row_count(self) -> int:
        # short frames dominate so that result collisions are common
        m = self.cfg.max_rows
        if m == 0:
            return 0
        return min(int(self.rng.expovariate(0.6)), m)

    def rows(self, t: Type, n: int | None = None) -> tuple[Value, ...]:
        k = self.row_count() if n is None else n
        return tuple(self.value(t) for _ in range(k))

    def dataframe(self, columns: tuple[tuple[str, Type], ...], n: int | None = None) -> DataFrame:
        d = DataFrame(columns)
        return d.with_rows(self.rows(d.row_type, n))


# ----------------------------------------------------------- shrinking


def shrink_value(v: Value) -> list[Value]:
    """Candidate simplifications of ``v``, simplest first."""
    out: list[Value] = []
    if isinstance(v, IntV):
        x = v.v
        if x != 0:
            out.append(IntV(0))
            half = int(x / 2)
            if half not in (0, x):
                out.append(IntV(half))
            step = x - 1 if x > 0 else x + 1
            if step not in (0, half):
                out.append(IntV(step))
    elif isinstance(v, BoolV):
        if v.v:
            out.append(FALSE)
    elif isinstance(v, FloatV):
        x = v.v
        if x != 0.0 or math.copysign(1.0, x) < 0:
            out.append(FloatV(0.0))
            if math.isfinite(x) and float(math.trunc(x)) != x:
                out.append(FloatV(float(math.trunc(x))))
            if math.isfinite(x) and abs(x) >= 1.0:
                out.append(FloatV(float(int(x / 2))))
    elif isinstance(v, StrV):
        if v.v:
            out.append(StrV(""))
            if len(v.v) > 1:
                out.append(StrV(v.v[:-1]))
    elif isinstance(v, TupleV):
        for i, item in enumerate(v.items):
            for c in shrink_value(item):
                out.append(TupleV(v.items[:i] + (c,) + v.items[i + 1:]))
    elif isinstance(v, (ListV, SetV)):
        items = v.items
        rebuild = ListV if isinstance(v, ListV) else (lambda xs: make_set(xs))
        for i in range(len(items)):
            out.append(rebuild(items[:i] + items[i + 1:]))
        for i, item in enumerate(items):
            for c in shrink_value(item):
                out.append(rebuild(items[:i] + (c,) + items[i + 1:]))
    elif isinstance(v, MapV):
        es = v.entries
        for i in range(len(es)):
            out.append(MapV(es[:i] + es[i + 1:]))
        for i, (k, x) in enumerate(es):
            for c in shrink_value(x):
                out.append(MapV(es[:i] + ((k, c),) + es[i + 1:]))
            for c in shrink_value(k):
                out.append(make_map(es[:i] + ((c, x),) + es[i + 1:]))
    return [c for c in out if c != v]


def shrink_rows(rows: tuple[Value, ...]) -> list[tuple[Value, ...]]:
    out = [rows[:i] + rows[i + 1:] for i in range(len(rows))]
    for i, r in enumerate(rows):
        for c in shrink_value(r):
            out.append(rows[:i] + (c,) + rows[i + 1:])
    return out


def greedy_shrink(start: tuple, candidates, holds, max_steps: int = 400) -> tuple:
    """Repeatedly move to the first candidate on which ``holds`` is true."""
    cur = start
    steps = 0
    progress = True
    while progress and steps < max_steps:
        progress = False
        for cand in candidates(cur):
            steps += 1
            if steps >= max_steps:
                break
            if holds(cand):
                cur = cand
                progress = True
                break
    return cur
