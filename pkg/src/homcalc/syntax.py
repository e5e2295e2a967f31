"""Abstract syntax of the aggregation DSL.

Every node carries an optional ``ty`` slot filled in by the type checker.
It does not take part in equality, so a checked tree compares equal to the
tree it came from.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Optional

from .core import DFT, TupleT, Type, Value

BUILTINS = (
    "+", "-", "*", "/", "<", ">", "=", "and", "or", "not",
    "max", "min", "concat", "len", "get", "contains", "fill",
)

ARITY = {
    "+": 2, "-": 2, "*": 2, "/": 2, "<": 2, ">": 2, "=": 2,
    "and": 2, "or": 2, "not": 1, "max": 2, "min": 2,
    "concat": 2, "len": 1, "get": 2, "contains": 2, "fill": 2,
}


@dataclass(frozen=True)
class Expr:
    def children(self) -> tuple[Expr, ...]:
        return ()


def _ty() -> Optional[Type]:
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Const(Expr):
    value: Value
    type_: Type
    ty: Optional[Type] = _ty()


@dataclass(frozen=True)
class Default(Expr):
    type_: Type
    ty: Optional[Type] = _ty()


@dataclass(frozen=True)
class Var(Expr):
    name: str
    ty: Optional[Type] = _ty()


@dataclass(frozen=True)
class Lam(Expr):
    """A lambda; also the representation of named functions (``Func``)."""

    params: tuple[tuple[str, Type], ...]
    body: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.body,)

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.params)


Func = Lam


@dataclass(frozen=True)
class App(Expr):
    """Application of a builtin operator."""

    op: str
    args: tuple[Expr, ...]
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return self.args


@dataclass(frozen=True)
class Call(Expr):
    """Immediate application of a lambda."""

    fn: Lam
    args: tuple[Expr, ...]
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.fn, *self.args)


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    els: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.cond, self.then, self.els)


@dataclass(frozen=True)
class Fold(Expr):
    fn: Lam
    init: Expr
    coll: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.fn, self.init, self.coll)


@dataclass(frozen=True)
class TupleE(Expr):
    items: tuple[Expr, ...]
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return self.items


@dataclass(frozen=True)
class Proj(Expr):
    """1-based tuple projection."""

    index: int
    expr: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.expr,)


@dataclass(frozen=True)
class MapEmpty(Expr):
    key: Type
    val: Type
    ty: Optional[Type] = _ty()


@dataclass(frozen=True)
class Update(Expr):
    m: Expr
    k: Expr
    v: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.m, self.k, self.v)


@dataclass(frozen=True)
class ListEmpty(Expr):
    elem: Type
    ty: Optional[Type] = _ty()


@dataclass(frozen=True)
class Append(Expr):
    lst: Expr
    elem: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.lst, self.elem)


@dataclass(frozen=True)
class SetEmpty(Expr):
    elem: Type
    ty: Optional[Type] = _ty()


@dataclass(frozen=True)
class Insert(Expr):
    s: Expr
    elem: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.s, self.elem)


@dataclass(frozen=True)
class Union(Expr):
    a: Expr
    b: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.a, self.b)


@dataclass(frozen=True)
class OuterJoin(Expr):
    m1: Expr
    m2: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.m1, self.m2)


@dataclass(frozen=True)
class Convert(Expr):
    """Collection conversion; ``target`` is "list", "map" or "set"."""

    target: str
    coll: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.coll,)


@dataclass(frozen=True)
class MapHO(Expr):
    fn: Lam
    coll: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.fn, self.coll)


@dataclass(frozen=True)
class FilterHO(Expr):
    pred: Lam
    coll: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.pred, self.coll)


@dataclass(frozen=True)
class Zip(Expr):
    a: Expr
    b: Expr
    ty: Optional[Type] = _ty()

    def children(self) -> tuple[Expr, ...]:
        return (self.a, self.b)


# ------------------------------------------------------------- programs


@dataclass(frozen=True)
class Select:
    pred: Lam


@dataclass(frozen=True)
class Project:
    fn: Lam


@dataclass(frozen=True)
class Program:
    input_name: str
    columns: tuple[tuple[str, Type], ...]
    pipeline: tuple[Select | Project, ...]
    f: Lam
    init: Expr

    @property
    def input_type(self) -> DFT:
        if len(self.columns) == 1:
            return DFT(self.columns[0][1])
        return DFT(TupleT(tuple(t for _, t in self.columns)))

    @property
    def state_type(self) -> Type:
        return self.f.params[0][1]

    @property
    def row_type(self) -> Type:
        return self.f.params[1][1]


# ------------------------------------------------------------ utilities


def walk(e: Expr) -> Iterator[Expr]:
    yield e
    for c in e.children():
        yield from walk(c)


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Lam):
        return free_vars(e.body) - frozenset(e.param_names)
    out: frozenset[str] = frozenset()
    for c in e.children():
        out |= free_vars(c)
    return out


def all_names(e: Expr) -> set[str]:
    names: set[str] = set()
    for n in walk(e):
        if isinstance(n, Var):
            names.add(n.name)
        elif isinstance(n, Lam):
            names.update(n.param_names)
    return names


class NameSupply:
    """Fresh-name generator that avoids a given set of taken names."""

    def __init__(self, taken: set[str] | None = None):
        self.taken = set(taken or ())

    def fresh(self, base: str) -> str:
        if base not in self.taken:
            self.taken.add(base)
            return base
        i = 1
        while f"{base}{i}" in self.taken:
            i += 1
        name = f"{base}{i}"
        self.taken.add(name)
        return name


def map_children(e: Expr, fn: Callable[[Expr], Expr]) -> Expr:
    """Rebuild ``e`` with ``fn`` applied to each direct child."""
    if isinstance(e, Lam):
        return replace(e, body=fn(e.body), ty=None)
    if isinstance(e, App):
        return App(e.op, tuple(fn(a) for a in e.args))
    if isinstance(e, Call):
        new_fn = fn(e.fn)
        assert isinstance(new_fn, Lam)
        return Call(new_fn, tuple(fn(a) for a in e.args))
    if isinstance(e, Ite):
        return Ite(fn(e.cond), fn(e.then), fn(e.els))
    if isinstance(e, Fold):
        return Fold(_lam(fn(e.fn)), fn(e.init), fn(e.coll))
    if isinstance(e, TupleE):
        return TupleE(tuple(fn(i) for i in e.items))
    if isinstance(e, Proj):
        return Proj(e.index, fn(e.expr))
    if isinstance(e, Update):
        return Update(fn(e.m), fn(e.k), fn(e.v))
    if isinstance(e, Append):
        return Append(fn(e.lst), fn(e.elem))
    if isinstance(e, Insert):
        return Insert(fn(e.s), fn(e.elem))
    if isinstance(e, Union):
        return Union(fn(e.a), fn(e.b))
    if isinstance(e, OuterJoin):
        return OuterJoin(fn(e.m1), fn(e.m2))
    if isinstance(e, Convert):
        return Convert(e.target, fn(e.coll))
    if isinstance(e, MapHO):
        return MapHO(_lam(fn(e.fn)), fn(e.coll))
    if isinstance(e, FilterHO):
        return FilterHO(_lam(fn(e.pred)), fn(e.coll))
    if isinstance(e, Zip):
        return Zip(fn(e.a), fn(e.b))
    return e


def _lam(e: Expr) -> Lam:
    assert isinstance(e, Lam)
    return e


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Capture-avoiding substitution of free variables."""
    if not mapping:
        return e
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Lam):
        inner = {k: v for k, v in mapping.items() if k not in e.param_names}
        if not inner:
            return e
        incoming: set[str] = set()
        for v in inner.values():
            incoming |= free_vars(v)
        params = list(e.params)
        body = e.body
        clash = [n for n in e.param_names if n in incoming]
        if clash:
            supply = NameSupply(all_names(e) | incoming | set(inner))
            renames: dict[str, Expr] = {}
            for i, (n, t) in enumerate(params):
                if n in clash:
                    new = supply.fresh(n)
                    renames[n] = Var(new)
                    params[i] = (new, t)
            body = substitute(body, renames)
        return Lam(tuple(params), substitute(body, inner))
    return map_children(e, lambda c: substitute(c, mapping))


def beta(fn: Lam, args: tuple[Expr, ...]) -> Expr:
    """Inline ``fn`` applied to ``args``."""
    return substitute(fn.body, dict(zip(fn.param_names, args)))


def size(e: Expr) -> int:
    return sum(1 for _ in walk(e))
