"""Type-directed decomposition of accumulator bodies.

``decompose`` rewrites the body of ``λs.λx.E`` into a tree of decomposed
expressions, splitting tuple states into independent groups and turning
element-wise collection updates into iterator form. ``convert_back`` maps
the tree to an ordinary expression in the canonical shape expected by the
product and collection normalizer rules.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import BOOL, TRUE, ListT, MapT, SetT, TupleT, Type, default_value
from .frontend import check_expr, show
from .syntax import (
    App,
    Const,
    Default,
    Expr,
    FilterHO,
    Ite,
    Lam,
    MapHO,
    NameSupply,
    Proj,
    TupleE,
    Update,
    Var,
    all_names,
    beta,
    free_vars,
    map_children,
    substitute,
    walk,
)

Binder = tuple[str, Type]
TOP = Const(TRUE, BOOL)


@dataclass(frozen=True)
class DecompExpr:
    pass


@dataclass(frozen=True)
class Plain(DecompExpr):
    expr: Expr


@dataclass(frozen=True)
class FnComp(DecompExpr):
    """``λbinder. body`` applied to ``destructor(state)``."""

    binder: Binder
    body: DecompExpr
    destructor: Lam


@dataclass(frozen=True)
class TupleD(DecompExpr):
    """Tuple of parts. ``slots[i]`` lists the output components produced by
    ``parts[i]``; a part covering several slots yields a tuple."""

    parts: tuple[DecompExpr, ...]
    slots: Optional[tuple[tuple[int, ...], ...]] = None

    def slot_list(self) -> tuple[tuple[int, ...], ...]:
        if self.slots is not None:
            return self.slots
        return tuple((i,) for i in range(1, len(self.parts) + 1))


@dataclass(frozen=True)
class Touch:
    """Before iterating, add ``key -> default`` when the key is absent."""

    key: Expr
    default: Expr


@dataclass(frozen=True)
class CollIterBound(DecompExpr):
    """``map(λbinders. body, filter(λbinders. guard, source))``."""

    body: DecompExpr
    guard: Expr
    binders: tuple[Binder, ...]
    source: Expr
    touch: Optional[Touch] = None


@dataclass(frozen=True)
class CollIterFree(DecompExpr):
    """Iterator whose source is ``destructor(state)``."""

    body: DecompExpr
    guard: Expr
    binders: tuple[Binder, ...]
    destructor: Lam
    touch: Optional[Touch] = None


@dataclass(frozen=True)
class Decomposition:
    state: Binder
    row: Binder
    root: DecompExpr
    rules: tuple[str, ...] = ()

    @property
    def decomposable(self) -> bool:
        return not isinstance(self.root, Plain)


@dataclass
class _Ctx:
    row: str
    env: dict[str, Type]
    names: NameSupply
    rules: list[str] = field(default_factory=list)

    def typed(self, e: Expr, extra: dict[str, Type] | None = None) -> Expr:
        if e.ty is not None and _fully_typed(e):
            return e
        env = dict(self.env)
        if extra:
            env.update(extra)
        return check_expr(e, env)


def _fully_typed(e: Expr) -> bool:
    return all(n.ty is not None for n in walk(e))


def identity(name: str, t: Type) -> Lam:
    return Lam(((name, t),), Var(name))


def is_identity(d: Lam) -> bool:
    return isinstance(d.body, Var) and d.body.name == d.params[0][0]


# ------------------------------------------------------------ decompose


def decompose(f: Lam) -> Decomposition:
    """Decompose a type-checked accumulator ``λs.λx.E``."""
    (s, st), (x, xt) = f.params
    names = NameSupply(all_names(f))
    ctx = _Ctx(x, {s: st, x: xt}, names)
    body = ctx.typed(f.body)
    omega = decompose_expr(body, ctx)
    root = simplify_fn((s, st), identity(s, st), omega, ctx)
    if isinstance(root, FnComp) and is_identity(root.destructor):
        ctx.rules.append("Plain")
        root = Plain(body)
    return Decomposition((s, st), (x, xt), root, tuple(ctx.rules))


def decompose_expr(e: Expr, ctx: _Ctx) -> DecompExpr:
    e = ctx.typed(e)
    if isinstance(e, TupleE):
        ctx.rules.append("Tuple")
        return TupleD(tuple(decompose_expr(i, ctx) for i in e.items))
    if isinstance(e, Ite) and isinstance(e.ty, TupleT) and free_vars(e.cond) <= {ctx.row}:
        ctx.rules.append("Ite-Split")
        n = len(e.ty.elems)
        parts = []
        for i in range(1, n + 1):
            parts.append(Ite(e.cond, _component(e.then, i), _component(e.els, i)))
        return TupleD(tuple(decompose_expr(p, ctx) for p in parts))
    it = _iterator(e, ctx)
    if it is not None:
        body, guard, binders, source, touch = it
        extra = dict(binders)
        inner = ctx.typed(body, extra)
        saved = dict(ctx.env)
        ctx.env.update(extra)
        try:
            d_body = decompose_expr(inner, ctx)
        finally:
            ctx.env = saved
        ctx.rules.append("Lam-Base" if isinstance(d_body, Plain) else "Lam-Ind")
        return CollIterBound(d_body, guard, binders, source, touch)
    ctx.rules.append("BaseType" if not isinstance(e.ty, (TupleT, ListT, MapT, SetT)) else "Expr")
    return Plain(e)


def _component(e: Expr, i: int) -> Expr:
    if isinstance(e, TupleE):
        return e.items[i - 1]
    return Proj(i, e)


def _elem_binders(t: Type, names: NameSupply, hint: tuple[str, ...] = ()) -> tuple[Binder, ...]:
    if isinstance(t, MapT):
        k = names.fresh(hint[0] if len(hint) == 2 else "k")
        v = names.fresh(hint[1] if len(hint) == 2 else "v")
        return ((k, t.key), (v, t.val))
    if isinstance(t, (ListT, SetT)):
        return ((names.fresh(hint[0] if len(hint) == 1 else "e"), t.elem),)
    raise TypeError(f"not a collection: {t}")


def _touch_form(e: Expr) -> tuple[Expr, Expr, Expr] | None:
    """Match ``ite(contains(M,K), M, update(M,K,D))``."""
    if not isinstance(e, Ite):
        return None
    c = e.cond
    if not (isinstance(c, App) and c.op == "contains"):
        return None
    m, k = c.args
    u = e.els
    if e.then == m and isinstance(u, Update) and u.m == m and u.k == k:
        return m, k, u.v
    return None


def _get_or_else(e: Expr) -> tuple[Expr, Expr, Expr] | None:
    """Match the expansion of ``getOrElse(M,K,D)``."""
    if (
        isinstance(e, Ite)
        and isinstance(e.cond, App)
        and e.cond.op == "contains"
        and isinstance(e.then, App)
        and e.then.op == "get"
        and e.then.args == e.cond.args
    ):
        m, k = e.cond.args
        return m, k, e.els
    return None


def _is_default(e: Expr, t: Type) -> bool:
    if isinstance(e, Default):
        return e.type_ == t
    return isinstance(e, Const) and e.value == default_value(t)


def _mentions(e: Expr, sub: Expr) -> bool:
    return any(n == sub for n in walk(e))


def _replace(e: Expr, old: Expr, new: Expr) -> Expr:
    if e == old:
        return new
    return map_children(e, lambda c: _replace(c, old, new))


def tidy(e: Expr) -> Expr:
    """Reduce ``proj i (tuple ...)`` redexes left by destructor substitution."""
    e = map_children(e, tidy)
    if isinstance(e, Proj) and isinstance(e.expr, TupleE):
        return e.expr.items[e.index - 1]
    return e


def _iterator(e: Expr, ctx: _Ctx):
    """Fuse a map/filter chain (or an element-wise map update) into
    (body, guard, binders, source, touch); None when ``e`` has neither shape."""
    if isinstance(e, (MapHO, FilterHO)):
        fn = e.fn if isinstance(e, MapHO) else e.pred
        inner = _iterator(e.coll, ctx) if isinstance(e.coll, (MapHO, FilterHO)) else None
        if inner is None:
            inner = _iter_base(e.coll, ctx, fn.param_names)
        body, guard, binders, source, touch = inner
        args = _fn_args(binders, body)
        if isinstance(e, MapHO):
            ctx.rules.append("Map")
            return beta(fn, args), guard, binders, source, touch
        ctx.rules.append("Filter")
        cond = beta(fn, args)
        guard = cond if guard == TOP else App("and", (guard, cond))
        return body, guard, binders, source, touch
    if isinstance(e, Update) and isinstance(e.ty, MapT):
        return _update_iter(e, ctx)
    return None


def _fn_args(binders: tuple[Binder, ...], body: Expr) -> tuple[Expr, ...]:
    if len(binders) == 2:
        return (Var(binders[0][0]), body)
    return (body,)


def _iter_base(c: Expr, ctx: _Ctx, hint: tuple[str, ...]):
    ctx.rules.append("Collection")
    touch = None
    m = _touch_form(c)
    source = c
    if m is not None:
        src, key, dflt = m
        if not _mentions(key, src):
            source, touch = src, Touch(key, dflt)
    assert source.ty is not None
    binders = _elem_binders(source.ty, ctx.names, hint)
    body: Expr = Var(binders[-1][0])
    return body, TOP, binders, source, touch


def _update_iter(e: Update, ctx: _Ctx):
    """``update(M, K, V)`` where V reads M only through ``getOrElse(M,K,δ)``
    becomes an element-wise map over M with K touched in."""
    m, k = e.m, e.k
    assert isinstance(m.ty, MapT)
    if _mentions(k, m) or not (free_vars(m) - {ctx.row}):
        return None
    names = ctx.names
    kb, vb = names.fresh("k"), names.fresh("v")
    v_expr = e.v
    dflt: Expr = Const(default_value(m.ty.val), m.ty.val)
    for n in list(walk(v_expr)):
        g = _get_or_else(n)
        if g is not None and g[0] == m and g[1] == k:
            if not _is_default(g[2], m.ty.val):
                return None
            dflt = g[2]
            v_expr = _replace(v_expr, n, Var(vb))
    if _mentions(v_expr, m):
        return None
    state_vars = set(ctx.env) - {ctx.row}
    if free_vars(k) & state_vars or free_vars(v_expr) & (state_vars - {vb}):
        return None
    ctx.rules.append("Update")
    body = Ite(App("=", (Var(kb), k)), v_expr, Var(vb))
    binders = ((kb, m.ty.key), (vb, m.ty.val))
    return body, TOP, binders, m, Touch(k, dflt)


# ------------------------------------------------------------- simplify


def _proj_uses(e: Expr, name: str) -> tuple[set[int], bool]:
    """Indices i with ``proj i name`` in ``e``, and whether ``name`` is also
    used some other way."""
    idx: set[int] = set()
    bare = False

    def go(n: Expr, bound: frozenset[str]) -> None:
        nonlocal bare
        if isinstance(n, Proj) and isinstance(n.expr, Var) and n.expr.name == name and name not in bound:
            idx.add(n.index)
            return
        if isinstance(n, Var) and n.name == name and name not in bound:
            bare = True
            return
        if isinstance(n, Lam):
            go(n.body, bound | frozenset(n.param_names))
            return
        for c in n.children():
            go(c, bound)

    go(e, frozenset())
    return idx, bare


def _groups(uses: list[set[int]], n: int) -> list[tuple[int, ...]]:
    parent = list(range(n + 1))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for j, idx in enumerate(uses, start=1):
        for i in idx:
            parent[find(i)] = find(j)
    out: dict[int, list[int]] = {}
    for i in range(1, n + 1):
        out.setdefault(find(i), []).append(i)
    return sorted((tuple(g) for g in out.values()), key=lambda g: g[0])


def simplify_fn(binder: Binder, destructor: Lam, body: DecompExpr, ctx: _Ctx | None = None) -> DecompExpr:
    """Adjust ``λbinder. body`` so that it takes only the parts of its input
    that ``body`` actually reads."""
    if ctx is None:
        ctx = _Ctx("", {binder[0]: binder[1]}, NameSupply(set()))
    name, t = binder
    if isinstance(body, TupleD) and body.slots is None and isinstance(t, TupleT) and len(body.parts) == len(t.elems):
        exprs = [convert_expr(p, name) for p in body.parts]
        uses = []
        for e in exprs:
            idx, bare = _proj_uses(e, name)
            if bare:
                break
            uses.append(idx)
        else:
            groups = _groups(uses, len(t.elems))
            if len(groups) > 1:
                ctx.rules.append("Tuple-Inductive")
                return _split(binder, destructor, exprs, groups, ctx)
    if isinstance(body, CollIterBound) and body.source == Var(name):
        used = free_vars(convert_expr(body.body, name)) | free_vars(body.guard)
        if body.touch is not None:
            used |= free_vars(body.touch.key) | free_vars(body.touch.default)
        if name not in used:
            ctx.rules.append("C-Ind")
            return CollIterFree(body.body, body.guard, body.binders, destructor, body.touch)
    ctx.rules.append("Function")
    return FnComp(binder, body, destructor)


def _split(binder: Binder, d: Lam, exprs: list[Expr], groups: list[tuple[int, ...]], ctx: _Ctx) -> TupleD:
    name, t = binder
    assert isinstance(t, TupleT)
    parts: list[DecompExpr] = []
    for g in groups:
        if len(g) == 1:
            i = g[0]
            v = ctx.names.fresh(f"v{i}")
            vt = t.elems[i - 1]
            e = _rename_proj(exprs[i - 1], name, {i: Var(v)})
            sub_d = Lam(d.params, Proj(i, d.body))
        else:
            v = ctx.names.fresh("v" + "".join(map(str, g)))
            vt = TupleT(tuple(t.elems[i - 1] for i in g))
            mapping = {i: Proj(k, Var(v)) for k, i in enumerate(g, start=1)}
            e = TupleE(tuple(_rename_proj(exprs[i - 1], name, mapping) for i in g))
            sub_d = Lam(d.params, TupleE(tuple(Proj(i, d.body) for i in g)))
        saved = dict(ctx.env)
        ctx.env.pop(name, None)
        ctx.env[v] = vt
        try:
            inner = decompose_expr(e, ctx)
            if len(g) > 1:
                part = FnComp((v, vt), inner, sub_d)
                ctx.rules.append("Function")
            else:
                part = simplify_fn((v, vt), sub_d, inner, ctx)
        finally:
            ctx.env = saved
        parts.append(part)
    return TupleD(tuple(parts), tuple(groups))


def _rename_proj(e: Expr, name: str, mapping: dict[int, Expr]) -> Expr:
    if isinstance(e, Proj) and isinstance(e.expr, Var) and e.expr.name == name and e.index in mapping:
        return mapping[e.index]
    if isinstance(e, Lam) and name in e.param_names:
        return e
    return map_children(e, lambda c: _rename_proj(c, name, mapping))


# --------------------------------------------------------- convert back


def touched(source: Expr, touch: Touch | None) -> Expr:
    if touch is None:
        return source
    return Ite(App("contains", (source, touch.key)), source, Update(source, touch.key, touch.default))


def convert_expr(d: DecompExpr, state: str) -> Expr:
    """Standard-form expression for ``d`` with the state bound to ``state``."""
    if isinstance(d, Plain):
        return d.expr
    if isinstance(d, FnComp):
        inner = convert_expr(d.body, d.binder[0])
        return substitute(inner, {d.binder[0]: beta(d.destructor, (Var(state),))})
    if isinstance(d, TupleD):
        slots = d.slot_list()
        n = max(i for g in slots for i in g)
        out: list[Expr | None] = [None] * n
        for part, g in zip(d.parts, slots):
            e = convert_expr(part, state)
            if len(g) == 1:
                out[g[0] - 1] = e
            else:
                for k, i in enumerate(g, start=1):
                    out[i - 1] = _component(e, k)
        assert all(o is not None for o in out)
        return TupleE(tuple(o for o in out if o is not None))
    if isinstance(d, CollIterBound):
        return _iter_expr(d.body, d.guard, d.binders, touched(d.source, d.touch), state)
    if isinstance(d, CollIterFree):
        source = beta(d.destructor, (Var(state),))
        return _iter_expr(d.body, d.guard, d.binders, touched(source, d.touch), state)
    raise TypeError(f"unknown decomposed expression {d!r}")


def _iter_expr(body: DecompExpr, guard: Expr, binders: tuple[Binder, ...], source: Expr, state: str) -> Expr:
    return MapHO(Lam(binders, convert_expr(body, state)), FilterHO(Lam(binders, guard), source))


def convert_back(dec: Decomposition | DecompExpr, state: str | None = None) -> Lam | Expr:
    """For a full decomposition return the standard-form accumulator
    ``λs.λx.E'``; for a bare tree return the expression over ``state``."""
    if isinstance(dec, Decomposition):
        body = convert_expr(dec.root, dec.state[0])
        return Lam((dec.state, dec.row), tidy(body))
    return tidy(convert_expr(dec, state or "s"))


# -------------------------------------------------------------- display


def dump(d: DecompExpr, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(d, Plain):
        return f"{pad}Plain {show(d.expr)}"
    if isinstance(d, FnComp):
        head = f"{pad}FnComp {d.binder[0]}:{d.binder[1]} <- {show(d.destructor)}"
        return head + "\n" + dump(d.body, indent + 1)
    if isinstance(d, TupleD):
        lines = [f"{pad}Tuple slots={list(map(list, d.slot_list()))}"]
        lines += [dump(p, indent + 1) for p in d.parts]
        return "\n".join(lines)
    if isinstance(d, (CollIterBound, CollIterFree)):
        bs = ",".join(n for n, _ in d.binders)
        if isinstance(d, CollIterBound):
            src = show(d.source)
            kind = "IterBound"
        else:
            src = show(d.destructor)
            kind = "IterFree"
        extra = f" touch {show(d.touch.key)}->{show(d.touch.default)}" if d.touch else ""
        head = f"{pad}{kind} ({bs}) in {src} where {show(d.guard)}{extra}"
        return head + "\n" + dump(d.body, indent + 1)
    return f"{pad}{d!r}"


def dump_decomposition(dec: Decomposition) -> str:
    return f"state {dec.state[0]}:{dec.state[1]}, row {dec.row[0]}:{dec.row[1]}\n" + dump(dec.root, 1)
