"""Bottom-up enumerative search for leaf normalizers.

Candidates are built smallest first from a typed grammar whose productions
are tried in alphabetical order of their result type. Each candidate is
evaluated on a fixed bank of state pairs; candidates that agree with an
earlier one on every pair are dropped. A candidate of the goal type that
satisfies both normalizer conditions on the bank is then checked with
``verify_normalizer``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterator

from .core import (
    BOOL,
    FALSE,
    FLOAT,
    INT,
    INT_MAX,
    INT_MIN,
    STR,
    TRUE,
    BoolT,
    EvalError,
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
    StrT,
    StrV,
    TupleT,
    TupleV,
    Type,
    Value,
    default_value,
    make_map,
)
from .decomposer import _proj_uses, convert_back, decompose
from .frontend import check_expr, check_lambda
from .gen import Gen, GenConfig
from .interp import OPS, compile_expr, fuel_limit, make_callable, op_insert, op_union
from .syntax import (
    App,
    Const,
    Expr,
    Insert,
    Ite,
    Lam,
    MapHO,
    OuterJoin,
    Proj,
    TupleE,
    Union,
    Update,
    Var,
    Zip,
    beta,
    walk,
)
from .synth import Budget, Normalizer, Provenance, SynthProblem, Unknown, reachable_states, verify_normalizer

A, B = "a", "b"
FLOAT_LOWEST = -3.4028234663852886e38
FLOAT_HIGHEST = 3.4028234663852886e38


# whole-state search size for tuple states before going component by component;
# solved components add terminals and make each level far larger, hence the lower cap
WHOLE_TUPLE_CAP = 7
WHOLE_TUPLE_CAP_WITH_SUBS = 5

COMMUTATIVE = frozenset({"+", "*", "=", "and", "or", "max", "min"})


class _Err:
    __slots__ = ()

    def __repr__(self) -> str:
        return "ERR"


ERR = _Err()
Vec = tuple


# ----------------------------------------------------------- grammar


@dataclass(frozen=True)
class Production:
    name: str
    ret: Type
    args: tuple[Type, ...]
    run: Callable[..., Value]
    build: Callable[..., Expr]
    cost: int = 1
    lazy_ite: bool = False
    commutative: bool = False

    @property
    def key(self) -> tuple[str, str, tuple[str, ...]]:
        return (str(self.ret), self.name, tuple(map(str, self.args)))


def type_closure(roots: list[Type]) -> list[Type]:
    out: dict[Type, None] = {}

    def add(t: Type) -> None:
        if t in out or isinstance(t, NullT):
            return
        out[t] = None
        if isinstance(t, TupleT):
            for e in t.elems:
                add(e)
        elif isinstance(t, (ListT, SetT)):
            add(t.elem)
        elif isinstance(t, MapT):
            add(t.key)
            add(t.val)

    for t in roots:
        add(t)
    add(INT)
    add(BOOL)
    return sorted(out, key=str)


def _binary_ops(t: Type) -> list[str]:
    if isinstance(t, (IntT, FloatT)):
        return ["+", "-", "*", "max", "min"]
    if isinstance(t, BoolT):
        return ["and", "or"]
    if isinstance(t, StrT):
        return ["concat"]
    return []


def _g_expr(op: str, x: Expr, y: Expr) -> Expr:
    return App(op, (x, y))


def _map_merge(op: str, t: MapT) -> tuple[Callable[..., Value], Callable[..., Expr]]:
    g = OPS[op]
    d = default_value(t.val)
    pair_t = TupleT((t.val, t.val))

    def run(m1: Value, m2: Value) -> Value:
        assert isinstance(m1, MapV) and isinstance(m2, MapV)
        x, y = dict(m1.entries), dict(m2.entries)
        return make_map((k, g(x.get(k, d), y.get(k, d))) for k in x.keys() | y.keys())

    def build(m1: Expr, m2: Expr) -> Expr:
        dc = Const(d, t.val)
        body = _g_expr(op, App("fill", (Proj(1, Var("p")), dc)), App("fill", (Proj(2, Var("p")), dc)))
        return MapHO(Lam((("k", t.key), ("p", pair_t)), body), OuterJoin(m1, m2))

    return run, build


def _map_values(op: str, t: MapT) -> tuple[Callable[..., Value], Callable[..., Expr]]:
    g = OPS[op]

    def run(m: Value, c: Value) -> Value:
        assert isinstance(m, MapV)
        return make_map((k, g(v, c)) for k, v in m.entries)

    def build(m: Expr, c: Expr) -> Expr:
        return MapHO(Lam((("k", t.key), ("v", t.val)), _g_expr(op, Var("v"), c)), m)

    return run, build


def _zip_map(op: str, t: ListT) -> tuple[Callable[..., Value], Callable[..., Expr]]:
    g = OPS[op]

    def run(l1: Value, l2: Value) -> Value:
        assert isinstance(l1, ListV) and isinstance(l2, ListV)
        if len(l1.items) != len(l2.items):
            raise EvalError("zip-length", "zip of lists with different lengths")
        return ListV(tuple(g(x, y) for x, y in zip(l1.items, l2.items)))

    def build(l1: Expr, l2: Expr) -> Expr:
        pt = TupleT((t.elem, t.elem))
        return MapHO(Lam((("p", pt),), _g_expr(op, Proj(1, Var("p")), Proj(2, Var("p")))), Zip(l1, l2))

    return run, build


def _is_pointwise(fn: Lam, arg: Callable[[int], Expr]) -> bool:
    body = fn.body
    return isinstance(body, App) and len(body.args) == 2 and all(
        _strip_fill(a) == arg(i) for i, a in enumerate(body.args, 1))


def _strip_fill(e: Expr) -> Expr:
    return e.args[0] if isinstance(e, App) and e.op == "fill" else e


def grammar_size(e: Expr) -> int:
    """Size of ``e`` as counted by the enumerator: one per production,
    two for the map-merge, map-values and zip-map shapes."""
    if isinstance(e, MapHO) and len(e.fn.params) == 2:
        k_or_p = e.fn.param_names[1]
        if isinstance(e.coll, OuterJoin) and _is_pointwise(e.fn, lambda i: Proj(i, Var(k_or_p))):
            return 2 + grammar_size(e.coll.m1) + grammar_size(e.coll.m2)
        body = e.fn.body
        if isinstance(body, App) and len(body.args) == 2 and body.args[0] == Var(k_or_p):
            return 2 + grammar_size(e.coll) + grammar_size(body.args[1])
    if isinstance(e, MapHO) and isinstance(e.coll, Zip) and len(e.fn.params) == 1:
        p = e.fn.param_names[0]
        if _is_pointwise(e.fn, lambda i: Proj(i, Var(p))):
            return 2 + grammar_size(e.coll.a) + grammar_size(e.coll.b)
    return 1 + sum(grammar_size(c) for c in e.children())


def _tuple_run(*xs: Value) -> Value:
    return TupleV(tuple(xs))


def _proj_run(i: int) -> Callable[[Value], Value]:
    def run(t: Value) -> Value:
        assert isinstance(t, TupleV)
        return t.items[i - 1]

    return run


def _update_run(m: Value, k: Value, v: Value) -> Value:
    assert isinstance(m, MapV)
    return make_map(m.entries + ((k, v),))


def productions(types: list[Type]) -> list[Production]:
    """All grammar productions over ``types``, alphabetically ordered."""
    ts = set(types)
    out: list[Production] = []

    def app(name: str, ret: Type, args: tuple[Type, ...]) -> None:
        comm = name in COMMUTATIVE and len(args) == 2 and args[0] == args[1]
        out.append(Production(name, ret, args, OPS[name], lambda *xs, _n=name: App(_n, xs), commutative=comm))

    for t in types:
        if isinstance(t, (IntT, FloatT)):
            for op in ("+", "-", "*", "/", "max", "min"):
                app(op, t, (t, t))
            for op in ("<", ">"):
                app(op, BOOL, (t, t))
        if isinstance(t, (IntT, FloatT, StrT, BoolT)):
            app("=", BOOL, (t, t))
        if isinstance(t, StrT):
            app("concat", STR, (STR, STR))
            app("len", INT, (STR,))
            app("<", BOOL, (STR, STR))
            app(">", BOOL, (STR, STR))
        if isinstance(t, BoolT):
            app("and", BOOL, (BOOL, BOOL))
            app("or", BOOL, (BOOL, BOOL))
            app("not", BOOL, (BOOL,))
        if isinstance(t, TupleT):
            out.append(Production("tuple", t, t.elems, _tuple_run, lambda *xs: TupleE(xs)))
            for i, e in enumerate(t.elems, start=1):
                out.append(Production(f"proj{i}", e, (t,), _proj_run(i), lambda x, _i=i: Proj(_i, x)))
        if isinstance(t, ListT):
            app("concat", t, (t, t))
            app("len", INT, (t,))
            for op in _binary_ops(t.elem):
                run, build = _zip_map(op, t)
                out.append(Production(f"zip-map-{op}", t, (t, t), run, build, cost=2))
        if isinstance(t, SetT):
            out.append(Production("union", t, (t, t), op_union, lambda x, y: Union(x, y)))
            if t.elem in ts:
                out.append(Production("insert", t, (t, t.elem), op_insert, lambda s, x: Insert(s, x)))
                app("contains", BOOL, (t, t.elem))
            app("len", INT, (t,))
        if isinstance(t, MapT):
            app("get", t.val, (t, t.key))
            app("contains", BOOL, (t, t.key))
            app("len", INT, (t,))
            out.append(Production("update", t, (t, t.key, t.val), _update_run, lambda m, k, v: Update(m, k, v)))
            for op in _binary_ops(t.val):
                run, build = _map_merge(op, t)
                out.append(Production(f"map-merge-{op}", t, (t, t), run, build, cost=2))
                run, build = _map_values(op, t)
                out.append(Production(f"map-values-{op}", t, (t, t.val), run, build, cost=2))
        out.append(Production("ite", t, (BOOL, t, t), lambda c, x, y: x if c == TRUE else y,
                              lambda c, x, y: Ite(c, x, y), lazy_ite=True))
    keep = [p for p in out if p.ret in ts and all(a in ts for a in p.args)]
    return sorted(keep, key=lambda p: p.key)


def literal_constants(exprs: list[Expr]) -> list[Value]:
    out: dict[Value, None] = {}
    for e in exprs:
        for n in walk(e):
            if isinstance(n, Const) and isinstance(n.value, (IntV, FloatV, StrV, type(TRUE))):
                out.setdefault(n.value, None)
    return list(out)


def constant_terminals(types: list[Type], harvested: list[Value]) -> list[tuple[Expr, Type]]:
    """0/1/true/false/"", harvested literals, numeric bounds and empty
    collections for every type in play."""
    vals: dict[Type, dict[Value, None]] = {t: {} for t in types}

    def add(t: Type, v: Value) -> None:
        if t in vals:
            vals[t].setdefault(v, None)

    for v in (IntV(0), IntV(1)):
        add(INT, v)
    for v in (FloatV(0.0), FloatV(1.0)):
        add(FLOAT, v)
    add(BOOL, FALSE)
    add(BOOL, TRUE)
    add(STR, StrV(""))
    for v in harvested:
        t = {IntV: INT, FloatV: FLOAT, StrV: STR}.get(type(v), BOOL)
        add(t, v)
    add(INT, IntV(INT_MIN))
    add(INT, IntV(INT_MAX))
    add(FLOAT, FloatV(FLOAT_LOWEST))
    add(FLOAT, FloatV(FLOAT_HIGHEST))
    for t in types:
        if isinstance(t, (ListT, SetT, MapT)):
            add(t, default_value(t))
    return [(Const(v, t), t) for t in types for v in vals[t]]


# -------------------------------------------------------------- bank


@dataclass
class Bank:
    """State pairs on which candidates are evaluated, with the positions
    that the two normalizer conditions compare."""

    pairs: list[tuple[Value, Value]]
    phi1: list[tuple[int, Value]]
    phi2: list[tuple[int, int, Value]]
    comm: list[tuple[int, int]]


def build_bank(problem: SynthProblem, cfg: GenConfig, triples: int = 120, commutative: bool = False) -> Bank:
    f, init = problem.f, problem.init
    states = reachable_states(f, init, cfg, problem.consts, count=40, label=f"bank/{problem.path}")
    gen = Gen(cfg, cfg.rng(f"bank-rows/{problem.path}"), problem.consts)
    fn = make_callable(f)
    index: dict[tuple[Value, Value], int] = {}
    pairs: list[tuple[Value, Value]] = []

    def at(p: tuple[Value, Value]) -> int:
        i = index.get(p)
        if i is None:
            i = index[p] = len(pairs)
            pairs.append(p)
        return i

    phi1 = [(at((s, init)), s) for s in states]
    phi2: list[tuple[int, int, Value]] = []
    comm: list[tuple[int, int]] = []
    rng = gen.rng
    tries = 0
    while len(phi2) < triples and tries < triples * 4:
        tries += 1
        b1, b2, r = rng.choice(states), rng.choice(states), gen.value(problem.row_type)
        try:
            with fuel_limit():
                fb2 = fn(b2, r)
        except EvalError:
            continue
        phi2.append((at((b1, b2)), at((b1, fb2)), r))
        if commutative:
            comm.append((at((b1, b2)), at((b2, b1))))
    return Bank(pairs, phi1, phi2, comm)


# -------------------------------------------------------- enumeration


class _Timeout(Exception):
    pass


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _ordered_pairs(pool: list) -> Iterator[tuple]:
    for i, x in enumerate(pool):
        for y in pool[i:]:
            yield (x, y)


class Enumerator:
    """Bottom-up enumeration with observational-equivalence pruning."""

    def __init__(self, types: list[Type], terminals: list[tuple[Expr, Type, Vec]],
                 prods: list[Production], deadline: float):
        self.types = types
        self.terminals = sorted(terminals, key=lambda t: (str(t[1]),))
        self.prods = prods
        self.deadline = deadline
        self.levels: dict[int, dict[Type, list[tuple[Expr, Vec]]]] = {}
        self.seen: dict[Type, set[Vec]] = {t: set() for t in types}
        self.ticks = 0

    def _check_time(self) -> None:
        self.ticks += 1
        if self.ticks % 256 == 0 and time.monotonic() > self.deadline:
            raise _Timeout()

    def _add(self, size: int, t: Type, e: Expr, vec: Vec) -> bool:
        if all(v is ERR for v in vec):
            return False
        seen = self.seen.setdefault(t, set())
        if vec in seen:
            return False
        seen.add(vec)
        self.levels.setdefault(size, {}).setdefault(t, []).append((e, vec))
        return True

    def _apply(self, p: Production, vecs: tuple[Vec, ...]) -> Vec:
        out = []
        run = p.run
        if p.lazy_ite:
            for c, x, y in zip(*vecs):
                if c is ERR:
                    out.append(ERR)
                else:
                    out.append(x if c == TRUE else y)
            return tuple(out)
        for args in zip(*vecs):
            if any(a is ERR for a in args):
                out.append(ERR)
                continue
            try:
                out.append(run(*args))
            except (EvalError, AssertionError, ZeroDivisionError, OverflowError):
                out.append(ERR)
        return tuple(out)

    def _needed_sizes(self, goal: Type, max_size: int) -> dict[Type, int]:
        """Largest size at which a term of each type can still occur inside
        a goal term of at most ``max_size``."""
        inf = max_size + 1
        low: dict[Type, int] = {t: inf for t in self.types}
        for _, t, _ in self.terminals:
            low[t] = 1
        changed = True
        while changed:
            changed = False
            for p in self.prods:
                m = p.cost + sum(low.get(a, inf) for a in p.args)
                if m < low.get(p.ret, inf):
                    low[p.ret] = m
                    changed = True
        need: dict[Type, int] = {t: 0 for t in self.types}
        need[goal] = max_size
        changed = True
        while changed:
            changed = False
            for p in self.prods:
                top = need.get(p.ret, 0)
                if top <= 1:
                    continue
                total = p.cost + sum(low.get(a, inf) for a in p.args)
                for a in p.args:
                    bound = top - total + low.get(a, inf)
                    if bound > need.get(a, 0):
                        need[a] = bound
                        changed = True
        return need

    def run(self, goal: Type, accept: Callable[[Expr, Vec], bool], max_size: int) -> Expr | None:
        """Return the first accepted candidate of type ``goal``, smallest
        first. Each size cap is a fresh pass so that the size bounds from
        ``_needed_sizes`` stay tight."""
        try:
            for cap in range(1, max_size + 1):
                hit = self._pass(goal, accept, cap)
                if hit is not None:
                    return hit
        except _Timeout:
            return None
        return None

    def _pass(self, goal: Type, accept: Callable[[Expr, Vec], bool], cap: int) -> Expr | None:
        self.levels = {}
        self.seen = {t: set() for t in self.types}
        need = self._needed_sizes(goal, cap)
        for size in range(1, cap + 1):
            check = size == cap
            if size == 1:
                for e, t, vec in self.terminals:
                    if self._add(1, t, e, vec) and check and t == goal and accept(e, vec):
                        return e
                continue
            for p in self.prods:
                if size > need.get(p.ret, 0):
                    continue
                inner = size - p.cost
                k = len(p.args)
                if inner < k:
                    continue
                for sizes in _compositions(inner, k):
                    if p.commutative and sizes[0] > sizes[1]:
                        continue
                    pools = []
                    for s, t in zip(sizes, p.args):
                        pool = self.levels.get(s, {}).get(t)
                        if not pool:
                            break
                        pools.append(pool)
                    else:
                        combos: Iterator = product(*pools)
                        if p.commutative and sizes[0] == sizes[1]:
                            combos = _ordered_pairs(pools[0])
                        for combo in combos:
                            self._check_time()
                            vec = self._apply(p, tuple(c[1] for c in combo))
                            e = p.build(*(c[0] for c in combo))
                            if self._add(size, p.ret, e, vec) and check and p.ret == goal and accept(e, vec):
                                return e
        return None


# ------------------------------------------------------------- leaf


def _component_deps(problem: SynthProblem) -> list[set[int]] | None:
    """Per component, the state components its update reads."""
    st = problem.state_type
    if not isinstance(st, TupleT):
        return None
    canon = convert_back(decompose(problem.f))
    assert isinstance(canon, Lam)
    if not isinstance(canon.body, TupleE):
        return None
    s = canon.params[0][0]
    deps = []
    for item in canon.body.items:
        idx, bare = _proj_uses(item, s)
        deps.append(set(range(1, len(st.elems) + 1)) if bare else idx)
    return deps


def sub_terminals(st: Type, sub_solutions: list[tuple[Normalizer, tuple[int, ...]]]) -> list[tuple[Expr, Type]]:
    """Solved component merges applied to the matching parts of ``a`` and ``b``."""
    out: list[tuple[Expr, Type]] = []
    if not isinstance(st, TupleT):
        return out
    for norm, g in sub_solutions:
        if len(g) == 1:
            t = st.elems[g[0] - 1]
            e = beta(norm.h, (Proj(g[0], Var(A)), Proj(g[0], Var(B))))
        else:
            t = TupleT(tuple(st.elems[i - 1] for i in g))
            e = beta(norm.h, (TupleE(tuple(Proj(i, Var(A)) for i in g)), TupleE(tuple(Proj(i, Var(B)) for i in g))))
        out.append((check_expr(e, {A: st, B: st}), t))
    return out


def synth_leaf(problem: SynthProblem, cfg: GenConfig, budget: Budget = Budget(),
               sub_solutions: list[tuple[Normalizer, tuple[int, ...]]] | None = None) -> Normalizer | Unknown:
    """Enumerate merges for ``problem`` smallest first.

    Solved sub-normalizers (with the tuple components they cover) become
    extra terminals, and for tuple states they fix those components while the
    remaining ones are searched one at a time."""
    sub_solutions = sub_solutions or []
    start = time.monotonic()
    deadline = start + budget.leaf_seconds
    st = problem.state_type
    bank = build_bank(problem, cfg, commutative=budget.commutative)
    types = type_closure([st])
    prods = productions(types)
    harvested = literal_constants([problem.f, Const(problem.init, st)])
    fn = make_callable(problem.f)
    f_cache: dict[tuple[Value, Value], Value | _Err] = {}

    def f_at(s: Value, r: Value) -> Value | _Err:
        key = (s, r)
        out = f_cache.get(key)
        if out is None:
            try:
                with fuel_limit():
                    out = fn(s, r)
            except EvalError:
                out = ERR
            f_cache[key] = out
        return out

    def terminals(extra: list[tuple[Expr, Type]]) -> list[tuple[Expr, Type, Vec]]:
        out: list[tuple[Expr, Type, Vec]] = []
        out.append((Var(A), st, tuple(p[0] for p in bank.pairs)))
        out.append((Var(B), st, tuple(p[1] for p in bank.pairs)))
        for e, t in constant_terminals(types, harvested) + extra:
            out.append((e, t, _eval_vec(e, bank)))
        return out

    def final(body: Expr) -> Lam | None:
        h = Lam(((A, st), (B, st)), body)
        try:
            h = check_lambda(h, {})
        except Exception:
            return None
        ce = verify_normalizer(problem.f, problem.init, h, cfg, problem.consts, budget.commutative)
        return h if ce is None else None

    def whole_ok(vec: Vec) -> bool:
        for pos, s in bank.phi1:
            if vec[pos] != s:
                return False
        for i12, i1f, r in bank.phi2:
            v = vec[i12]
            if v is ERR:
                return False
            if f_at(v, r) != vec[i1f]:
                return False
        return all(vec[i] == vec[j] for i, j in bank.comm)

    found: list[Lam] = []

    def accept_whole(e: Expr, vec: Vec) -> bool:
        if not whole_ok(vec):
            return False
        h = final(e)
        if h is not None:
            found.append(h)
            return True
        return False

    terms = terminals(sub_terminals(st, sub_solutions))

    if not isinstance(st, TupleT):
        en = Enumerator(types, terms, prods, deadline)
        en.run(st, accept_whole, budget.max_size)
        if found:
            return Normalizer(found[0], Provenance("Synth"))
        return Unknown(_reason(start, budget), problem.path)

    # whole-tuple pass at small sizes, then one component at a time
    quick = min(start + budget.leaf_seconds / 4, deadline)
    en = Enumerator(types, terms, prods, quick)
    cap = WHOLE_TUPLE_CAP_WITH_SUBS if sub_solutions else WHOLE_TUPLE_CAP
    en.run(st, accept_whole, min(cap, budget.max_size))
    if found:
        return Normalizer(found[0], Provenance("Synth"))
    res = _by_component(problem, cfg, budget, sub_solutions, bank, types, prods, terms, f_at, deadline, final)
    if res is not None:
        return Normalizer(res, Provenance("Synth"))
    return Unknown(_reason(start, budget), problem.path)


def _reason(start: float, budget: Budget) -> str:
    if time.monotonic() - start >= budget.leaf_seconds:
        return f"leaf search timed out after {budget.leaf_seconds:g}s"
    return f"no merge up to size {budget.max_size}"


def _eval_vec(e: Expr, bank: Bank) -> Vec:
    code = compile_expr(e)
    out = []
    for x, y in bank.pairs:
        try:
            with fuel_limit():
                out.append(code({A: x, B: y}))
        except EvalError:
            out.append(ERR)
    return tuple(out)


def _by_component(problem, cfg, budget, sub_solutions, bank, types, prods, terms, f_at, deadline, final) -> Lam | None:
    st = problem.state_type
    assert isinstance(st, TupleT)
    deps = _component_deps(problem)
    if deps is None:
        return None
    n = len(st.elems)
    known: dict[int, tuple[Expr, Vec]] = {}
    for norm, g in sub_solutions:
        for k, i in enumerate(g, start=1):
            if len(g) == 1:
                e = beta(norm.h, (Proj(i, Var(A)), Proj(i, Var(B))))
            else:
                whole = beta(norm.h, (TupleE(tuple(Proj(j, Var(A)) for j in g)), TupleE(tuple(Proj(j, Var(B)) for j in g))))
                e = Proj(k, whole)
            known[i] = (e, _eval_vec(e, bank))
    canon = convert_back(decompose(problem.f))
    assert isinstance(canon, Lam) and isinstance(canon.body, TupleE)
    comp_fns = [make_callable(Lam(canon.params, item)) for item in canon.body.items]
    progress = True
    while len(known) < n and progress:
        progress = False
        for i in range(1, n + 1):
            if i in known or not deps[i - 1] <= set(known) | {i}:
                continue
            hit = _solve_component(i, st, bank, known, comp_fns[i - 1], types, prods, terms, budget, deadline)
            if hit is None:
                return None
            known[i] = hit
            progress = True
    if len(known) < n:
        return None
    return final(TupleE(tuple(known[i][0] for i in range(1, n + 1))))


def _solve_component(i, st, bank, known, fi, types, prods, terms, budget, deadline):
    n = len(st.elems)
    cache: dict[tuple[Value, Value], Value | _Err] = {}

    def fi_at(s: Value, r: Value) -> Value | _Err:
        key = (s, r)
        out = cache.get(key)
        if out is None:
            try:
                with fuel_limit():
                    out = fi(s, r)
            except EvalError:
                out = ERR
            cache[key] = out
        return out

    def ok(vec: Vec) -> bool:
        for pos, s in bank.phi1:
            if vec[pos] != s.items[i - 1]:
                return False
        for i12, i1f, r in bank.phi2:
            parts = []
            for j in range(1, n + 1):
                if j == i:
                    v = vec[i12]
                elif j in known:
                    v = known[j][1][i12]
                else:
                    v = bank.pairs[i12][0].items[j - 1]
                if v is ERR:
                    return False
                parts.append(v)
            if fi_at(TupleV(tuple(parts)), r) != vec[i1f]:
                return False
        return True

    hit: list[tuple[Expr, Vec]] = []

    def accept(e: Expr, vec: Vec) -> bool:
        if ok(vec):
            hit.append((e, vec))
            return True
        return False

    en = Enumerator(types, terms, prods, deadline)
    en.run(st.elems[i - 1], accept, budget.max_size)
    return hit[0] if hit else None


__all__ = ["Bank", "Enumerator", "Production", "build_bank", "grammar_size", "productions", "sub_terminals", "synth_leaf", "type_closure"]
