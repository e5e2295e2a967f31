"""Normalizer synthesis.

A normalizer ``h`` of an accumulator ``f`` with initializer ``I`` satisfies

    Phi1:  h(s, I) = s
    Phi2:  f(h(b1, b2), r) = h(b1, f(b2, r))

and is then a valid merge operator. ``synth_normalizer`` first looks for a
reason no normalizer exists, then splits tuple states into independent
components and element-wise collection updates into per-element problems,
and finally falls back to enumerative search over whole states.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Union

from .core import (
    FALSE,
    INT,
    NULL_T,
    TRUE,
    BoolT,
    EvalError,
    IntT,
    IntV,
    StrV,
    ListT,
    MapT,
    SetT,
    TupleT,
    TupleV,
    Type,
    Value,
    default_value,
)
from .decomposer import (
    TOP,
    CollIterFree,
    Decomposition,
    TupleD,
    _proj_uses,
    _rename_proj,
    convert_back,
    convert_expr,
    decompose,
    is_identity,
)
from .frontend import check_lambda
from .gen import Constants, Gen, GenConfig
from .interp import eval_expr, fuel_limit, make_callable
from .refuter import NORM1, Counterexample, refute_norm
from .syntax import (
    App,
    Const,
    Convert,
    Expr,
    Lam,
    MapHO,
    NameSupply,
    OuterJoin,
    Proj,
    TupleE,
    Var,
    all_names,
    beta,
    substitute,
)

PHI1 = "Phi1"
PHI2 = "Phi2"
COMM = "Commutativity"


@dataclass(frozen=True)
class Provenance:
    rule: str
    children: tuple[Provenance, ...] = ()

    def __str__(self) -> str:
        if not self.children:
            return self.rule
        return f"{self.rule}({', '.join(map(str, self.children))})"


@dataclass(frozen=True)
class SynthProblem:
    f: Lam
    init: Value
    path: str = "root"
    consts: Constants = field(default_factory=Constants)

    def __post_init__(self) -> None:
        if self.f.ty is None:
            object.__setattr__(self, "f", check_lambda(self.f, {}))
        if self.consts == Constants():
            harvested = Constants.harvest([self.f, Const(self.init, self.f.params[0][1])])
            object.__setattr__(self, "consts", harvested)

    @property
    def state_type(self) -> Type:
        return self.f.params[0][1]

    @property
    def row_type(self) -> Type:
        return self.f.params[1][1]

    @property
    def grammar_profile(self) -> str:
        t = self.state_type
        if isinstance(t, TupleT):
            return "tuple"
        if isinstance(t, ListT):
            return "list"
        if isinstance(t, SetT):
            return "set"
        if isinstance(t, MapT):
            return "map"
        return "scalar"


@dataclass(frozen=True)
class Normalizer:
    h: Lam
    provenance: Provenance


@dataclass(frozen=True)
class Refuted:
    counterexample: Counterexample
    path: str


@dataclass(frozen=True)
class Unknown:
    reason: str
    path: str


Result = Union[Normalizer, Refuted, Unknown]


@dataclass(frozen=True)
class Budget:
    refute_seconds: float = 5.0
    leaf_seconds: float = 20.0
    max_size: int = 11
    commutative: bool = False
    oracle_seconds: float = 5.0


@dataclass
class SynthLog:
    """Collects the rule trace, decompositions and leaf problems of a run."""

    trace: list[str] = field(default_factory=list)
    decompositions: list[tuple[str, Decomposition]] = field(default_factory=list)
    leaf_problems: list[tuple[SynthProblem, tuple[tuple[Normalizer, tuple[int, ...]], ...]]] = field(default_factory=list)


# ------------------------------------------------------- verification


def reachable_states(f: Lam, init: Value, cfg: GenConfig, consts: Constants | None = None,
                     count: int = 48, label: str = "reach") -> list[Value]:
    """Distinct states obtained by folding ``f`` over random row sequences,
    starting with ``init``."""
    gen = Gen(cfg, cfg.rng(label), consts or Constants())
    row_t = f.params[1][1]
    fn = make_callable(f)
    out: dict[Value, None] = {init: None}
    attempts = 0
    while len(out) < count and attempts < count * 8:
        attempts += 1
        n = gen.rng.randint(1, max(1, cfg.max_rows))
        s = init
        try:
            with fuel_limit():
                for _ in range(n):
                    s = fn(s, gen.value(row_t))
                    out.setdefault(s, None)
        except EvalError:
            continue
    return list(out)


def _small_domain(t: Type, lo: int = -3, hi: int = 3) -> list[Value] | None:
    if isinstance(t, IntT):
        return [IntV(i) for i in range(lo, hi + 1)]
    if isinstance(t, BoolT):
        return [FALSE, TRUE]
    if isinstance(t, TupleT):
        parts = [_small_domain(e, lo, hi) for e in t.elems]
        if any(p is None for p in parts):
            return None
        return [TupleV(c) for c in itertools.product(*parts)]  # type: ignore[arg-type]
    return None


def _in_domain(v: Value, lo: int, hi: int) -> bool:
    if isinstance(v, IntV):
        return lo <= v.v <= hi
    if isinstance(v, TupleV):
        return all(_in_domain(i, lo, hi) for i in v.items)
    return True


def exhaustive_states(f: Lam, init: Value, lo: int = -3, hi: int = 3, limit: int = 64) -> tuple[list[Value], list[Value]] | None:
    """States reachable from ``init`` using only rows from the small domain
    and staying inside it, with the row domain; None when not enumerable."""
    st, rt = f.params[0][1], f.params[1][1]
    rows = _small_domain(rt, lo, hi)
    if rows is None or _small_domain(st, lo, hi) is None or not _in_domain(init, lo, hi):
        return None
    fn = make_callable(f)
    seen = {init: None}
    frontier = [init]
    while frontier and len(seen) <= limit:
        nxt = []
        for s in frontier:
            for r in rows:
                try:
                    with fuel_limit():
                        t = fn(s, r)
                except EvalError:
                    continue
                if t not in seen and _in_domain(t, lo, hi):
                    seen[t] = None
                    nxt.append(t)
        frontier = nxt
    if len(seen) > limit:
        return None
    return list(seen), rows


def verify_normalizer(f: Lam, init: Value, h: Lam, cfg: GenConfig, consts: Constants | None = None,
                      commutative: bool = False, exhaustive: bool = True) -> Counterexample | None:
    """Check Phi1 and Phi2 over states reachable from ``init``: on
    ``cfg.trials`` seeded random triples, and on every triple of the small
    Int/Bool domain when that is enumerable. None means pass."""
    consts = consts if consts is not None else Constants.harvest([f, Const(init, f.params[0][1])])
    fc, hc = make_callable(f), make_callable(h)
    states = reachable_states(f, init, cfg, consts, label="verify-states")
    gen = Gen(cfg, cfg.rng("verify"), consts)
    row_t = f.params[1][1]

    def run(fn: Callable[[], Value]) -> Value | EvalError:
        try:
            with fuel_limit():
                return fn()
        except EvalError as e:
            return e

    def phi1(s: Value) -> Counterexample | None:
        out = run(lambda: hc(s, init))
        if isinstance(out, EvalError) or out != s:
            return Counterexample(PHI1, (("s", s),), _as_value(out), s)
        return None

    def phi2(b1: Value, b2: Value, r: Value) -> Counterexample | None:
        fb2 = run(lambda: fc(b2, r))
        if isinstance(fb2, EvalError):
            return None
        merged = run(lambda: hc(b1, b2))
        lhs = merged if isinstance(merged, EvalError) else run(lambda: fc(merged, r))
        rhs = run(lambda: hc(b1, fb2))
        if isinstance(lhs, EvalError) and isinstance(rhs, EvalError) and not isinstance(merged, EvalError):
            return None
        if isinstance(lhs, EvalError) or isinstance(rhs, EvalError) or lhs != rhs:
            return Counterexample(PHI2, (("b1", b1), ("b2", b2), ("r", r)), _as_value(lhs), _as_value(rhs))
        return None

    def comm(b1: Value, b2: Value) -> Counterexample | None:
        x, y = run(lambda: hc(b1, b2)), run(lambda: hc(b2, b1))
        if isinstance(x, EvalError) or isinstance(y, EvalError) or x != y:
            return Counterexample(COMM, (("b1", b1), ("b2", b2)), _as_value(x), _as_value(y))
        return None

    for s in states:
        ce = phi1(s)
        if ce:
            return ce
    rng = gen.rng
    for _ in range(cfg.trials):
        b1, b2 = rng.choice(states), rng.choice(states)
        ce = phi2(b1, b2, gen.value(row_t))
        if ce:
            return ce
        if commutative:
            ce = comm(b1, b2)
            if ce:
                return ce
    if exhaustive:
        dom = exhaustive_states(f, init)
        if dom is not None:
            ss, rows = dom
            if len(ss) * len(ss) * len(rows) <= 40000:
                for s in ss:
                    ce = phi1(s)
                    if ce:
                        return ce
                for b1 in ss:
                    for b2 in ss:
                        if commutative:
                            ce = comm(b1, b2)
                            if ce:
                                return ce
                        for r in rows:
                            ce = phi2(b1, b2, r)
                            if ce:
                                return ce
    return None


def _as_value(v: Value | EvalError) -> Value:
    return StrV(f"error: {v.kind}") if isinstance(v, EvalError) else v


# -------------------------------------------------------- composition


def _fresh_pair(t: Type, *avoid: Expr) -> tuple[str, str]:
    taken: set[str] = set()
    for e in avoid:
        taken |= all_names(e)
    names = NameSupply(taken)
    return names.fresh("a"), names.fresh("b")


def compose_product(children: list[tuple[Normalizer, tuple[int, ...]]], state_type: Type) -> Normalizer:
    """``h(a,b) = (h_g(σ_g a, σ_g b))_g`` reassembled in component order."""
    if len(children) == 1 and not isinstance(state_type, TupleT):
        return children[0][0]
    assert isinstance(state_type, TupleT)
    n = len(state_type.elems)
    covered = sorted(i for _, g in children for i in g)
    if covered != list(range(1, n + 1)):
        raise ValueError(f"product children cover {covered}, expected 1..{n}")
    if len(children) == 1:
        return children[0][0]
    a, b = _fresh_pair(state_type, *(c.h for c, _ in children))
    out: list[Expr | None] = [None] * n
    for child, g in children:
        if len(g) == 1:
            args: tuple[Expr, Expr] = (Proj(g[0], Var(a)), Proj(g[0], Var(b)))
        else:
            args = (
                TupleE(tuple(Proj(i, Var(a)) for i in g)),
                TupleE(tuple(Proj(i, Var(b)) for i in g)),
            )
        r = beta(child.h, args)
        if len(g) == 1:
            out[g[0] - 1] = r
        else:
            for k, i in enumerate(g, start=1):
                out[i - 1] = Proj(k, r)
    h = Lam(((a, state_type), (b, state_type)), TupleE(tuple(e for e in out if e is not None)))
    prov = Provenance("Product", tuple(c.provenance for c, _ in children))
    return Normalizer(check_lambda(h, {}), prov)


def compose_coll(child: Normalizer | None, elem_default: Value, coll_type: Type) -> Normalizer:
    """Merge two collections element-wise through their map views:
    ``h(a,b) = conv(map(λk p. h'(fill(σ1 p, δ), fill(σ2 p, δ)), map(a) ⊠ map(b)))``.
    For sets the values are null and the result is the union."""
    if not isinstance(coll_type, (MapT, ListT, SetT)):
        raise ValueError(f"collection merge needs a list, map or set, got {coll_type}")
    avoid = [child.h] if child is not None else []
    names = NameSupply(set().union(*(all_names(e) for e in avoid)) if avoid else set())
    a, b, k, p = names.fresh("a"), names.fresh("b"), names.fresh("k"), names.fresh("p")
    if isinstance(coll_type, MapT):
        key_t, val_t = coll_type.key, coll_type.val
    elif isinstance(coll_type, ListT):
        key_t, val_t = INT, coll_type.elem
    else:
        key_t, val_t = coll_type.elem, NULL_T
    pair_t = TupleT((val_t, val_t))
    left, right = Proj(1, Var(p)), Proj(2, Var(p))
    if isinstance(coll_type, SetT):
        body: Expr = App("fill", (left, right))
    else:
        assert child is not None
        d = Const(elem_default, val_t)
        body = beta(child.h, (App("fill", (left, d)), App("fill", (right, d))))
    va: Expr = Var(a)
    vb: Expr = Var(b)
    if not isinstance(coll_type, MapT):
        va, vb = Convert("map", va), Convert("map", vb)
    merged: Expr = MapHO(Lam(((k, key_t), (p, pair_t)), body), OuterJoin(va, vb))
    if isinstance(coll_type, ListT):
        merged = Convert("list", merged)
    elif isinstance(coll_type, SetT):
        merged = Convert("set", merged)
    h = Lam(((a, coll_type), (b, coll_type)), merged)
    kids = (child.provenance,) if child is not None else ()
    return Normalizer(check_lambda(h, {}), Provenance("Coll", kids))


# ---------------------------------------------------------- synthesis


def synth_normalizer(problem: SynthProblem, cfg: GenConfig, budget: Budget = Budget(),
                     log: SynthLog | None = None, refuted_checked: bool = False) -> Result:
    """Refute, decompose, compose, and fall back to leaf search.

    ``refuted_checked`` skips the refutation step for this problem (but not
    for its sub-problems) when the caller already ran it."""
    log = log if log is not None else SynthLog()
    f, init, path = problem.f, problem.init, problem.path
    ce = None if refuted_checked else refute_norm(f, init, cfg, budget.refute_seconds, problem.consts)
    if ce is not None:
        log.trace.append(("Norm-Refute-1" if ce.kind == NORM1 else "Norm-Refute-2") + f"@{path}")
        return Refuted(ce, path)
    dec = decompose(f)
    log.decompositions.append((path, dec))
    log.trace.extend(dec.rules)
    root = dec.root
    if isinstance(root, TupleD):
        return _product(problem, dec, cfg, budget, log)
    if isinstance(root, CollIterFree) and is_identity(root.destructor):
        return _coll(problem, root, cfg, budget, log)
    return _leaf(problem, [], cfg, budget, log)


def _product(problem: SynthProblem, dec: Decomposition, cfg: GenConfig, budget: Budget, log: SynthLog) -> Result:
    root = dec.root
    assert isinstance(root, TupleD)
    canon = convert_back(dec)
    assert isinstance(canon, Lam) and isinstance(canon.body, TupleE)
    st = problem.state_type
    assert isinstance(st, TupleT) and isinstance(problem.init, TupleV)
    solved: list[tuple[Normalizer, tuple[int, ...]]] = []
    complete = True
    for g in root.slot_list():
        sub = sub_problem(problem, canon, g)
        r = synth_normalizer(sub, cfg, budget, log)
        if isinstance(r, Normalizer):
            solved.append((r, g))
        else:
            complete = False
    if complete:
        log.trace.append(f"Norm-Product@{problem.path}")
        n = compose_product(solved, st)
        if verify_normalizer(problem.f, problem.init, n.h, cfg, problem.consts, budget.commutative) is None:
            return n
        log.trace.append(f"Norm-Product-Rejected@{problem.path}")
    log.trace.append(f"Fallback@{problem.path}")
    return _leaf(problem, solved, cfg, budget, log)


def sub_problem(problem: SynthProblem, canon: Lam, g: tuple[int, ...]) -> SynthProblem:
    """Accumulator for the components ``g`` of a tuple state, read off the
    standard form ``canon`` whose body is a tuple."""
    (s, st), row = canon.params
    assert isinstance(st, TupleT) and isinstance(canon.body, TupleE) and isinstance(problem.init, TupleV)
    names = NameSupply(all_names(canon))
    items = canon.body.items
    if len(g) == 1:
        v = names.fresh(f"s{g[0]}")
        vt = st.elems[g[0] - 1]
        body = _rename_proj(items[g[0] - 1], s, {g[0]: Var(v)})
        init = problem.init.items[g[0] - 1]
    else:
        v = names.fresh("s" + "".join(map(str, g)))
        vt = TupleT(tuple(st.elems[i - 1] for i in g))
        mapping = {i: Proj(k, Var(v)) for k, i in enumerate(g, start=1)}
        body = TupleE(tuple(_rename_proj(items[i - 1], s, mapping) for i in g))
        init = TupleV(tuple(problem.init.items[i - 1] for i in g))
    idx, bare = _proj_uses(body, s)
    if idx or bare:
        raise AssertionError(f"component group {g} still reads the whole state")
    path = f"{problem.path}.{'_'.join(map(str, g))}"
    return SynthProblem(check_lambda(Lam(((v, vt), row), body), {}), init, path, problem.consts)


def _coll(problem: SynthProblem, root: CollIterFree, cfg: GenConfig, budget: Budget, log: SynthLog) -> Result:
    st = problem.state_type
    (s, _), (x, xt) = problem.f.params
    if not isinstance(st, (MapT, ListT)) or root.guard != TOP:
        return _leaf(problem, [], cfg, budget, log)
    body = convert_expr(root.body, s)
    names = NameSupply(all_names(problem.f) | all_names(body))
    r = names.fresh("r")
    if isinstance(st, MapT):
        (kname, key_t), (vname, val_t) = root.binders
        mapping = {kname: Proj(1, Var(r)), x: Proj(2, Var(r))}
    else:
        ((vname, val_t),) = root.binders
        key_t = INT
        mapping = {x: Proj(2, Var(r))}
    child_f = Lam(((vname, val_t), (r, TupleT((key_t, xt)))), substitute(body, mapping))
    if root.touch is not None:
        try:
            elem_default = eval_expr(root.touch.default)
        except EvalError:
            return _leaf(problem, [], cfg, budget, log)
    else:
        elem_default = default_value(val_t)
    child = SynthProblem(check_lambda(child_f, {}), elem_default, f"{problem.path}.elem", problem.consts)
    res = synth_normalizer(child, cfg, budget, log)
    if isinstance(res, Normalizer):
        log.trace.append(f"Norm-Coll@{problem.path}")
        n = compose_coll(res, elem_default, st)
        if verify_normalizer(problem.f, problem.init, n.h, cfg, problem.consts, budget.commutative) is None:
            return n
        log.trace.append(f"Norm-Coll-Rejected@{problem.path}")
    log.trace.append(f"Fallback@{problem.path}")
    return _leaf(problem, [], cfg, budget, log)


def _leaf(problem: SynthProblem, solved: list[tuple[Normalizer, tuple[int, ...]]], cfg: GenConfig,
          budget: Budget, log: SynthLog) -> Result:
    from .leaf import synth_leaf  # leaf builds on this module

    log.leaf_problems.append((problem, tuple(solved)))
    res = synth_leaf(problem, cfg, budget, solved)
    if isinstance(res, Normalizer):
        log.trace.append(f"Norm-Synth@{problem.path}")
        if solved:
            res = Normalizer(res.h, Provenance("Fallback", (res.provenance,) + tuple(n.provenance for n, _ in solved)))
    else:
        log.trace.append(f"Norm-Synth-Failed@{problem.path}")
    return res


__all__ = [
    "Budget",
    "Normalizer",
    "Provenance",
    "Refuted",
    "SynthLog",
    "SynthProblem",
    "Unknown",
    "compose_coll",
    "compose_product",
    "reachable_states",
    "sub_problem",
    "synth_normalizer",
    "verify_normalizer",
]
