"""Big-step evaluator.

Expressions are compiled once into Python closures (cached on the node) and
then run against an environment dict. ITE is the only lazy construct.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Mapping

from .core import (
    FALSE,
    NULL,
    TRUE,
    BoolV,
    DataFrame,
    EvalError,
    FloatV,
    IntV,
    ListV,
    MapV,
    NullV,
    SetV,
    StrV,
    TupleV,
    Value,
    check_int,
    default_value,
    make_map,
    make_set,
    order_key,
)
from .syntax import (
    App,
    Append,
    Call,
    Const,
    Convert,
    Default,
    Expr,
    FilterHO,
    Fold,
    Insert,
    Ite,
    Lam,
    ListEmpty,
    MapEmpty,
    MapHO,
    OuterJoin,
    Program,
    Proj,
    Select,
    SetEmpty,
    TupleE,
    Union,
    Update,
    Var,
    Zip,
)

DEFAULT_FUEL = 10**7

Env = Mapping[str, Value]
Code = Callable[[dict], Value]


class _Fuel(threading.local):
    left: int = DEFAULT_FUEL


_fuel = _Fuel()


def _tick(n: int = 1) -> None:
    _fuel.left -= n
    if _fuel.left < 0:
        raise EvalError("fuel", "evaluation step limit exhausted")


class fuel_limit:
    """Context manager that resets the step budget for one evaluation."""

    def __init__(self, steps: int = DEFAULT_FUEL):
        self.steps = steps

    def __enter__(self) -> None:
        self.saved = _fuel.left
        _fuel.left = self.steps

    def __exit__(self, *exc: object) -> None:
        _fuel.left = self.saved


# ------------------------------------------------------------- builtins


def _num(op: str) -> Callable[[Value, Value], Value]:
    def f(a: Value, b: Value) -> Value:
        if isinstance(a, IntV) and isinstance(b, IntV):
            x, y = a.v, b.v
            if op == "+":
                return check_int(x + y)
            if op == "-":
                return check_int(x - y)
            if op == "*":
                return check_int(x * y)
            if y == 0:
                raise EvalError("div0", "integer division by zero")
            q = abs(x) // abs(y)
            return check_int(q if (x >= 0) == (y >= 0) else -q)
        if isinstance(a, FloatV) and isinstance(b, FloatV):
            x2, y2 = a.v, b.v
            if op == "+":
                return FloatV(x2 + y2)
            if op == "-":
                return FloatV(x2 - y2)
            if op == "*":
                return FloatV(x2 * y2)
            if y2 == 0.0:
                raise EvalError("div0", "float division by zero")
            return FloatV(x2 / y2)
        raise EvalError("type", f"'{op}' on {a} and {b}")

    return f


def _less(a: Value, b: Value) -> bool:
    if isinstance(a, (IntV, FloatV, StrV)) and type(a) is type(b):
        return a.v < b.v  # type: ignore[attr-defined]
    raise EvalError("type", f"cannot compare {a} and {b}")


def op_max(a: Value, b: Value) -> Value:
    return b if _less(a, b) else a


def op_min(a: Value, b: Value) -> Value:
    return b if _less(b, a) else a


def op_concat(a: Value, b: Value) -> Value:
    if isinstance(a, StrV) and isinstance(b, StrV):
        return StrV(a.v + b.v)
    if isinstance(a, ListV) and isinstance(b, ListV):
        return ListV(a.items + b.items)
    raise EvalError("type", f"concat on {a} and {b}")


def op_len(a: Value) -> Value:
    if isinstance(a, StrV):
        return IntV(len(a.v))
    if isinstance(a, (ListV, SetV)):
        return IntV(len(a.items))
    if isinstance(a, MapV):
        return IntV(len(a.entries))
    raise EvalError("type", f"len of {a}")


def op_get(m: Value, k: Value) -> Value:
    if isinstance(m, MapV):
        for key, v in m.entries:
            if key == k:
                return v
        raise EvalError("absent-key", f"{k} not in {m}")
    raise EvalError("type", f"get on {m}")


def op_contains(m: Value, k: Value) -> Value:
    if isinstance(m, MapV):
        return TRUE if any(key == k for key, _ in m.entries) else FALSE
    if isinstance(m, SetV):
        return TRUE if k in m.items else FALSE
    raise EvalError("type", f"contains on {m}")


def op_fill(v: Value, d: Value) -> Value:
    return d if isinstance(v, NullV) else v


def _bool(x: Value) -> bool:
    if isinstance(x, BoolV):
        return x.v
    if isinstance(x, NullV):
        raise EvalError("null", "null used as a boolean")
    raise EvalError("type", f"expected boolean, got {x}")


def op_update(m: Value, k: Value, v: Value) -> Value:
    assert isinstance(m, MapV)
    entries = [(key, x) for key, x in m.entries if key != k]
    entries.append((k, v))
    return make_map(entries)


def op_append(lst: Value, x: Value) -> Value:
    assert isinstance(lst, ListV)
    return ListV(lst.items + (x,))


def op_insert(s: Value, x: Value) -> Value:
    assert isinstance(s, SetV)
    if x in s.items:
        return s
    return make_set(s.items + (x,))


def op_union(a: Value, b: Value) -> Value:
    assert isinstance(a, SetV) and isinstance(b, SetV)
    return make_set(a.items + b.items)


def op_outer_join(a: Value, b: Value) -> Value:
    assert isinstance(a, MapV) and isinstance(b, MapV)
    left = dict(a.entries)
    right = dict(b.entries)
    out = []
    for k in left.keys() | right.keys():
        out.append((k, TupleV((left.get(k, NULL), right.get(k, NULL)))))
    return make_map(out)


def op_convert(target: str, c: Value) -> Value:
    if target == "map":
        if isinstance(c, ListV):
            return MapV(tuple((IntV(i), x) for i, x in enumerate(c.items)))
        if isinstance(c, SetV):
            return MapV(tuple((x, NULL) for x in c.items))
        if isinstance(c, MapV):
            return c
    elif target == "list":
        if isinstance(c, MapV):
            for i, (k, _) in enumerate(c.entries):
                if k != IntV(i):
                    raise EvalError("bad-convert", "map keys are not the indices 0..n-1")
            return ListV(tuple(x for _, x in c.entries))
        if isinstance(c, ListV):
            return c
    elif target == "set":
        if isinstance(c, MapV):
            return SetV(tuple(k for k, _ in c.entries))
        if isinstance(c, SetV):
            return c
    raise EvalError("bad-convert", f"cannot convert {c} to {target}")


def _cmp(op: str) -> Callable[[Value, Value], Value]:
    if op == "<":
        return lambda a, b: TRUE if _less(a, b) else FALSE
    return lambda a, b: TRUE if _less(b, a) else FALSE


def _eq(a: Value, b: Value) -> Value:
    return TRUE if a == b else FALSE


def _and(a: Value, b: Value) -> Value:
    return TRUE if _bool(a) and _bool(b) else FALSE


def _or(a: Value, b: Value) -> Value:
    return TRUE if _bool(a) or _bool(b) else FALSE


def _not(a: Value) -> Value:
    return FALSE if _bool(a) else TRUE


OPS: dict[str, Callable[..., Value]] = {
    "+": _num("+"),
    "-": _num("-"),
    "*": _num("*"),
    "/": _num("/"),
    "<": _cmp("<"),
    ">": _cmp(">"),
    "=": _eq,
    "and": _and,
    "or": _or,
    "not": _not,
    "max": op_max,
    "min": op_min,
    "concat": op_concat,
    "len": op_len,
    "get": op_get,
    "contains": op_contains,
    "fill": op_fill,
}


def elements(c: Value) -> Iterable[tuple[Value, ...]]:
    """Arguments passed to a per-element function: (x,) or (key, value)."""
    if isinstance(c, (ListV, SetV)):
        return ((x,) for x in c.items)
    if isinstance(c, MapV):
        return c.entries
    raise EvalError("type", f"expected a collection, got {c}")


# ------------------------------------------------------------- compiler


def _compile_lambda(f: Lam) -> Callable[[dict], Callable[..., Value]]:
    """Compile ``f`` to a maker: env -> python callable over Values."""
    names = f.param_names
    body = compile_expr(f.body)
    if len(names) == 1:
        (n0,) = names

        def make1(env: dict) -> Callable[..., Value]:
            def call(a: Value) -> Value:
                _tick()
                inner = dict(env)
                inner[n0] = a
                return body(inner)

            return call

        return make1
    if len(names) == 2:
        n0, n1 = names

        def make2(env: dict) -> Callable[..., Value]:
            def call(a: Value, b: Value) -> Value:
                _tick()
                inner = dict(env)
                inner[n0] = a
                inner[n1] = b
                return body(inner)

            return call

        return make2

    def maken(env: dict) -> Callable[..., Value]:
        def call(*args: Value) -> Value:
            _tick()
            if len(args) != len(names):
                raise EvalError("type", "arity mismatch")
            inner = dict(env)
            inner.update(zip(names, args))
            return body(inner)

        return call

    return maken


def compile_expr(e: Expr) -> Code:
    cached = e.__dict__.get("_code")
    if cached is not None:
        return cached
    code = _compile(e)
    object.__setattr__(e, "_code", code)
    return code


def _compile(e: Expr) -> Code:
    if isinstance(e, Const):
        v = e.value
        return lambda env: v
    if isinstance(e, Default):
        dv = default_value(e.type_)
        return lambda env: dv
    if isinstance(e, Var):
        name = e.name

        def var(env: dict) -> Value:
            try:
                return env[name]
            except KeyError:
                raise EvalError("unbound", name) from None

        return var
    if isinstance(e, App):
        fn = OPS[e.op]
        args = [compile_expr(a) for a in e.args]
        if len(args) == 1:
            (a0,) = args
            return lambda env: fn(a0(env))
        a0, a1 = args
        return lambda env: fn(a0(env), a1(env))
    if isinstance(e, Call):
        mk = _compile_lambda(e.fn)
        cargs = [compile_expr(a) for a in e.args]
        return lambda env: mk(env)(*[a(env) for a in cargs])
    if isinstance(e, Ite):
        c, t, f = compile_expr(e.cond), compile_expr(e.then), compile_expr(e.els)
        return lambda env: t(env) if _bool(c(env)) else f(env)
    if isinstance(e, TupleE):
        items = [compile_expr(i) for i in e.items]
        return lambda env: TupleV(tuple(i(env) for i in items))
    if isinstance(e, Proj):
        idx = e.index - 1
        inner = compile_expr(e.expr)

        def proj(env: dict) -> Value:
            t = inner(env)
            if not isinstance(t, TupleV) or idx >= len(t.items):
                raise EvalError("type", f"projection {idx + 1} of {t}")
            return t.items[idx]

        return proj
    if isinstance(e, MapEmpty):
        return lambda env: MapV(())
    if isinstance(e, ListEmpty):
        return lambda env: ListV(())
    if isinstance(e, SetEmpty):
        return lambda env: SetV(())
    if isinstance(e, Update):
        m, k, v = compile_expr(e.m), compile_expr(e.k), compile_expr(e.v)
        return lambda env: op_update(m(env), k(env), v(env))
    if isinstance(e, Append):
        lst, x = compile_expr(e.lst), compile_expr(e.elem)
        return lambda env: op_append(lst(env), x(env))
    if isinstance(e, Insert):
        s, x = compile_expr(e.s), compile_expr(e.elem)
        return lambda env: op_insert(s(env), x(env))
    if isinstance(e, Union):
        a, b = compile_expr(e.a), compile_expr(e.b)
        return lambda env: op_union(a(env), b(env))
    if isinstance(e, OuterJoin):
        a, b = compile_expr(e.m1), compile_expr(e.m2)
        return lambda env: op_outer_join(a(env), b(env))
    if isinstance(e, Convert):
        target = e.target
        c = compile_expr(e.coll)
        return lambda env: op_convert(target, c(env))
    if isinstance(e, MapHO):
        mk = _compile_lambda(e.fn)
        c = compile_expr(e.coll)

        def map_ho(env: dict) -> Value:
            coll = c(env)
            fn = mk(env)
            if isinstance(coll, ListV):
                return ListV(tuple(fn(x) for x in coll.items))
            if isinstance(coll, SetV):
                return make_set(fn(x) for x in coll.items)
            if isinstance(coll, MapV):
                return MapV(tuple((k, fn(k, v)) for k, v in coll.entries))
            raise EvalError("type", f"map over {coll}")

        return map_ho
    if isinstance(e, FilterHO):
        mk = _compile_lambda(e.pred)
        c = compile_expr(e.coll)

        def filter_ho(env: dict) -> Value:
            coll = c(env)
            fn = mk(env)
            if isinstance(coll, ListV):
                return ListV(tuple(x for x in coll.items if _bool(fn(x))))
            if isinstance(coll, SetV):
                return SetV(tuple(x for x in coll.items if _bool(fn(x))))
            if isinstance(coll, MapV):
                return MapV(tuple((k, v) for k, v in coll.entries if _bool(fn(k, v))))
            raise EvalError("type", f"filter over {coll}")

        return filter_ho
    if isinstance(e, Zip):
        a, b = compile_expr(e.a), compile_expr(e.b)

        def zip_(env: dict) -> Value:
            x, y = a(env), b(env)
            assert isinstance(x, ListV) and isinstance(y, ListV)
            if len(x.items) != len(y.items):
                raise EvalError("zip-length", f"{len(x.items)} vs {len(y.items)}")
            return ListV(tuple(TupleV(p) for p in zip(x.items, y.items)))

        return zip_
    if isinstance(e, Fold):
        mk = _compile_lambda(e.fn)
        init, c = compile_expr(e.init), compile_expr(e.coll)

        def fold(env: dict) -> Value:
            acc = init(env)
            fn = mk(env)
            for args in elements(c(env)):
                acc = fn(acc, *args)
            return acc

        return fold
    if isinstance(e, Lam):
        raise EvalError("type", "a lambda is not a first-class value")
    raise EvalError("type", f"cannot evaluate {e!r}")


# ------------------------------------------------------------ entry points


def eval_expr(e: Expr, env: Env | None = None, fuel: int = DEFAULT_FUEL) -> Value:
    with fuel_limit(fuel):
        return compile_expr(e)(dict(env or {}))


def apply_fn(f: Lam, args: list[Value] | tuple[Value, ...], fuel: int = DEFAULT_FUEL) -> Value:
    if len(args) != len(f.params):
        raise EvalError("type", f"expected {len(f.params)} argument(s), got {len(args)}")
    with fuel_limit(fuel):
        return compile_expr(f.body)(dict(zip(f.param_names, args)))


def make_callable(f: Lam) -> Callable[..., Value]:
    """Fast repeated application without per-call fuel reset."""
    body = compile_expr(f.body)
    names = f.param_names

    def call(*args: Value) -> Value:
        return body(dict(zip(names, args)))

    return call


def pipeline_rows(p: Program, rows: Iterable[Value]) -> list[Value]:
    out = list(rows)
    for step in p.pipeline:
        fn = make_callable(step.pred if isinstance(step, Select) else step.fn)
        if isinstance(step, Select):
            out = [r for r in out if _bool(fn(r))]
        else:
            out = [fn(r) for r in out]
    return out


def run_program(p: Program, d: DataFrame, fuel: int = DEFAULT_FUEL) -> Value:
    if d.columns != p.columns:
        raise EvalError("schema", "dataframe does not match the program input schema")
    with fuel_limit(fuel):
        rows = pipeline_rows(p, d.rows)
        f = make_callable(p.f)
        acc = compile_expr(p.init)({})
        for r in rows:
            _tick()
            acc = f(acc, r)
        return acc


def fold_rows(f: Lam, init: Value, rows: Iterable[Value], fuel: int = DEFAULT_FUEL) -> Value:
    with fuel_limit(fuel):
        fn = make_callable(f)
        acc = init
        for r in rows:
            _tick()
            acc = fn(acc, r)
        return acc


def init_value(p: Program) -> Value:
    return eval_expr(p.init)


def sort_values(vs: Iterable[Value]) -> list[Value]:
    return sorted(vs, key=order_key)
