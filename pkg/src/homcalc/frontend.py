"""S-expression surface syntax: reader, parser, printer and type checker."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from typing import Union as TUnion

from .core import (
    BOOL,
    DFT,
    FLOAT,
    INT,
    NULL_T,
    STR,
    BoolT,
    BoolV,
    FloatT,
    FloatV,
    FnT,
    HomcalcError,
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
    UnsupportedTypeError,
    Value,
    check_int,
    contains_fn_or_df,
    has_type,
    is_collection_type,
    is_key_type,
)
from .syntax import (
    ARITY,
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
    Project,
    Select,
    SetEmpty,
    TupleE,
    Union,
    Update,
    Var,
    Zip,
)


class ParseError(HomcalcError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col


class TypeCheckError(HomcalcError):
    pass


# --------------------------------------------------------------- reader


@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    col: int
    is_string: bool = False


@dataclass(frozen=True)
class SList:
    items: tuple[TUnion[Atom, "SList"], ...]
    line: int
    col: int


SExpr = TUnion[Atom, SList]

_TOKEN = re.compile(r'\s+|;[^\n]*|\(|\)|"(?:[^"\\]|\\.)*"|[^\s()";]+')


def read_all(text: str) -> list[SExpr]:
    stack: list[list[SExpr]] = [[]]
    opens: list[tuple[int, int]] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError("unterminated string or bad character", line, col)
        tok = m.group(0)
        if tok == "(":
            stack.append([])
            opens.append((line, col))
        elif tok == ")":
            if len(stack) == 1:
                raise ParseError("unexpected ')'", line, col)
            items = stack.pop()
            oline, ocol = opens.pop()
            stack[-1].append(SList(tuple(items), oline, ocol))
        elif tok[0] == '"':
            try:
                s = json.loads(tok)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad string literal: {exc.msg}", line, col) from None
            stack[-1].append(Atom(s, line, col, True))
        elif not tok.isspace() and tok[0] != ";":
            stack[-1].append(Atom(tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = pos + tok.rfind("\n") + 1
        pos = m.end()
    if len(stack) != 1:
        oline, ocol = opens[-1]
        raise ParseError("unclosed '('", oline, ocol)
    return stack[0]


# --------------------------------------------------------------- parser


def _err(node: SExpr, msg: str) -> ParseError:
    return ParseError(msg, node.line, node.col)


def _sym(node: SExpr) -> str:
    if not isinstance(node, Atom) or node.is_string:
        raise _err(node, "expected a symbol")
    return node.text


def _head(node: SExpr) -> str | None:
    if isinstance(node, SList) and node.items and isinstance(node.items[0], Atom):
        a = node.items[0]
        return None if a.is_string else a.text
    return None


def _want(node: SList, n: int) -> None:
    if len(node.items) != n + 1:
        raise _err(node, f"'{_head(node)}' expects {n} argument(s)")


def parse_type(node: SExpr) -> Type:
    if isinstance(node, Atom):
        scalars = {"int": INT, "bool": BOOL, "float": FLOAT, "str": STR, "null": NULL_T}
        if node.text in scalars and not node.is_string:
            return scalars[node.text]
        raise _err(node, f"unknown type '{node.text}'")
    h = _head(node)
    args = node.items[1:]
    try:
        if h == "tuple":
            return TupleT(tuple(parse_type(a) for a in args))
        if h == "list":
            _want(node, 1)
            return ListT(parse_type(args[0]))
        if h == "set":
            _want(node, 1)
            return SetT(parse_type(args[0]))
        if h == "map":
            _want(node, 2)
            return MapT(parse_type(args[0]), parse_type(args[1]))
        if h == "df":
            _want(node, 1)
            return DFT(parse_type(args[0]))
        if h == "fn":
            _want(node, 2)
            ps = args[0]
            if not isinstance(ps, SList):
                raise _err(ps, "expected parameter type list")
            return FnT(tuple(parse_type(p) for p in ps.items), parse_type(args[1]))
    except UnsupportedTypeError as exc:
        raise _err(node, str(exc)) from None
    raise _err(node, "malformed type")


def _parse_literal(kind: str, node: SList) -> Const:
    _want(node, 1)
    a = node.items[1]
    if not isinstance(a, Atom):
        raise _err(node, f"bad {kind} literal")
    try:
        if kind == "int" and not a.is_string:
            return Const(check_int(int(a.text)), INT)
        if kind == "float" and not a.is_string:
            return Const(FloatV(float(a.text)), FLOAT)
        if kind == "bool" and a.text in ("true", "false") and not a.is_string:
            return Const(BoolV(a.text == "true"), BOOL)
        if kind == "str" and a.is_string:
            return Const(StrV(a.text), STR)
    except (ValueError, HomcalcError):
        pass
    raise _err(a, f"bad {kind} literal")


def parse_lambda(node: SExpr) -> Lam:
    if _head(node) != "lambda":
        raise _err(node, "expected (lambda ((name type) ...) body)")
    assert isinstance(node, SList)
    _want(node, 2)
    ps = node.items[1]
    if not isinstance(ps, SList):
        raise _err(ps, "expected parameter list")
    params = []
    for p in ps.items:
        if not isinstance(p, SList) or len(p.items) != 2:
            raise _err(p, "expected (name type)")
        params.append((_sym(p.items[0]), parse_type(p.items[1])))
    return Lam(tuple(params), parse_expr(node.items[2]))


_SIMPLE = {
    "ite": (3, lambda a: Ite(*a)),
    "update": (3, lambda a: Update(*a)),
    "append": (2, lambda a: Append(*a)),
    "insert": (2, lambda a: Insert(*a)),
    "union": (2, lambda a: Union(*a)),
    "outer-join": (2, lambda a: OuterJoin(*a)),
    "zip": (2, lambda a: Zip(*a)),
}


def parse_expr(node: SExpr) -> Expr:
    if isinstance(node, Atom):
        if node.is_string:
            raise _err(node, "string literals are written (str \"...\")")
        return Var(node.text)
    h = _head(node)
    if h is None:
        raise _err(node, "expected an operator")
    args = node.items[1:]
    if h in ("int", "float", "bool", "str"):
        return _parse_literal(h, node)
    if h == "default":
        _want(node, 1)
        return Default(parse_type(args[0]))
    if h == "lambda":
        return parse_lambda(node)
    if h in ARITY:
        _want(node, ARITY[h])
        return App(h, tuple(parse_expr(a) for a in args))
    if h in _SIMPLE:
        n, build = _SIMPLE[h]
        _want(node, n)
        return build([parse_expr(a) for a in args])
    if h == "getOrElse":
        _want(node, 3)
        m, k, d = (parse_expr(a) for a in args)
        return Ite(App("contains", (m, k)), App("get", (m, k)), d)
    if h == "call":
        if len(args) < 1:
            raise _err(node, "call needs a function")
        return Call(parse_lambda(args[0]), tuple(parse_expr(a) for a in args[1:]))
    if h == "fold":
        _want(node, 3)
        return Fold(parse_lambda(args[0]), parse_expr(args[1]), parse_expr(args[2]))
    if h == "tuple":
        if len(args) < 2:
            raise _err(node, "tuples need at least two elements")
        return TupleE(tuple(parse_expr(a) for a in args))
    if h == "proj":
        _want(node, 2)
        a0 = args[0]
        if not isinstance(a0, Atom) or not a0.text.isdigit():
            raise _err(a0, "projection index must be a positive integer")
        return Proj(int(a0.text), parse_expr(args[1]))
    if h == "map-empty":
        _want(node, 2)
        try:
            return MapEmpty(parse_type(args[0]), parse_type(args[1]))
        except UnsupportedTypeError as exc:
            raise _err(node, str(exc)) from None
    if h == "list-empty":
        _want(node, 1)
        return ListEmpty(parse_type(args[0]))
    if h == "set-empty":
        _want(node, 1)
        return SetEmpty(parse_type(args[0]))
    if h == "convert":
        _want(node, 2)
        target = _sym(args[0])
        if target not in ("list", "map", "set"):
            raise _err(args[0], "convert target must be list, map or set")
        return Convert(target, parse_expr(args[1]))
    if h == "map":
        _want(node, 2)
        return MapHO(parse_lambda(args[0]), parse_expr(args[1]))
    if h == "filter":
        _want(node, 2)
        return FilterHO(parse_lambda(args[0]), parse_expr(args[1]))
    raise _err(node, f"unknown form '{h}'")


def parse_program(node: SExpr) -> Program:
    if _head(node) != "program":
        raise _err(node, "expected (program ...)")
    assert isinstance(node, SList)
    forms = list(node.items[1:])
    if not forms or _head(forms[0]) != "input":
        raise _err(node, "program must start with (input name (df (label type) ...))")
    inp = forms[0]
    assert isinstance(inp, SList)
    _want(inp, 2)
    name = _sym(inp.items[1])
    schema = inp.items[2]
    if _head(schema) != "df" or not isinstance(schema, SList) or len(schema.items) < 2:
        raise _err(schema, "expected (df (label type) ...)")
    columns = []
    for c in schema.items[1:]:
        if not isinstance(c, SList) or len(c.items) != 2:
            raise _err(c, "expected (label type)")
        t = parse_type(c.items[1])
        if contains_fn_or_df(t):
            raise _err(c, "columns cannot hold functions or dataframes")
        columns.append((_sym(c.items[0]), t))
    steps: list[Select | Project] = []
    agg = None
    for form in forms[1:]:
        h = _head(form)
        if agg is not None:
            raise _err(form, "aggregate must be the last form")
        if h == "select":
            assert isinstance(form, SList)
            _want(form, 1)
            steps.append(Select(parse_lambda(form.items[1])))
        elif h == "project":
            assert isinstance(form, SList)
            _want(form, 1)
            steps.append(Project(parse_lambda(form.items[1])))
        elif h == "aggregate":
            assert isinstance(form, SList)
            _want(form, 2)
            agg = (parse_lambda(form.items[1]), parse_expr(form.items[2]))
        else:
            raise _err(form, "expected select, project or aggregate")
    if agg is None:
        raise _err(node, "program has no aggregate")
    f, init = agg
    if len(f.params) != 2:
        raise _err(node, "the accumulator takes exactly two parameters (state, row)")
    return Program(name, tuple(columns), tuple(steps), f, init)


def parse(text: str) -> Program | Expr:
    """Parse one program or one expression."""
    forms = read_all(text)
    if len(forms) != 1:
        if not forms:
            raise ParseError("empty input")
        raise _err(forms[1], "expected exactly one top-level form")
    form = forms[0]
    if _head(form) == "program":
        return parse_program(form)
    return parse_expr(form)


def parse_program_text(text: str) -> Program:
    p = parse(text)
    if not isinstance(p, Program):
        raise ParseError("expected a (program ...) form")
    return p


# -------------------------------------------------------------- printer


def show_type(t: Type) -> str:
    return str(t)


def show_value(v: Value, t: Type) -> str:
    """Print a value as a DSL expression of type ``t``."""
    if isinstance(v, IntV):
        return f"(int {v.v})"
    if isinstance(v, BoolV):
        return f"(bool {'true' if v.v else 'false'})"
    if isinstance(v, FloatV):
        return f"(float {v.v!r})"
    if isinstance(v, StrV):
        return f"(str {json.dumps(v.v, ensure_ascii=False)})"
    if isinstance(v, TupleV) and isinstance(t, TupleT):
        return "(tuple " + " ".join(show_value(i, e) for i, e in zip(v.items, t.elems)) + ")"
    if isinstance(v, ListV) and isinstance(t, ListT):
        out = f"(list-empty {t.elem})"
        for i in v.items:
            out = f"(append {out} {show_value(i, t.elem)})"
        return out
    if isinstance(v, SetV) and isinstance(t, SetT):
        out = f"(set-empty {t.elem})"
        for i in v.items:
            out = f"(insert {out} {show_value(i, t.elem)})"
        return out
    if isinstance(v, MapV) and isinstance(t, MapT):
        out = f"(map-empty {t.key} {t.val})"
        for k, x in v.entries:
            out = f"(update {out} {show_value(k, t.key)} {show_value(x, t.val)})"
        return out
    raise TypeCheckError(f"cannot print {v} as {t}")


def show_lambda(f: Lam) -> str:
    ps = " ".join(f"({n} {t})" for n, t in f.params)
    return f"(lambda ({ps}) {show(f.body)})"


def show(e: Expr) -> str:
    """Canonical one-line rendering; ``parse(show(e))`` rebuilds ``e``."""
    if isinstance(e, Const):
        return show_value(e.value, e.type_)
    if isinstance(e, Default):
        return f"(default {e.type_})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Lam):
        return show_lambda(e)
    if isinstance(e, App):
        return "(" + " ".join([e.op, *map(show, e.args)]) + ")"
    if isinstance(e, Call):
        return "(call " + " ".join([show_lambda(e.fn), *map(show, e.args)]) + ")"
    if isinstance(e, Ite):
        return f"(ite {show(e.cond)} {show(e.then)} {show(e.els)})"
    if isinstance(e, Fold):
        return f"(fold {show_lambda(e.fn)} {show(e.init)} {show(e.coll)})"
    if isinstance(e, TupleE):
        return "(tuple " + " ".join(map(show, e.items)) + ")"
    if isinstance(e, Proj):
        return f"(proj {e.index} {show(e.expr)})"
    if isinstance(e, MapEmpty):
        return f"(map-empty {e.key} {e.val})"
    if isinstance(e, Update):
        return f"(update {show(e.m)} {show(e.k)} {show(e.v)})"
    if isinstance(e, ListEmpty):
        return f"(list-empty {e.elem})"
    if isinstance(e, Append):
        return f"(append {show(e.lst)} {show(e.elem)})"
    if isinstance(e, SetEmpty):
        return f"(set-empty {e.elem})"
    if isinstance(e, Insert):
        return f"(insert {show(e.s)} {show(e.elem)})"
    if isinstance(e, Union):
        return f"(union {show(e.a)} {show(e.b)})"
    if isinstance(e, OuterJoin):
        return f"(outer-join {show(e.m1)} {show(e.m2)})"
    if isinstance(e, Convert):
        return f"(convert {e.target} {show(e.coll)})"
    if isinstance(e, MapHO):
        return f"(map {show_lambda(e.fn)} {show(e.coll)})"
    if isinstance(e, FilterHO):
        return f"(filter {show_lambda(e.pred)} {show(e.coll)})"
    if isinstance(e, Zip):
        return f"(zip {show(e.a)} {show(e.b)})"
    raise TypeError(f"cannot print {e!r}")


def show_program(p: Program) -> str:
    cols = " ".join(f"({n} {t})" for n, t in p.columns)
    lines = ["(program", f"  (input {p.input_name} (df {cols}))"]
    for s in p.pipeline:
        if isinstance(s, Select):
            lines.append(f"  (select {show_lambda(s.pred)})")
        else:
            lines.append(f"  (project {show_lambda(s.fn)})")
    lines.append(f"  (aggregate {show_lambda(p.f)}")
    lines.append(f"    {show(p.init)}))")
    return "\n".join(lines)


# ----------------------------------------------------------- typechecker

TypeEnv = dict[str, Type]


def _fail(msg: str) -> TypeCheckError:
    return TypeCheckError(msg)


def _expect(t: Type | None, want: Type, what: str) -> None:
    if t != want:
        raise _fail(f"{what}: expected {want}, got {t}")


def check_lambda(f: Lam, env: TypeEnv, arg_types: tuple[Type, ...] | None = None) -> Lam:
    if arg_types is not None:
        if len(arg_types) != len(f.params):
            raise _fail(f"lambda expects {len(f.params)} argument(s), used with {len(arg_types)}")
        for (n, t), a in zip(f.params, arg_types):
            if t != a:
                raise _fail(f"parameter {n}: declared {t}, applied to {a}")
    inner = dict(env)
    for n, t in f.params:
        inner[n] = t
    body = check_expr(f.body, inner)
    return Lam(f.params, body, FnT(tuple(t for _, t in f.params), body.ty))


def _elem_args(coll: Type) -> tuple[Type, ...]:
    if isinstance(coll, (ListT, SetT)):
        return (coll.elem,)
    if isinstance(coll, MapT):
        return (coll.key, coll.val)
    raise _fail(f"expected a collection, got {coll}")


def _op_type(op: str, ts: list[Type]) -> Type:
    a = ts[0]
    b = ts[1] if len(ts) > 1 else None
    numeric = (IntT, FloatT)
    if op in ("+", "-", "*", "/", "max", "min"):
        if isinstance(a, numeric) and a == b:
            return a
        raise _fail(f"'{op}' needs two ints or two floats, got {a} and {b}")
    if op in ("<", ">"):
        if isinstance(a, (IntT, FloatT, StrT)) and a == b:
            return BOOL
        raise _fail(f"'{op}' needs comparable operands of one type, got {a} and {b}")
    if op == "=":
        if a == b and not isinstance(a, FnT):
            return BOOL
        raise _fail(f"'=' needs operands of one type, got {a} and {b}")
    if op in ("and", "or"):
        if isinstance(a, BoolT) and isinstance(b, BoolT):
            return BOOL
        raise _fail(f"'{op}' needs booleans")
    if op == "not":
        if isinstance(a, BoolT):
            return BOOL
        raise _fail("'not' needs a boolean")
    if op == "concat":
        if a == b and isinstance(a, (StrT, ListT)):
            return a
        raise _fail(f"'concat' needs two strings or two lists of one type, got {a} and {b}")
    if op == "len":
        if isinstance(a, StrT) or is_collection_type(a):
            return INT
        raise _fail(f"'len' needs a string or collection, got {a}")
    if op == "get":
        if isinstance(a, MapT) and a.key == b:
            return a.val
        raise _fail(f"'get' needs a map and a key of its key type, got {a} and {b}")
    if op == "contains":
        if isinstance(a, MapT) and a.key == b:
            return BOOL
        if isinstance(a, SetT) and a.elem == b:
            return BOOL
        raise _fail(f"'contains' needs a map or set and a matching key, got {a} and {b}")
    if op == "fill":
        if a == b:
            return a
        raise _fail(f"'fill' needs a value and a default of one type, got {a} and {b}")
    raise _fail(f"unknown operator {op}")


def check_expr(e: Expr, env: TypeEnv) -> Expr:
    """Return a copy of ``e`` with every node's ``ty`` filled in."""
    if isinstance(e, Const):
        if not has_type(e.value, e.type_):
            raise _fail(f"constant {e.value} is not a {e.type_}")
        return replace(e, ty=e.type_)
    if isinstance(e, Default):
        if contains_fn_or_df(e.type_):
            raise _fail(f"no default for {e.type_}")
        return replace(e, ty=e.type_)
    if isinstance(e, Var):
        if e.name not in env:
            raise _fail(f"unbound variable '{e.name}'")
        return replace(e, ty=env[e.name])
    if isinstance(e, Lam):
        return check_lambda(e, env)
    if isinstance(e, App):
        args = tuple(check_expr(a, env) for a in e.args)
        if len(args) != ARITY.get(e.op, -1):
            raise _fail(f"'{e.op}' applied to {len(args)} argument(s)")
        return App(e.op, args, _op_type(e.op, [a.ty for a in args]))
    if isinstance(e, Call):
        args = tuple(check_expr(a, env) for a in e.args)
        fn = check_lambda(e.fn, env, tuple(a.ty for a in args))
        assert isinstance(fn.ty, FnT)
        return Call(fn, args, fn.ty.ret)
    if isinstance(e, Ite):
        c = check_expr(e.cond, env)
        _expect(c.ty, BOOL, "ite condition")
        t = check_expr(e.then, env)
        f = check_expr(e.els, env)
        if t.ty != f.ty:
            raise _fail(f"ite branches differ: {t.ty} vs {f.ty}")
        return Ite(c, t, f, t.ty)
    if isinstance(e, Fold):
        init = check_expr(e.init, env)
        coll = check_expr(e.coll, env)
        fn = check_lambda(e.fn, env, (init.ty, *_elem_args(coll.ty)))
        assert isinstance(fn.ty, FnT)
        _expect(fn.ty.ret, init.ty, "fold function result")
        return Fold(fn, init, coll, init.ty)
    if isinstance(e, TupleE):
        items = tuple(check_expr(i, env) for i in e.items)
        if len(items) < 2:
            raise _fail("tuples need at least two elements")
        return TupleE(items, TupleT(tuple(i.ty for i in items)))
    if isinstance(e, Proj):
        inner = check_expr(e.expr, env)
        if not isinstance(inner.ty, TupleT):
            raise _fail(f"proj applied to non-tuple {inner.ty}")
        if not 1 <= e.index <= len(inner.ty.elems):
            raise _fail(f"proj {e.index} out of range for {inner.ty}")
        return Proj(e.index, inner, inner.ty.elems[e.index - 1])
    if isinstance(e, MapEmpty):
        return replace(e, ty=MapT(e.key, e.val))
    if isinstance(e, Update):
        m = check_expr(e.m, env)
        k = check_expr(e.k, env)
        v = check_expr(e.v, env)
        if not isinstance(m.ty, MapT) or m.ty.key != k.ty or m.ty.val != v.ty:
            raise _fail(f"update types do not line up: {m.ty}, {k.ty}, {v.ty}")
        return Update(m, k, v, m.ty)
    if isinstance(e, ListEmpty):
        return replace(e, ty=ListT(e.elem))
    if isinstance(e, Append):
        lst = check_expr(e.lst, env)
        x = check_expr(e.elem, env)
        if not isinstance(lst.ty, ListT) or lst.ty.elem != x.ty:
            raise _fail(f"append types do not line up: {lst.ty}, {x.ty}")
        return Append(lst, x, lst.ty)
    if isinstance(e, SetEmpty):
        return replace(e, ty=SetT(e.elem))
    if isinstance(e, Insert):
        s = check_expr(e.s, env)
        x = check_expr(e.elem, env)
        if not isinstance(s.ty, SetT) or s.ty.elem != x.ty:
            raise _fail(f"insert types do not line up: {s.ty}, {x.ty}")
        return Insert(s, x, s.ty)
    if isinstance(e, Union):
        a = check_expr(e.a, env)
        b = check_expr(e.b, env)
        if not isinstance(a.ty, SetT) or a.ty != b.ty:
            raise _fail(f"union needs two sets of one type, got {a.ty}, {b.ty}")
        return Union(a, b, a.ty)
    if isinstance(e, OuterJoin):
        a = check_expr(e.m1, env)
        b = check_expr(e.m2, env)
        if not (isinstance(a.ty, MapT) and isinstance(b.ty, MapT) and a.ty.key == b.ty.key):
            raise _fail(f"outer-join needs two maps with one key type, got {a.ty}, {b.ty}")
        return OuterJoin(a, b, MapT(a.ty.key, TupleT((a.ty.val, b.ty.val))))
    if isinstance(e, Convert):
        c = check_expr(e.coll, env)
        return Convert(e.target, c, convert_type(e.target, c.ty))
    if isinstance(e, MapHO):
        c = check_expr(e.coll, env)
        fn = check_lambda(e.fn, env, _elem_args(c.ty))
        assert isinstance(fn.ty, FnT)
        r = fn.ty.ret
        if isinstance(c.ty, ListT):
            out: Type = ListT(r)
        elif isinstance(c.ty, SetT):
            out = SetT(r)
        else:
            assert isinstance(c.ty, MapT)
            out = MapT(c.ty.key, r)
        return MapHO(fn, c, out)
    if isinstance(e, FilterHO):
        c = check_expr(e.coll, env)
        fn = check_lambda(e.pred, env, _elem_args(c.ty))
        assert isinstance(fn.ty, FnT)
        _expect(fn.ty.ret, BOOL, "filter predicate")
        return FilterHO(fn, c, c.ty)
    if isinstance(e, Zip):
        a = check_expr(e.a, env)
        b = check_expr(e.b, env)
        if not (isinstance(a.ty, ListT) and isinstance(b.ty, ListT)):
            raise _fail(f"zip needs two lists, got {a.ty}, {b.ty}")
        return Zip(a, b, ListT(TupleT((a.ty.elem, b.ty.elem))))
    raise _fail(f"unknown expression {e!r}")


def convert_type(target: str, src: Type) -> Type:
    """Result type of a collection conversion; only the canonical embeddings
    (list/set into map and back) and identities are allowed."""
    if target == "map":
        if isinstance(src, ListT):
            return MapT(INT, src.elem)
        if isinstance(src, SetT) and is_key_type(src.elem):
            return MapT(src.elem, NULL_T)
        if isinstance(src, MapT):
            return src
    if target == "list":
        if isinstance(src, MapT) and isinstance(src.key, IntT):
            return ListT(src.val)
        if isinstance(src, ListT):
            return src
    if target == "set":
        if isinstance(src, MapT):
            return SetT(src.key)
        if isinstance(src, SetT):
            return src
    raise _fail(f"invalid conversion of {src} to {target}")


def _row_ok(t: Type) -> bool:
    return not contains_fn_or_df(t) and not isinstance(t, NullT)


def typecheck(node: Program | Expr, env: TypeEnv | None = None) -> Program | Expr:
    if isinstance(node, Expr):
        return check_expr(node, dict(env or {}))
    p = node
    row: Type = p.input_type.row
    steps: list[Select | Project] = []
    for s in p.pipeline:
        if isinstance(s, Select):
            pred = check_lambda(s.pred, {}, (row,))
            assert isinstance(pred.ty, FnT)
            _expect(pred.ty.ret, BOOL, "select predicate")
            steps.append(Select(pred))
        else:
            fn = check_lambda(s.fn, {}, (row,))
            assert isinstance(fn.ty, FnT)
            if not _row_ok(fn.ty.ret):
                raise _fail(f"project yields invalid row type {fn.ty.ret}")
            row = fn.ty.ret
            steps.append(Project(fn))
    if len(p.f.params) != 2:
        raise _fail("the accumulator takes (state, row)")
    state_t = p.f.params[0][1]
    f = check_lambda(p.f, {}, (state_t, row))
    assert isinstance(f.ty, FnT)
    _expect(f.ty.ret, state_t, "accumulator result")
    init = check_expr(p.init, {})
    _expect(init.ty, state_t, "initial value")
    return Program(p.input_name, p.columns, tuple(steps), f, init)


def check_program(p: Program) -> Program:
    out = typecheck(p)
    assert isinstance(out, Program)
    return out


def load_program(text: str) -> Program:
    """Parse and type-check a program."""
    return check_program(parse_program_text(text))

