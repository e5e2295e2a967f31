"""SyGuS-IF v2 export of leaf normalizer problems.

Lists become sequences, sets and tuples use the native sorts, and maps are
sets of key/value tuples manipulated through a small recursive library
(``map.access``, ``map.update``, ``map.contains_key``, ``map.map_values``).
Floats are exported as reals.
"""

from __future__ import annotations

import json
import re
from fractions import Fraction

from .core import (
    BoolT,
    BoolV,
    FloatT,
    FloatV,
    HomcalcError,
    IntT,
    IntV,
    ListT,
    ListV,
    MapT,
    MapV,
    SetT,
    SetV,
    StrT,
    StrV,
    TupleT,
    TupleV,
    Type,
    Value,
    default_value,
)
from .leaf import _binary_ops, constant_terminals, literal_constants, productions, type_closure
from .syntax import App, Append, Const, Default, Expr, Insert, Ite, Proj, TupleE, Union, Update, Var
from .synth import SynthProblem


class ExportError(HomcalcError):
    pass


def sort(t: Type) -> str:
    if isinstance(t, IntT):
        return "Int"
    if isinstance(t, BoolT):
        return "Bool"
    if isinstance(t, FloatT):
        return "Real"
    if isinstance(t, StrT):
        return "String"
    if isinstance(t, TupleT):
        return "(Tuple " + " ".join(sort(e) for e in t.elems) + ")"
    if isinstance(t, ListT):
        return f"(Seq {sort(t.elem)})"
    if isinstance(t, SetT):
        return f"(Set {sort(t.elem)})"
    if isinstance(t, MapT):
        return f"(Set (Tuple {sort(t.key)} {sort(t.val)}))"
    raise ExportError(f"type {t} has no SyGuS sort")


def _mangle(t: Type) -> str:
    s = sort(t)
    return re.sub(r"[^0-9A-Za-z]+", "_", s).strip("_")


def _real(x: float) -> str:
    fr = Fraction(x)
    num, den = abs(fr.numerator), fr.denominator
    body = f"{num}.0" if den == 1 else f"(/ {num}.0 {den}.0)"
    return f"(- {body})" if fr < 0 else body


def value_term(v: Value, t: Type) -> str:
    if isinstance(v, IntV):
        return f"(- {-v.v})" if v.v < 0 else str(v.v)
    if isinstance(v, BoolV):
        return "true" if v.v else "false"
    if isinstance(v, FloatV):
        if v.v != v.v or v.v in (float("inf"), float("-inf")):
            raise ExportError("non-finite float constant")
        return _real(v.v)
    if isinstance(v, StrV):
        return '"' + v.v.replace('"', '""') + '"'
    if isinstance(v, TupleV):
        assert isinstance(t, TupleT)
        return "(tuple " + " ".join(value_term(x, e) for x, e in zip(v.items, t.elems)) + ")"
    if isinstance(v, ListV):
        assert isinstance(t, ListT)
        if not v.items:
            return f"(as seq.empty {sort(t)})"
        units = [f"(seq.unit {value_term(x, t.elem)})" for x in v.items]
        return units[0] if len(units) == 1 else "(seq.++ " + " ".join(units) + ")"
    if isinstance(v, SetV):
        assert isinstance(t, SetT)
        empty = f"(as set.empty {sort(t)})"
        if not v.items:
            return empty
        return "(set.insert " + " ".join(value_term(x, t.elem) for x in v.items) + f" {empty})"
    if isinstance(v, MapV):
        assert isinstance(t, MapT)
        empty = f"(as set.empty {sort(t)})"
        if not v.entries:
            return empty
        pairs = [f"(tuple {value_term(k, t.key)} {value_term(x, t.val)})" for k, x in v.entries]
        return "(set.insert " + " ".join(pairs) + f" {empty})"
    raise ExportError(f"cannot export value {v}")


# ------------------------------------------------------------ library


def _map_library(t: MapT) -> list[str]:
    m, k, v = sort(t), sort(t.key), sort(t.val)
    n = _mangle(t)
    e = "(set.choose m)"
    rest = f"(set.minus m (set.singleton {e}))"
    dv = value_term(default_value(t.val), t.val)
    out = [
        f"(define-fun-rec map.access_{n} ((m {m}) (k {k})) {v}\n"
        f"  (ite (= m (as set.empty {m})) {dv}\n"
        f"    (ite (= ((_ tuple.select 0) {e}) k) ((_ tuple.select 1) {e}) (map.access_{n} {rest} k))))",
        f"(define-fun-rec map.contains_key_{n} ((m {m}) (k {k})) Bool\n"
        f"  (ite (= m (as set.empty {m})) false\n"
        f"    (or (= ((_ tuple.select 0) {e}) k) (map.contains_key_{n} {rest} k))))",
        f"(define-fun map.update_{n} ((m {m}) (k {k}) (v {v})) {m}\n"
        f"  (set.insert (tuple k v) (set.minus m (set.singleton (tuple k (map.access_{n} m k))))))",
    ]
    for op in _binary_ops(t.val):
        g = _op_name(op, t.val)
        w = _OP_WORDS[op]
        out.append(
            f"(define-fun-rec map.map_values_{w}_{n} ((m {m}) (c {v})) {m}\n"
            f"  (ite (= m (as set.empty {m})) m\n"
            f"    (set.insert (tuple ((_ tuple.select 0) {e}) ({g} ((_ tuple.select 1) {e}) c))"
            f" (map.map_values_{w}_{n} {rest} c))))"
        )
        out.append(
            f"(define-fun-rec map.merge_{w}_{n} ((m {m}) (o {m})) {m}\n"
            f"  (ite (= m (as set.empty {m})) o\n"
            f"    (map.merge_{w}_{n} {rest} (map.update_{n} o ((_ tuple.select 0) {e})"
            f" ({g} ((_ tuple.select 1) {e}) (ite (map.contains_key_{n} o ((_ tuple.select 0) {e}))"
            f" (map.access_{n} o ((_ tuple.select 0) {e})) {dv}))))))"
        )
    return out


_OP_WORDS = {"+": "add", "-": "sub", "*": "mul", "max": "max", "min": "min", "and": "and", "or": "or", "concat": "concat"}

_SCALAR_HELPERS = {
    "max": "(define-fun max_{n} ((x {s}) (y {s})) {s} (ite (< x y) y x))",
    "min": "(define-fun min_{n} ((x {s}) (y {s})) {s} (ite (< y x) y x))",
}


def _op_name(op: str, t: Type) -> str:
    if op in ("max", "min"):
        return f"{op}_{_mangle(t)}"
    if op == "concat":
        return "str.++"
    if op == "/":
        return "div" if isinstance(t, IntT) else "/"
    return op


def _helpers(types: list[Type]) -> list[str]:
    out = []
    for t in types:
        if isinstance(t, (IntT, FloatT)):
            for op in ("max", "min"):
                out.append(_SCALAR_HELPERS[op].format(n=_mangle(t), s=sort(t)))
        if isinstance(t, StrT):
            out.append("(define-fun str_gt ((x String) (y String)) Bool (str.< y x))")
    for t in types:
        if isinstance(t, MapT):
            out.extend(_map_library(t))
    return out


# ------------------------------------------------------- expressions


def expr_term(e: Expr) -> str:
    """Translate a first-order DSL expression; higher-order forms are rejected."""
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Const):
        return value_term(e.value, e.type_)
    if isinstance(e, Default):
        return value_term(default_value(e.type_), e.type_)
    if isinstance(e, Ite):
        return f"(ite {expr_term(e.cond)} {expr_term(e.then)} {expr_term(e.els)})"
    if isinstance(e, TupleE):
        return "(tuple " + " ".join(expr_term(i) for i in e.items) + ")"
    if isinstance(e, Proj):
        return f"((_ tuple.select {e.index - 1}) {expr_term(e.expr)})"
    if isinstance(e, Update):
        assert isinstance(e.m.ty, MapT)
        n = _mangle(e.m.ty)
        return f"(map.update_{n} {expr_term(e.m)} {expr_term(e.k)} {expr_term(e.v)})"
    if isinstance(e, Append):
        return f"(seq.++ {expr_term(e.lst)} (seq.unit {expr_term(e.elem)}))"
    if isinstance(e, Insert):
        return f"(set.insert {expr_term(e.elem)} {expr_term(e.s)})"
    if isinstance(e, Union):
        return f"(set.union {expr_term(e.a)} {expr_term(e.b)})"
    if isinstance(e, App):
        args = [expr_term(a) for a in e.args]
        at = e.args[0].ty
        op = e.op
        if op in ("get", "contains"):
            if isinstance(at, MapT):
                fn = "map.access" if op == "get" else "map.contains_key"
                return f"({fn}_{_mangle(at)} {args[0]} {args[1]})"
            if op == "contains" and isinstance(at, SetT):
                return f"(set.member {args[1]} {args[0]})"
        if op == "len":
            if isinstance(at, StrT):
                return f"(str.len {args[0]})"
            if isinstance(at, ListT):
                return f"(seq.len {args[0]})"
            return f"(set.card {args[0]})"
        if op == "concat":
            return f"({'str.++' if isinstance(at, StrT) else 'seq.++'} {args[0]} {args[1]})"
        if op in ("<", ">") and isinstance(at, StrT):
            return f"({'str.<' if op == '<' else 'str_gt'} {args[0]} {args[1]})"
        if op in ("+", "-", "*", "/", "<", ">", "=", "and", "or", "not", "max", "min"):
            assert at is not None
            return f"({_op_name(op, at)} {' '.join(args)})"
        raise ExportError(f"operator '{op}' has no SyGuS encoding")
    raise ExportError(f"{type(e).__name__} has no first-order SyGuS encoding")


# ------------------------------------------------------------ grammar


def _nt(t: Type) -> str:
    return "nt_" + _mangle(t)


def _rules(types: list[Type], st: Type, harvested: list[Value], extra: list[tuple[str, Type]]) -> dict[Type, list[str]]:
    rules: dict[Type, list[str]] = {t: [] for t in types}
    rules[st] += ["a", "b"]
    for e, t in constant_terminals(types, harvested):
        try:
            rules[t].append(expr_term(e))
        except ExportError:
            continue
    for term, t in extra:
        rules[t].append(term)
    for p in productions(types):
        args = [_nt(a) for a in p.args]
        name = p.name
        if name == "ite":
            term = f"(ite {' '.join(args)})"
        elif name == "tuple":
            term = f"(tuple {' '.join(args)})"
        elif name.startswith("proj"):
            term = f"((_ tuple.select {int(name[4:]) - 1}) {args[0]})"
        elif name.startswith("map-merge-"):
            assert isinstance(p.ret, MapT)
            term = f"(map.merge_{_OP_WORDS[name[len('map-merge-'):]]}_{_mangle(p.ret)} {' '.join(args)})"
        elif name.startswith("map-values-"):
            assert isinstance(p.ret, MapT)
            term = f"(map.map_values_{_OP_WORDS[name[len('map-values-'):]]}_{_mangle(p.ret)} {' '.join(args)})"
        elif name.startswith("zip-map-"):
            continue  # sequences have no element-wise map in the core theories
        elif name == "update":
            term = f"(map.update_{_mangle(p.ret)} {' '.join(args)})"
        elif name == "union":
            term = f"(set.union {' '.join(args)})"
        elif name == "insert":
            term = f"(set.insert {args[1]} {args[0]})"
        else:
            fake = App(name, tuple(Var(x, ty=a) for x, a in zip(args, p.args)), ty=p.ret)
            term = expr_term(fake)
        rules[p.ret].append(term)
    return rules


def export_sygus(problem: SynthProblem, extra: list[tuple[Expr, Type]] | None = None,
                 commutative: bool = False) -> str:
    """SyGuS-IF v2 text for synthesizing a normalizer of ``problem``."""
    f, init = problem.f, problem.init
    (s, st), (x, xt) = f.params
    types = type_closure([st, xt])
    used_types = type_closure([st])
    for t in types:
        sort(t)
    lines = [f"; normalizer problem {problem.path}", "(set-logic ALL)"]
    lines += _helpers(types)
    lines.append(f"(define-fun f (({s} {sort(st)}) ({x} {sort(xt)})) {sort(st)}\n  {expr_term(f.body)})")
    lines.append(f"(define-fun init () {sort(st)} {value_term(init, st)})")
    harvested = literal_constants([f])
    extra_terms = [(expr_term(e), t) for e, t in (extra or [])]
    rules = _rules(used_types, st, harvested, extra_terms)
    live = [t for t in used_types if rules[t]]
    order = [st] + sorted((t for t in live if t != st), key=_nt)
    decl = " ".join(f"({_nt(t)} {sort(t)})" for t in order)
    groups = []
    for t in order:
        alts = " ".join(dict.fromkeys(rules[t]))
        groups.append(f"   ({_nt(t)} {sort(t)} ({alts}))")
    lines.append(f"(synth-fun h ((a {sort(st)}) (b {sort(st)})) {sort(st)}\n  ({decl})\n  (\n" + "\n".join(groups) + "))")
    lines.append(f"(declare-var s {sort(st)})")
    lines.append(f"(declare-var b1 {sort(st)})")
    lines.append(f"(declare-var b2 {sort(st)})")
    lines.append(f"(declare-var r {sort(xt)})")
    lines.append("(constraint (= (h s init) s))")
    lines.append("(constraint (= (f (h b1 b2) r) (h b1 (f b2 r))))")
    if commutative:
        lines.append("(constraint (= (h b1 b2) (h b2 b1)))")
    lines.append("(check-synth)")
    return "\n".join(lines) + "\n"


def file_name(problem: SynthProblem) -> str:
    return json.dumps(problem.path)[1:-1].replace("/", "_") + ".sl"


__all__ = ["ExportError", "export_sygus", "expr_term", "file_name", "sort", "value_term"]
