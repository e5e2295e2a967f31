from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import expr, lam
from homcalc.core import BOOL, FLOAT, INT, STR, IntV, ListT, MapT, SetT, TupleT, Type, lift
from homcalc.frontend import ParseError, TypeCheckError, load_program, parse, show, show_program, show_value
from homcalc.interp import eval_expr
from homcalc.syntax import App, Const, Expr, Ite, Lam, Program, Proj, TupleE, Update, Var

SUM = """
(program
  (input xs (df (x int)))
  (aggregate (lambda ((s int) (x int)) (+ s x)) (int 0)))
"""


def test_parse_arithmetic():
    e = parse("(+ (int 1) (int 2))")
    assert e == App("+", (Const(IntV(1), INT), Const(IntV(2), INT)))


def test_parse_update():
    e = parse("(update (map-empty int int) (int 1) (int 2))")
    assert isinstance(e, Update)
    assert expr("(update (map-empty int int) (int 1) (int 2))").ty == MapT(INT, INT)


def test_get_or_else_is_sugar():
    e = parse("(getOrElse m (int 1) (int 0))")
    assert isinstance(e, Ite)
    assert e.cond == App("contains", (Var("m"), Const(IntV(1), INT)))


def test_bid_program_state(corpus):
    p = corpus["bid_aggregator"]
    assert p.f.params[0][1] == TupleT((FLOAT, INT, MapT(INT, INT)))
    assert len(p.pipeline) == 2


def test_sum_program_types():
    p = load_program(SUM)
    assert p.f.ty.ret == INT
    assert p.init.ty == INT


def test_sum_frequency_state(corpus):
    assert corpus["sum_frequency"].f.params[0][1] == TupleT((INT, MapT(INT, INT)))


def test_init_type_mismatch():
    bad = SUM.replace("(lambda ((s int) (x int)) (+ s x))",
                      "(lambda ((s (map int int)) (x int)) (update s x x))")
    with pytest.raises(TypeCheckError):
        load_program(bad)


@pytest.mark.parametrize(
    "text",
    [
        "(+ y (int 1))",
        "(proj 3 (tuple (int 1) (int 2)))",
        "(+ (int 1) (bool true))",
        "(convert list (int 3))",
        "(ite (int 1) (int 2) (int 3))",
        "(outer-join (map-empty int int) (map-empty str int))",
    ],
)
def test_type_errors(text):
    with pytest.raises(TypeCheckError):
        expr(text)


def test_outer_join_type():
    e = expr("(outer-join (map-empty int int) (map-empty int int))")
    assert e.ty == MapT(INT, TupleT((INT, INT)))


@pytest.mark.parametrize(
    "text, where",
    [
        ("(+ (int 1)", (1, 1)),
        ("(int 1))", (1, 8)),
        ("\n  (frob (int 1))", (2, 3)),
    ],
)
def test_parse_errors_carry_positions(text, where):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert (info.value.line, info.value.col) == where


def test_corpus_round_trips(corpus):
    for name, p in corpus.items():
        again = load_program(show_program(p))
        assert again == p, name
        assert show_program(again) == show_program(p)


# ------------------------------------------------------- property tests

leaf_types: list[Type] = [INT, BOOL, STR]


def _exprs(t: Type) -> st.SearchStrategy[Expr]:
    if t == INT:
        base = st.integers(-5, 5).map(lambda n: Const(IntV(n), INT))
    elif t == BOOL:
        base = st.booleans().map(lambda b: Const(lift(b), BOOL))
    else:
        base = st.text("ab\"\\ ", max_size=3).map(lambda s: Const(lift(s), STR))
    var = st.just(Var({INT: "i", BOOL: "p", STR: "w"}[t]))

    def extend(inner):
        if t == INT:
            return st.one_of(
                st.tuples(st.sampled_from(["+", "-", "*", "max", "min"]), inner, inner).map(lambda a: App(a[0], a[1:])),
                st.tuples(inner, inner).map(lambda a: Proj(1, TupleE(a))),
            )
        if t == BOOL:
            return st.tuples(st.sampled_from(["and", "or"]), inner, inner).map(lambda a: App(a[0], a[1:]))
        return st.tuples(inner, inner).map(lambda a: App("concat", a))

    return st.recursive(st.one_of(base, var), extend, max_leaves=6)


@given(st.sampled_from(leaf_types).flatmap(_exprs))
def test_parse_show_round_trip(e):
    assert parse(show(e)) == e
    assert show(parse(show(e))) == show(e)


value_types = st.sampled_from([INT, STR, ListT(INT), SetT(STR), MapT(INT, BOOL), TupleT((INT, ListT(STR)))])


def _values(t: Type):
    if t == INT:
        return st.integers(-(2**63), 2**63 - 1)
    if t == STR:
        return st.text(max_size=4)
    if t == BOOL:
        return st.booleans()
    if isinstance(t, ListT):
        return st.lists(_values(t.elem), max_size=3)
    if isinstance(t, SetT):
        return st.frozensets(_values(t.elem), max_size=3)
    if isinstance(t, MapT):
        return st.dictionaries(_values(t.key), _values(t.val), max_size=3)
    assert isinstance(t, TupleT)
    return st.tuples(*(_values(e) for e in t.elems))


@given(value_types.flatmap(lambda t: st.tuples(st.just(t), _values(t))))
def test_printed_values_evaluate_back(tv):
    t, raw = tv
    v = lift(raw)
    assert eval_expr(expr(show_value(v, t))) == v


def test_lambda_type():
    f = lam("(lambda ((a int) (b int)) (max a b))")
    assert isinstance(f, Lam) and f.ty.ret == INT


def test_program_is_a_program(corpus):
    assert all(isinstance(p, Program) for p in corpus.values())
