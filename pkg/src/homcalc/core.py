"""Types, runtime values, dataframes and canonical equality."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Union

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


class HomcalcError(Exception):
    """Base class for every error raised by the package."""


class UnsupportedTypeError(HomcalcError):
    pass


class SchemaError(HomcalcError):
    pass


class EvalError(HomcalcError):
    """Runtime failure. ``kind`` is one of div0, overflow, absent-key,
    zip-length, fuel, bad-convert, null."""

    def __init__(self, kind: str, message: str = ""):
        super().__init__(f"{kind}: {message}" if message else kind)
        self.kind = kind


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class Type:
    pass


@dataclass(frozen=True)
class IntT(Type):
    def __str__(self) -> str:
        return "int"


@dataclass(frozen=True)
class BoolT(Type):
    def __str__(self) -> str:
        return "bool"


@dataclass(frozen=True)
class FloatT(Type):
    def __str__(self) -> str:
        return "float"


@dataclass(frozen=True)
class StrT(Type):
    def __str__(self) -> str:
        return "str"


@dataclass(frozen=True)
class NullT(Type):
    """Element type of a set viewed as a map; never written by users."""

    def __str__(self) -> str:
        return "null"


INT = IntT()
BOOL = BoolT()
FLOAT = FloatT()
STR = StrT()
NULL_T = NullT()

SCALARS = (IntT, BoolT, FloatT, StrT)


@dataclass(frozen=True)
class TupleT(Type):
    elems: tuple[Type, ...]

    def __post_init__(self) -> None:
        if len(self.elems) < 2:
            raise UnsupportedTypeError("tuple types need at least two elements")

    def __str__(self) -> str:
        return "(tuple " + " ".join(map(str, self.elems)) + ")"


@dataclass(frozen=True)
class ListT(Type):
    elem: Type

    def __str__(self) -> str:
        return f"(list {self.elem})"


@dataclass(frozen=True)
class MapT(Type):
    key: Type
    val: Type

    def __post_init__(self) -> None:
        if not is_key_type(self.key):
            raise UnsupportedTypeError(f"map key must be scalar or tuple of scalars, got {self.key}")

    def __str__(self) -> str:
        return f"(map {self.key} {self.val})"


@dataclass(frozen=True)
class SetT(Type):
    elem: Type

    def __str__(self) -> str:
        return f"(set {self.elem})"


@dataclass(frozen=True)
class DFT(Type):
    row: Type

    def __post_init__(self) -> None:
        if contains_fn_or_df(self.row):
            raise UnsupportedTypeError("dataframe rows cannot hold functions or dataframes")

    def __str__(self) -> str:
        return f"(df {self.row})"


@dataclass(frozen=True)
class FnT(Type):
    params: tuple[Type, ...]
    ret: Type

    def __str__(self) -> str:
        return "(fn (" + " ".join(map(str, self.params)) + f") {self.ret})"


def is_scalar_type(t: Type) -> bool:
    return isinstance(t, SCALARS)


def is_key_type(t: Type) -> bool:
    if is_scalar_type(t):
        return True
    return isinstance(t, TupleT) and all(is_scalar_type(e) for e in t.elems)


def contains_fn_or_df(t: Type) -> bool:
    if isinstance(t, (FnT, DFT)):
        return True
    if isinstance(t, TupleT):
        return any(contains_fn_or_df(e) for e in t.elems)
    if isinstance(t, (ListT, SetT)):
        return contains_fn_or_df(t.elem)
    if isinstance(t, MapT):
        return contains_fn_or_df(t.key) or contains_fn_or_df(t.val)
    return False


def is_collection_type(t: Type) -> bool:
    return isinstance(t, (ListT, MapT, SetT))


# --------------------------------------------------------------- values


class Value:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class IntV(Value):
    v: int

    def __str__(self) -> str:
        return str(self.v)


@dataclass(frozen=True, slots=True)
class BoolV(Value):
    v: bool

    def __str__(self) -> str:
        return "true" if self.v else "false"


def _float_bits(x: float) -> int:
    return struct.unpack("<q", struct.pack("<d", x))[0]


@dataclass(frozen=True, slots=True, eq=False)
class FloatV(Value):
    """Binary64 value; equality and hashing use the raw bit pattern."""

    v: float

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FloatV) and _float_bits(self.v) == _float_bits(other.v)

    def __hash__(self) -> int:
        return hash(("f", _float_bits(self.v)))

    def __str__(self) -> str:
        return repr(self.v)


@dataclass(frozen=True, slots=True)
class StrV(Value):
    v: str

    def __str__(self) -> str:
        return '"' + self.v.replace("\\", "\\\\").replace('"', '\\"') + '"'


class _Composite(Value):
    """Structured values cache their hash; the enumerator hashes them a lot."""

    __slots__ = ()

    def _payload(self) -> tuple:
        raise NotImplementedError

    def __hash__(self) -> int:
        h = self._hash  # type: ignore[attr-defined]
        if h == -1:
            # computed on first use; Python never returns -1 from hash()
            h = hash((type(self).__name__, self._payload()))
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(other) is not type(self):
            return False
        h1, h2 = self._hash, other._hash  # type: ignore[attr-defined]
        if h1 != -1 and h2 != -1 and h1 != h2:
            return False
        return self._payload() == other._payload()  # type: ignore[attr-defined]


def _hash_field():
    return field(init=False, repr=False, compare=False, default=-1)


@dataclass(frozen=True, slots=True, eq=False)
class TupleV(_Composite):
    items: tuple[Value, ...]
    _hash: int = _hash_field()

    def _payload(self) -> tuple:
        return self.items

    def __str__(self) -> str:
        return "(" + ", ".join(map(str, self.items)) + ")"


@dataclass(frozen=True, slots=True, eq=False)
class ListV(_Composite):
    items: tuple[Value, ...]
    _hash: int = _hash_field()

    def _payload(self) -> tuple:
        return self.items

    def __str__(self) -> str:
        return "[" + ", ".join(map(str, self.items)) + "]"


@dataclass(frozen=True, slots=True, eq=False)
class SetV(_Composite):
    """Elements are kept sorted by ``order_key`` without duplicates."""

    items: tuple[Value, ...]
    _hash: int = _hash_field()

    def __post_init__(self) -> None:
        items = self.items
        if any(order_key(a) >= order_key(b) for a, b in zip(items, items[1:])):
            object.__setattr__(self, "items", _canon_items(items))

    def _payload(self) -> tuple:
        return self.items

    def __str__(self) -> str:
        return "{" + ", ".join(map(str, self.items)) + "}"


@dataclass(frozen=True, slots=True, eq=False)
class MapV(_Composite):
    """Entries are (key, value) pairs kept sorted by key."""

    entries: tuple[tuple[Value, Value], ...]
    _hash: int = _hash_field()

    def __post_init__(self) -> None:
        es = self.entries
        if any(order_key(a[0]) >= order_key(b[0]) for a, b in zip(es, es[1:])):
            object.__setattr__(self, "entries", _canon_entries(es))

    def _payload(self) -> tuple:
        return self.entries

    def as_dict(self) -> dict[Value, Value]:
        return dict(self.entries)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{k} -> {v}" for k, v in self.entries) + "}"


@dataclass(frozen=True, slots=True)
class NullV(Value):
    def __str__(self) -> str:
        return "null"


NULL = NullV()
TRUE = BoolV(True)
FALSE = BoolV(False)


def order_key(v: Value) -> tuple:
    """Total order used to canonicalize sets and map keys."""
    if isinstance(v, IntV):
        return (1, v.v)
    if isinstance(v, BoolV):
        return (2, v.v)
    if isinstance(v, FloatV):
        b = _float_bits(v.v)
        # map bits onto a monotone integer so -0.0 < 0.0 and nan sorts last
        return (3, b if b >= 0 else -(b & 0x7FFFFFFFFFFFFFFF) - 1)
    if isinstance(v, StrV):
        return (4, v.v)
    if isinstance(v, TupleV):
        return (5, tuple(order_key(i) for i in v.items))
    if isinstance(v, ListV):
        return (6, tuple(order_key(i) for i in v.items))
    if isinstance(v, SetV):
        return (7, tuple(order_key(i) for i in v.items))
    if isinstance(v, MapV):
        return (8, tuple((order_key(k), order_key(x)) for k, x in v.entries))
    return (0,)


def _canon_items(items: Iterable[Value]) -> tuple[Value, ...]:
    seen: dict[Value, None] = dict.fromkeys(items)
    return tuple(sorted(seen, key=order_key))


def _canon_entries(entries: Iterable[tuple[Value, Value]]) -> tuple[tuple[Value, Value], ...]:
    d: dict[Value, Value] = {}
    for k, v in entries:
        d[k] = v
    return tuple(sorted(d.items(), key=lambda kv: order_key(kv[0])))


def make_map(pairs: Iterable[tuple[Value, Value]]) -> MapV:
    """Later pairs overwrite earlier ones with the same key."""
    return MapV(_canon_entries(pairs))


def make_set(items: Iterable[Value]) -> SetV:
    return SetV(_canon_items(items))


def check_int(n: int) -> IntV:
    if n < INT_MIN or n > INT_MAX:
        raise EvalError("overflow", str(n))
    return IntV(n)


def canonicalize(v: Value) -> Value:
    if isinstance(v, TupleV):
        return TupleV(tuple(canonicalize(i) for i in v.items))
    if isinstance(v, ListV):
        return ListV(tuple(canonicalize(i) for i in v.items))
    if isinstance(v, SetV):
        return make_set(canonicalize(i) for i in v.items)
    if isinstance(v, MapV):
        return make_map((canonicalize(k), canonicalize(x)) for k, x in v.entries)
    return v


def canon_eq(a: Value, b: Value) -> bool:
    """Structural equality on canonical forms; floats compare bitwise."""
    return canonicalize(a) == canonicalize(b)


def has_type(v: Value, t: Type, allow_null: bool = False) -> bool:
    if isinstance(v, NullV):
        return allow_null or isinstance(t, NullT)
    if isinstance(t, IntT):
        return isinstance(v, IntV) and INT_MIN <= v.v <= INT_MAX
    if isinstance(t, BoolT):
        return isinstance(v, BoolV)
    if isinstance(t, FloatT):
        return isinstance(v, FloatV)
    if isinstance(t, StrT):
        return isinstance(v, StrV)
    if isinstance(t, TupleT):
        return (
            isinstance(v, TupleV)
            and len(v.items) == len(t.elems)
            and all(has_type(i, e, allow_null) for i, e in zip(v.items, t.elems))
        )
    if isinstance(t, ListT):
        return isinstance(v, ListV) and all(has_type(i, t.elem) for i in v.items)
    if isinstance(t, SetT):
        return isinstance(v, SetV) and all(has_type(i, t.elem) for i in v.items)
    if isinstance(t, MapT):
        return isinstance(v, MapV) and all(
            has_type(k, t.key) and has_type(x, t.val) for k, x in v.entries
        )
    return False


def default_value(t: Type) -> Value:
    if isinstance(t, IntT):
        return IntV(0)
    if isinstance(t, BoolT):
        return FALSE
    if isinstance(t, FloatT):
        return FloatV(0.0)
    if isinstance(t, StrT):
        return StrV("")
    if isinstance(t, NullT):
        return NULL
    if isinstance(t, TupleT):
        return TupleV(tuple(default_value(e) for e in t.elems))
    if isinstance(t, ListT):
        return ListV(())
    if isinstance(t, SetT):
        return SetV(())
    if isinstance(t, MapT):
        return MapV(())
    raise UnsupportedTypeError(f"no default value for {t}")


def value_size(v: Value) -> int:
    """Rough structural size, used to order shrink candidates."""
    if isinstance(v, (TupleV, ListV, SetV)):
        return 1 + sum(value_size(i) for i in v.items)
    if isinstance(v, MapV):
        return 1 + sum(value_size(k) + value_size(x) for k, x in v.entries)
    if isinstance(v, IntV):
        return 1 + min(abs(v.v), 64)
    if isinstance(v, FloatV):
        return 1 + (0 if v.v == 0 or math.isnan(v.v) else min(int(abs(v.v)) + 1, 64))
    if isinstance(v, StrV):
        return 1 + len(v.v)
    if isinstance(v, BoolV):
        return 1 + int(v.v)
    return 1


# ----------------------------------------------------------- dataframes

Column = tuple[str, Type]


def row_type_of(columns: tuple[Column, ...]) -> Type:
    if len(columns) == 1:
        return columns[0][1]
    return TupleT(tuple(t for _, t in columns))


@dataclass(frozen=True)
class DataFrame:
    """Ordered rows over labelled columns. Single-column rows are bare scalars."""

    columns: tuple[Column, ...]
    rows: tuple[Value, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.columns:
            raise SchemaError("a dataframe needs at least one column")
        rt = self.row_type
        for r in self.rows:
            if not has_type(r, rt):
                raise SchemaError(f"row {r} does not match {rt}")

    @property
    def row_type(self) -> Type:
        return row_type_of(self.columns)

    def with_rows(self, rows: Iterable[Value]) -> DataFrame:
        return DataFrame(self.columns, tuple(rows))

    def __len__(self) -> int:
        return len(self.rows)

    def __str__(self) -> str:
        return "[" + ", ".join(map(str, self.rows)) + "]"


def concat_df(d1: DataFrame, d2: DataFrame) -> DataFrame:
    if d1.columns != d2.columns:
        raise SchemaError("cannot concatenate dataframes with different schemas")
    return DataFrame(d1.columns, d1.rows + d2.rows)


Scalar = Union[int, bool, float, str]


def lift(x: object) -> Value:
    """Build a Value from plain Python data; handy in tests and fixtures."""
    if isinstance(x, Value):
        return x
    if isinstance(x, bool):
        return BoolV(x)
    if isinstance(x, int):
        return check_int(x)
    if isinstance(x, float):
        return FloatV(x)
    if isinstance(x, str):
        return StrV(x)
    if isinstance(x, tuple):
        return TupleV(tuple(lift(i) for i in x))
    if isinstance(x, list):
        return ListV(tuple(lift(i) for i in x))
    if isinstance(x, (set, frozenset)):
        return make_set(lift(i) for i in x)
    if isinstance(x, dict):
        return make_map((lift(k), lift(v)) for k, v in x.items())
    if x is None:
        return NULL
    raise TypeError(f"cannot lift {x!r}")
