"""A syntax and scope checker for SyGuS-IF v2 problem files.

Only the command subset a synthesis problem needs is accepted: ``set-logic``,
``set-option``, ``set-info``, ``define-sort``, ``define-fun``,
``define-fun-rec`` (from SMT-LIB 2.6, for recursive helpers), ``declare-var``,
``synth-fun`` with an optional grammar, ``constraint`` and ``check-synth``.
Besides the grammar the checker resolves every identifier, so a term that
mentions an undeclared function or variable is rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_SIMPLE = re.compile(r"[A-Za-z~!@$%^&*_+\-=<>.?/][A-Za-z0-9~!@$%^&*_+\-=<>.?/]*\Z")
_NUMERAL = re.compile(r"(0|[1-9][0-9]*)\Z")
_DECIMAL = re.compile(r"(0|[1-9][0-9]*)\.[0-9]+\Z")
_HEX = re.compile(r"#x[0-9A-Fa-f]+\Z")
_BIN = re.compile(r"#b[01]+\Z")

RESERVED = frozenset({
    "_", "!", "as", "let", "exists", "forall", "match", "par",
    "check-synth", "constraint", "declare-var", "define-fun", "define-fun-rec",
    "define-sort", "set-info", "set-logic", "set-option", "synth-fun", "Constant", "Variable",
})

# function symbols of the core, arithmetic, string, sequence, set and tuple theories
THEORY = frozenset({
    "true", "false", "not", "and", "or", "xor", "=>", "=", "distinct", "ite",
    "+", "-", "*", "/", "div", "mod", "abs", "<", "<=", ">", ">=", "to_real", "to_int", "is_int",
    "str.++", "str.len", "str.<", "str.<=", "str.at", "str.substr", "str.prefixof", "str.suffixof",
    "str.contains", "str.indexof", "str.replace", "str.to_int", "str.from_int",
    "seq.++", "seq.len", "seq.unit", "seq.empty", "seq.nth", "seq.extract", "seq.at", "seq.contains",
    "set.empty", "set.singleton", "set.insert", "set.union", "set.inter", "set.minus", "set.member",
    "set.subset", "set.card", "set.choose", "set.is_empty",
    "tuple", "tuple.select",
})
SORTS = frozenset({"Int", "Bool", "Real", "String", "Seq", "Set", "Tuple", "Array", "RegLan"})


class SygusSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Tok:
    text: str
    line: int
    string: bool = False

    def __str__(self) -> str:
        return self.text


def tokenize(text: str) -> list[Tok | str]:
    out: list[Tok | str] = []
    i, line, n = 0, 1, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
        elif c.isspace():
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            out.append(c)
            i += 1
        elif c == '"':
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise SygusSyntaxError(f"line {line}: unterminated string literal")
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        buf.append('"')
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            out.append(Tok("".join(buf), line, string=True))
            line += text.count("\n", i, j)
            i = j + 1
        elif c == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SygusSyntaxError(f"line {line}: unterminated quoted symbol")
            out.append(Tok(text[i:j + 1], line))
            line += text.count("\n", i, j)
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '();"|':
                j += 1
            out.append(Tok(text[i:j], line))
            i = j
    return out


def read(text: str) -> list:
    """Nested lists of tokens, one per top-level form."""
    toks = tokenize(text)
    pos = 0

    def one():
        nonlocal pos
        if pos >= len(toks):
            raise SygusSyntaxError("unexpected end of input")
        t = toks[pos]
        pos += 1
        if t == ")":
            raise SygusSyntaxError("unbalanced ')'")
        if t != "(":
            return t
        items = []
        while True:
            if pos >= len(toks):
                raise SygusSyntaxError("missing ')'")
            if toks[pos] == ")":
                pos += 1
                return items
            items.append(one())

    forms = []
    while pos < len(toks):
        forms.append(one())
    return forms


def _line(x) -> str:
    while isinstance(x, list) and x:
        x = x[0]
    return f"line {x.line}: " if isinstance(x, Tok) else ""


def _fail(x, msg: str) -> SygusSyntaxError:
    return SygusSyntaxError(_line(x) + msg)


def is_literal(x) -> bool:
    if not isinstance(x, Tok):
        return False
    return x.string or bool(_NUMERAL.match(x.text) or _DECIMAL.match(x.text) or _HEX.match(x.text)
                            or _BIN.match(x.text)) or x.text in ("true", "false")


def symbol(x) -> str:
    if not isinstance(x, Tok) or x.string:
        raise _fail(x, f"expected a symbol, got {_show(x)}")
    t = x.text
    if t.startswith("|"):
        if len(t) < 2 or "\\" in t:
            raise _fail(x, f"bad quoted symbol {t}")
        return t
    if not _SIMPLE.match(t):
        raise _fail(x, f"bad symbol {t!r}")
    if t in RESERVED:
        raise _fail(x, f"reserved word {t!r} used as a symbol")
    return t


def _show(x) -> str:
    if isinstance(x, list):
        return "(" + " ".join(_show(i) for i in x) + ")"
    return str(x)


def identifier(x) -> str:
    """Symbol or indexed identifier ``(_ Symbol Index+)``; returns the head symbol."""
    if isinstance(x, list):
        if len(x) < 3 or not isinstance(x[0], Tok) or x[0].text != "_":
            raise _fail(x, f"expected an identifier, got {_show(x)}")
        head = symbol(x[1])
        for idx in x[2:]:
            if not isinstance(idx, Tok) or not (_NUMERAL.match(idx.text) or _SIMPLE.match(idx.text)):
                raise _fail(x, f"bad index {_show(idx)}")
        return head
    return symbol(x)


@dataclass
class Scope:
    sorts: set[str]
    funs: set[str]

    def sort(self, x) -> None:
        if isinstance(x, list) and x and not (isinstance(x[0], Tok) and x[0].text == "_"):
            if len(x) < 2:
                raise _fail(x, f"bad sort {_show(x)}")
            self.sort(x[0])
            for s in x[1:]:
                self.sort(s)
            return
        head = identifier(x)
        if head not in self.sorts:
            raise _fail(x, f"unknown sort {head}")

    def term(self, x, bound: frozenset[str] = frozenset(), extra: frozenset[str] = frozenset()) -> None:
        if is_literal(x):
            return
        if isinstance(x, Tok):
            name = symbol(x)
            if name not in bound and name not in self.funs and name not in extra:
                raise _fail(x, f"unbound identifier {name}")
            return
        if not x:
            raise _fail(x, "empty application")
        head = x[0]
        if isinstance(head, Tok) and head.text in ("let", "forall", "exists"):
            if len(x) != 3 or not isinstance(x[1], list) or not x[1]:
                raise _fail(x, f"malformed {head.text}")
            names = set()
            for b in x[1]:
                if not isinstance(b, list) or len(b) != 2:
                    raise _fail(x, f"malformed binding in {head.text}")
                names.add(symbol(b[0]))
                if head.text == "let":
                    self.term(b[1], bound, extra)
                else:
                    self.sort(b[1])
            self.term(x[2], bound | names, extra)
            return
        if isinstance(head, Tok) and head.text == "as":
            # qualified identifier, e.g. (as set.empty (Set Int))
            if len(x) != 3:
                raise _fail(x, "malformed 'as'")
            if identifier(x[1]) not in self.funs:
                raise _fail(x, f"unknown constant {_show(x[1])}")
            self.sort(x[2])
            return
        if len(x) < 2:
            raise _fail(x, f"application without arguments: {_show(x)}")
        if isinstance(head, list) and head and isinstance(head[0], Tok) and head[0].text == "as":
            self.term(head, bound, extra)
        else:
            name = identifier(head)
            if name not in self.funs and name not in bound and name not in extra:
                raise _fail(x, f"unknown function {name}")
        for a in x[1:]:
            self.term(a, bound, extra)


def _sorted_vars(x, scope: Scope) -> list[str]:
    if not isinstance(x, list):
        raise _fail(x, "expected a sorted variable list")
    names = []
    for v in x:
        if not isinstance(v, list) or len(v) != 2:
            raise _fail(x, f"bad sorted variable {_show(v)}")
        names.append(symbol(v[0]))
        scope.sort(v[1])
    if len(set(names)) != len(names):
        raise _fail(x, "duplicate parameter name")
    return names


def _keyword(x) -> None:
    if not isinstance(x, Tok) or not x.text.startswith(":") or len(x.text) < 2:
        raise _fail(x, f"expected a keyword, got {_show(x)}")


def _grammar(form, params: list[str], scope: Scope) -> None:
    pre, groups = form
    if not isinstance(pre, list) or not pre:
        raise _fail(form, "grammar needs at least one non-terminal")
    nts = []
    for d in pre:
        if not isinstance(d, list) or len(d) != 2:
            raise _fail(form, f"bad non-terminal declaration {_show(d)}")
        nts.append(symbol(d[0]))
        scope.sort(d[1])
    if len(set(nts)) != len(nts):
        raise _fail(form, "duplicate non-terminal")
    if not isinstance(groups, list) or len(groups) != len(pre):
        raise _fail(form, "grouped rule list must match the non-terminal declarations")
    allowed = frozenset(nts) | frozenset(params)
    for d, g in zip(pre, groups):
        if not isinstance(g, list) or len(g) != 3:
            raise _fail(form, f"bad grouped rule list {_show(g)}")
        if symbol(g[0]) != symbol(d[0]) or _show(g[1]) != _show(d[1]):
            raise _fail(g, "grouped rule list out of order with the declarations")
        if not isinstance(g[2], list) or not g[2]:
            raise _fail(g, f"non-terminal {_show(g[0])} has no rules")
        for gt in g[2]:
            if isinstance(gt, list) and gt and isinstance(gt[0], Tok) and gt[0].text in ("Constant", "Variable"):
                if len(gt) != 2:
                    raise _fail(gt, "malformed Constant/Variable term")
                scope.sort(gt[1])
                continue
            _bf_term(gt, allowed, scope)


def _bf_term(x, allowed: frozenset[str], scope: Scope) -> None:
    _no_binders(x)
    scope.term(x, extra=allowed)


def _no_binders(x) -> None:
    # grammar terms are binder-free
    if isinstance(x, list):
        if x and isinstance(x[0], Tok) and x[0].text in ("let", "forall", "exists"):
            raise _fail(x, "binders are not allowed in grammar terms")
        for a in x:
            _no_binders(a)


def check(text: str) -> list[str]:
    """Validate a SyGuS-IF v2 problem; returns the command names in order."""
    scope = Scope(set(SORTS), set(THEORY))
    commands = []
    synth_funs: set[str] = set()
    seen_logic = False
    for form in read(text):
        if not isinstance(form, list) or not form or not isinstance(form[0], Tok):
            raise _fail(form, f"expected a command, got {_show(form)}")
        cmd, args = form[0].text, form[1:]
        if cmd == "set-logic":
            if len(args) != 1 or commands:
                raise _fail(form, "set-logic takes one symbol and must come first")
            symbol(args[0])
            seen_logic = True
        elif cmd in ("set-option", "set-info"):
            if len(args) != 2:
                raise _fail(form, f"{cmd} takes a keyword and a literal")
            _keyword(args[0])
        elif cmd == "define-sort":
            if len(args) != 2:
                raise _fail(form, "define-sort takes a name and a sort")
            name = symbol(args[0])
            scope.sort(args[1])
            scope.sorts.add(name)
        elif cmd in ("define-fun", "define-fun-rec"):
            if len(args) != 4:
                raise _fail(form, f"{cmd} takes a name, parameters, a sort and a body")
            name = symbol(args[0])
            if name in scope.funs:
                raise _fail(form, f"{name} is already defined")
            params = _sorted_vars(args[1], scope)
            scope.sort(args[2])
            if cmd == "define-fun-rec":
                scope.funs.add(name)
            scope.term(args[3], frozenset(params))
            scope.funs.add(name)
        elif cmd == "declare-var":
            if len(args) != 2:
                raise _fail(form, "declare-var takes a name and a sort")
            name = symbol(args[0])
            if name in scope.funs:
                raise _fail(form, f"{name} is already declared")
            scope.sort(args[1])
            scope.funs.add(name)
        elif cmd == "synth-fun":
            if len(args) not in (3, 5):
                raise _fail(form, "synth-fun takes a name, parameters, a sort and an optional grammar")
            name = symbol(args[0])
            if name in scope.funs:
                raise _fail(form, f"{name} is already defined")
            params = _sorted_vars(args[1], scope)
            scope.sort(args[2])
            if len(args) == 5:
                _grammar((args[3], args[4]), params, scope)
            scope.funs.add(name)
            synth_funs.add(name)
        elif cmd == "constraint":
            if len(args) != 1:
                raise _fail(form, "constraint takes one term")
            scope.term(args[0])
        elif cmd == "check-synth":
            if args:
                raise _fail(form, "check-synth takes no arguments")
        else:
            raise _fail(form, f"unsupported command {cmd}")
        commands.append(cmd)
    if not seen_logic:
        raise SygusSyntaxError("missing set-logic")
    if not synth_funs:
        raise SygusSyntaxError("no synth-fun")
    if not commands or commands[-1] != "check-synth":
        raise SygusSyntaxError("the problem must end with check-synth")
    return commands
