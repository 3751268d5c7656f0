"""FunQL abstract syntax, surface syntax and type checking.

Logical forms are immutable trees built from frozen dataclasses, so they hash,
compare structurally and can be shared freely between beam hypotheses.

Surface syntax::

    lf    := entity | rel "(" lf ")" | "count(" lf ")"
           | ("argmax(" | "argmin(") lf "," rel ")"
           | "filter_" cmp "(" lf "," rel "," value ")"
           | ("and(" | "or(") lf "," lf ")"
    cmp   := eq | neq | gt | lt | ge | le
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

COMPARATORS = ("eq", "neq", "gt", "lt", "ge", "le")
FILTER_TAGS = tuple(f"filter_{c}" for c in COMPARATORS)
RESERVED = frozenset(("count", "argmax", "argmin", "and", "or") + FILTER_TAGS)


class LFSyntaxError(ValueError):
    def __init__(self, message: str, position: int, expected=()):
        self.position = position
        self.expected = tuple(expected)
        super().__init__(f"{message} at position {position}"
                         + (f" (expected one of {', '.join(self.expected)})" if self.expected else ""))


class ArityError(ValueError):
    pass


class LFTypeError(TypeError):
    def __init__(self, path: tuple, expected: str, found: str):
        self.path = path
        self.expected = expected
        self.found = found
        super().__init__(f"at {'/'.join(map(str, path)) or 'root'}: expected {expected}, found {found}")


# -- values -----------------------------------------------------------------

@dataclass(frozen=True, order=True)
class EntityRef:
    id: str


@dataclass(frozen=True, order=True)
class Number:
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


Value = Union[EntityRef, Number]


def format_number(x: float) -> str:
    x = float(x)
    if math.isfinite(x) and x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def is_number_literal(text: str) -> bool:
    try:
        v = float(text)
    except ValueError:
        return False
    return math.isfinite(v)


def format_value(v: Value) -> str:
    return v.id if isinstance(v, EntityRef) else format_number(v.value)


# -- logical forms ----------------------------------------------------------

@dataclass(frozen=True)
class EntityLeaf:
    id: str


@dataclass(frozen=True)
class Apply:
    relation: str
    child: "LogicalForm"


@dataclass(frozen=True)
class Count:
    child: "LogicalForm"


@dataclass(frozen=True)
class ArgMax:
    child: "LogicalForm"
    relation: str


@dataclass(frozen=True)
class ArgMin:
    child: "LogicalForm"
    relation: str


@dataclass(frozen=True)
class Filter:
    comparator: str
    child: "LogicalForm"
    relation: str
    value: Value

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")


@dataclass(frozen=True)
class And:
    left: "LogicalForm"
    right: "LogicalForm"


@dataclass(frozen=True)
class Or:
    left: "LogicalForm"
    right: "LogicalForm"


LogicalForm = Union[EntityLeaf, Apply, Count, ArgMax, ArgMin, Filter, And, Or]


def children(lf: LogicalForm) -> tuple:
    """Logical-form children in argument order."""
    if isinstance(lf, EntityLeaf):
        return ()
    if isinstance(lf, (Apply, Count, ArgMax, ArgMin, Filter)):
        return (lf.child,)
    return (lf.left, lf.right)


def depth(lf: LogicalForm) -> int:
    return 1 + max((depth(c) for c in children(lf)), default=0)


def iter_nodes(lf: LogicalForm) -> Iterator[LogicalForm]:
    yield lf
    for c in children(lf):
        yield from iter_nodes(c)


def entities_of(lf: LogicalForm) -> list:
    return [n.id for n in iter_nodes(lf) if isinstance(n, EntityLeaf)]


def relations_of(lf: LogicalForm) -> list:
    """Relation ids in pre-order, including relation arguments of argmax/argmin/filter."""
    return [n.relation for n in iter_nodes(lf) if isinstance(n, (Apply, ArgMax, ArgMin, Filter))]


def operator_tag(lf: LogicalForm) -> str:
    if isinstance(lf, EntityLeaf):
        return "entity"
    if isinstance(lf, Apply):
        return "relation"
    if isinstance(lf, Filter):
        return f"filter_{lf.comparator}"
    return {Count: "count", ArgMax: "argmax", ArgMin: "argmin", And: "and", Or: "or"}[type(lf)]


# -- printing ---------------------------------------------------------------

def print_funql(lf: LogicalForm) -> str:
    if isinstance(lf, EntityLeaf):
        return lf.id
    if isinstance(lf, Apply):
        return f"{lf.relation}({print_funql(lf.child)})"
    if isinstance(lf, Count):
        return f"count({print_funql(lf.child)})"
    if isinstance(lf, ArgMax):
        return f"argmax({print_funql(lf.child)}, {lf.relation})"
    if isinstance(lf, ArgMin):
        return f"argmin({print_funql(lf.child)}, {lf.relation})"
    if isinstance(lf, Filter):
        return f"filter_{lf.comparator}({print_funql(lf.child)}, {lf.relation}, {format_value(lf.value)})"
    if isinstance(lf, And):
        return f"and({print_funql(lf.left)}, {print_funql(lf.right)})"
    if isinstance(lf, Or):
        return f"or({print_funql(lf.left)}, {print_funql(lf.right)})"
    raise TypeError(f"not a logical form: {lf!r}")


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:([(),])|([^\s(),]+))")

# operator -> argument kinds; "lf" = logical form, "rel" = relation id, "val" = value
_SIGNATURES = {
    "count": ("lf",),
    "argmax": ("lf", "rel"),
    "argmin": ("lf", "rel"),
    "and": ("lf", "lf"),
    "or": ("lf", "lf"),
    **{t: ("lf", "rel", "val") for t in FILTER_TAGS},
}


def _tokenize(text: str) -> list:
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise LFSyntaxError("unexpected character", pos)
        start = m.start(1) if m.group(1) else m.start(2)
        out.append((m.group(1) or m.group(2), start))
        pos = m.end()
    out.append(("<eof>", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, sym):
        tok, pos = self.next()
        if tok != sym:
            raise LFSyntaxError(f"unexpected {tok!r}", pos, (repr(sym),))

    def ident(self, what="identifier"):
        tok, pos = self.next()
        if tok in ("(", ")", ",", "<eof>"):
            raise LFSyntaxError(f"unexpected {tok!r}", pos, (what,))
        return tok, pos

    def args(self):
        """Raw comma-separated argument list after an opening parenthesis."""
        out = [self.arg()]
        while True:
            tok, pos = self.next()
            if tok == ")":
                return out
            if tok != ",":
                raise LFSyntaxError(f"unexpected {tok!r}", pos, ("','", "')'"))
            out.append(self.arg())

    def arg(self):
        tok, pos = self.peek()
        if tok in ("(", ")", ",", "<eof>"):
            raise LFSyntaxError(f"unexpected {tok!r}", pos, ("identifier",))
        if self.toks[self.i + 1][0] == "(":
            return ("lf", self.lf(), pos)
        self.i += 1
        return ("atom", tok, pos)

    def lf(self):
        name, pos = self.ident("entity, relation or operator")
        if self.peek()[0] != "(":
            if name in RESERVED:
                raise LFSyntaxError(f"operator {name!r} without arguments", pos, ("'('",))
            return EntityLeaf(name)
        self.next()
        args = self.args()
        kinds = _SIGNATURES.get(name, ("lf",))
        if len(args) != len(kinds):
            raise ArityError(f"{name} expects {len(kinds)} argument(s), got {len(args)} (position {pos})")
        vals = []
        for kind, (form, payload, apos) in zip(kinds, args):
            if kind == "lf":
                vals.append(payload if form == "lf" else EntityLeaf(payload))
            elif form == "lf":
                raise LFSyntaxError("expected an atom, found a nested logical form", apos,
                                    ("relation" if kind == "rel" else "value",))
            elif kind == "rel":
                if payload in RESERVED:
                    raise LFSyntaxError(f"reserved word {payload!r} used as relation", apos, ("relation",))
                vals.append(payload)
            else:
                vals.append(Number(float(payload)) if is_number_literal(payload) else EntityRef(payload))
        if name == "count":
            return Count(*vals)
        if name == "argmax":
            return ArgMax(*vals)
        if name == "argmin":
            return ArgMin(*vals)
        if name == "and":
            return And(*vals)
        if name == "or":
            return Or(*vals)
        if name in FILTER_TAGS:
            return Filter(name[len("filter_"):], *vals)
        return Apply(name, vals[0])


def parse_funql(text: str) -> LogicalForm:
    p = _Parser(text)
    lf = p.lf()
    tok, pos = p.next()
    if tok != "<eof>":
        raise LFSyntaxError(f"trailing input {tok!r}", pos, ("<eof>",))
    return lf


# -- typing -----------------------------------------------------------------

UNARY = "unary"
NUMBERS = "number-set"


@dataclass(frozen=True)
class Signature:
    """Operator signature table plus what is known about relation ranges.

    ``numeric_relations`` lists relations whose objects are all numbers; ``None``
    means relation ranges are unknown and relation slots are not range-checked.
    """

    numeric_relations: Optional[frozenset] = None
    strict: bool = True

    def is_numeric(self, relation: str) -> bool:
        return self.numeric_relations is not None and relation in self.numeric_relations


def result_type(lf: LogicalForm, sig: Signature = Signature()) -> str:
    if isinstance(lf, Count):
        return NUMBERS
    if isinstance(lf, Apply) and sig.is_numeric(lf.relation):
        return NUMBERS
    return UNARY


def type_check(lf: LogicalForm, sig: Signature = Signature()) -> str:
    """Return the result type of ``lf`` or raise LFTypeError at the first
    pre-order violation."""
    _check(lf, sig, ())
    return result_type(lf, sig)


def _check(lf, sig, path):
    if isinstance(lf, EntityLeaf):
        if not lf.id:
            raise LFTypeError(path, "entity id", "empty string")
        return
    if isinstance(lf, (ArgMax, ArgMin, Filter)) and sig.numeric_relations is not None \
            and lf.relation not in sig.numeric_relations:
        raise LFTypeError(path + ("relation",), "numeric relation", lf.relation)
    if isinstance(lf, Filter) and not isinstance(lf.value, Number):
        raise LFTypeError(path + ("value",), "number", f"entity {lf.value.id}")
    for i, c in enumerate(children(lf)):
        if sig.strict and result_type(c, sig) != UNARY:
            raise LFTypeError(path + (i,), UNARY, f"{NUMBERS} producer {operator_tag(c)}")
        _check(c, sig, path + (i,))
