"""Top-down and bottom-up transition systems for FunQL trees.

Top-down (pre-order) uses NT(tag), TER(tag) and RED; bottom-up (post-order)
uses TER(tag), NTRED(tag) and an explicit STOP.  Configurations are frozen
dataclasses over tuples, so beam search can share them between hypotheses.

Stack items are either ``Open`` markers (top-down only), finished logical
forms, or the bare relation / number terminals that fill the second and third
argument slots of argmax, argmin and filter.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

from .semantics import (FILTER_TAGS, And, Apply, ArgMax, ArgMin, Count, EntityLeaf, Filter,
                        LogicalForm, Number, Or, Signature, format_number, is_number_literal,
                        print_funql)

NT_TAGS = ("relation", "count", "argmax", "argmin", "and", "or") + FILTER_TAGS
TER_TAGS = ("entity", "relation")

# argument slot kinds: unary logical form, relation terminal, number terminal
U, R, V = "U", "R", "V"
ARGUMENTS = {
    "relation": (U,), "count": (U,), "argmax": (U, R), "argmin": (U, R),
    "and": (U, U), "or": (U, U), **{t: (U, R, V) for t in FILTER_TAGS},
}
ARITY = {tag: len(slots) for tag, slots in ARGUMENTS.items()}
ARITY["entity"] = 0

# token slots, i.e. which part of the logical-token vocabulary a prediction ranges over
ENTITY = "entity"
NUMBER = "number"
REL_ANY = "relation_any"          # relation applied at the root, may be numeric-valued
REL_UNARY = "relation_unary"      # relation applied below the root, must produce entities
REL_NUMERIC = "relation_numeric"  # comparison relation of argmax/argmin/filter
SLOTS = (ENTITY, NUMBER, REL_ANY, REL_UNARY, REL_NUMERIC)


class IllegalTransition(ValueError):
    pass


class ArityUnderflow(IllegalTransition):
    pass


class IncompleteDerivation(ValueError):
    pass


class Op(NamedTuple):
    kind: str               # NT | TER | RED | NTRED | STOP
    tag: Optional[str] = None

    def __str__(self):
        return self.kind if self.tag is None else f"{self.kind}({self.tag})"


RED = Op("RED")
STOP = Op("STOP")
TD_OPS = tuple(Op("NT", t) for t in NT_TAGS) + tuple(Op("TER", t) for t in TER_TAGS) + (RED,)
BU_OPS = tuple(Op("TER", t) for t in TER_TAGS) + tuple(Op("NTRED", t) for t in NT_TAGS) + (STOP,)
ALL_OPS = tuple(dict.fromkeys(TD_OPS + BU_OPS))
OP_INDEX = {op: i for i, op in enumerate(ALL_OPS)}


def needs_token(op: Op) -> bool:
    return op.tag in ("relation", "entity")


@dataclass(frozen=True)
class Limits:
    max_open_nt: int = 10
    max_total_nt: int = 10
    max_consecutive_ter: int = 5
    max_terminals: Optional[int] = None  # bottom-up; set to the utterance length


@dataclass(frozen=True)
class Inventory:
    """Which token slots have at least one admissible token for this utterance."""

    entity: bool = True
    number: bool = True
    relation_any: bool = True
    relation_unary: bool = True
    relation_numeric: bool = True

    def has(self, slot):
        return getattr(self, slot)


FULL_INVENTORY = Inventory()


# -- stack items ----------------------------------------------------------------

@dataclass(frozen=True)
class Open:
    tag: str
    token: Optional[str] = None


@dataclass(frozen=True)
class RelArg:
    relation: str


@dataclass(frozen=True)
class NumArg:
    value: float


def item_kind(item, sig: Signature = Signature()) -> str:
    if isinstance(item, RelArg):
        return R
    if isinstance(item, NumArg):
        return V
    if isinstance(item, Open):
        return "open"
    if isinstance(item, Count) or (isinstance(item, Apply) and sig.is_numeric(item.relation)):
        return "N"
    return U


def render_item(item) -> str:
    if isinstance(item, Open):
        return f"{item.token or item.tag}("
    if isinstance(item, RelArg):
        return item.relation
    if isinstance(item, NumArg):
        return format_number(item.value)
    return print_funql(item)


def build_node(tag: str, token, kids) -> LogicalForm:
    if tag == "relation":
        return Apply(token, kids[0])
    if tag == "count":
        return Count(kids[0])
    if tag == "argmax":
        return ArgMax(kids[0], kids[1].relation)
    if tag == "argmin":
        return ArgMin(kids[0], kids[1].relation)
    if tag == "and":
        return And(kids[0], kids[1])
    if tag == "or":
        return Or(kids[0], kids[1])
    return Filter(tag[len("filter_"):], kids[0], kids[1].relation, Number(kids[2].value))


# -- configurations -------------------------------------------------------------

@dataclass(frozen=True)
class TopDownConfig:
    """Stack of fragments plus the stack N of open nonterminal positions.

    The pointer always addresses ``open_nts[-1]``, the most recent open
    nonterminal.
    """

    stack: tuple = ()
    open_nts: tuple = ()
    n_nt: int = 0
    mode: str = field(default="td", init=False)

    @property
    def pointer(self):
        return self.open_nts[-1] if self.open_nts else None

    def is_terminal(self) -> bool:
        return not self.open_nts and len(self.stack) == 1

    def expected_slot(self):
        """Argument kind the innermost open nonterminal wants next, 'full', or
        None at the root."""
        if not self.open_nts:
            return None
        p = self.open_nts[-1]
        slots = ARGUMENTS[self.stack[p].tag]
        filled = len(self.stack) - p - 1
        return "full" if filled >= len(slots) else slots[filled]

    def render(self) -> str:
        return " || ".join(render_item(x) for x in self.stack)


@dataclass(frozen=True)
class BottomUpConfig:
    stack: tuple = ()
    n_ter: int = 0
    consecutive_ter: int = 0
    n_ntred: int = 0
    stopped: bool = False
    mode: str = field(default="bu", init=False)

    def is_terminal(self) -> bool:
        return self.stopped

    def render(self) -> str:
        return " || ".join(render_item(x) for x in self.stack)


def initial_config(mode: str):
    if mode == "td":
        return TopDownConfig()
    if mode == "bu":
        return BottomUpConfig()
    raise ValueError(f"unknown mode {mode!r}")


def _bu_kinds(stack, sig):
    return [item_kind(x, sig) for x in stack]


def _bu_pending(kinds) -> int:
    """Reductions still needed to bring a bottom-up stack down to one tree."""
    if not kinds:
        return 0
    n_unary = sum(k in (U, "N") for k in kinds)
    return max(n_unary - 1, 0) + (1 if R in kinds else 0)


def token_slot(config, op: Op, sig: Signature = Signature()) -> Optional[str]:
    """Token slot an op draws from in ``config``; None for ops without a token."""
    if op.tag == "relation" and op.kind in ("NT", "NTRED"):
        at_root = (not config.stack) if config.mode == "td" else len(config.stack) == 1
        return REL_ANY if at_root else REL_UNARY
    if op == Op("TER", "relation"):
        return REL_NUMERIC
    if op == Op("TER", "entity"):
        if config.mode == "td":
            return NUMBER if config.expected_slot() == V else ENTITY
        return NUMBER if config.stack and isinstance(config.stack[-1], RelArg) else ENTITY
    return None


# -- legality ---------------------------------------------------------------------

def legal_transitions(config, sig: Signature = Signature(), limits: Limits = Limits(),
                      inventory: Inventory = FULL_INVENTORY) -> list:
    """Ops allowed in ``config`` under structural limits and FunQL typing, in
    canonical order."""
    if config.mode == "td":
        return _td_legal(config, sig, limits, inventory)
    return _bu_legal(config, sig, limits, inventory)


def _td_legal(c: TopDownConfig, sig, limits, inv) -> list:
    if c.is_terminal():
        return []
    slot = c.expected_slot()
    if slot == "full":
        return [RED]
    out = []
    if slot in (None, U):
        at_root = slot is None
        if len(c.open_nts) < limits.max_open_nt and c.n_nt < limits.max_total_nt:
            for tag in NT_TAGS:
                if tag == "count" and not at_root:
                    continue
                if tag == "relation" and not inv.has(REL_ANY if at_root else REL_UNARY):
                    continue
                if ARGUMENTS[tag][1:2] == (R,) and not inv.has(REL_NUMERIC):
                    continue
                if tag in FILTER_TAGS and not inv.has(NUMBER):
                    continue
                out.append(Op("NT", tag))
        if not at_root and inv.has(ENTITY):
            out.append(Op("TER", "entity"))
    elif slot == R:
        if inv.has(REL_NUMERIC):
            out.append(Op("TER", "relation"))
    elif slot == V:
        if inv.has(NUMBER):
            out.append(Op("TER", "entity"))
    return out


def _bu_legal(c: BottomUpConfig, sig, limits, inv) -> list:
    if c.stopped:
        return []
    kinds = _bu_kinds(c.stack, sig)
    top = kinds[-1] if kinds else None
    height = len(kinds)
    out = []

    ter_ok = c.consecutive_ter < limits.max_consecutive_ter and (
        limits.max_terminals is None or c.n_ter < limits.max_terminals)
    budget = limits.max_total_nt - c.n_ntred
    if ter_ok:
        if top == R:
            if inv.has(NUMBER):  # filter value; keeps the pending count unchanged
                out.append(Op("TER", "entity"))
        elif top in (None, U):
            if inv.has(ENTITY) and _bu_pending(kinds + [U]) <= budget:
                out.append(Op("TER", "entity"))
            if top == U and inv.has(REL_NUMERIC) and _bu_pending(kinds + [R]) <= budget:
                out.append(Op("TER", "relation"))

    if budget >= 1:
        for tag in NT_TAGS:
            slots = ARGUMENTS[tag]
            if height < len(slots) or kinds[height - len(slots):] != list(slots):
                continue
            if tag == "count" and height != 1:
                continue
            if tag == "relation" and not inv.has(REL_ANY if height == 1 else REL_UNARY):
                continue
            after = kinds[:height - len(slots)] + [U]
            if _bu_pending(after) > budget - 1:
                continue
            out.append(Op("NTRED", tag))

    if height == 1 and top in (U, "N"):
        out.append(STOP)
    return out


# -- applying transitions -----------------------------------------------------------

def _parse_number(token) -> float:
    if isinstance(token, (int, float)):
        return float(token)
    if not is_number_literal(str(token)):
        raise IllegalTransition(f"filter value must be a number literal, got {token!r}")
    return float(token)


def apply_transition(config, op: Op, token=None, sig: Signature = Signature()):
    """Return the successor configuration.

    Checks the structural and typing preconditions of ``op`` (not the numeric
    limits, which only restrict search) and raises IllegalTransition or
    ArityUnderflow when they fail.
    """
    if config.mode == "td":
        return _td_apply(config, op, token)
    return _bu_apply(config, op, token, sig)


def _need_token(op, token):
    if needs_token(op) and (token is None or token == ""):
        raise IllegalTransition(f"{op} requires a token")


def _td_apply(c: TopDownConfig, op: Op, token) -> TopDownConfig:
    if c.is_terminal():
        raise IllegalTransition(f"{op} after the derivation is complete")
    slot = c.expected_slot()
    if op.kind == "NT":
        if op.tag not in ARGUMENTS:
            raise IllegalTransition(f"unknown nonterminal {op.tag!r}")
        if slot not in (None, U):
            raise IllegalTransition(f"{op} where a {slot} argument is expected")
        if op.tag == "relation":
            _need_token(op, token)
        item = Open(op.tag, token if op.tag == "relation" else None)
        return replace(c, stack=c.stack + (item,), open_nts=c.open_nts + (len(c.stack),), n_nt=c.n_nt + 1)
    if op.kind == "TER":
        _need_token(op, token)
        if op.tag == "relation":
            if slot != R:
                raise IllegalTransition(f"TER(relation) where {slot} is expected")
            item = RelArg(token)
        elif op.tag == "entity":
            if slot == V:
                item = NumArg(_parse_number(token))
            elif slot in (U, None):
                if slot is None and c.stack:
                    raise IllegalTransition("TER(entity) outside any open nonterminal")
                item = EntityLeaf(token)
            else:
                raise IllegalTransition(f"TER(entity) where {slot} is expected")
        else:
            raise IllegalTransition(f"unknown terminal tag {op.tag!r}")
        return replace(c, stack=c.stack + (item,))
    if op.kind == "RED":
        if slot != "full":
            raise IllegalTransition("RED before the open nonterminal has all its arguments"
                                    if c.open_nts else "RED with no open nonterminal")
        p = c.open_nts[-1]
        head = c.stack[p]
        node = build_node(head.tag, head.token, c.stack[p + 1:])
        return replace(c, stack=c.stack[:p] + (node,), open_nts=c.open_nts[:-1])
    raise IllegalTransition(f"{op} is not a top-down transition")


def _bu_apply(c: BottomUpConfig, op: Op, token, sig) -> BottomUpConfig:
    if c.stopped:
        raise IllegalTransition(f"{op} after STOP")
    kinds = _bu_kinds(c.stack, sig)
    if op.kind == "TER":
        _need_token(op, token)
        if op.tag == "relation":
            item = RelArg(token)
        elif op.tag == "entity":
            item = NumArg(_parse_number(token)) if kinds and kinds[-1] == R else EntityLeaf(token)
        else:
            raise IllegalTransition(f"unknown terminal tag {op.tag!r}")
        return replace(c, stack=c.stack + (item,), n_ter=c.n_ter + 1, consecutive_ter=c.consecutive_ter + 1)
    if op.kind == "NTRED":
        if op.tag not in ARGUMENTS:
            raise IllegalTransition(f"unknown nonterminal {op.tag!r}")
        slots = ARGUMENTS[op.tag]
        if len(kinds) < len(slots):
            raise ArityUnderflow(f"{op} needs {len(slots)} fragments, stack has {len(kinds)}")
        got = kinds[len(kinds) - len(slots):]
        if got != list(slots):
            raise IllegalTransition(f"{op} expects arguments {slots}, stack top holds {tuple(got)}")
        if op.tag == "relation":
            _need_token(op, token)
        kids = c.stack[len(c.stack) - len(slots):]
        node = build_node(op.tag, token, kids)
        return replace(c, stack=c.stack[:len(c.stack) - len(slots)] + (node,),
                       n_ntred=c.n_ntred + 1, consecutive_ter=0)
    if op.kind == "STOP":
        if len(kinds) != 1 or kinds[0] not in (U, "N"):
            raise IllegalTransition("STOP requires exactly one complete tree on the stack")
        return replace(c, stopped=True)
    raise IllegalTransition(f"{op} is not a bottom-up transition")


def final_form(config) -> LogicalForm:
    if not config.is_terminal():
        raise IncompleteDerivation("derivation has not reached a terminal configuration")
    return config.stack[0]


# -- derivations --------------------------------------------------------------------

class Step(NamedTuple):
    op: Op
    token: Optional[str] = None


@dataclass(frozen=True)
class Derivation:
    mode: str
    steps: tuple

    def to_json(self) -> str:
        return json.dumps({"mode": self.mode,
                           "steps": [[s.op.kind, s.op.tag, s.token] for s in self.steps]})

    @classmethod
    def from_json(cls, text: str) -> "Derivation":
        obj = json.loads(text)
        steps = tuple(Step(Op(k, t), tok) for k, t, tok in obj["steps"])
        return cls(obj["mode"], steps)

    def tokens(self) -> list:
        """Emitted logical-form tokens (operator names included), in order."""
        out = []
        for op, tok in self.steps:
            if op.kind in ("RED", "STOP"):
                continue
            out.append(tok if tok is not None else op.tag)
        return out


def _terminal_step(item) -> Step:
    if isinstance(item, str):  # relation argument
        return Step(Op("TER", "relation"), item)
    if isinstance(item, Number):
        return Step(Op("TER", "entity"), format_number(item.value))
    return Step(Op("TER", "entity"), item.id)


def _arguments(lf):
    """(tag, token, args) where args mix sub-forms, relation ids and Numbers."""
    if isinstance(lf, Apply):
        return "relation", lf.relation, (lf.child,)
    if isinstance(lf, Count):
        return "count", None, (lf.child,)
    if isinstance(lf, ArgMax):
        return "argmax", None, (lf.child, lf.relation)
    if isinstance(lf, ArgMin):
        return "argmin", None, (lf.child, lf.relation)
    if isinstance(lf, Filter):
        if not isinstance(lf.value, Number):
            raise TypeError("filter value must be a number")
        return f"filter_{lf.comparator}", None, (lf.child, lf.relation, lf.value)
    if isinstance(lf, And):
        return "and", None, (lf.left, lf.right)
    if isinstance(lf, Or):
        return "or", None, (lf.left, lf.right)
    raise TypeError(f"not a logical form: {lf!r}")


def td_oracle(lf: LogicalForm) -> Derivation:
    steps = []

    def visit(x):
        if isinstance(x, (EntityLeaf, str, Number)):
            steps.append(_terminal_step(x))
            return
        tag, token, args = _arguments(x)
        steps.append(Step(Op("NT", tag), token))
        for a in args:
            visit(a)
        steps.append(Step(RED))

    visit(lf)
    return Derivation("td", tuple(steps))


def bu_oracle(lf: LogicalForm) -> Derivation:
    steps = []

    def visit(x):
        if isinstance(x, (EntityLeaf, str, Number)):
            steps.append(_terminal_step(x))
            return
        tag, token, args = _arguments(x)
        for a in args:
            visit(a)
        steps.append(Step(Op("NTRED", tag), token))

    visit(lf)
    steps.append(Step(STOP))
    return Derivation("bu", tuple(steps))


def oracle(lf: LogicalForm, mode: str) -> Derivation:
    return td_oracle(lf) if mode == "td" else bu_oracle(lf)


def replay(d: Derivation, sig: Signature = Signature()) -> list:
    """All configurations visited by ``d``, starting with the initial one."""
    configs = [initial_config(d.mode)]
    for op, tok in d.steps:
        configs.append(apply_transition(configs[-1], op, tok, sig))
    return configs


def reconstruct(d: Derivation, sig: Signature = Signature()) -> LogicalForm:
    c = initial_config(d.mode)
    for op, tok in d.steps:
        c = apply_transition(c, op, tok, sig)
    return final_form(c)
