"""Knowledge base storage and FunQL execution."""
from __future__ import annotations

import operator
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

from .funql import (And, Apply, ArgMax, ArgMin, Count, EntityLeaf, EntityRef, Filter, Number,
                    Or, Signature, Value, format_number, is_number_literal)


class KBError(Exception):
    pass


class KBParseError(KBError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = f"{path or '<kb>'}:{line}: " if line is not None else ""
        super().__init__(where + message)


class IntegrityError(KBParseError):
    pass


class UnknownSymbol(KBError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown symbol"


class NonNumericComparison(KBError):
    pass


@dataclass(frozen=True)
class Triple:
    subject: str
    relation: str
    object: Value


@dataclass(frozen=True, eq=False)
class KnowledgeBase:
    """Entities, relations and subject-relation-object triples.

    Immutable after construction; lookup indexes are built eagerly.
    """

    entities: MappingProxyType  # id -> display name
    relations: frozenset
    triples: tuple
    _index: dict = field(repr=False, compare=False, default=None)

    @classmethod
    def build(cls, triples, entities=None, relations=None) -> "KnowledgeBase":
        """Create a KB, deriving missing vocabularies from the triples.

        ``entities`` may be an iterable of ids or a mapping id -> display name.
        Duplicate triples are dropped.
        """
        triples = list(dict.fromkeys(triples))
        if entities is None:
            ents = {}
            for t in triples:
                ents.setdefault(t.subject, None)
                if isinstance(t.object, EntityRef):
                    ents.setdefault(t.object.id, None)
        elif isinstance(entities, dict) or hasattr(entities, "items"):
            ents = dict(entities)
        else:
            ents = dict.fromkeys(entities)
        ents = {e: (n if n else e.replace("_", " ")) for e, n in ents.items()}
        rels = frozenset(relations) if relations is not None else frozenset(t.relation for t in triples)
        for t in triples:
            if t.subject not in ents:
                raise IntegrityError(f"unknown subject entity {t.subject!r}")
            if t.relation not in rels:
                raise IntegrityError(f"unknown relation {t.relation!r}")
            if isinstance(t.object, EntityRef) and t.object.id not in ents:
                raise IntegrityError(f"unknown object entity {t.object.id!r}")
        for e in ents:
            if not e or any(ch.isspace() for ch in e):
                raise IntegrityError(f"invalid entity id {e!r}")
        index = defaultdict(list)
        for t in triples:
            index[(t.subject, t.relation)].append(t.object)
        return cls(MappingProxyType(ents), rels, tuple(triples), dict(index))

    def __eq__(self, other):
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return (dict(self.entities) == dict(other.entities) and self.relations == other.relations
                and set(self.triples) == set(other.triples))

    def __hash__(self):
        return hash((frozenset(self.entities), self.relations, frozenset(self.triples)))

    def objects(self, subject: str, relation: str) -> list:
        return self._index.get((subject, relation), [])

    def numeric_relations(self) -> frozenset:
        """Relations with at least one triple whose objects are all numbers."""
        kinds = defaultdict(set)
        for t in self.triples:
            kinds[t.relation].add(type(t.object))
        return frozenset(r for r, k in kinds.items() if k == {Number})

    def signature(self, strict=True) -> Signature:
        return Signature(numeric_relations=self.numeric_relations(), strict=strict)

    def parse_value(self, text) -> Value:
        """Interpret a denotation element: known entity ids win over numbers."""
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            return Number(text)
        if text in self.entities:
            return EntityRef(text)
        if is_number_literal(text):
            return Number(float(text))
        raise UnknownSymbol(f"unknown entity {text!r}")


# -- file format --------------------------------------------------------------

def load_kb(path) -> KnowledgeBase:
    path = Path(path)
    return parse_kb(path.read_text(encoding="utf-8"), source=str(path))


def parse_kb(text: str, source=None) -> KnowledgeBase:
    """Parse the TSV triple format.

    Optional vocabulary lines ``@entity<TAB>id[<TAB>display name]`` and
    ``@relation<TAB>id`` switch on strict checking: every triple must then use
    declared symbols.
    """
    decl_ents, decl_rels, rows = {}, [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if cols[0] == "@entity":
            if len(cols) not in (2, 3) or not cols[1]:
                raise KBParseError("malformed @entity line", lineno, source)
            decl_ents[cols[1]] = cols[2] if len(cols) == 3 else None
        elif cols[0] == "@relation":
            if len(cols) != 2 or not cols[1]:
                raise KBParseError("malformed @relation line", lineno, source)
            decl_rels.append(cols[1])
        else:
            if len(cols) != 3 or not all(c.strip() for c in cols):
                raise KBParseError(f"expected 3 tab-separated columns, found {len(cols)}", lineno, source)
            rows.append((lineno, *[c.strip() for c in cols]))

    strict_ents = bool(decl_ents)
    strict_rels = bool(decl_rels)
    subjects = {s for _, s, _, _ in rows}
    known = set(decl_ents) if strict_ents else subjects
    triples = []
    for lineno, s, r, o in rows:
        if strict_ents and s not in decl_ents:
            raise IntegrityError(f"undeclared subject entity {s!r}", lineno, source)
        if strict_rels and r not in decl_rels:
            raise IntegrityError(f"undeclared relation {r!r}", lineno, source)
        if any(ch.isspace() for ch in s) or any(ch.isspace() for ch in o):
            raise KBParseError("identifiers may not contain whitespace", lineno, source)
        if o in known:
            obj = EntityRef(o)
        elif is_number_literal(o):
            obj = Number(float(o))
        elif strict_ents:
            raise IntegrityError(f"undeclared object entity {o!r}", lineno, source)
        else:
            obj = EntityRef(o)
        triples.append(Triple(s, r, obj))
    try:
        return KnowledgeBase.build(triples, entities=decl_ents if strict_ents else None,
                                   relations=decl_rels if strict_rels else None)
    except IntegrityError as err:
        raise IntegrityError(str(err), None, source) from None


def dump_kb(kb: KnowledgeBase) -> str:
    lines = ["# entities"]
    for e, name in sorted(kb.entities.items()):
        lines.append(f"@entity\t{e}\t{name}")
    lines.append("# relations")
    lines.extend(f"@relation\t{r}" for r in sorted(kb.relations))
    lines.append("# triples")
    for t in kb.triples:
        if isinstance(t.object, EntityRef):
            o = t.object.id
        else:
            o = format_number(t.object.value)
            if o in kb.entities:
                o = repr(float(t.object.value))  # keep numbers distinct from numeric-looking entity ids
        lines.append(f"{t.subject}\t{t.relation}\t{o}")
    return "\n".join(lines) + "\n"


def save_kb(kb: KnowledgeBase, path) -> None:
    Path(path).write_text(dump_kb(kb), encoding="utf-8")


# -- execution ----------------------------------------------------------------

_COMPARE = {"eq": operator.eq, "neq": operator.ne, "gt": operator.gt,
            "lt": operator.lt, "ge": operator.ge, "le": operator.le}


def execute(lf, kb: KnowledgeBase) -> frozenset:
    """Denotation of ``lf`` as a frozenset of EntityRef / Number values.

    The empty frozenset plays the role of the empty denotation.
    """
    if isinstance(lf, EntityLeaf):
        if lf.id not in kb.entities:
            raise UnknownSymbol(f"unknown entity {lf.id!r}")
        return frozenset((EntityRef(lf.id),))
    if isinstance(lf, Apply):
        _relation(kb, lf.relation)
        out = set()
        for v in execute(lf.child, kb):
            if isinstance(v, EntityRef):
                out.update(kb.objects(v.id, lf.relation))
        return frozenset(out)
    if isinstance(lf, Count):
        return frozenset((Number(len(execute(lf.child, kb))),))
    if isinstance(lf, (ArgMax, ArgMin)):
        best = max if isinstance(lf, ArgMax) else min
        scored = _numeric_values(execute(lf.child, kb), lf.relation, kb)
        if not scored:
            return frozenset()
        keyed = {e: best(vals) for e, vals in scored.items()}
        target = best(keyed.values())
        return frozenset(e for e, v in keyed.items() if v == target)
    if isinstance(lf, Filter):
        if not isinstance(lf.value, Number):
            raise NonNumericComparison(f"filter value {lf.value!r} is not a number")
        cmp = _COMPARE[lf.comparator]
        scored = _numeric_values(execute(lf.child, kb), lf.relation, kb)
        return frozenset(e for e, vals in scored.items() if any(cmp(v, lf.value.value) for v in vals))
    if isinstance(lf, And):
        return execute(lf.left, kb) & execute(lf.right, kb)
    if isinstance(lf, Or):
        return execute(lf.left, kb) | execute(lf.right, kb)
    raise TypeError(f"not a logical form: {lf!r}")


def _relation(kb, r):
    if r not in kb.relations:
        raise UnknownSymbol(f"unknown relation {r!r}")


def _numeric_values(members, relation, kb) -> dict:
    """Map each entity in ``members`` to its numeric ``relation`` objects.

    Entities without a numeric object are left out. Raises NonNumericComparison
    when nothing is comparable but some member reached an entity-valued object.
    """
    _relation(kb, relation)
    out = {}
    saw_entity_object = False
    for v in members:
        if not isinstance(v, EntityRef):
            continue
        nums = []
        for o in kb.objects(v.id, relation):
            if isinstance(o, Number):
                nums.append(o.value)
            else:
                saw_entity_object = True
        if nums:
            out[v] = nums
    if not out and saw_entity_object:
        raise NonNumericComparison(f"relation {relation!r} has no numeric values for the compared set")
    return out
