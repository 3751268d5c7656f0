"""JSON-lines datasets: supervised pairs, weak (denotation) pairs and the
entity-annotated distant corpus."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .semantics import (KBError, KnowledgeBase, LFSyntaxError, ArityError, format_value, parse_funql,
                        print_funql)
from .vocab import tokenize


class DataError(ValueError):
    def __init__(self, msg, path=None, line=None):
        where = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(where + msg)
        self.path, self.line = path, line


@dataclass
class SupervisedExample:
    utterance: str
    lf: object
    words: list = field(default=None)

    def __post_init__(self):
        if self.words is None:
            self.words = tokenize(self.utterance)


@dataclass
class WeakExample:
    utterance: str
    denotation: frozenset
    exactly_one: bool = False
    words: list = field(default=None)

    def __post_init__(self):
        if self.words is None:
            self.words = tokenize(self.utterance)


@dataclass
class Mention:
    span: tuple  # [start, end) token offsets
    entity: str


@dataclass
class DistantSentence:
    tokens: list
    mentions: list


def _records(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise DataError(f"cannot read: {err.strerror}", path, 0) from None
    for no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise DataError(f"invalid JSON ({err.msg})", path, no) from None
        if not isinstance(obj, dict):
            raise DataError("expected a JSON object", path, no)
        yield no, obj


def _require(obj, key, kind, path, no):
    if key not in obj or not isinstance(obj[key], kind):
        raise DataError(f"missing or malformed field {key!r}", path, no)
    return obj[key]


def load_supervised(path) -> list:
    out = []
    for no, obj in _records(path):
        utt = _require(obj, "utterance", str, path, no)
        try:
            lf = parse_funql(_require(obj, "lf", str, path, no))
        except (LFSyntaxError, ArityError) as err:
            raise DataError(f"bad logical form: {err}", path, no) from None
        ex = SupervisedExample(utt, lf)
        if not ex.words:
            raise DataError("utterance has no tokens", path, no)
        out.append(ex)
    return out


def parse_denotation(values, kb: KnowledgeBase) -> frozenset:
    """Gold strings resolve to a known entity id first, then to a number."""
    return frozenset(kb.parse_value(v) for v in values)


def load_weak(path, kb: KnowledgeBase) -> list:
    out = []
    for no, obj in _records(path):
        utt = _require(obj, "utterance", str, path, no)
        vals = _require(obj, "denotation", list, path, no)
        if not vals:
            raise DataError("denotation must be nonempty", path, no)
        try:
            den = parse_denotation(vals, kb)
        except KBError as err:
            raise DataError(str(err), path, no) from None
        ex = WeakExample(utt, den, bool(obj.get("exactly_one", False)))
        if not ex.words:
            raise DataError("utterance has no tokens", path, no)
        out.append(ex)
    return out


def load_distant(path) -> list:
    out = []
    for no, obj in _records(path):
        toks = _require(obj, "tokens", list, path, no)
        ments = []
        for m in _require(obj, "mentions", list, path, no):
            try:
                i, j = m["span"]
                ments.append(Mention((int(i), int(j)), str(m["entity"])))
            except (KeyError, TypeError, ValueError):
                raise DataError("malformed mention", path, no) from None
            if not 0 <= i < j <= len(toks):
                raise DataError(f"mention span {[i, j]} outside the sentence", path, no)
        out.append(DistantSentence([str(t) for t in toks], ments))
    return out


def dataset_kind(path) -> str:
    """'supervised' or 'weak', from the keys of the first record."""
    for no, obj in _records(path):
        if "lf" in obj:
            return "supervised"
        if "denotation" in obj:
            return "weak"
        raise DataError("record has neither 'lf' nor 'denotation'", path, no)
    raise DataError("empty dataset", path, 0)


def supervised_record(ex: SupervisedExample) -> str:
    return json.dumps({"utterance": ex.utterance, "lf": print_funql(ex.lf)})


def weak_record(ex: WeakExample) -> str:
    return json.dumps({"utterance": ex.utterance,
                       "denotation": sorted(format_value(v) for v in ex.denotation),
                       "exactly_one": ex.exactly_one})


def write_jsonl(path, lines):
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
