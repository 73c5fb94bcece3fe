"""Typed phrase dictionary with per-type token regexes, and dictionary labeling.

Phrase matching is token-aligned and case-insensitive. Overlapping
candidate matches are resolved globally: longer spans first, then the
leftmost one; tokens taken by an accepted span are unavailable to the rest.
Regex rules run afterwards on the tokens that are still O, one token at a
time, using Python ``re`` full-surface matching.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence, Union

from .corpus import DEFAULT_ENTITY_TYPES, Document, Provenance, Sentence, Tag, TagAssignment

Phrase = tuple[str, ...]


class GazetteerError(ValueError):
    pass


class GazetteerConflict(GazetteerError):
    def __init__(self, phrase: Phrase, existing: str, requested: str):
        self.phrase = phrase
        self.existing = existing
        self.requested = requested
        super().__init__(f"phrase {' '.join(phrase)!r} is already a {existing}, cannot add as {requested}")


def normalize_phrase(phrase: Union[str, Sequence[str]]) -> Phrase:
    toks = phrase.split() if isinstance(phrase, str) else list(phrase)
    out = tuple(t.lower() for t in toks)
    if not out or any(not t or any(c.isspace() for c in t) for t in out):
        raise GazetteerError(f"invalid phrase {phrase!r}")
    return out


@dataclass(frozen=True)
class MatchSpan:
    sentence: int
    start: int
    end: int  # inclusive
    entity_type: str
    source: Provenance


class Gazetteer:
    def __init__(self, entity_types: Iterable[str] = DEFAULT_ENTITY_TYPES):
        self.entity_types = tuple(entity_types)
        if len(set(self.entity_types)) != len(self.entity_types):
            raise GazetteerError("entity type names must be unique")
        self._phrases: dict[Phrase, str] = {}
        self.regex_rules: dict[str, list[str]] = {t: [] for t in self.entity_types}
        self._compiled: dict[str, list[re.Pattern]] = {t: [] for t in self.entity_types}
        self._lengths: list[int] = []
        self.version = 0

    def _check_type(self, t):
        if t not in self.entity_types:
            raise GazetteerError(f"unknown entity type {t!r}")

    def __len__(self):
        return len(self._phrases)

    def __contains__(self, phrase) -> bool:
        return normalize_phrase(phrase) in self._phrases

    def type_of(self, phrase) -> Optional[str]:
        return self._phrases.get(normalize_phrase(phrase))

    def entries(self, t: str) -> set[Phrase]:
        self._check_type(t)
        return {p for p, pt in self._phrases.items() if pt == t}

    def all_entries(self) -> dict[Phrase, str]:
        return dict(self._phrases)

    def counts(self) -> dict[str, int]:
        out = {t: 0 for t in self.entity_types}
        for t in self._phrases.values():
            out[t] += 1
        return out

    def is_empty(self) -> bool:
        return not self._phrases and not any(self.regex_rules.values())

    def add_entities(self, items: Iterable[tuple[Union[str, Sequence[str]], str]]) -> list[bool]:
        """Insert a batch of (phrase, type) pairs; True where a phrase was new.

        The whole batch is validated before anything is inserted. The version
        moves by one if the batch changed the dictionary.
        """
        staged: dict[Phrase, str] = {}
        plan = []
        for phrase, t in items:
            self._check_type(t)
            p = normalize_phrase(phrase)
            existing = self._phrases.get(p, staged.get(p))
            if existing is not None and existing != t:
                raise GazetteerConflict(p, existing, t)
            plan.append(existing is None)
            staged[p] = t
        new = {p: t for p, t in staged.items() if p not in self._phrases}
        if new:
            self._phrases.update(new)
            self._lengths = sorted({len(p) for p in self._phrases}, reverse=True)
            self.version += 1
        return plan

    def add_entity(self, phrase, t: str) -> bool:
        return self.add_entities([(phrase, t)])[0]

    def add_regex(self, t: str, pattern: str) -> None:
        self._check_type(t)
        try:
            compiled = re.compile(pattern)
        except re.error as exc:
            raise GazetteerError(f"bad regex {pattern!r} for {t}: {exc}") from None
        self.regex_rules[t].append(pattern)
        self._compiled[t].append(compiled)

    def copy(self) -> "Gazetteer":
        g = Gazetteer(self.entity_types)
        g._phrases = dict(self._phrases)
        g._lengths = list(self._lengths)
        g.regex_rules = {t: list(r) for t, r in self.regex_rules.items()}
        g._compiled = {t: list(r) for t, r in self._compiled.items()}
        g.version = self.version
        return g

    def same_entries(self, other: "Gazetteer") -> bool:
        return self._phrases == other._phrases and self.regex_rules == other.regex_rules

    # -- matching -----------------------------------------------------------

    def find_phrase_matches(self, sentence: Sentence, sent_idx: int = 0) -> list[MatchSpan]:
        lowered = [t.surface.lower() for t in sentence.tokens]
        n = len(lowered)
        candidates = []
        for start in range(n):
            for length in self._lengths:
                if start + length <= n:
                    t = self._phrases.get(tuple(lowered[start:start + length]))
                    if t is not None:
                        candidates.append((-length, start, t))
        candidates.sort()
        taken = [False] * n
        spans = []
        for neg_len, start, t in candidates:
            end = start - neg_len
            if not any(taken[start:end]):
                taken[start:end] = [True] * (end - start)
                spans.append(MatchSpan(sent_idx, start, end - 1, t, Provenance.DICTIONARY))
        spans.sort(key=lambda s: s.start)
        return spans

    def match_regex(self, surface: str) -> Optional[str]:
        for t in self.entity_types:
            for pattern in self._compiled[t]:
                if pattern.fullmatch(surface):
                    return t
        return None

    def label_document(self, doc: Document) -> TagAssignment:
        ta = TagAssignment.empty(doc)
        for si, sent in enumerate(doc.sentences):
            tags, provs = ta.tags[si], ta.provenance[si]
            for span in self.find_phrase_matches(sent, si):
                for k in range(span.start, span.end + 1):
                    tags[k] = Tag(span.entity_type)
                    provs[k] = Provenance.DICTIONARY
            if any(self._compiled.values()):
                for k, tok in enumerate(sent.tokens):
                    if tags[k].type is None:
                        t = self.match_regex(tok.surface)
                        if t is not None:
                            tags[k] = Tag(t)
                            provs[k] = Provenance.REGEX
        return ta


def label_corpus(corpus: Sequence[Document], gaz: Gazetteer) -> list[TagAssignment]:
    return [gaz.label_document(doc) for doc in corpus]


def iter_gazetteer_records(gaz: Gazetteer):
    for t in gaz.entity_types:
        for p in sorted(gaz.entries(t)):
            yield {"type": t, "phrase": " ".join(p)}
        for pattern in gaz.regex_rules[t]:
            yield {"type": t, "regex": pattern}


def dump_gazetteer(gaz: Gazetteer, stream: IO[str]) -> None:
    for rec in iter_gazetteer_records(gaz):
        stream.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def parse_gazetteer(stream: IO[str], entity_types: Iterable[str] = DEFAULT_ENTITY_TYPES) -> Gazetteer:
    gaz = Gazetteer(entity_types)
    phrases = []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise GazetteerError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        t = rec.get("type")
        if t not in gaz.entity_types:
            raise GazetteerError(f"line {lineno}: unknown entity type {t!r}")
        if "phrase" in rec:
            phrases.append((rec["phrase"], t))
        elif "regex" in rec:
            gaz.add_regex(t, rec["regex"])
        else:
            raise GazetteerError(f"line {lineno}: record needs 'phrase' or 'regex'")
    gaz.add_entities(phrases)
    gaz.version = 0
    return gaz


def save(gaz: Gazetteer, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        dump_gazetteer(gaz, f)


def load_seed(path: Union[str, Path], entity_types: Iterable[str] = DEFAULT_ENTITY_TYPES) -> Gazetteer:
    with open(path, encoding="utf-8") as f:
        return parse_gazetteer(f, entity_types)
