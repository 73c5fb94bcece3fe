"""Corpus data model, IO tags and readers for CoNLL-U and tagged-document files."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import IO, Iterable, NamedTuple, Optional, Sequence

DEFAULT_ENTITY_TYPES = ("Product", "Component", "Brand", "Attribute")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    index: int
    surface: str
    head: Optional[int] = None
    deprel: str = "_"

    def __post_init__(self):
        if not self.surface:
            raise CorpusError(f"empty surface at token {self.index}")
        if self.head is not None and self.head == self.index:
            raise CorpusError(f"token {self.index} is its own head")


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]

    def __post_init__(self):
        n = len(self.tokens)
        for i, tok in enumerate(self.tokens):
            if tok.index != i:
                raise CorpusError(f"token index {tok.index} at position {i}")
            if tok.head is not None and not 0 <= tok.head < n:
                raise CorpusError(f"head {tok.head} out of range for token {i}")

    def __len__(self):
        return len(self.tokens)

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    @classmethod
    def from_surfaces(cls, surfaces: Sequence[str], heads=None, deprels=None) -> "Sentence":
        heads = heads if heads is not None else [None] * len(surfaces)
        deprels = deprels if deprels is not None else ["_"] * len(surfaces)
        return cls(tuple(Token(i, s, h, d) for i, (s, h, d) in enumerate(zip(surfaces, heads, deprels))))


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[Sentence, ...]

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    def surfaces(self) -> list[str]:
        return [t.surface for s in self.sentences for t in s.tokens]


class Tag(NamedTuple):
    """An IO tag: ``Tag(None)`` is O, ``Tag("Brand")`` is I-Brand."""

    type: Optional[str]

    @property
    def is_outside(self) -> bool:
        return self.type is None

    def __str__(self):
        return tag_to_string(self)


O = Tag(None)


def I(entity_type: str) -> Tag:  # noqa: E743
    return Tag(entity_type)


def tag_to_string(tag: Tag) -> str:
    return "O" if tag.type is None else f"I-{tag.type}"


def string_to_tag(s: str, entity_types: Optional[Iterable[str]] = None) -> Tag:
    if s == "O":
        return O
    if s.startswith("I-") and len(s) > 2:
        name = s[2:]
        if entity_types is not None and name not in entity_types:
            raise CorpusError(f"unknown entity type {name!r}")
        return Tag(name)
    raise CorpusError(f"unparseable tag {s!r} (only O and I-<Type> are allowed)")


class Provenance(str, enum.Enum):
    DICTIONARY = "dictionary"
    REGEX = "regex"
    EXPANSION = "expansion"
    PREDICTION = "prediction"
    GOLD = "gold"
    UNLABELED = "unlabeled"


@dataclass
class TagAssignment:
    """Per-token tags and provenance for one document, nested by sentence."""

    doc_id: str
    tags: list[list[Tag]]
    provenance: list[list[Provenance]]

    def __post_init__(self):
        if [len(s) for s in self.tags] != [len(s) for s in self.provenance]:
            raise CorpusError(f"{self.doc_id}: tags and provenance are misaligned")
        for tags, provs in zip(self.tags, self.provenance):
            for tag, prov in zip(tags, provs):
                if tag.type is None and prov not in (Provenance.UNLABELED, Provenance.GOLD):
                    raise CorpusError(f"{self.doc_id}: O tag with provenance {prov.value}")
                if tag.type is not None and prov is Provenance.UNLABELED:
                    raise CorpusError(f"{self.doc_id}: entity tag marked unlabeled")

    @classmethod
    def empty(cls, doc: Document) -> "TagAssignment":
        return cls(
            doc.doc_id,
            [[O] * len(s) for s in doc.sentences],
            [[Provenance.UNLABELED] * len(s) for s in doc.sentences],
        )

    def copy(self) -> "TagAssignment":
        return TagAssignment(self.doc_id, [list(s) for s in self.tags], [list(s) for s in self.provenance])

    def flat_tags(self) -> list[Tag]:
        return [t for s in self.tags for t in s]

    def flat_provenance(self) -> list[Provenance]:
        return [p for s in self.provenance for p in s]

    def aligned_to(self, doc: Document) -> bool:
        return [len(s) for s in self.tags] == [len(s) for s in doc.sentences]


def _parse_index(field, lineno):
    try:
        return int(field)
    except ValueError:
        raise CorpusError(f"line {lineno}: non-integer value {field!r}") from None


def read_conllu(stream: IO[str], default_doc_id: str = "doc") -> list[Document]:
    """Read dependency-parsed documents from a CoNLL-U stream.

    Only FORM, HEAD and DEPREL are kept. Multiword ranges ("3-4") and empty
    nodes ("3.1") are skipped. A ``# newdoc id = X`` comment opens document X;
    sentences before any such comment go into ``default_doc_id``.
    """
    documents: list[Document] = []
    doc_id: Optional[str] = None
    sentences: list[Sentence] = []
    rows: list[tuple[int, str, int, str]] = []
    seen_ids: set[str] = set()

    def close_sentence():
        if not rows:
            return
        n = len(rows)
        tokens = []
        for i, (lineno, form, head, deprel) in enumerate(rows):
            if not 0 <= head <= n:
                raise CorpusError(f"line {lineno}: HEAD {head} out of range (sentence has {n} tokens)")
            if head == i + 1:
                raise CorpusError(f"line {lineno}: token is its own head")
            tokens.append(Token(i, form, head - 1 if head else None, deprel))
        sentences.append(Sentence(tuple(tokens)))
        rows.clear()

    def close_document():
        nonlocal sentences
        if sentences:
            did = doc_id if doc_id is not None else default_doc_id
            if did in seen_ids:
                raise CorpusError(f"duplicate document id {did!r}")
            seen_ids.add(did)
            documents.append(Document(did, tuple(sentences)))
        sentences = []

    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            close_sentence()
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("newdoc"):
                key, _, value = body.partition("=")
                if key.strip() in ("newdoc", "newdoc id") and value.strip():
                    close_sentence()
                    close_document()
                    doc_id = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise CorpusError(f"line {lineno}: expected 10 tab-separated columns, got {len(cols)}")
        if "-" in cols[0] or "." in cols[0]:
            continue
        idx = _parse_index(cols[0], lineno)
        if idx != len(rows) + 1:
            raise CorpusError(f"line {lineno}: token ID {idx} out of sequence")
        rows.append((lineno, cols[1], _parse_index(cols[6], lineno), cols[7]))
    close_sentence()
    close_document()
    return documents


def write_conllu(documents: Iterable[Document], stream: IO[str]) -> None:
    for doc in documents:
        stream.write(f"# newdoc id = {doc.doc_id}\n")
        for sent in doc.sentences:
            for tok in sent.tokens:
                head = 0 if tok.head is None else tok.head + 1
                stream.write(f"{tok.index + 1}\t{tok.surface}\t_\t_\t_\t_\t{head}\t{tok.deprel}\t_\t_\n")
            stream.write("\n")


def _split_by_lengths(values, lengths):
    out, pos = [], 0
    for n in lengths:
        out.append(values[pos:pos + n])
        pos += n
    return out


def read_tagged(stream: IO[str], entity_types: Optional[Iterable[str]] = None,
                gold: bool = False) -> list[tuple[Document, TagAssignment]]:
    """Read line-delimited ``{"doc_id", "tokens", "tags"}`` records.

    Optional ``sentences`` (list of sentence lengths) restores sentence
    boundaries and optional ``provenance`` restores label sources. With
    ``gold=True`` every token's provenance is set to gold.
    """
    types = tuple(entity_types) if entity_types is not None else DEFAULT_ENTITY_TYPES
    out = []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        doc_id = str(rec.get("doc_id", f"line{lineno}"))
        tokens, tag_strs = rec.get("tokens"), rec.get("tags")
        if not isinstance(tokens, list) or not isinstance(tag_strs, list):
            raise CorpusError(f"{doc_id}: record needs 'tokens' and 'tags' arrays")
        if len(tokens) != len(tag_strs):
            raise CorpusError(f"{doc_id}: {len(tag_strs)} tags for {len(tokens)} tokens")
        tags = [string_to_tag(s, types) for s in tag_strs]
        if gold:
            provs = [Provenance.GOLD] * len(tags)
        elif "provenance" not in rec:
            provs = [Provenance.UNLABELED if t.type is None else Provenance.PREDICTION for t in tags]
        else:
            provs = [Provenance(p) for p in rec["provenance"]]
            if len(provs) != len(tokens):
                raise CorpusError(f"{doc_id}: provenance length mismatch")
        lengths = rec.get("sentences") or [len(tokens)]
        if sum(lengths) != len(tokens):
            raise CorpusError(f"{doc_id}: sentence lengths do not sum to token count")
        sents = tuple(Sentence.from_surfaces(s) for s in _split_by_lengths(tokens, lengths) if s)
        lengths = [n for n in lengths if n]
        doc = Document(doc_id, sents)
        out.append((doc, TagAssignment(doc_id, _split_by_lengths(tags, lengths),
                                       _split_by_lengths(provs, lengths))))
    return out


def read_gold(stream: IO[str], entity_types: Optional[Iterable[str]] = None):
    return read_tagged(stream, entity_types, gold=True)


def tagged_record(doc: Document, ta: TagAssignment, with_provenance: bool = True) -> dict:
    rec = {
        "doc_id": doc.doc_id,
        "tokens": doc.surfaces(),
        "tags": [tag_to_string(t) for t in ta.flat_tags()],
        "sentences": [len(s) for s in doc.sentences],
    }
    if with_provenance:
        rec["provenance"] = [p.value for p in ta.flat_provenance()]
    return rec


def write_tagged(pairs: Iterable[tuple[Document, TagAssignment]], stream: IO[str],
                 with_provenance: bool = True) -> None:
    for doc, ta in pairs:
        stream.write(json.dumps(tagged_record(doc, ta, with_provenance), ensure_ascii=False) + "\n")
