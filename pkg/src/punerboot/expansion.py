"""Label expansion along dependency compound edges."""

from __future__ import annotations

import logging
from collections import Counter
from typing import Iterable, Optional, Sequence

from .corpus import Document, Provenance, Sentence, Tag, TagAssignment

log = logging.getLogger(__name__)

DEFAULT_RELATIONS = frozenset({"compound"})


def expand_sentence(sentence: Sentence, tags: list[Tag], provenance: list[Provenance],
                    relations: Iterable[str] = DEFAULT_RELATIONS) -> int:
    """Propagate types in place until nothing changes; returns the conflict count.

    Every pass collects proposals from the current state before applying any,
    so the result does not depend on edge order. An O token offered two
    different types in one pass stays O and counts as a conflict, as does an
    edge whose endpoints end up with different types.
    """
    relations = frozenset(relations)
    edges = [(t.index, t.head) for t in sentence.tokens
             if t.head is not None and t.deprel in relations]
    if not edges:
        return 0
    contested: set[int] = set()
    # at most one new token per pass in the worst case, so len(sentence) passes suffice
    for _ in range(len(sentence) + 1):
        proposals: dict[int, Optional[str]] = {}
        for a, b in edges:
            for src, dst in ((a, b), (b, a)):
                src_t, dst_t = tags[src].type, tags[dst].type
                if src_t is None or dst_t is not None:
                    continue
                if proposals.get(dst, src_t) != src_t:
                    proposals[dst] = None
                    contested.add(dst)
                else:
                    proposals[dst] = src_t
        applied = False
        for idx, t in proposals.items():
            if t is not None:
                tags[idx] = Tag(t)
                provenance[idx] = Provenance.EXPANSION
                applied = True
        if not applied:
            break
    mixed = sum(1 for a, b in edges
                if tags[a].type is not None and tags[b].type is not None and tags[a].type != tags[b].type)
    return mixed + len(contested)


def expand_labels(ta: TagAssignment, doc: Document, relations: Iterable[str] = DEFAULT_RELATIONS,
                  stats: Optional[Counter] = None) -> TagAssignment:
    if not ta.aligned_to(doc):
        raise ValueError(f"{doc.doc_id}: tag assignment is not aligned to the document")
    out = ta.copy()
    conflicts = 0
    for si, sent in enumerate(doc.sentences):
        conflicts += expand_sentence(sent, out.tags[si], out.provenance[si], relations)
    if conflicts:
        log.debug("%s: %d type conflicts across expansion edges", doc.doc_id, conflicts)
        if stats is not None:
            stats["conflicts"] += conflicts
    return out


def expand_corpus(tas: Sequence[TagAssignment], corpus: Sequence[Document],
                  relations: Iterable[str] = DEFAULT_RELATIONS,
                  stats: Optional[Counter] = None) -> list[TagAssignment]:
    return [expand_labels(ta, doc, relations, stats) for ta, doc in zip(tas, corpus)]
