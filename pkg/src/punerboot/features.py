"""Hashed indicator features for a token in its sentence context."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .corpus import Document

HASH_BITS = 22
N_FEATURES = 1 << HASH_BITS
_MASK = N_FEATURES - 1
BOS, EOS = "<s>", "</s>"


@lru_cache(maxsize=1 << 20)
def feature_id(name: str) -> int:
    # crc32 is stable across platforms and interpreter runs, unlike hash()
    return zlib.crc32(name.encode("utf-8")) & _MASK


def word_shape(surface: str) -> str:
    out = []
    for c in surface:
        if c.isdigit():
            out.append("d")
        elif c.isupper():
            out.append("X")
        elif c.islower():
            out.append("x")
        else:
            out.append(c)
    return "".join(out)


def feature_names(surfaces: Sequence[str], deprel: str, i: int) -> list[str]:
    s = surfaces[i]
    low = s.lower()
    names = [f"w={low}", f"shape={word_shape(s)}", f"dep={deprel}"]
    for k in (2, 3, 4):
        if len(low) >= k:
            names.append(f"p{k}={low[:k]}")
            names.append(f"s{k}={low[-k:]}")
    if any(c.isdigit() for c in s):
        names.append("has_digit")
    if s.isupper():
        names.append("all_caps")
    if s.istitle():
        names.append("is_title")
    n = len(surfaces)
    for off in (-2, -1, 1, 2):
        j = i + off
        w = BOS if j < 0 else EOS if j >= n else surfaces[j].lower()
        names.append(f"w[{off:+d}]={w}")
    return names


@dataclass(frozen=True)
class FeatureVector:
    ids: np.ndarray  # sorted, unique, int64 in [0, N_FEATURES)
    values: np.ndarray

    @classmethod
    def from_ids(cls, raw_ids: Sequence[int], values: Sequence[float] = None) -> "FeatureVector":
        raw = np.asarray(raw_ids, dtype=np.int64)
        vals = np.ones(len(raw)) if values is None else np.asarray(values, dtype=np.float64)
        if raw.size and (raw.min() < 0 or raw.max() >= N_FEATURES):
            raise ValueError("feature id out of range")
        ids, inv = np.unique(raw, return_inverse=True)
        return cls(ids, np.bincount(inv, weights=vals, minlength=len(ids)))

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.ids.tolist(), self.values.tolist()))


def featurize(doc: Document, sentence_idx: int, token_idx: int) -> FeatureVector:
    if not 0 <= sentence_idx < len(doc.sentences):
        raise IndexError(f"sentence {sentence_idx} out of range for {doc.doc_id}")
    sent = doc.sentences[sentence_idx]
    if not 0 <= token_idx < len(sent):
        raise IndexError(f"token {token_idx} out of range in sentence {sentence_idx}")
    names = feature_names(sent.surfaces, sent.tokens[token_idx].deprel, token_idx)
    return FeatureVector.from_ids([feature_id(n) for n in names])


@dataclass
class FeatureMatrix:
    """Features of every token in a corpus, stacked in document/sentence/token order (CSR layout)."""

    indptr: np.ndarray
    ids: np.ndarray
    values: np.ndarray

    @property
    def n_rows(self) -> int:
        return len(self.indptr) - 1

    def row(self, r: int) -> FeatureVector:
        a, b = self.indptr[r], self.indptr[r + 1]
        return FeatureVector(self.ids[a:b], self.values[a:b])


def _aggregate(names: Sequence[str]) -> dict[int, float]:
    agg: dict[int, float] = {}
    for n in names:
        i = feature_id(n)
        agg[i] = agg.get(i, 0.0) + 1.0
    return agg


def featurize_corpus(corpus: Sequence[Document]) -> FeatureMatrix:
    indptr = [0]
    ids: list[int] = []
    vals: list[float] = []
    for doc in corpus:
        for sent in doc.sentences:
            surfaces = sent.surfaces
            for tok in sent.tokens:
                agg = _aggregate(feature_names(surfaces, tok.deprel, tok.index))
                for i in sorted(agg):
                    ids.append(i)
                    vals.append(agg[i])
                indptr.append(len(ids))
    return FeatureMatrix(np.asarray(indptr, dtype=np.int64), np.asarray(ids, dtype=np.int64),
                         np.asarray(vals, dtype=np.float64))
