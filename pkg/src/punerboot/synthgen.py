"""Synthetic product-description-like corpora with planted entity vocabularies.

Every planted entity sits in a chunk ``[left context] phrase [compound head]
[right context]``. Multi-token phrases are internally linked by ``compound``
edges, and a configurable fraction of chunks add a head noun attached by a
``compound`` edge that belongs to the gold entity (the head carries the
entity's type). Context words are type specific most of the time, which is
what lets a classifier generalize from seeded to unseeded phrases. Filler
words follow a Zipf distribution.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .corpus import Document, Provenance, Sentence, Tag, TagAssignment, Token, write_conllu, write_tagged
from .gazetteer import Gazetteer, dump_gazetteer


class SynthError(ValueError):
    pass


_ONSETS = ["b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "pl", "gr"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]
_CODAS = ["", "", "n", "r", "x", "l", "s"]
_UNITS = ["gb", "tb", "mhz", "ghz", "kg", "mm", "mah", "w"]


@dataclass
class SynthSpec:
    vocab_sizes: dict = field(default_factory=lambda: {"Component": 40})
    documents: int = 100
    sentences_per_doc: tuple = (3, 8)
    sentence_length: tuple = (8, 16)
    entity_rate: float = 0.15
    compound_rate: float = 0.3
    context_prob: float = 0.85
    filler_size: int = 400
    surface_variants: bool = False
    shared_words: bool = True
    seed: int = 0
    split: str = "train"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SynthCorpus:
    documents: list[Document]
    gold: list[TagAssignment]
    vocabulary: dict[str, list[str]]
    heads: dict[str, list[str]]
    priors: dict[str, float]

    @property
    def n_tokens(self) -> int:
        return sum(d.n_tokens for d in self.documents)

    @property
    def entity_prior(self) -> float:
        return sum(self.priors.values())


class _Lexicon:
    def __init__(self, rng):
        self.rng = rng
        self.used: set[str] = set()

    def word(self, syllables=(1, 3)) -> str:
        while True:
            k = int(self.rng.integers(syllables[0], syllables[1] + 1))
            w = "".join(self.rng.choice(_ONSETS) + self.rng.choice(_VOWELS) for _ in range(k))
            w += self.rng.choice(_CODAS)
            if len(w) >= 3 and w not in self.used:
                self.used.add(w)
                return w

    def words(self, n, syllables=(1, 3)) -> list[str]:
        return [self.word(syllables) for _ in range(n)]


def _phrases_for(t: str, n: int, lex: _Lexicon, rng, shared: bool = True) -> list[str]:
    if n == 0:
        return []
    out: list[str] = []
    if t == "Attribute":
        while len(out) < n:
            num = int(rng.choice([2, 4, 8, 16, 32, 64, 128, 256, 500, 512, 1000]))
            p = f"{num}{rng.choice(_UNITS)}"
            if p not in out:
                out.append(p)
        return out
    if not shared:
        lengths = rng.choice([1, 2, 3], size=n, p=[0.3, 0.5, 0.2])
        return [" ".join(lex.words(int(k))) for k in lengths]
    cores = lex.words(max(2, math.ceil(n / 3)))
    mods = lex.words(max(2, math.ceil(n / 2)))
    seen = set()
    while len(out) < n:
        length = int(rng.choice([1, 2, 2, 3], p=[0.2, 0.3, 0.3, 0.2]))
        toks = [str(rng.choice(mods)) for _ in range(length - 1)] + [str(rng.choice(cores))]
        if len(set(toks)) != len(toks):
            continue
        p = " ".join(toks)
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def build_vocabulary(spec: SynthSpec):
    """Vocabulary, heads, contexts and filler; depends only on ``spec.seed``."""
    rng = np.random.default_rng([spec.seed, 101])
    lex = _Lexicon(rng)
    types = [t for t, n in spec.vocab_sizes.items()]
    vocab = {t: _phrases_for(t, int(spec.vocab_sizes[t]), lex, rng, spec.shared_words) for t in types}
    heads = {t: lex.words(4) for t in types}
    left = {t: lex.words(6) for t in types}
    right = {t: lex.words(4) for t in types}
    filler = lex.words(spec.filler_size)
    verbs = lex.words(20)
    return vocab, heads, left, right, filler, verbs


def generate(spec: SynthSpec) -> SynthCorpus:
    if not 0.0 <= spec.entity_rate < 1.0:
        raise SynthError("entity_rate must lie in [0, 1)")
    lo, hi = spec.sentence_length
    if lo < 4 or hi < lo:
        raise SynthError("sentence_length must be a range with minimum >= 4")
    vocab, heads, left, right, filler, verbs = build_vocabulary(spec)
    types = [t for t in vocab if vocab[t]]
    if spec.entity_rate > 0 and not types:
        raise SynthError("positive entity_rate needs a non-empty vocabulary")
    if types:
        mean_len = np.mean([len(p.split()) for t in types for p in vocab[t]]) + spec.compound_rate
        # each chunk carries at least one context token and every sentence a root
        ceiling = mean_len / (mean_len + 1.0) * (lo - 1) / lo
        if spec.entity_rate > 0.8 * ceiling:
            raise SynthError(f"entity_rate {spec.entity_rate} is infeasible for sentence length {lo}; "
                             f"keep it below {0.8 * ceiling:.3f}")

    rng = np.random.default_rng([spec.seed, 202, *spec.split.encode("utf-8")])
    ranks = np.arange(1, len(filler) + 1)
    zipf_cdf = np.cumsum(1.0 / ranks) / np.sum(1.0 / ranks)
    type_w = np.array([len(vocab[t]) for t in types], dtype=float)
    type_w = type_w / type_w.sum() if types else type_w

    def filler_word():
        return filler[min(int(np.searchsorted(zipf_cdf, rng.random(), side="right")), len(filler) - 1)]

    def variant(w):
        if spec.surface_variants and rng.random() < 0.2:
            return w.upper() if w[0].isdigit() else w.capitalize()
        return w

    documents, gold = [], []
    counts = {t: 0 for t in vocab}
    total = 0
    carry = 0.0
    for d in range(spec.documents):
        sents, tags_doc = [], []
        for _ in range(int(rng.integers(spec.sentences_per_doc[0], spec.sentences_per_doc[1] + 1))):
            length = int(rng.integers(lo, hi + 1))
            target = spec.entity_rate * length + carry
            chunks = []  # each: list of (surface, tag type or None, role)
            used, ent = 1, 0
            while types and target - ent > 0.5:
                t = types[int(rng.choice(len(types), p=type_w))]
                phrase = vocab[t][int(rng.integers(len(vocab[t])))].split()
                chunk = [(left[t][int(rng.integers(6))] if rng.random() < spec.context_prob else filler_word(),
                          None, "left")]
                chunk += [(variant(w), t, "phrase") for w in phrase]
                if rng.random() < spec.compound_rate:
                    chunk.append((heads[t][int(rng.integers(4))], t, "head"))
                if rng.random() < 0.5:
                    chunk.append((right[t][int(rng.integers(4))], None, "right"))
                if used + len(chunk) > length:
                    break
                chunks.append(chunk)
                used += len(chunk)
                ent += sum(1 for _, tt, _ in chunk if tt)
            carry = target - ent
            segments = chunks + [[(filler_word(), None, "filler")] for _ in range(length - used)]
            order = rng.permutation(len(segments))
            flat = [(verbs[int(rng.integers(len(verbs)))], None, "root")]
            spans = []
            for k in order:
                start = len(flat)
                flat.extend(segments[k])
                spans.append((start, segments[k]))
            heads_idx: list[Optional[int]] = [None] * len(flat)
            rels = ["dep"] * len(flat)
            rels[0] = "root"
            for start, seg in spans:
                roles = [r for _, _, r in seg]
                idx = {r: [start + i for i, rr in enumerate(roles) if rr == r] for r in set(roles)}
                if "phrase" not in idx:
                    heads_idx[start] = 0
                    continue
                ph = idx["phrase"]
                top = idx["head"][0] if "head" in idx else ph[-1]
                for i in ph[:-1]:
                    heads_idx[i], rels[i] = ph[-1], "compound"
                if "head" in idx:
                    heads_idx[ph[-1]], rels[ph[-1]] = top, "compound"
                heads_idx[top], rels[top] = 0, "obj"
                heads_idx[idx["left"][0]], rels[idx["left"][0]] = top, "amod"
                if "right" in idx:
                    heads_idx[idx["right"][0]], rels[idx["right"][0]] = 0, "dep"
            tokens = tuple(Token(i, s, heads_idx[i], rels[i]) for i, (s, _, _) in enumerate(flat))
            sents.append(Sentence(tokens))
            row = [Tag(tt) for _, tt, _ in flat]
            tags_doc.append(row)
            for tag in row:
                if tag.type is not None:
                    counts[tag.type] += 1
            total += len(row)
        doc_id = f"{spec.split}-{d:05d}"
        documents.append(Document(doc_id, tuple(sents)))
        gold.append(TagAssignment(doc_id, tags_doc, [[Provenance.GOLD] * len(r) for r in tags_doc]))
    priors = {t: (counts[t] / total if total else 0.0) for t in vocab}
    return SynthCorpus(documents, gold, vocab, heads, priors)


def seed_gazetteer(corpus: SynthCorpus, coverage: float, seed: int = 0,
                   entity_types=None) -> Gazetteer:
    """Dictionary holding ``ceil(coverage * n)`` randomly chosen planted phrases per type."""
    types = entity_types or tuple(corpus.vocabulary)
    gaz = Gazetteer(types)
    rng = np.random.default_rng([seed, 303])
    items = []
    for t in corpus.vocabulary:
        phrases = sorted(corpus.vocabulary[t])
        k = math.ceil(coverage * len(phrases))
        for i in sorted(rng.choice(len(phrases), size=k, replace=False).tolist()):
            items.append((phrases[i], t))
    gaz.add_entities(items)
    gaz.version = 0
    return gaz


def vocabulary_coverage(gaz: Gazetteer, vocabulary: dict[str, list[str]]) -> float:
    planted = [(p, t) for t, ps in vocabulary.items() for p in ps]
    if not planted:
        return 1.0
    return sum(1 for p, t in planted if gaz.type_of(p) == t) / len(planted)


def write_synth(out_dir: Union[str, Path], spec: SynthSpec, coverage: float = 0.5,
                test_documents: Optional[int] = None) -> dict:
    """Write train/test CoNLL-U and gold files, the vocabulary and a seed dictionary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train = generate(spec)
    test_spec = SynthSpec(**{**spec.to_dict(), "split": "test",
                             "documents": test_documents or max(1, spec.documents // 4)})
    test = generate(test_spec)
    for name, c in (("train", train), ("test", test)):
        with open(out / f"{name}.conllu", "w", encoding="utf-8") as f:
            write_conllu(c.documents, f)
        with open(out / f"{name}.gold.jsonl", "w", encoding="utf-8") as f:
            write_tagged(zip(c.documents, c.gold), f, with_provenance=False)
    with open(out / "vocab.jsonl", "w", encoding="utf-8") as f:
        for t, phrases in train.vocabulary.items():
            for p in phrases:
                f.write(json.dumps({"type": t, "phrase": p}) + "\n")
    types = tuple(train.vocabulary)
    with open(out / "seed.jsonl", "w", encoding="utf-8") as f:
        dump_gazetteer(seed_gazetteer(train, coverage, spec.seed, types), f)
    meta = {"spec": spec.to_dict(), "coverage": coverage, "entity_types": list(types),
            "train_priors": train.priors, "test_priors": test.priors,
            "train_tokens": train.n_tokens, "test_tokens": test.n_tokens}
    with open(out / "meta.json", "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    return meta
