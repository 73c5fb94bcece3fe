"""Per-type linear token classifiers trained under the non-negative PU risk.

For one entity type, tokens tagged with that type are the positive set P and
every other token is unlabeled (U). With loss ``l`` and class prior ``pi``::

    risk = mean_P l(y, 1) + max(0, mean_U l(y, 0) - pi * mean_P l(y, 0))

When the max picks 0 the unlabeled/correction branch contributes no gradient.
``pi = 0`` gives the PN baseline that treats unlabeled tokens as negatives.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np

from .corpus import Document, Provenance, Tag, TagAssignment
from .features import N_FEATURES, FeatureMatrix, FeatureVector, featurize_corpus

log = logging.getLogger(__name__)

LOSSES = ("mae", "bce")
RISKS = ("nnpu", "pn")
MODEL_FORMAT = "punerboot-model 1"


class ClassifierError(ValueError):
    pass


# -- losses and risks -------------------------------------------------------

def expit(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def log_expit(z):
    return -np.logaddexp(0.0, -np.asarray(z, dtype=np.float64))


def _check_loss(loss):
    if loss not in LOSSES:
        raise ClassifierError(f"unknown loss {loss!r}; expected one of {LOSSES}")


def loss_values(scores, y: int, loss: str = "mae") -> np.ndarray:
    """Per-example loss of probabilities ``scores`` against a constant label ``y``."""
    _check_loss(loss)
    s = np.asarray(scores, dtype=np.float64)
    if loss == "mae":
        return 1.0 - s if y == 1 else s
    return -np.log(s) if y == 1 else -np.log1p(-s)


def _loss_and_slope(z: np.ndarray, y: int, loss: str):
    """Loss and d(loss)/d(logit) evaluated at logits ``z``."""
    p = expit(z)
    if loss == "mae":
        slope = p * (1.0 - p)
        return (1.0 - p, -slope) if y == 1 else (p, slope)
    return (-log_expit(z), p - 1.0) if y == 1 else (-log_expit(-z), p)


def empirical_risk(pairs: Iterable[tuple[float, int]], loss: str = "mae") -> float:
    pairs = list(pairs)
    if not pairs:
        raise ClassifierError("empirical risk of an empty sample")
    total = 0.0
    for score, y in pairs:
        total += float(loss_values(score, y, loss))
    return total / len(pairs)


def pu_risk(pos_scores, unl_scores, prior: float, loss: str = "mae") -> tuple[float, bool]:
    """Non-negative PU risk of probability scores; returns (risk, clamp_active)."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    unl = np.asarray(unl_scores, dtype=np.float64)
    if pos.size == 0 or unl.size == 0:
        raise ClassifierError("PU risk needs at least one positive and one unlabeled score")
    if not 0.0 <= prior < 1.0:
        raise ClassifierError(f"class prior {prior} outside [0, 1)")
    positive_term = loss_values(pos, 1, loss).mean()
    inner = loss_values(unl, 0, loss).mean() - prior * loss_values(pos, 0, loss).mean()
    if inner < 0.0:
        return float(positive_term), True
    return float(positive_term + inner), False


def pu_risk_logits(z_pos: np.ndarray, z_unl: np.ndarray, prior: float, loss: str = "mae"):
    """Risk, clamp flag and per-example logit gradients (dz_pos, dz_unl)."""
    n_p, n_u = len(z_pos), len(z_unl)
    if n_p == 0 or n_u == 0:
        raise ClassifierError("PU risk needs at least one positive and one unlabeled example")
    l_p1, g_p1 = _loss_and_slope(z_pos, 1, loss)
    l_p0, g_p0 = _loss_and_slope(z_pos, 0, loss)
    l_u0, g_u0 = _loss_and_slope(z_unl, 0, loss)
    positive_term = l_p1.mean()
    inner = l_u0.mean() - prior * l_p0.mean()
    if inner < 0.0:
        return float(positive_term), True, g_p1 / n_p, np.zeros(n_u)
    dz_pos = g_p1 / n_p - prior * g_p0 / n_p
    return float(positive_term + inner), False, dz_pos, g_u0 / n_u


# -- model ------------------------------------------------------------------

@dataclass
class TypeModel:
    prior: float
    bias: float = 0.0
    ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if not 0.0 < self.prior < 1.0:
            raise ClassifierError(f"class prior {self.prior} outside (0, 1)")
        order = np.argsort(self.ids, kind="stable")
        self.ids = np.asarray(self.ids, dtype=np.int64)[order]
        self.weights = np.asarray(self.weights, dtype=np.float64)[order]

    def lookup(self, ids: np.ndarray) -> np.ndarray:
        if self.ids.size == 0:
            return np.zeros(len(ids))
        pos = np.searchsorted(self.ids, ids)
        pos[pos >= len(self.ids)] = 0
        return np.where(self.ids[pos] == ids, self.weights[pos], 0.0)


class PuModel:
    def __init__(self, entity_types: Sequence[str]):
        self.entity_types = tuple(entity_types)
        self.types: dict[str, TypeModel] = {}

    def trained_types(self) -> list[str]:
        return [t for t in self.entity_types if t in self.types]

    def _get(self, t):
        if t not in self.types:
            raise ClassifierError(f"no classifier for entity type {t!r}")
        return self.types[t]

    def logit(self, t: str, x: FeatureVector) -> float:
        m = self._get(t)
        return float(np.dot(m.lookup(x.ids), x.values) + m.bias)

    def logits_matrix(self, t: str, X: FeatureMatrix) -> np.ndarray:
        m = self._get(t)
        contrib = m.lookup(X.ids) * X.values
        sums = np.add.reduceat(contrib, X.indptr[:-1]) if contrib.size else np.zeros(X.n_rows)
        sums[np.diff(X.indptr) == 0] = 0.0
        return sums + m.bias

    def __eq__(self, other):
        if not isinstance(other, PuModel) or self.entity_types != other.entity_types:
            return NotImplemented if not isinstance(other, PuModel) else False
        if self.types.keys() != other.types.keys():
            return False
        for t, a in self.types.items():
            b = other.types[t]
            if (a.prior, a.bias) != (b.prior, b.bias) or not np.array_equal(a.ids, b.ids) \
                    or not np.array_equal(a.weights, b.weights):
                return False
        return True


def score(model: PuModel, t: str, x: FeatureVector) -> float:
    return float(expit(model.logit(t, x)))


# -- gradient ---------------------------------------------------------------

def _stack(vectors: Sequence[FeatureVector]) -> FeatureMatrix:
    indptr = np.cumsum([0] + [len(v.ids) for v in vectors])
    ids = np.concatenate([v.ids for v in vectors]) if vectors else np.zeros(0, dtype=np.int64)
    vals = np.concatenate([v.values for v in vectors]) if vectors else np.zeros(0)
    return FeatureMatrix(indptr.astype(np.int64), ids, vals)


def pu_risk_gradient(model: PuModel, t: str, pos_batch: Sequence[FeatureVector],
                     unl_batch: Sequence[FeatureVector], prior: float, loss: str = "mae"):
    """Gradient of the PU risk with respect to type ``t``'s weights and bias.

    Returns ``(FeatureVector of weight gradients over touched ids, bias gradient,
    risk, clamp_active)``.
    """
    _check_loss(loss)
    Xp, Xu = _stack(pos_batch), _stack(unl_batch)
    z_p, z_u = model.logits_matrix(t, Xp), model.logits_matrix(t, Xu)
    risk, clamp, dz_p, dz_u = pu_risk_logits(z_p, z_u, prior, loss)
    ids = np.concatenate([Xp.ids, Xu.ids])
    coef = np.concatenate([np.repeat(dz_p, np.diff(Xp.indptr)) * Xp.values,
                           np.repeat(dz_u, np.diff(Xu.indptr)) * Xu.values])
    grad = FeatureVector.from_ids(ids, coef)
    return grad, float(dz_p.sum() + dz_u.sum()), risk, clamp


# -- training ---------------------------------------------------------------

@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 20
    loss: str = "mae"
    batch: int = 64
    full_batch: bool = False
    seed: int = 0
    tau: float = 0.5
    prior: Union[float, dict] = 0.01
    risk: str = "nnpu"
    threads: Optional[int] = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ClassifierError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch < 1:
            raise ClassifierError("epochs and batch must be >= 1")
        if not 0.0 < self.tau < 1.0:
            raise ClassifierError("tau must lie in (0, 1)")
        _check_loss(self.loss)
        if self.risk not in RISKS:
            raise ClassifierError(f"unknown risk {self.risk!r}; expected one of {RISKS}")
        priors = self.prior.values() if isinstance(self.prior, dict) else [self.prior]
        for p in priors:
            if not 0.0 < p < 1.0:
                raise ClassifierError(f"class prior {p} outside (0, 1)")

    def prior_for(self, t: str) -> float:
        if isinstance(self.prior, dict):
            return float(self.prior.get(t, 0.01))
        return float(self.prior)

    def to_dict(self) -> dict:
        return asdict(self)


def _type_seed(seed: int, t: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed & 0xFFFFFFFF, *t.encode("utf-8")])


def _epoch_order(rng, pos_idx, unl_idx, batch):
    """Row order for one epoch plus batch boundaries.

    Every batch holds ``ceil(batch * n_p / (n_p + n_u))`` positives (at least
    one) and fills up with unlabeled rows; unlabeled rows are each used once,
    positives are recycled from fresh permutations as needed.
    """
    n_p, n_u = len(pos_idx), len(unl_idx)
    k = min(n_p, max(1, math.ceil(batch * n_p / (n_p + n_u))))
    m = max(1, batch - k)
    n_batches = math.ceil(n_u / m)
    unl = unl_idx[rng.permutation(n_u)]
    reps = math.ceil(n_batches * k / n_p)
    pos = np.concatenate([pos_idx[rng.permutation(n_p)] for _ in range(reps)])[:n_batches * k]
    order, n_pos, bounds = [], [], [0]
    for b in range(n_batches):
        u = unl[b * m:(b + 1) * m]
        order.append(pos[b * k:(b + 1) * k])
        order.append(u)
        n_pos.append(k)
        bounds.append(bounds[-1] + k + len(u))
    return np.concatenate(order), n_pos, bounds


def _gather_rows(indptr, indices, data, rows):
    """CSR arrays for ``rows`` stacked in the given order."""
    lengths = indptr[rows + 1] - indptr[rows]
    new_ptr = np.concatenate([[0], np.cumsum(lengths)])
    offsets = np.repeat(indptr[rows] - new_ptr[:-1], lengths) + np.arange(new_ptr[-1])
    return new_ptr, indices[offsets], data[offsets]


def _row_sums(values, ptr):
    out = np.add.reduceat(values, ptr[:-1]) if values.size else np.zeros(len(ptr) - 1)
    out[ptr[1:] == ptr[:-1]] = 0.0
    return out


def train_type(indptr, indices, data, n_cols, y, prior, cfg, rng):
    """SGD over CSR arrays with local column indices; returns (weights, bias, risk trace)."""
    effective_prior = prior if cfg.risk == "nnpu" else 0.0
    pos_idx = np.flatnonzero(y == 1)
    unl_idx = np.flatnonzero(y == 0)
    w = np.zeros(n_cols)
    b = 0.0
    lr = cfg.learning_rate
    all_rows = np.concatenate([pos_idx, unl_idx])
    full_ptr, full_ind, full_dat = _gather_rows(indptr, indices, data, all_rows)
    n_p = len(pos_idx)
    trace = []
    for _ in range(cfg.epochs):
        if cfg.full_batch:
            ptr, ind, dat = full_ptr, full_ind, full_dat
            n_pos, bounds = [n_p], [0, len(all_rows)]
        else:
            rows, n_pos, bounds = _epoch_order(rng, pos_idx, unl_idx, cfg.batch)
            ptr, ind, dat = _gather_rows(indptr, indices, data, rows)
        for k, lo, hi in zip(n_pos, bounds[:-1], bounds[1:]):
            a, c = ptr[lo], ptr[hi]
            bptr = ptr[lo:hi + 1] - a
            bind = ind[a:c]
            bdat = dat[a:c]
            z = _row_sums(w[bind] * bdat, bptr) + b
            _, _, dz_p, dz_u = pu_risk_logits(z[:k], z[k:], effective_prior, cfg.loss)
            dz = np.concatenate([dz_p, dz_u])
            np.add.at(w, bind, -lr * np.repeat(dz, np.diff(bptr)) * bdat)
            b -= lr * dz.sum()
        z = _row_sums(w[full_ind] * full_dat, full_ptr) + b
        trace.append(pu_risk_logits(z[:n_p], z[n_p:], effective_prior, cfg.loss)[0])
    return w, b, trace


def positive_labels(tas: Sequence[TagAssignment], t: str) -> np.ndarray:
    return np.array([tag.type == t for ta in tas for tag in ta.flat_tags()], dtype=np.int8)


def train(model: Optional[PuModel], corpus: Sequence[Document], tas: Sequence[TagAssignment],
          cfg: TrainConfig, entity_types: Optional[Sequence[str]] = None,
          features: Optional[FeatureMatrix] = None) -> tuple[PuModel, dict[str, list[float]]]:
    """Train one binary classifier per entity type; returns the model and risk traces.

    Types without positives, or whose tokens are all positive, are skipped
    with a warning. Each type restarts from zero weights.
    """
    if not corpus or sum(d.n_tokens for d in corpus) == 0:
        raise ClassifierError("cannot train on an empty corpus")
    types = tuple(entity_types or (model.entity_types if model else ()))
    model = PuModel(types) if model is None else model
    X_full = features if features is not None else featurize_corpus(corpus)
    cols, local = np.unique(X_full.ids, return_inverse=True)
    local = local.ravel()

    def fit(t):
        y = positive_labels(tas, t)
        n_p = int(y.sum())
        if n_p == 0 or n_p == len(y):
            log.warning("skipping %s: %d positive of %d tokens", t, n_p, len(y))
            return t, None
        rng = np.random.default_rng(_type_seed(cfg.seed, t))
        prior = cfg.prior_for(t)
        w, b, trace = train_type(X_full.indptr, local, X_full.values, len(cols), y, prior, cfg, rng)
        nz = np.flatnonzero(w)
        return t, (TypeModel(prior, float(b), cols[nz], w[nz]), trace)

    workers = cfg.threads or 1
    if workers > 1 and len(types) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fit, types))
    else:
        results = [fit(t) for t in types]
    traces = {}
    for t, res in results:
        if res is None:
            model.types.pop(t, None)
            continue
        model.types[t], traces[t] = res
    return model, traces


# -- prediction -------------------------------------------------------------

def type_probabilities(model: PuModel, X: FeatureMatrix) -> tuple[list[str], np.ndarray]:
    types = model.trained_types()
    if not types:
        return [], np.zeros((0, X.n_rows))
    return types, expit(np.vstack([model.logits_matrix(t, X) for t in types]))


def decide(types: Sequence[str], probs: np.ndarray, tau: float) -> list[Tag]:
    """Argmax over types with threshold; ties go to the earlier type in ``types``."""
    if not types:
        return [Tag(None)] * probs.shape[1]
    best = np.argmax(probs, axis=0)  # first maximum wins
    top = probs[best, np.arange(probs.shape[1])]
    return [Tag(types[k]) if p >= tau else Tag(None) for k, p in zip(best.tolist(), top.tolist())]


def predict(model: PuModel, corpus: Sequence[Document], tau: float = 0.5,
            features: Optional[FeatureMatrix] = None) -> list[TagAssignment]:
    X = features if features is not None else featurize_corpus(corpus)
    types, probs = type_probabilities(model, X)
    flat = decide(types, probs, tau)
    out, pos = [], 0
    for doc in corpus:
        tags, provs = [], []
        for sent in doc.sentences:
            row = flat[pos:pos + len(sent)]
            pos += len(sent)
            tags.append(row)
            provs.append([Provenance.UNLABELED if t.type is None else Provenance.PREDICTION for t in row])
        out.append(TagAssignment(doc.doc_id, tags, provs))
    return out


# -- persistence ------------------------------------------------------------
#
# Text format, one header line then per type:
#   punerboot-model 1
#   types Product Component Brand Attribute
#   type <name> <prior> <bias> <nnz>
#   <feature id> <weight>          (nnz lines)
# Floats are written with repr() so that reading them back is exact.

def dump_model(model: PuModel, stream: IO[str]) -> None:
    stream.write(MODEL_FORMAT + "\n")
    stream.write("types " + " ".join(model.entity_types) + "\n")
    for t in model.trained_types():
        m = model.types[t]
        stream.write(f"type {t} {m.prior!r} {m.bias!r} {len(m.ids)}\n")
        for i, w in zip(m.ids.tolist(), m.weights.tolist()):
            stream.write(f"{i} {w!r}\n")


def parse_model(stream: IO[str]) -> PuModel:
    lines = iter(stream)
    header = next(lines, "").strip()
    if header != MODEL_FORMAT:
        raise ClassifierError(f"not a model file (header {header!r})")
    types_line = next(lines, "").split()
    if not types_line or types_line[0] != "types":
        raise ClassifierError("model file is missing its types line")
    model = PuModel(types_line[1:])
    for line in lines:
        if not line.strip():
            continue
        parts = line.split()
        if parts[0] != "type" or len(parts) != 5:
            raise ClassifierError(f"bad type header {line.strip()!r}")
        name, prior, bias, nnz = parts[1], float(parts[2]), float(parts[3]), int(parts[4])
        ids = np.zeros(nnz, dtype=np.int64)
        ws = np.zeros(nnz)
        for k in range(nnz):
            i, w = next(lines).split()
            ids[k], ws[k] = int(i), float(w)
        if ids.size and (ids.min() < 0 or ids.max() >= N_FEATURES):
            raise ClassifierError(f"feature id out of range in {name}")
        model.types[name] = TypeModel(prior, bias, ids, ws)
    return model


def save_model(model: PuModel, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        dump_model(model, f)


def load_model(path: Union[str, Path]) -> PuModel:
    with open(path, encoding="utf-8") as f:
        return parse_model(f)
