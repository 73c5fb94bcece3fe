"""Iterative bootstrapping: label, expand, train, predict, harvest, repeat.

The dictionary grows with predicted entities seen more than ``K`` times.
The loop stops after ``I`` iterations or as soon as an iteration harvests
nothing new.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .classifier import PuModel, TrainConfig, dump_model, predict, train
from .corpus import Document, TagAssignment, read_tagged, write_tagged
from .evaluation import EvaluationError, recall_curve, recall_table, token_prf, write_report
from .expansion import DEFAULT_RELATIONS, expand_corpus
from .features import featurize_corpus
from .gazetteer import Gazetteer, GazetteerError, dump_gazetteer, label_corpus, load_seed

log = logging.getLogger(__name__)


class BootstrapError(RuntimeError):
    pass


@dataclass
class BootstrapConfig:
    K: int = 5
    I: int = 10  # noqa: E741
    max_phrase_len: int = 4
    expand: bool = True
    relations: tuple = tuple(sorted(DEFAULT_RELATIONS))
    trainer: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.K < 0:
            raise BootstrapError("K must be a non-negative integer")
        if self.I < 1:
            raise BootstrapError("I must be at least 1")
        if self.max_phrase_len < 1:
            raise BootstrapError("max_phrase_len must be at least 1")


@dataclass(frozen=True)
class Harvest:
    iteration: int
    phrase: str
    type: str
    frequency: int

    def record(self) -> dict:
        return {"iteration": self.iteration, "phrase": self.phrase, "type": self.type,
                "frequency": self.frequency}


@dataclass
class BootstrapState:
    iteration: int = 0
    snapshots: list[Gazetteer] = field(default_factory=list)
    harvest_log: list[Harvest] = field(default_factory=list)
    converged: bool = False
    risk_traces: list[dict] = field(default_factory=list)
    predictions: list[list[TagAssignment]] = field(default_factory=list)
    eval_predictions: list[list[TagAssignment]] = field(default_factory=list)
    reports: list = field(default_factory=list)
    recall: Optional[dict] = None


def predicted_runs(pred: Sequence[TagAssignment], corpus: Sequence[Document]):
    """Yield (lowercased token tuple, type) for maximal same-type runs in each sentence."""
    for ta, doc in zip(pred, corpus):
        for tags, sent in zip(ta.tags, doc.sentences):
            i = 0
            while i < len(tags):
                t = tags[i].type
                if t is None:
                    i += 1
                    continue
                j = i
                while j + 1 < len(tags) and tags[j + 1].type == t:
                    j += 1
                yield tuple(tok.surface.lower() for tok in sent.tokens[i:j + 1]), t
                i = j + 1


def harvest_entities(pred: Sequence[TagAssignment], corpus: Sequence[Document], gaz: Gazetteer,
                     K: int, max_phrase_len: int) -> list[tuple[str, str, int]]:
    """Predicted phrases not yet in ``gaz`` that occur more than ``K`` times.

    Sorted by descending frequency, then phrase, then type order. When one
    phrase qualifies under several types only the most frequent survives
    (ties go to the earlier configured type), since a phrase has one type.
    """
    freq = Counter(predicted_runs(pred, corpus))
    order = {t: k for k, t in enumerate(gaz.entity_types)}
    best: dict[tuple, tuple[str, int]] = {}
    for (phrase, t), n in sorted(freq.items(), key=lambda kv: (-kv[1], kv[0][0], order.get(kv[0][1], 99))):
        if n <= K or len(phrase) > max_phrase_len or t not in order:
            continue
        existing = gaz.type_of(phrase)
        if existing is not None:
            if existing != t:
                log.info("not harvesting %r as %s: already a %s", " ".join(phrase), t, existing)
            continue
        if phrase in best:
            log.info("not harvesting %r as %s: also predicted as %s more often",
                     " ".join(phrase), t, best[phrase][0])
            continue
        best[phrase] = (t, n)
    out = [(" ".join(p), t, n) for p, (t, n) in best.items()]
    out.sort(key=lambda x: (-x[2], x[0], order[x[1]]))
    return out


def _write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def _write_gazetteer(path: Path, gaz: Gazetteer) -> None:
    with open(path, "w", encoding="utf-8") as f:
        dump_gazetteer(gaz, f)


def iteration_dir(run_dir: Union[str, Path], i: int) -> Path:
    return Path(run_dir) / f"iter_{i:02d}"


def load_iteration_predictions(run_dir: Union[str, Path], entity_types: Sequence[str],
                               n_iterations: Optional[int] = None, name: str = "eval_predictions.jsonl"):
    """Read per-iteration prediction files; a missing iteration is an error naming it."""
    run_dir = Path(run_dir)
    if n_iterations is None:
        state = json.loads((run_dir / "state.json").read_text(encoding="utf-8"))
        n_iterations = state["iteration"]
    out = []
    for i in range(n_iterations):
        path = iteration_dir(run_dir, i) / name
        if not path.exists():
            raise EvaluationError(f"iteration {i}: missing {path}")
        with open(path, encoding="utf-8") as f:
            out.append([ta for _, ta in read_tagged(f, entity_types)])
    return out


def _save_state(run_dir: Path, state: BootstrapState, gaz: Gazetteer) -> None:
    _write_gazetteer(run_dir / "final_gazetteer.jsonl", gaz)
    _write_jsonl(run_dir / "harvest_log.jsonl", (h.record() for h in state.harvest_log))
    (run_dir / "state.json").write_text(json.dumps(
        {"iteration": state.iteration, "converged": state.converged,
         "gazetteer_version": gaz.version, "entries": gaz.counts()}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def _resume(run_dir: Path, seed: Gazetteer, state: BootstrapState):
    info = json.loads((run_dir / "state.json").read_text(encoding="utf-8"))
    snapshots = []
    for i in range(info["iteration"]):
        snapshots.append(load_seed(iteration_dir(run_dir, i) / "gazetteer.jsonl", seed.entity_types))
    gaz = load_seed(run_dir / "final_gazetteer.jsonl", seed.entity_types)
    for k, snap in enumerate(snapshots + [gaz]):
        snap.version = k
    with open(run_dir / "harvest_log.jsonl", encoding="utf-8") as f:
        state.harvest_log = [Harvest(**json.loads(line)) for line in f if line.strip()]
    state.snapshots = snapshots + [gaz.copy()]
    state.iteration = info["iteration"]
    state.converged = info["converged"]
    for i in range(state.iteration):
        trace_path = iteration_dir(run_dir, i) / "risk_trace.json"
        state.risk_traces.append(json.loads(trace_path.read_text(encoding="utf-8")))
    return gaz


def run_bootstrap(corpus: Sequence[Document], seed: Gazetteer, cfg: BootstrapConfig,
                  run_dir: Union[str, Path, None] = None, gold: Optional[Sequence[TagAssignment]] = None,
                  eval_corpus: Optional[Sequence[Document]] = None, resume: bool = False,
                  keep_predictions: bool = False) -> tuple[Gazetteer, PuModel, BootstrapState]:
    """Run the bootstrapping loop.

    ``gold`` scores predictions on ``eval_corpus`` when given, otherwise on
    the training corpus itself. With ``run_dir`` every iteration writes its
    dictionary snapshot, labels, predictions, harvest and risk trace, so an
    interrupted run can continue with ``resume=True``.
    """
    if not corpus or sum(d.n_tokens for d in corpus) == 0:
        raise BootstrapError("bootstrapping needs a non-empty corpus")
    if seed.is_empty():
        raise BootstrapError("bootstrapping needs a non-empty seed dictionary")
    types = seed.entity_types
    out_dir = Path(run_dir) if run_dir is not None else None
    state = BootstrapState()
    gaz = seed.copy()
    gaz.version = 0
    state.snapshots.append(gaz.copy())
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        if resume and (out_dir / "state.json").exists():
            gaz = _resume(out_dir, seed, state)
            log.info("resuming at iteration %d", state.iteration)
        else:
            _write_config(out_dir / "config.json", cfg)

    # features depend on surfaces and parses only, so they are computed once
    features = featurize_corpus(corpus)
    eval_docs = eval_corpus if eval_corpus is not None else corpus
    eval_features = featurize_corpus(eval_corpus) if eval_corpus is not None else features
    if gold is not None and state.iteration:
        state.eval_predictions = load_iteration_predictions(out_dir, types, state.iteration)

    model = PuModel(types)
    while not state.converged and state.iteration < cfg.I:
        i = state.iteration
        labels = label_corpus(corpus, gaz)
        if cfg.expand:
            stats: Counter = Counter()
            labels = expand_corpus(labels, corpus, cfg.relations, stats)
            if stats["conflicts"]:
                log.info("iteration %d: %d expansion conflicts", i, stats["conflicts"])
        trainer = dataclasses.replace(cfg.trainer, seed=cfg.trainer.seed + 1_000_003 * i)
        model, traces = train(None, corpus, labels, trainer, types, features)
        if not model.trained_types():
            raise BootstrapError(f"iteration {i}: no entity type had usable positives; "
                                 f"dictionary sizes {gaz.counts()}")
        pred = predict(model, corpus, cfg.trainer.tau, features)
        harvested = harvest_entities(pred, corpus, gaz, cfg.K, cfg.max_phrase_len)
        used = gaz.copy()
        gaz.add_entities((p, t) for p, t, _ in harvested)
        state.snapshots.append(gaz.copy())
        state.harvest_log.extend(Harvest(i, p, t, n) for p, t, n in harvested)
        state.risk_traces.append(traces)
        if keep_predictions:
            state.predictions.append(pred)
        eval_pred = None
        if gold is not None:
            eval_pred = pred if eval_corpus is None else predict(model, eval_docs, cfg.trainer.tau, eval_features)
            state.eval_predictions.append(eval_pred)
            state.reports.append(token_prf(gold, eval_pred, types))
        state.iteration = i + 1
        state.converged = not harvested
        log.info("iteration %d: harvested %d, dictionary %s", i, len(harvested), gaz.counts())

        if out_dir is not None:
            d = iteration_dir(out_dir, i)
            d.mkdir(exist_ok=True)
            _write_gazetteer(d / "gazetteer.jsonl", used)
            with open(d / "labels.jsonl", "w", encoding="utf-8") as f:
                write_tagged(zip(corpus, labels), f)
            with open(d / "predictions.jsonl", "w", encoding="utf-8") as f:
                write_tagged(zip(corpus, pred), f)
            _write_jsonl(d / "harvest.jsonl", (Harvest(i, p, t, n).record() for p, t, n in harvested))
            (d / "risk_trace.json").write_text(json.dumps(traces, sort_keys=True) + "\n", encoding="utf-8")
            with open(d / "model.txt", "w", encoding="utf-8") as f:
                dump_model(model, f)
            if eval_pred is not None:
                with open(d / "eval_predictions.jsonl", "w", encoding="utf-8") as f:
                    write_tagged(zip(eval_docs, eval_pred), f)
                with open(d / "eval.jsonl", "w", encoding="utf-8") as f:
                    write_report(state.reports[-1], f)
                (d / "eval.txt").write_text(state.reports[-1].table() + "\n", encoding="utf-8")
            _save_state(out_dir, state, gaz)

    if gold is not None and state.eval_predictions:
        state.recall = recall_curve(state.eval_predictions, gold, types)
    if out_dir is not None:
        with open(out_dir / "final_model.txt", "w", encoding="utf-8") as f:
            dump_model(model, f)
        _write_summary(out_dir, state, gaz, cfg)
    return gaz, model, state


def _write_config(path: Path, cfg: BootstrapConfig) -> None:
    path.write_text(json.dumps(dataclasses.asdict(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_summary(out_dir: Path, state: BootstrapState, gaz: Gazetteer, cfg: BootstrapConfig) -> None:
    from . import plotting

    lines = [f"iterations run: {state.iteration} (max {cfg.I})",
             f"converged: {state.converged}",
             f"K: {cfg.K}  max_phrase_len: {cfg.max_phrase_len}  prior: {cfg.trainer.prior}  "
             f"loss: {cfg.trainer.loss}  risk: {cfg.trainer.risk}  tau: {cfg.trainer.tau}",
             "dictionary size per iteration:"]
    for k, snap in enumerate(state.snapshots):
        lines.append(f"  {k}: " + ", ".join(f"{t}={n}" for t, n in snap.counts().items()))
    lines.append(f"harvested entries: {len(state.harvest_log)}")
    if state.recall is not None:
        (out_dir / "recall_curve.tsv").write_text(recall_table(state.recall), encoding="utf-8")
        plotting.plot_recall_curves({"model": state.recall}, out_dir / "recall_curve.png")
        lines.append("recall per iteration:")
        lines.append(recall_table(state.recall).rstrip())
    plotting.plot_dictionary_growth([s.counts() for s in state.snapshots], out_dir / "dictionary_growth.png")
    if state.risk_traces:
        plotting.plot_risk_traces(state.risk_traces, out_dir / "risk_traces.png")
    (out_dir / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_gazetteer_snapshot(run_dir, i: int, entity_types) -> Gazetteer:
    path = iteration_dir(run_dir, i) / "gazetteer.jsonl"
    if not path.exists():
        raise GazetteerError(f"iteration {i}: missing {path}")
    return load_seed(path, entity_types)
