"""Experiment protocol: query splits, cross-validated sweeps, the full pipeline."""

from __future__ import annotations

import json
import logging
import random
import time
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from ..corpus import TestCollection, aligned_query_ids, load_collection
from ..embedding import EmbeddingModel, train
from ..evaluation import EvalReport, UndefinedTest, compare_reports, evaluate
from ..fusion import FusedCorpus, build_test_fusion, build_training_fusion
from ..index import InvertedIndex, RankedList, TimingReport, build_index, format_run
from ..xquery import GeneratedQuery, crosslingual_run, provenance_json, run_tag, write_generated_topics
from .config import ExperimentConfig

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def split_queries(all_ids: Iterable[int], test_count: int, seed: int) -> tuple[list[int], list[int]]:
    ids = sorted(set(all_ids))
    if not 0 < test_count < len(ids):
        raise ValueError(f"test_count must be in [1, {len(ids) - 1}], got {test_count}")
    test = sorted(random.Random(seed).sample(ids, test_count))
    held = set(test)
    return [q for q in ids if q not in held], test


def assign_folds(train_ids: Iterable[int], folds: int, seed: int) -> list[list[int]]:
    """Round-robin fold assignment over a seeded shuffle."""
    ids = sorted(train_ids)
    random.Random(seed).shuffle(ids)
    return [sorted(ids[f::folds]) for f in range(folds)]


def directions(languages: Sequence[str]) -> list[tuple[str, str]]:
    """Ordered cross-lingual (source, target) pairs, grouped by target."""
    return [(s, t) for t in languages for s in languages if s != t]


def random_run(collection: TestCollection, query_ids: Iterable[int], seed: int, cutoff: int) -> dict[int, list[str]]:
    """Uniformly random rankings of the whole collection; a floor for MAP."""
    docs = sorted(collection.documents)
    rng = np.random.default_rng(seed)
    return {q: [docs[i] for i in rng.permutation(len(docs))[:cutoff]] for q in sorted(query_ids)}


def as_run(ranked: Iterable[RankedList]) -> dict[int, list[tuple[str, float]]]:
    return {r.query_id: list(r.items) for r in ranked}


@dataclass
class StageTimes:
    """Per-stage wall-clock seconds, attributed to the two reporting phases."""

    index: dict[str, float] = field(default_factory=dict)
    fuse: float = 0.0
    train: float = 0.0
    genquery: dict[str, float] = field(default_factory=dict)
    retrieve: dict[str, float] = field(default_factory=dict)

    def direction(self, source: str, target: str) -> TimingReport:
        key = run_tag(source, target)
        return TimingReport(self.index[target] + self.genquery.get(key, 0.0), self.retrieve[key])

    def total(self) -> TimingReport:
        pre = sum(self.index.values()) + self.fuse + self.train + sum(self.genquery.values())
        return TimingReport(pre, sum(self.retrieve.values()))

    def table(self, pairs: Iterable[tuple[str, str]]) -> list[dict]:
        rows = []
        for s, t in pairs:
            rep = self.direction(s, t)
            rows.append({"direction": run_tag(s, t), "pre_retrieval_seconds": rep.pre_retrieval_seconds,
                         "retrieval_seconds": rep.retrieval_seconds})
        rows.append({"direction": "shared(fuse+train)", "pre_retrieval_seconds": self.fuse + self.train,
                     "retrieval_seconds": 0.0})
        tot = self.total()
        rows.append({"direction": "total", "pre_retrieval_seconds": tot.pre_retrieval_seconds,
                     "retrieval_seconds": tot.retrieval_seconds})
        return rows

    def format_table(self, pairs: Iterable[tuple[str, str]]) -> str:
        out = [f"{'direction':<20} {'Pre-retrieval time':>20} {'Retrieval time':>16}"]
        for row in self.table(pairs):
            out.append(f"{row['direction']:<20} {row['pre_retrieval_seconds']:>19.4f}s "
                       f"{row['retrieval_seconds']:>15.4f}s")
        return "\n".join(out) + "\n"

    def to_json(self) -> dict:
        return {"index": self.index, "fuse": self.fuse, "train": self.train,
                "genquery": self.genquery, "retrieve": self.retrieve}


@dataclass
class PipelineResult:
    languages: list[str]
    train_ids: list[int]
    test_ids: list[int]
    runs: dict[str, list[RankedList]]
    reports: dict[str, EvalReport]
    generated: dict[str, list[GeneratedQuery]]
    times: StageTimes
    model: EmbeddingModel
    fused: FusedCorpus
    significance: dict[str, dict] = field(default_factory=dict)

    @property
    def cross_pairs(self) -> list[tuple[str, str]]:
        return directions(self.languages)

    @property
    def mono_pairs(self) -> list[tuple[str, str]]:
        return [(lang, lang) for lang in self.languages]

    def summary(self) -> dict:
        return {
            "languages": self.languages,
            "train_ids": self.train_ids,
            "test_ids": self.test_ids,
            "means": {tag: {m: round(v, 6) for m, v in r.means.items()} for tag, r in self.reports.items()},
            "significance_vs_monolingual": self.significance,
        }

    def format_summary(self) -> str:
        lines = [f"{'run':<12} {'MAP':>8} {'R-Prec':>8} {'BPref':>8} {'n':>4}"]
        for tag, r in self.reports.items():
            m = r.means
            lines.append(f"{tag:<12} {m['map']:8.4f} {m['rprec']:8.4f} {m['bpref']:8.4f} {r.num_queries_evaluated:>4}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> None:
        """Write runs, reports, model, fused corpus and timing under ``out_dir``."""
        out = Path(out_dir)
        for sub in ("runs", "reports", "queries"):
            (out / sub).mkdir(parents=True, exist_ok=True)
        (out / "split.json").write_text(json.dumps({"train": self.train_ids, "test": self.test_ids}) + "\n")
        self.fused.save(out / "fused.txt")
        self.model.save(out / "model.txt")
        self.model.save_word2vec_text(out / "model.w2v.txt")
        for tag, ranked in self.runs.items():
            name = tag.replace("->", "-")
            (out / "runs" / f"{name}.run").write_text(format_run(ranked, tag), encoding="utf-8")
            (out / "reports" / f"{name}.json").write_text(self.reports[tag].dumps(), encoding="utf-8")
            (out / "reports" / f"{name}.txt").write_text(self.reports[tag].format_table(), encoding="utf-8")
        for tag, gen in self.generated.items():
            name = tag.replace("->", "-")
            with open(out / "queries" / f"{name}.topics", "w", encoding="utf-8") as fh:
                write_generated_topics(gen, fh)
            (out / "queries" / f"{name}.json").write_text(
                json.dumps(provenance_json(gen), indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
        (out / "reports" / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        (out / "reports" / "summary.txt").write_text(self.format_summary())
        # wall-clock values: intentionally outside reports/
        pairs = self.cross_pairs + self.mono_pairs
        (out / "timing.txt").write_text(self.times.format_table(pairs))
        (out / "timing.json").write_text(json.dumps(
            {"table": self.times.table(pairs), "stages": self.times.to_json()}, indent=2) + "\n")


def load_collections(cfg: ExperimentConfig) -> dict[str, TestCollection]:
    missing = [lang for lang in cfg.languages if lang not in cfg.data]
    if missing:
        raise ValueError(f"no data paths configured for {missing}")
    return {lang: load_collection(lang, **vars(cfg.data[lang])) for lang in cfg.languages}


def _timed(stage: str, fn: Callable, *args, **kwargs):
    start = time.perf_counter()
    try:
        value = fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc
    return value, time.perf_counter() - start


def run_pipeline(
    cfg: ExperimentConfig,
    collections: Mapping[str, TestCollection] | None = None,
    out_dir: str | Path | None = None,
) -> PipelineResult:
    """Ingest, index, fuse, train, generate, retrieve, evaluate."""
    if collections is None:
        collections, _ = _timed("ingest", load_collections, cfg)
    collections = {lang: collections[lang] for lang in cfg.languages}
    langs = list(cfg.languages)
    times = StageTimes()

    try:
        ids = aligned_query_ids(collections)
        train_ids, test_ids = split_queries(ids, cfg.test_query_count, cfg.seed)
    except ValueError as exc:
        raise StageError("split", exc) from exc

    indexes: dict[str, InvertedIndex] = {}
    for lang in langs:
        indexes[lang], times.index[lang] = _timed("index", build_index, collections[lang])

    def fuse():
        return FusedCorpus(
            build_training_fusion(collections, train_ids, cfg.seed),
            build_test_fusion(collections, indexes, test_ids, cfg.kappa, cfg.mu, cfg.seed),
        )

    fused, times.fuse = _timed("fuse", fuse)
    model, times.train = _timed("train", train, fused.final, cfg.train_config())

    runs: dict[str, list[RankedList]] = {}
    generated: dict[str, list[GeneratedQuery]] = {}
    pairs = directions(langs) + [(lang, lang) for lang in langs]
    for src, tgt in pairs:
        tag = run_tag(src, tgt)
        gen_t, ret_t = TimingReport(), TimingReport()
        (ranked, gen), _ = _timed("retrieve", crosslingual_run, collections[src], indexes[tgt],
                                  model, tgt, test_ids, cfg.tau, cfg.mu, cfg.cutoff, cfg.query_mode,
                                  gen_timing=gen_t, timing=ret_t)
        runs[tag] = ranked
        if src != tgt:
            generated[tag] = gen
            times.genquery[tag] = gen_t.pre_retrieval_seconds
        times.retrieve[tag] = ret_t.retrieval_seconds

    reports = {tag: evaluate(as_run(r), collections[tag.split("->")[1]].qrels, test_ids, tag)
               for tag, r in runs.items()}
    significance = {}
    for src, tgt in directions(langs):
        tag = run_tag(src, tgt)
        try:
            res = compare_reports(reports[tag], reports[run_tag(tgt, tgt)], "map")
            significance[tag] = {"vs": run_tag(tgt, tgt), "metric": "map", "W": res.statistic,
                                 "p_value": round(res.p_value, 6), "n": res.n_pairs_nonzero}
        except UndefinedTest:
            significance[tag] = {"vs": run_tag(tgt, tgt), "metric": "map", "W": None, "p_value": None, "n": 0}

    result = PipelineResult(langs, train_ids, test_ids, runs, reports, generated, times, model, fused, significance)
    if out_dir is not None:
        result.write(out_dir)
    return result


# -- cross-validation -------------------------------------------------------

@dataclass
class SweepResult:
    best: tuple[int, int, int]
    scores: dict[tuple[int, int, int], float]
    fold_scores: dict[tuple[int, int, int], list[float | None]]
    skipped_folds: list[int]

    def to_json(self) -> dict:
        return {
            "best": {"window": self.best[0], "kappa": self.best[1], "tau": self.best[2]},
            "grid": [{"window": w, "kappa": k, "tau": t, "mean_map": round(s, 6),
                      "fold_map": [None if f is None else round(f, 6) for f in self.fold_scores[(w, k, t)]]}
                     for (w, k, t), s in sorted(self.scores.items())],
            "skipped_folds": self.skipped_folds,
        }


def cross_validate(
    cfg: ExperimentConfig,
    collections: Mapping[str, TestCollection],
    train_ids: Sequence[int],
    pairs: Sequence[tuple[str, str]] | None = None,
) -> SweepResult:
    """Grid search of (window, kappa, tau) by mean held-out MAP across folds.

    Each fold fuses the remaining training queries with their true qrels and
    the held-out queries through top-kappa pseudo-relevance, trains an
    embedding, and scores held-out queries in every direction of ``pairs``.
    Ties go to the lexicographically smallest grid point.
    """
    collections = {lang: collections[lang] for lang in cfg.languages}
    pairs = list(pairs) if pairs else directions(cfg.languages)
    folds = assign_folds(train_ids, cfg.folds, cfg.seed)
    indexes = {lang: build_index(c) for lang, c in collections.items()}
    fold_scores: dict[tuple[int, int, int], list[float | None]] = defaultdict(lambda: [None] * len(folds))
    skipped: list[int] = []

    for f, held in enumerate(folds):
        rest = [q for q in train_ids if q not in set(held)]
        evaluable = [q for q in held if all(collections[t].relevant_set(q) for _, t in pairs)]
        if not evaluable or not rest:
            log.warning("fold %d has no evaluable queries; skipped", f)
            skipped.append(f)
            continue
        fold_seed = derive_seed(cfg.seed, f)
        train_part = build_training_fusion(collections, rest, fold_seed)
        test_parts = {k: build_test_fusion(collections, indexes, held, k, cfg.mu, fold_seed)
                      for k in sorted(cfg.kappa_grid)}
        for window, kappa in product(sorted(cfg.window_grid), sorted(cfg.kappa_grid)):
            test_part = test_parts[kappa]
            model = train(train_part + test_part, cfg.train_config(window, fold_seed))
            for tau in sorted(cfg.tau_grid):
                maps = []
                for src, tgt in pairs:
                    ranked, _ = crosslingual_run(collections[src], indexes[tgt], model, tgt, evaluable,
                                                 tau, cfg.mu, cfg.cutoff, cfg.query_mode)
                    maps.append(evaluate(as_run(ranked), collections[tgt].qrels, evaluable).mean("map"))
                fold_scores[(window, kappa, tau)][f] = float(np.mean(maps))
                log.info("fold %d window=%d kappa=%d tau=%d MAP=%.4f", f, window, kappa, tau, np.mean(maps))

    if len(skipped) == len(folds):
        raise ValueError("no fold had evaluable queries")
    scores = {p: float(np.mean([s for s in v if s is not None])) for p, v in fold_scores.items()}
    best = None
    for point in sorted(scores):
        if best is None or scores[point] > scores[best]:
            best = point
    return SweepResult(best, scores, dict(fold_scores), skipped)
