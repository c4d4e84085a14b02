"""Command-line interface.

Stages read and write a run directory; ``pipeline`` does everything at once.

    xlir synth --out data/ --languages 2
    xlir --config data/config.yaml pipeline --run-dir runs/demo
    xlir --config data/config.yaml ingest --run-dir runs/staged
    xlir ... index | fuse | train | genquery | retrieve | sweep
    xlir evaluate runs/demo/runs/en-hi.run data/hi.qrels
"""

from __future__ import annotations

import argparse
import gzip
import json
import logging
import sys
import time
from pathlib import Path

from .corpus import TestCollection, aligned_query_ids, collection_from_json, collection_to_json, parse_qrels, parse_topics
from .embedding import EmbeddingModel, train
from .evaluation import UndefinedTest, compare_reports, evaluate
from .fusion import FusedCorpus, build_test_fusion, build_training_fusion
from .harness.config import ExperimentConfig, LanguageData, scalar_fields
from .harness.experiment import (cross_validate, directions, load_collections, run_pipeline,
                                 split_queries)
from .harness.synthetic import SyntheticSpec, generate_synthetic
from .index import InvertedIndex, build_index, read_run, retrieve, write_run
from .xquery import crosslingual_run, generate_query, provenance_json, run_tag, write_generated_topics

log = logging.getLogger("xlir")

_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
    "int | None": int,
    "list[int]": lambda s: [int(x) for x in s.split(",") if x],
    "list[str]": lambda s: [x for x in s.split(",") if x],
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides")
    for f in scalar_fields():
        flag = "--" + f.name.replace("_", "-")
        if f.name == "seed":
            continue
        hint = " (comma separated)" if f.type.startswith("list") else ""
        group.add_argument(flag, dest=f"cfg_{f.name}", type=_PARSERS[f.type], default=None,
                           help=f"override config key {f.name}{hint}")
    for kind in ("docs", "topics", "qrels", "stopwords"):
        group.add_argument(f"--{kind}", dest=f"data_{kind}", action="append", default=[],
                           metavar="LANG=PATH", help=f"{kind} path for one language (repeatable)")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        data = cfg.to_dict()
    for f in scalar_fields():
        value = args.seed if f.name == "seed" else getattr(args, f"cfg_{f.name}", None)
        if value is not None:
            data[f.name] = value
    paths = {k: dict(v) for k, v in data.get("data", {}).items()}
    for kind in ("docs", "topics", "qrels", "stopwords"):
        for item in getattr(args, f"data_{kind}", []):
            lang, _, path = item.partition("=")
            if not path:
                raise SystemExit(f"--{kind} expects LANG=PATH, got {item!r}")
            paths.setdefault(lang, {"docs": "", "topics": "", "qrels": ""})[kind] = path
    data["data"] = paths
    return ExperimentConfig.from_dict(data)


# -- run directory helpers --------------------------------------------------

def _run_dir(args) -> Path:
    path = Path(args.run_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_ingested(run: Path, cfg: ExperimentConfig) -> dict[str, TestCollection]:
    out = {}
    for lang in cfg.languages:
        path = run / "collections" / f"{lang}.json.gz"
        if not path.exists():
            raise SystemExit(f"{path} missing; run `xlir ingest` first")
        with gzip.open(path, "rt", encoding="utf-8") as fh:
            out[lang] = collection_from_json(json.load(fh))
    return out


def _load_indexes(run: Path, cfg: ExperimentConfig) -> dict[str, InvertedIndex]:
    out = {}
    for lang in cfg.languages:
        path = run / "index" / f"{lang}.json.gz"
        if not path.exists():
            raise SystemExit(f"{path} missing; run `xlir index` first")
        out[lang] = InvertedIndex.load(path)
    return out


def _split(run: Path) -> dict[str, list[int]]:
    return json.loads((run / "split.json").read_text())


def _pairs(args, cfg) -> list[tuple[str, str]]:
    if args.source and args.target:
        return [(args.source, args.target)]
    pairs = directions(cfg.languages)
    if args.source:
        pairs = [p for p in pairs if p[0] == args.source]
    if args.target:
        pairs = [p for p in pairs if p[1] == args.target]
    return pairs


# -- commands ---------------------------------------------------------------

def cmd_synth(args) -> None:
    spec = SyntheticSpec(languages=args.languages, topics=args.topics,
                         docs_per_topic_per_lang=args.docs_per_topic,
                         doc_length_mean=args.doc_length, doc_length_spread=min(args.doc_length - 1, 20),
                         codes=tuple(args.codes.split(",")) if args.codes else ())
    data = generate_synthetic(spec, args.seed if args.seed is not None else 0)
    out = Path(args.out)
    layout = data.write(out)
    cfg = ExperimentConfig(languages=spec.lang_codes,
                           data={k: LanguageData(**v) for k, v in layout.items()},
                           test_query_count=min(10, max(1, spec.topics // 2)))
    cfg.dump(out / "config.yaml")
    (out / "translations.tsv").write_text("".join("\t".join(row) + "\n" for row in data.translations))
    print(f"wrote {spec.languages} collections to {out}; config at {out / 'config.yaml'}")


def cmd_ingest(args) -> None:
    cfg = build_config(args)
    run = _run_dir(args)
    collections = load_collections(cfg)
    ids = aligned_query_ids(collections)
    train_ids, test_ids = split_queries(ids, cfg.test_query_count, cfg.seed)
    (run / "collections").mkdir(exist_ok=True)
    for lang, coll in collections.items():
        with gzip.open(run / "collections" / f"{lang}.json.gz", "wt", encoding="utf-8") as fh:
            json.dump(collection_to_json(coll), fh, ensure_ascii=False)
        print(coll)
    (run / "split.json").write_text(json.dumps({"train": train_ids, "test": test_ids}) + "\n")
    cfg.dump(run / "config.yaml")
    print(f"{len(ids)} aligned queries: {len(train_ids)} train, {len(test_ids)} test")


def cmd_index(args) -> None:
    cfg = build_config(args)
    run = _run_dir(args)
    (run / "index").mkdir(exist_ok=True)
    for lang, coll in _load_ingested(run, cfg).items():
        start = time.perf_counter()
        index = build_index(coll)
        elapsed = time.perf_counter() - start
        index.save(run / "index" / f"{lang}.json.gz")
        print(f"{lang}: {len(index)} docs, {len(index.postings)} terms, {elapsed:.3f}s")


def cmd_fuse(args) -> None:
    cfg = build_config(args)
    run = _run_dir(args)
    collections = _load_ingested(run, cfg)
    split = _split(run)
    fused = FusedCorpus(
        build_training_fusion(collections, split["train"], cfg.seed),
        build_test_fusion(collections, _load_indexes(run, cfg), split["test"], cfg.kappa, cfg.mu, cfg.seed),
    )
    fused.save(run / "fused.txt")
    print(f"{len(fused.training)} training + {len(fused.test)} test fused documents")


def cmd_train(args) -> None:
    cfg = build_config(args)
    run = _run_dir(args)
    corpus = FusedCorpus.load(args.corpus or run / "fused.txt")
    model = train(corpus.final, cfg.train_config())
    model.save(run / "model.txt")
    model.save_word2vec_text(run / "model.w2v.txt")
    print(f"vocabulary {len(model)} x {model.dim}, window {model.config.window}")


def cmd_genquery(args) -> None:
    cfg = build_config(args)
    run = _run_dir(args)
    collections = _load_ingested(run, cfg)
    model = EmbeddingModel.load(run / "model.txt")
    split = _split(run)
    (run / "queries").mkdir(exist_ok=True)
    for src, tgt in _pairs(args, cfg):
        gen = [generate_query(model, collections[src].queries[q], tgt, cfg.tau, cfg.query_mode)
               for q in split["test"]]
        name = f"{src}-{tgt}"
        with open(run / "queries" / f"{name}.topics", "w", encoding="utf-8") as fh:
            write_generated_topics(gen, fh)
        (run / "queries" / f"{name}.json").write_text(json.dumps(provenance_json(gen), indent=1) + "\n")
        print(f"{run_tag(src, tgt)}: {sum(not g.failed for g in gen)}/{len(gen)} queries generated")


def cmd_retrieve(args) -> None:
    cfg = build_config(args)
    run = _run_dir(args)
    indexes = _load_indexes(run, cfg)
    split = _split(run)
    (run / "runs").mkdir(exist_ok=True)
    if args.topics_file:
        lang = args.target or cfg.languages[0]
        with open(args.topics_file, "rb") as fh:
            queries = parse_topics(fh, lang)
        ranked = [retrieve(indexes[lang], q, cfg.mu, cfg.cutoff) for q in queries]
        out = Path(args.out or run / "runs" / f"{Path(args.topics_file).stem}.run")
        write_run(ranked, args.tag or lang, out)
        print(f"wrote {out}")
        return
    collections = _load_ingested(run, cfg)
    pairs = _pairs(args, cfg) + ([(lang, lang) for lang in cfg.languages] if args.monolingual else [])
    for src, tgt in pairs:
        name = f"{src}-{tgt}"
        if src == tgt:
            ranked, _ = crosslingual_run(collections[src], indexes[tgt], None, tgt, split["test"],
                                         cfg.tau, cfg.mu, cfg.cutoff)
        else:
            path = run / "queries" / f"{name}.topics"
            if not path.exists():
                raise SystemExit(f"{path} missing; run `xlir genquery` first")
            with open(path, "rb") as fh:
                generated = {q.query_id: q for q in parse_topics(fh, tgt)}
            ranked = [retrieve(indexes[tgt], generated[q], cfg.mu, cfg.cutoff) if q in generated
                      else retrieve(indexes[tgt], [], cfg.mu, cfg.cutoff, query_id=q)
                      for q in split["test"]]
        write_run(ranked, run_tag(src, tgt), run / "runs" / f"{name}.run")
        print(f"{run_tag(src, tgt)}: {sum(len(r.items) for r in ranked)} results")


def cmd_evaluate(args) -> None:
    with open(args.qrels, "rb") as fh:
        qrels = parse_qrels(fh)
    run = read_run(args.run)
    ids = qrels.query_ids() if args.complete else None
    if args.queries:
        ids = [int(x) for x in args.queries.split(",")]
    report = evaluate(run, qrels, ids, tag=Path(args.run).stem)
    print(report.format_table(), end="")
    if args.out:
        Path(args.out).write_text(report.dumps())
    if args.compare:
        other = evaluate(read_run(args.compare), qrels, ids, tag=Path(args.compare).stem)
        for metric in ("map", "rprec", "bpref"):
            try:
                res = compare_reports(report, other, metric)
                kind = "exact" if res.exact else "normal"
                print(f"wilcoxon {metric}: W={res.statistic:g} p={res.p_value:.4f} n={res.n_pairs_nonzero} ({kind})")
            except UndefinedTest:
                print(f"wilcoxon {metric}: undefined (no nonzero differences)")


def cmd_sweep(args) -> None:
    cfg = build_config(args)
    run = _run_dir(args)
    collections = load_collections(cfg)
    train_ids, _ = split_queries(aligned_query_ids(collections), cfg.test_query_count, cfg.seed)
    result = cross_validate(cfg, collections, train_ids, _pairs(args, cfg))
    (run / "reports").mkdir(exist_ok=True)
    (run / "reports" / "sweep.json").write_text(json.dumps(result.to_json(), indent=2) + "\n")
    w, k, t = result.best
    print(f"best window={w} kappa={k} tau={t} (mean held-out MAP {result.scores[result.best]:.4f})")


def cmd_pipeline(args) -> None:
    cfg = build_config(args)
    run = _run_dir(args)
    cfg.dump(run / "config.yaml")
    result = run_pipeline(cfg, out_dir=run)
    print(result.format_summary(), end="")
    print()
    print(result.times.format_table(result.cross_pairs + result.mono_pairs), end="")


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xlir", description=__doc__.split("\n")[0])
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--seed", type=int, default=None, help="global random seed")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def stage(name, fn, help, run_dir=True, config=True):
        sp = sub.add_parser(name, help=help)
        if run_dir:
            sp.add_argument("--run-dir", default="run", help="output directory (default: ./run)")
        if config:
            _add_config_flags(sp)
        sp.set_defaults(func=fn)
        return sp

    sp = stage("synth", cmd_synth, "write a synthetic multilingual test collection", run_dir=False, config=False)
    sp.add_argument("--out", required=True)
    sp.add_argument("--languages", type=int, default=2)
    sp.add_argument("--codes", help="comma-separated language codes")
    sp.add_argument("--topics", type=int, default=20)
    sp.add_argument("--docs-per-topic", type=int, default=50)
    sp.add_argument("--doc-length", type=int, default=60)

    stage("ingest", cmd_ingest, "parse and validate collections, split queries")
    stage("index", cmd_index, "build inverted indexes")
    stage("fuse", cmd_fuse, "build the fused multilingual corpus")
    sp = stage("train", cmd_train, "train the multilingual embedding")
    sp.add_argument("--corpus", help="fused corpus file (default: RUN_DIR/fused.txt)")
    for name, fn, h in (("genquery", cmd_genquery, "generate target-language queries"),
                        ("retrieve", cmd_retrieve, "rank documents and write TREC runs"),
                        ("sweep", cmd_sweep, "cross-validated (window, kappa, tau) sweep")):
        sp = stage(name, fn, h)
        sp.add_argument("--source")
        sp.add_argument("--target")
    sp = sub.choices["retrieve"]
    sp.add_argument("--monolingual", action="store_true", help="also write monolingual baseline runs")
    sp.add_argument("--topics-file", help="run an arbitrary topics file against --target's index")
    sp.add_argument("--tag")
    sp.add_argument("--out")

    sp = stage("evaluate", cmd_evaluate, "score a TREC run against qrels", run_dir=False, config=False)
    sp.add_argument("run")
    sp.add_argument("qrels")
    sp.add_argument("--queries", help="comma-separated query ids to evaluate")
    sp.add_argument("--complete", action="store_true", help="score every qrels query, missing ones as zero")
    sp.add_argument("--compare", metavar="RUN2", help="paired Wilcoxon test against a second run")
    sp.add_argument("--out", help="write the JSON report here")

    stage("pipeline", cmd_pipeline, "run everything end to end")
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
