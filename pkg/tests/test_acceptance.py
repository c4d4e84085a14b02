"""Acceptance criteria, one test each. Every test records a PASS/FAIL line."""

import filecmp
import math
import random
import time
from collections import Counter

import numpy as np
import pytest

from conftest import ACCEPTANCE
from reference import naive_ap, naive_bpref, naive_rprec, random_fixture
from xlir.cli import main
from xlir.corpus import Document
from xlir.embedding import cosine, sgns_gradients, sgns_loss
from xlir.evaluation import average_precision, bpref, evaluate, r_precision, wilcoxon_signed_rank
from xlir.fusion import interleave, tag, untag
from xlir.harness.config import ExperimentConfig
from xlir.harness.experiment import random_run, run_pipeline
from xlir.harness.synthetic import SyntheticSpec, generate_synthetic
from xlir.index import build_index, retrieve


def record(name, checks: dict[str, bool], detail: str):
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    ACCEPTANCE[name] = (ok, detail + ("" if ok else f" (failed: {', '.join(failed)})"))
    assert ok, f"{name}: {ACCEPTANCE[name][1]}"


# 1 ------------------------------------------------------------------------

def test_1_interleaving_exactness():
    start = time.perf_counter()
    worked = interleave({"d1": ["t1", "t2"], "d2": ["w1", "w2", "w3", "w4", "w5"]})
    worked_ok = [untag(t)[1] for t in worked] == ["t1", "w1", "w2", "w3", "t2", "w4", "w5"]
    rnd = random.Random(2024)
    bad = 0
    for _ in range(1000):
        langs = rnd.sample(["en", "hi", "bn", "ta", "te"], rnd.randint(2, 5))
        docs = {k: [f"{k}{rnd.randint(0, 30)}" for _ in range(rnd.randint(1, 80))] for k in langs}
        out = interleave(docs)
        per = {}
        for tok in out:
            lang, term = untag(tok)
            per.setdefault(lang, []).append(term)
        conserved = all(Counter(per.get(k, [])) == Counter(v) for k, v in docs.items()) and len(out) == sum(
            len(v) for v in docs.values())
        ordered = all(per.get(k) == v for k, v in docs.items())
        bad += not (conserved and ordered)
    elapsed = time.perf_counter() - start
    record("1 interleaving", {"worked example": worked_ok, "1000 random cases": bad == 0, "runtime < 5s": elapsed < 5},
           f"worked example {'exact' if worked_ok else 'WRONG'}, {1000 - bad}/1000 invariant cases, {elapsed:.2f}s")


# 2 ------------------------------------------------------------------------

def exhaustive_rank(docs, query, mu):
    tf = [Counter(d.tokens) for d in docs]
    cf = Counter()
    for c in tf:
        cf.update(c)
    total = sum(cf.values())
    qtf = Counter(t for t in query if cf[t] > 0)
    scored = []
    for d, c in zip(docs, tf):
        if not any(c[t] for t in qtf):
            continue
        s = math.fsum(n * math.log((c[t] + mu * (cf[t] / total)) / (len(d.tokens) + mu)) for t, n in qtf.items())
        scored.append((d.doc_id, s))
    scored.sort(key=lambda x: (-x[1], x[0]))
    return scored


def test_2_retrieval_oracle():
    start = time.perf_counter()
    rnd = random.Random(77)
    worst, order_ok, n_queries = 0.0, True, 0
    for c in range(100):
        n_docs = rnd.randint(1, 1000)
        vocab = [f"t{i}" for i in range(rnd.randint(5, 400))]
        weights = [1 / (i + 1) for i in range(len(vocab))]
        docs = [Document(f"D{rnd.randrange(10**6):06d}-{i}", "xx",
                         tuple(rnd.choices(vocab, weights, k=rnd.randint(1, 60)))) for i in range(n_docs)]
        index = build_index(docs)
        for _ in range(3):
            query = rnd.choices(vocab + ["unseen"], k=rnd.randint(1, 5))
            mu = rnd.choice([1.0, 100.0, 2500.0, rnd.uniform(10, 5000)])
            got = retrieve(index, query, mu, cutoff=1000).items
            want = exhaustive_rank(docs, query, mu)[:1000]
            order_ok &= [d for d, _ in got] == [d for d, _ in want]
            worst = max([worst] + [abs(a - b) for (_, a), (_, b) in zip(got, want)])
            n_queries += 1
    elapsed = time.perf_counter() - start
    record("2 retrieval oracle", {"identical rankings": order_ok, "scores within 1e-9": worst <= 1e-9,
                                  "runtime < 60s": elapsed < 60},
           f"100 corpora / {n_queries} queries, max |score diff| {worst:.1e}, {elapsed:.1f}s")


# 3 ------------------------------------------------------------------------

def test_3_metric_fidelity():
    start = time.perf_counter()
    rnd = random.Random(31337)
    worst = 0.0
    for _ in range(100):
        ranked, j = random_fixture(rnd)
        rel = {d for d, v in j.items() if v}
        worst = max(worst, abs(average_precision(ranked, rel) - naive_ap(ranked, rel)),
                    abs(r_precision(ranked, rel) - naive_rprec(ranked, rel)),
                    abs(bpref(ranked, j) - naive_bpref(ranked, j)))
    ap = average_precision(["d1", "d2", "d3"], {"d1", "d3"})
    bp = bpref(["r1", "n1", "r2"], {"r1": 1, "n1": 0, "r2": 1})
    elapsed = time.perf_counter() - start
    record("3 metric fidelity", {"naive reference 1e-6": worst <= 1e-6, "AP 0.8333": abs(ap - 0.8333) <= 1e-4,
                                 "BPref 0.5": abs(bp - 0.5) <= 1e-4, "runtime < 10s": elapsed < 10},
           f"max diff vs naive {worst:.1e}, AP={ap:.4f}, BPref={bp:.4f}, {elapsed:.2f}s")


# 4 ------------------------------------------------------------------------

def test_4_sgns_gradient_check():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    vocab, dim = 15, 8
    syn0 = rng.normal(0, 0.5, (vocab, dim))
    syn1 = rng.normal(0, 0.5, (vocab, dim))
    batch = [(0, 1, [2, 3, 4, 5, 6]), (7, 8, [9, 10, 11, 12, 13]), (0, 14, [1, 8, 3, 9, 2])]
    g0, g1 = sgns_gradients(syn0, syn1, batch)
    worst = 0.0
    eps = 1e-6
    for analytic, mat in ((g0, syn0), (g1, syn1)):
        for idx in np.ndindex(mat.shape):
            old = mat[idx]
            mat[idx] = old + eps
            up = sgns_loss(syn0, syn1, batch)
            mat[idx] = old - eps
            down = sgns_loss(syn0, syn1, batch)
            mat[idx] = old
            numeric = (up - down) / (2 * eps)
            denom = max(abs(numeric) + abs(analytic[idx]), 1e-8)
            worst = max(worst, abs(numeric - analytic[idx]) / denom)
    elapsed = time.perf_counter() - start
    record("4 sgns gradient", {"rel err <= 1e-4": worst <= 1e-4, "runtime < 10s": elapsed < 10},
           f"max relative error {worst:.2e} over {g0.size + g1.size} parameters, {elapsed:.2f}s")


# 5 / 9 --------------------------------------------------------------------

@pytest.fixture(scope="module")
def bilingual():
    start = time.perf_counter()
    data = generate_synthetic(SyntheticSpec(languages=2, topics=20, docs_per_topic_per_lang=50), seed=11)
    cfg = ExperimentConfig(languages=data.spec.lang_codes, dim=100, window=25, seed=5)
    result = run_pipeline(cfg, data.collections)
    return data, cfg, result, time.perf_counter() - start


def test_5_crosslingual_signal(bilingual):
    data, cfg, result, elapsed = bilingual
    model = result.model
    a, b = data.spec.lang_codes
    pairs = [(tag(a, x), tag(b, y)) for x, y in data.translation_pairs(a, b)
             if tag(a, x) in model and tag(b, y) in model]
    planted = float(np.mean([cosine(model[x], model[y]) for x, y in pairs]))
    rnd = random.Random(0)
    va = [t for t in model.vocab if untag(t)[0] == a]
    vb = [t for t in model.vocab if untag(t)[0] == b]
    baseline = float(np.mean([cosine(model[rnd.choice(va)], model[rnd.choice(vb)]) for _ in range(5000)]))

    checks = {"planted cosine > random cosine": planted > baseline}
    details = [f"cos planted {planted:.3f} vs random {baseline:.3f}"]
    for src, tgt in result.cross_pairs:
        cross = result.reports[f"{src}->{tgt}"].mean("map")
        mono = result.reports[f"{tgt}->{tgt}"].mean("map")
        rand = evaluate(random_run(data.collections[tgt], result.test_ids, cfg.seed, cfg.cutoff),
                        data.collections[tgt].qrels, result.test_ids).mean("map")
        checks[f"{src}->{tgt} >= 5x random"] = cross >= 5 * rand
        checks[f"{tgt}->{tgt} > {src}->{tgt}"] = mono > cross
        details.append(f"{src}->{tgt} MAP {cross:.3f} (random {rand:.3f}, mono {mono:.3f})")
    checks["runtime < 15min"] = elapsed < 900
    record("5 cross-lingual signal", checks, "; ".join(details) + f"; {elapsed:.0f}s")


def test_9_timing_table(bilingual):
    _, _, result, _ = bilingual
    times = result.times
    pairs = result.cross_pairs + result.mono_pairs
    rows = times.table(pairs)
    per_dir = {r["direction"]: r for r in rows}
    stage_sum_pre = sum(times.index.values()) + times.fuse + times.train + sum(times.genquery.values())
    stage_sum_ret = sum(times.retrieve.values())
    text = times.format_table(pairs)
    checks = {
        "row per direction": all(f"{s}->{t}" in per_dir for s, t in pairs),
        "headers": "Pre-retrieval time" in text.splitlines()[0] and "Retrieval time" in text.splitlines()[0],
        "positive": all(per_dir[f"{s}->{t}"]["pre_retrieval_seconds"] > 0 and
                        per_dir[f"{s}->{t}"]["retrieval_seconds"] > 0 for s, t in pairs),
        "direction = index + genquery": all(
            math.isclose(per_dir[f"{s}->{t}"]["pre_retrieval_seconds"],
                         times.index[t] + times.genquery.get(f"{s}->{t}", 0.0)) for s, t in pairs),
        "total = sum of stages": math.isclose(per_dir["total"]["pre_retrieval_seconds"], stage_sum_pre)
        and math.isclose(per_dir["total"]["retrieval_seconds"], stage_sum_ret),
    }
    record("9 timing table", checks,
           f"{len(pairs)} directions; total pre-retrieval {stage_sum_pre:.2f}s, retrieval {stage_sum_ret:.3f}s")


# 6 ------------------------------------------------------------------------

def test_6_trilingual():
    start = time.perf_counter()
    data = generate_synthetic(SyntheticSpec(languages=3, topics=20, docs_per_topic_per_lang=50,
                                            codes=("en", "bn", "hi")), seed=12)
    cfg = ExperimentConfig(languages=["en", "bn", "hi"], dim=100, seed=6)
    result = run_pipeline(cfg, data.collections)
    elapsed = time.perf_counter() - start
    expected = ["bn->en", "hi->en", "en->bn", "hi->bn", "en->hi", "bn->hi"]
    cross = [t for t in result.reports if t.split("->")[0] != t.split("->")[1]]
    mono = [t for t in result.reports if t.split("->")[0] == t.split("->")[1]]
    maps = {t: r.mean("map") for t, r in result.reports.items()}
    record("6 trilingual", {"6 directions": cross == expected, "3 baselines": sorted(mono) == ["bn->bn", "en->en", "hi->hi"],
                            "nonzero MAP": all(v > 0 for v in maps.values()), "window 50": result.model.config.window == 50,
                            "runtime < 30min": elapsed < 1800},
           ", ".join(f"{t} {v:.3f}" for t, v in maps.items()) + f"; {elapsed:.0f}s")


# 7 ------------------------------------------------------------------------

def signed_diffs_for_w_plus(w_plus, n=12):
    """Differences with |d| ranks 1..n whose positive ranks sum to ``w_plus``."""
    positive, remaining = set(), w_plus
    for r in range(n, 0, -1):
        if r <= remaining:
            positive.add(r)
            remaining -= r
    assert remaining == 0
    return [r if r in positive else -r for r in range(1, n + 1)]


def test_7_wilcoxon():
    start = time.perf_counter()
    worst = 0.0
    for w_plus in range(0, 12 * 13 // 2 + 1):
        d = signed_diffs_for_w_plus(w_plus)
        exact = wilcoxon_signed_rank(d, [0] * 12, method="exact")
        normal = wilcoxon_signed_rank(d, [0] * 12, method="normal")
        assert exact.exact and not normal.exact and exact.statistic == normal.statistic
        worst = max(worst, abs(exact.p_value - normal.p_value))
    base = [0.21, 0.35, 0.18, 0.5, 0.42, 0.3, 0.27, 0.61, 0.09, 0.44]
    shift = wilcoxon_signed_rank([x + 0.1 for x in base], base)
    elapsed = time.perf_counter() - start
    record("7 wilcoxon", {"|exact-normal| <= 0.02 at n=12": worst <= 0.02,
                          "shift p = 2/1024": shift.exact and abs(shift.p_value - 2 / 2**10) < 1e-12,
                          "shift W- = 0": shift.statistic == 0, "runtime < 5s": elapsed < 5},
           f"max |exact - normal| {worst:.4f} over W=0..78; shift p={shift.p_value:.5f}; {elapsed:.2f}s")


# 8 ------------------------------------------------------------------------

def test_8_determinism(tmp_path):
    data_dir, run_a, run_b = tmp_path / "data", tmp_path / "a", tmp_path / "b"
    main(["--seed", "3", "synth", "--out", str(data_dir), "--topics", "12", "--docs-per-topic", "20"])
    for run in (run_a, run_b):
        main(["--config", str(data_dir / "config.yaml"), "--seed", "3", "pipeline", "--run-dir", str(run)])
    files = sorted(str(p.relative_to(run_a)) for sub in ("runs", "reports", "queries") for p in (run_a / sub).iterdir())
    files += ["model.txt", "model.w2v.txt", "fused.txt", "split.json"]
    _, mismatch, errors = filecmp.cmpfiles(run_a, run_b, files, shallow=False)
    runs = sum(f.startswith("runs/") for f in files)
    reports = sum(f.startswith("reports/") for f in files)
    record("8 determinism", {"byte-identical": not mismatch and not errors, "has runs": runs == 4,
                             "has reports": reports >= 9},
           f"{len(files)} files compared ({runs} runs, {reports} reports, 2 model files); "
           f"{len(mismatch) + len(errors)} differ")
