"""trec_eval-style MAP, R-Precision, BPref, and the Wilcoxon signed-rank test."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Qrels

METRICS = ("map", "rprec", "bpref")
EXACT_MAX_N = 12


class NoRelevant(ValueError):
    """The query has no judged-relevant documents and cannot be scored."""


class UndefinedTest(ValueError):
    """Every paired difference is zero; the signed-rank test is undefined."""


def average_precision(ranked: Sequence[str], relevant: Iterable[str]) -> float:
    relevant = set(relevant)
    if not relevant:
        raise NoRelevant("empty relevant set")
    hits, total = 0, 0.0
    for rank, doc in enumerate(ranked, 1):
        if doc in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def r_precision(ranked: Sequence[str], relevant: Iterable[str]) -> float:
    relevant = set(relevant)
    if not relevant:
        raise NoRelevant("empty relevant set")
    r = len(relevant)
    return sum(1 for d in ranked[:r] if d in relevant) / r


def bpref(ranked: Sequence[str], judgments: Mapping[str, int]) -> float:
    """trec_eval bpref; unjudged documents are ignored."""
    r = sum(1 for rel in judgments.values() if rel)
    if r == 0:
        raise NoRelevant("no judged-relevant documents")
    n = len(judgments) - r
    cap = min(r, n)
    nonrel_above, total = 0, 0.0
    for doc in ranked:
        rel = judgments.get(doc)
        if rel is None:
            continue
        if rel:
            total += 1.0 if cap == 0 else 1.0 - min(nonrel_above, cap) / cap
        else:
            nonrel_above += 1
    return total / r


@dataclass(frozen=True)
class QueryScores:
    ap: float
    rprec: float
    bpref: float

    def get(self, metric: str) -> float:
        return {"map": self.ap, "ap": self.ap, "rprec": self.rprec, "bpref": self.bpref}[metric]


@dataclass
class EvalReport:
    per_query: dict[int, QueryScores] = field(default_factory=dict)
    tag: str = ""

    @property
    def num_queries_evaluated(self) -> int:
        return len(self.per_query)

    def mean(self, metric: str) -> float:
        if not self.per_query:
            return 0.0
        return math.fsum(s.get(metric) for s in self.per_query.values()) / len(self.per_query)

    @property
    def means(self) -> dict[str, float]:
        return {m: self.mean(m) for m in METRICS}

    def to_json(self) -> dict:
        return {
            "tag": self.tag,
            "num_queries_evaluated": self.num_queries_evaluated,
            "means": {m: round(v, 6) for m, v in self.means.items()},
            "per_query": {
                str(q): {"ap": round(s.ap, 6), "rprec": round(s.rprec, 6), "bpref": round(s.bpref, 6)}
                for q, s in sorted(self.per_query.items())
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def format_table(self) -> str:
        lines = [f"{'query':>8} {'AP':>8} {'R-Prec':>8} {'BPref':>8}"]
        for q, s in sorted(self.per_query.items()):
            lines.append(f"{q:>8} {s.ap:8.4f} {s.rprec:8.4f} {s.bpref:8.4f}")
        m = self.means
        lines.append(f"{'all':>8} {m['map']:8.4f} {m['rprec']:8.4f} {m['bpref']:8.4f}")
        return "\n".join(lines) + "\n"


def evaluate(
    run: Mapping[int, Sequence[str] | Sequence[tuple[str, float]]],
    qrels: Qrels | Mapping[int, Mapping[str, int]],
    query_ids: Iterable[int] | None = None,
    tag: str = "",
) -> EvalReport:
    """Score a run. Queries without relevant judgments are left out.

    ``query_ids`` defaults to the queries present in the run; queries listed
    there but absent from the run score zero.
    """
    judged = qrels.by_query() if isinstance(qrels, Qrels) else qrels
    ids = sorted(run) if query_ids is None else sorted(set(query_ids))
    report = EvalReport(tag=tag)
    for q in ids:
        j = judged.get(q, {})
        relevant = {d for d, rel in j.items() if rel}
        if not relevant:
            continue
        ranked = [x if isinstance(x, str) else x[0] for x in run.get(q, ())]
        report.per_query[q] = QueryScores(
            average_precision(ranked, relevant), r_precision(ranked, relevant), bpref(ranked, j)
        )
    return report


# -- significance -----------------------------------------------------------

@dataclass(frozen=True)
class SignificanceResult:
    statistic: float
    p_value: float
    n_pairs_nonzero: int
    exact: bool = True


def midranks(values: Sequence[float]) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _exact_p(ranks: np.ndarray, w: float) -> float:
    """Two-sided p: share of sign assignments with min(W+, W-) <= w."""
    total = ranks.sum()
    signs = np.array(list(itertools.product((0.0, 1.0), repeat=len(ranks))))
    w_plus = signs @ ranks
    extreme = np.minimum(w_plus, total - w_plus) <= w + 1e-9
    return float(extreme.mean())


def _normal_p(ranks: np.ndarray, w: float) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4
    _, counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24 - float(np.sum(counts**3 - counts)) / 48
    if var <= 0:
        return 1.0
    dev = max(0.0, abs(w - mean) - 0.5)
    return min(1.0, math.erfc(dev / math.sqrt(var) / math.sqrt(2)))


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float], method: str = "auto") -> SignificanceResult:
    """Paired two-sided Wilcoxon signed-rank test with W = min(W+, W-).

    ``method`` is ``auto`` (exact enumeration up to 12 nonzero pairs, normal
    approximation with tie and continuity corrections above), ``exact`` or
    ``normal``.
    """
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    if len(a) != len(b):
        raise ValueError("paired samples differ in length")
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        raise UndefinedTest("all paired differences are zero")
    ranks = midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w = min(w_plus, float(ranks.sum()) - w_plus)
    exact = method == "exact" or (method == "auto" and n <= EXACT_MAX_N)
    p = _exact_p(ranks, w) if exact else _normal_p(ranks, w)
    return SignificanceResult(w, p, n, exact)


def compare_reports(a: EvalReport, b: EvalReport, metric: str = "map") -> SignificanceResult:
    common = sorted(set(a.per_query) & set(b.per_query))
    return wilcoxon_signed_rank([a.per_query[q].get(metric) for q in common],
                                [b.per_query[q].get(metric) for q in common])
