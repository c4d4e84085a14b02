"""Inverted index with Dirichlet-smoothed query-likelihood ranking."""

from __future__ import annotations

import gzip
import json
import math
import threading
import time
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .corpus import Document, Query, TestCollection

DEFAULT_MU = 2500.0
DEFAULT_CUTOFF = 1000


@dataclass
class TimingReport:
    """Wall-clock seconds split into pre-retrieval and retrieval phases."""

    pre_retrieval_seconds: float = 0.0
    retrieval_seconds: float = 0.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, phase: str, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("negative duration")
        with self._lock:
            if phase == "pre_retrieval":
                self.pre_retrieval_seconds += seconds
            elif phase == "retrieval":
                self.retrieval_seconds += seconds
            else:
                raise ValueError(f"unknown phase {phase!r}")

    @contextmanager
    def measure(self, phase: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.add(phase, time.perf_counter() - start)


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    collection_freq: dict[str, int]
    total_tokens: int
    lang: str = ""

    def __len__(self) -> int:
        return len(self.doc_lengths)

    def p_collection(self, term: str) -> float:
        return self.collection_freq.get(term, 0) / self.total_tokens

    def to_json(self) -> dict:
        return {
            "lang": self.lang,
            "total_tokens": self.total_tokens,
            "doc_lengths": self.doc_lengths,
            "postings": {t: [[d, tf] for d, tf in p] for t, p in self.postings.items()},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "InvertedIndex":
        postings = {t: [(d, int(tf)) for d, tf in p] for t, p in data["postings"].items()}
        cf = {t: sum(tf for _, tf in p) for t, p in postings.items()}
        return cls(postings, dict(data["doc_lengths"]), cf, int(data["total_tokens"]), data.get("lang", ""))

    def save(self, path: str | Path) -> None:
        with gzip.open(path, "wt", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, ensure_ascii=False, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        with gzip.open(path, "rt", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class RankedList:
    query_id: int
    items: tuple[tuple[str, float], ...]
    cutoff: int = DEFAULT_CUTOFF

    @property
    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.items]


def build_index(
    collection: TestCollection | Iterable[Document], timing: TimingReport | None = None
) -> InvertedIndex:
    start = time.perf_counter()
    if isinstance(collection, TestCollection):
        docs, lang = list(collection.documents.values()), collection.lang
    else:
        docs = list(collection)
        lang = docs[0].lang if docs else ""
    if not docs:
        raise ValueError("cannot index an empty collection")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in sorted(docs, key=lambda d: d.doc_id):
        doc_lengths[doc.doc_id] = doc.raw_length
        for term, tf in Counter(doc.tokens).items():
            postings.setdefault(term, []).append((doc.doc_id, tf))
    cf = {t: sum(tf for _, tf in p) for t, p in postings.items()}
    index = InvertedIndex(postings, doc_lengths, cf, sum(doc_lengths.values()), lang)
    if timing is not None:
        timing.add("pre_retrieval", time.perf_counter() - start)
    return index


def _check_mu(mu: float) -> None:
    if not mu > 0:
        raise ValueError(f"Dirichlet mu must be positive, got {mu}")


def _query_terms(index: InvertedIndex, query_tokens: Iterable[str]) -> list[tuple[str, int, float]]:
    """(term, qtf, mu-free collection prob) for in-collection terms, first-occurrence order."""
    qtf = Counter(query_tokens)
    return [(t, n, index.p_collection(t)) for t, n in qtf.items() if index.collection_freq.get(t, 0) > 0]


def _score(terms, tfs: Mapping[str, int], doc_len: int, mu: float) -> float:
    denom = doc_len + mu
    return math.fsum(n * math.log((tfs.get(t, 0) + mu * p) / denom) for t, n, p in terms)


def score_dirichlet(index: InvertedIndex, query_tokens: Iterable[str], doc_id: str, mu: float = DEFAULT_MU) -> float:
    """Log query likelihood of ``doc_id`` under Dirichlet smoothing.

    Query terms that never occur in the collection contribute nothing.
    """
    _check_mu(mu)
    if doc_id not in index.doc_lengths:
        raise KeyError(doc_id)
    terms = _query_terms(index, query_tokens)
    tfs = {t: tf for t, _, _ in terms for d, tf in index.postings[t] if d == doc_id}
    return _score(terms, tfs, index.doc_lengths[doc_id], mu)


def retrieve(
    index: InvertedIndex,
    query: Query | Sequence[str],
    mu: float = DEFAULT_MU,
    cutoff: int = DEFAULT_CUTOFF,
    query_id: int | None = None,
    timing: TimingReport | None = None,
) -> RankedList:
    """Rank every document matching at least one query term."""
    _check_mu(mu)
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    start = time.perf_counter()
    if isinstance(query, Query):
        tokens, qid = query.title_tokens, query.query_id
    else:
        tokens, qid = query, query_id if query_id is not None else 0
    terms = _query_terms(index, tokens)
    matched: dict[str, dict[str, int]] = {}
    for t, _, _ in terms:
        for d, tf in index.postings[t]:
            matched.setdefault(d, {})[t] = tf
    scored = [(d, _score(terms, tfs, index.doc_lengths[d], mu)) for d, tfs in matched.items()]
    scored.sort(key=lambda x: (-x[1], x[0]))
    ranked = RankedList(qid, tuple(scored[:cutoff]), cutoff)
    if timing is not None:
        timing.add("retrieval", time.perf_counter() - start)
    return ranked


# -- TREC run files ---------------------------------------------------------

def format_run(ranked: Iterable[RankedList], tag: str) -> str:
    lines = []
    for rl in sorted(ranked, key=lambda r: r.query_id):
        for rank, (doc_id, score) in enumerate(rl.items, 1):
            lines.append(f"{rl.query_id} Q0 {doc_id} {rank} {score:.6f} {tag}")
    return "".join(line + "\n" for line in lines)


def write_run(ranked: Iterable[RankedList], tag: str, path: str | Path) -> None:
    Path(path).write_text(format_run(ranked, tag), encoding="utf-8")


def parse_run(text: str) -> dict[int, list[tuple[str, float]]]:
    """Parse "qid Q0 docno rank score tag" lines; results ordered by rank."""
    rows: dict[int, list[tuple[int, str, float]]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 6:
            raise ValueError(f"run line {lineno}: expected 6 columns")
        qid, _, doc_id, rank, score, _ = parts
        rows.setdefault(int(qid), []).append((int(rank), doc_id, float(score)))
    return {q: [(d, s) for _, d, s in sorted(r)] for q, r in rows.items()}


def read_run(path: str | Path) -> dict[int, list[tuple[str, float]]]:
    return parse_run(Path(path).read_text(encoding="utf-8"))
