"""Multilingual shuffled documents built from paired (pseudo-)relevant sets.

Each fused document interleaves one document per language: the shortest
document sets the pace, and after each of its terms every other language
contributes its next ``ceil(len_k / len_min)`` terms.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import TestCollection
from .index import InvertedIndex, retrieve

log = logging.getLogger(__name__)

SEP = ":"
_TRAIN_STREAM = 0
_TEST_STREAM = 1


def tag(lang: str, term: str) -> str:
    return f"{lang}{SEP}{term}"


def untag(token: str) -> tuple[str, str]:
    lang, _, term = token.partition(SEP)
    return lang, term


class SkipQuery(Exception):
    """A query cannot be fused (e.g. an empty relevant set in some language)."""


@dataclass(frozen=True)
class FusedDocument:
    query_id: int
    tokens: tuple[str, ...]
    source_doc_ids: dict[str, str] = field(hash=False)

    def line(self) -> str:
        return " ".join(self.tokens)


@dataclass
class FusedCorpus:
    training: list[FusedDocument] = field(default_factory=list)
    test: list[FusedDocument] = field(default_factory=list)

    @property
    def final(self) -> list[FusedDocument]:
        return self.training + self.test

    def save(self, path: str | Path) -> None:
        """Write one document per line plus a ``.meta.jsonl`` sidecar."""
        path = Path(path)
        docs = [("train", d) for d in self.training] + [("test", d) for d in self.test]
        path.write_text("".join(d.line() + "\n" for _, d in docs), encoding="utf-8")
        meta = path.with_suffix(".meta.jsonl")
        meta.write_text(
            "".join(
                json.dumps({"split": s, "query_id": d.query_id, "sources": d.source_doc_ids}, sort_keys=True) + "\n"
                for s, d in docs
            ),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "FusedCorpus":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        meta_path = path.with_suffix(".meta.jsonl")
        metas = (
            [json.loads(m) for m in meta_path.read_text(encoding="utf-8").splitlines()]
            if meta_path.exists()
            else [{"split": "train", "query_id": 0, "sources": {}}] * len(lines)
        )
        corpus = cls()
        for line, m in zip(lines, metas):
            doc = FusedDocument(m["query_id"], tuple(line.split()), m["sources"])
            (corpus.training if m["split"] == "train" else corpus.test).append(doc)
        return corpus


def interleave(docs: Mapping[str, Sequence[str]]) -> list[str]:
    """Interleave per-language token sequences into one tagged sequence.

    ``docs`` maps language -> tokens; its iteration order is the fixed
    language order used for grouping and for breaking length ties.
    """
    if len(docs) < 2:
        raise ValueError("interleave needs at least two languages")
    for lang, toks in docs.items():
        if not toks:
            raise ValueError(f"empty document for language {lang!r}")
    langs = list(docs)
    k_min = min(langs, key=lambda k: len(docs[k]))
    t_min = len(docs[k_min])
    others = [k for k in langs if k != k_min]
    n_norm = {k: math.ceil(len(docs[k]) / t_min) for k in others}
    pos = dict.fromkeys(others, 0)
    out: list[str] = []
    for term in docs[k_min]:
        out.append(tag(k_min, term))
        for k in others:
            chunk = docs[k][pos[k] : pos[k] + n_norm[k]]
            out.extend(tag(k, t) for t in chunk)
            pos[k] += len(chunk)
    return out


def select_min_language(relevant_sets: Mapping[str, Iterable[str]]) -> str:
    """Language with the smallest set; ties go to the earliest language."""
    sizes = {k: len(set(v)) for k, v in relevant_sets.items()}
    empty = [k for k, n in sizes.items() if n == 0]
    if empty:
        raise SkipQuery(f"empty relevant set for {', '.join(empty)}")
    return min(sizes, key=lambda k: sizes[k])


def query_rng(seed: int, stream: int, query_id: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, query_id])


def fuse_query(
    query_id: int,
    doc_sets: Mapping[str, Iterable[str]],
    collections: Mapping[str, TestCollection],
    rng: np.random.Generator,
) -> list[FusedDocument]:
    """Pair every document of the smallest set with random partners and interleave.

    Partners are drawn without replacement from each other language's pool.
    """
    langs = list(doc_sets)
    pools = {
        k: sorted(d for d in set(doc_sets[k]) if collections[k].documents[d].tokens)
        for k in langs
    }
    k_i = select_min_language(pools)
    shuffled = {k: [pools[k][j] for j in rng.permutation(len(pools[k]))] for k in langs if k != k_i}
    fused = []
    for n, d_i in enumerate(pools[k_i]):
        exhausted = [k for k in shuffled if n >= len(shuffled[k])]
        if exhausted:
            log.warning("query %s: partner pool exhausted for %s; abandoning remaining draws", query_id, exhausted)
            break
        chosen = {k: (d_i if k == k_i else shuffled[k][n]) for k in langs}
        tokens = interleave({k: collections[k].documents[chosen[k]].tokens for k in langs})
        fused.append(FusedDocument(query_id, tuple(tokens), chosen))
    return fused


def build_training_fusion(
    collections: Mapping[str, TestCollection],
    training_query_ids: Iterable[int],
    rng_seed: int,
) -> list[FusedDocument]:
    out: list[FusedDocument] = []
    for qid in sorted(training_query_ids):
        missing = [k for k, c in collections.items() if qid not in c.queries]
        if missing:
            raise ValueError(f"training query {qid} missing in {missing}")
        sets = {k: c.relevant_set(qid) for k, c in collections.items()}
        try:
            out.extend(fuse_query(qid, sets, collections, query_rng(rng_seed, _TRAIN_STREAM, qid)))
        except SkipQuery as exc:
            log.warning("skipping training query %s: %s", qid, exc)
    return out


def build_test_fusion(
    collections: Mapping[str, TestCollection],
    indexes: Mapping[str, InvertedIndex],
    test_query_ids: Iterable[int],
    kappa: int,
    mu: float,
    rng_seed: int,
) -> list[FusedDocument]:
    """Fuse the top-``kappa`` monolingual results of each test query."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    out: list[FusedDocument] = []
    for qid in sorted(test_query_ids):
        sets = {
            k: retrieve(indexes[k], c.queries[qid], mu, kappa).doc_ids
            for k, c in collections.items()
        }
        try:
            out.extend(fuse_query(qid, sets, collections, query_rng(rng_seed, _TEST_STREAM, qid)))
        except SkipQuery as exc:
            log.warning("skipping test query %s: %s", qid, exc)
    return out
