"""Target-language query generation through the shared embedding space."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .corpus import Query, TestCollection, write_topics
from .embedding import EmbeddingModel
from .fusion import tag, untag
from .index import DEFAULT_CUTOFF, DEFAULT_MU, InvertedIndex, RankedList, TimingReport, retrieve

PER_TERM = "per-term"
CENTROID = "centroid"
MODES = (PER_TERM, CENTROID)


@dataclass(frozen=True)
class Provenance:
    source_term: str
    target_term: str | None
    similarity: float | None


@dataclass(frozen=True)
class GeneratedQuery:
    query_id: int
    source_lang: str
    target_lang: str
    terms: tuple[str, ...]
    provenance: tuple[Provenance, ...] = field(default=())

    @property
    def failed(self) -> bool:
        return not self.terms

    def as_query(self) -> Query:
        return Query(self.query_id, self.target_lang, self.terms)


def generate_query(
    model: EmbeddingModel,
    source_query: Query,
    target: str,
    tau: int,
    mode: str = PER_TERM,
) -> GeneratedQuery:
    """Translate a query into ``target`` by nearest neighbours.

    In ``per-term`` mode each in-vocabulary source term contributes its
    ``tau`` closest target terms; duplicates are kept and act as query term
    weights. ``centroid`` mode sums the source vectors and fetches ``tau``
    neighbours once. Source terms missing from the model are recorded in the
    provenance with no target.
    """
    src = source_query.lang
    if target == src:
        raise ValueError("target language must differ from the source language")
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if mode not in MODES:
        raise ValueError(f"unknown generation mode {mode!r}")
    known = [t for t in source_query.title_tokens if tag(src, t) in model]
    prov = [Provenance(t, None, None) for t in source_query.title_tokens if tag(src, t) not in model]
    terms: list[str] = []
    if mode == PER_TERM:
        for t in known:
            for token, sim in model.nearest_in_language(model[tag(src, t)], target, tau):
                term = untag(token)[1]
                terms.append(term)
                prov.append(Provenance(t, term, sim))
    elif known:
        centroid = np.sum([model[tag(src, t)].astype(np.float64) for t in known], axis=0)
        for token, sim in model.nearest_in_language(centroid, target, tau):
            term = untag(token)[1]
            terms.append(term)
            prov.append(Provenance("+".join(known), term, sim))
    return GeneratedQuery(source_query.query_id, src, target, tuple(terms), tuple(prov))


def run_tag(source: str, target: str) -> str:
    return f"{source}->{target}"


def crosslingual_run(
    source: TestCollection,
    target_index: InvertedIndex,
    model: EmbeddingModel | None,
    target: str,
    query_ids: Iterable[int],
    tau: int,
    mu: float = DEFAULT_MU,
    cutoff: int = DEFAULT_CUTOFF,
    mode: str = PER_TERM,
    gen_timing: TimingReport | None = None,
    timing: TimingReport | None = None,
) -> tuple[list[RankedList], list[GeneratedQuery]]:
    """Generate queries from ``source`` and run them on the target index.

    With ``target == source.lang`` the original queries are used unchanged
    (the monolingual reference). Failed generations yield empty result lists.
    Generation time is charged to ``gen_timing`` as pre-retrieval, ranking to
    ``timing`` as retrieval.
    """
    runs: list[RankedList] = []
    generated: list[GeneratedQuery] = []
    for qid in sorted(query_ids):
        q = source.queries[qid]
        if target == source.lang:
            tq = q
        else:
            if model is None:
                raise ValueError("cross-lingual run needs an embedding model")
            if gen_timing is not None:
                with gen_timing.measure("pre_retrieval"):
                    g = generate_query(model, q, target, tau, mode)
            else:
                g = generate_query(model, q, target, tau, mode)
            generated.append(g)
            tq = g.as_query()
        runs.append(retrieve(target_index, tq, mu, cutoff, timing=timing))
    return runs, generated


def write_generated_topics(queries: Iterable[GeneratedQuery], out) -> None:
    write_topics(((g.query_id, g.terms) for g in queries), out)


def provenance_json(queries: Iterable[GeneratedQuery]) -> list[dict]:
    return [
        {
            "query_id": g.query_id,
            "source": g.source_lang,
            "target": g.target_lang,
            "failed": g.failed,
            "terms": list(g.terms),
            "provenance": [[p.source_term, p.target_term, p.similarity] for p in g.provenance],
        }
        for g in queries
    ]
