"""Synthetic topically aligned multilingual test collections.

Every topic owns a disjoint vocabulary in each language, and word ``i`` of a
topic in one language is the planted translation of word ``i`` of the same
topic in every other language. Documents draw mostly from their topic's
vocabulary (Zipf-weighted, same weights across languages), from a vocabulary
shared by a small group of related topics, from background noise, and from
other topics (leakage). Queries are the topic's head words;
qrels mark a document relevant iff it was generated from that topic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..corpus import Document, Qrels, Query, TestCollection, tokenize, write_qrels, write_topics

DEFAULT_CODES = ("en", "hi", "bn", "ta", "te", "mr")


@dataclass(frozen=True)
class SyntheticSpec:
    languages: int = 2
    topics: int = 20
    vocab_per_topic: int = 30
    docs_per_topic_per_lang: int = 50
    doc_length_mean: int = 60
    doc_length_spread: int = 20
    # per-language multiplier on document length, cycled
    length_scales: tuple[float, ...] = (1.0, 1.5, 0.8)
    group_size: int = 4
    group_vocab: int = 20
    group_rate: float = 0.2
    background_vocab: int = 300
    background_rate: float = 0.3
    leak_rate: float = 0.1
    zipf: float = 1.0
    query_terms: int = 3
    stopwords: int = 8
    stopword_rate: float = 0.08
    judged_nonrelevant: int = 30
    codes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.languages < 1 or self.topics < 1 or self.docs_per_topic_per_lang < 1:
            raise ValueError("languages, topics and docs_per_topic_per_lang must be >= 1")
        if not 1 <= self.query_terms <= self.vocab_per_topic:
            raise ValueError("query_terms must be in [1, vocab_per_topic]")
        if self.doc_length_mean - self.doc_length_spread < 1:
            raise ValueError("document length range must stay positive")
        if self.group_size < 1 or self.group_vocab < 1:
            raise ValueError("group_size and group_vocab must be >= 1")
        if not 0 <= self.group_rate + self.background_rate + self.leak_rate < 1:
            raise ValueError("group, background and leak rates must sum to less than 1")
        if self.codes and len(self.codes) != self.languages:
            raise ValueError("codes must name every language")

    @property
    def lang_codes(self) -> list[str]:
        if self.codes:
            return list(self.codes)
        if self.languages <= len(DEFAULT_CODES):
            return list(DEFAULT_CODES[: self.languages])
        return [f"l{i}" for i in range(self.languages)]


def topic_word(lang: str, topic: int, i: int) -> str:
    return f"{lang}t{topic}w{i}"


def group_word(lang: str, group: int, i: int) -> str:
    return f"{lang}g{group}w{i}"


def background_word(lang: str, i: int) -> str:
    return f"{lang}bg{i}"


def stopword(lang: str, i: int) -> str:
    return f"{lang}stop{i}"


@dataclass
class SyntheticData:
    spec: SyntheticSpec
    collections: dict[str, TestCollection]
    raw_text: dict[str, dict[str, str]]  # lang -> doc_id -> text incl. stopwords
    stopwords: dict[str, list[str]]
    emitted_tokens: dict[str, int]  # content tokens (stopwords excluded)
    translations: list[tuple[str, ...]] = field(default_factory=list)

    def translation_pairs(self, a: str, b: str) -> list[tuple[str, str]]:
        """Planted translation pairs (topic and group words) between ``a`` and ``b``."""
        codes = self.spec.lang_codes
        ia, ib = codes.index(a), codes.index(b)
        return [(row[ia], row[ib]) for row in self.translations]

    def write(self, out_dir: str | Path) -> dict[str, dict[str, str]]:
        """Write TREC files per language; returns the path layout for configs."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        layout = {}
        for lang, coll in self.collections.items():
            paths = {kind: str(out_dir / f"{lang}.{kind}") for kind in ("docs", "topics", "qrels", "stopwords")}
            with open(paths["docs"], "w", encoding="utf-8") as fh:
                for doc_id, text in self.raw_text[lang].items():
                    fh.write(f"<DOC>\n<DOCNO>{doc_id}</DOCNO>\n<TEXT>\n{text}\n</TEXT>\n</DOC>\n")
            with open(paths["topics"], "w", encoding="utf-8") as fh:
                # the leading stopword is dropped again on parsing
                write_topics(((q.query_id, (self.stopwords[lang][0], *q.title_tokens))
                              for q in coll.queries.values()), fh)
            with open(paths["qrels"], "w", encoding="utf-8") as fh:
                write_qrels(coll.qrels, fh)
            Path(paths["stopwords"]).write_text("\n".join(self.stopwords[lang]) + "\n", encoding="utf-8")
            layout[lang] = {k: Path(v).name for k, v in paths.items()}
        return layout


def generate_synthetic(spec: SyntheticSpec, seed: int = 0) -> SyntheticData:
    rng = np.random.default_rng(seed)
    codes = spec.lang_codes
    weights = 1.0 / np.arange(1, spec.vocab_per_topic + 1) ** spec.zipf
    weights /= weights.sum()
    mix = [1.0 - spec.group_rate - spec.background_rate - spec.leak_rate,
           spec.group_rate, spec.background_rate, spec.leak_rate]
    n_groups = -(-spec.topics // spec.group_size)

    collections, raw_text, stops, emitted = {}, {}, {}, {}
    for li, lang in enumerate(codes):
        scale = spec.length_scales[li % len(spec.length_scales)] if spec.length_scales else 1.0
        stops[lang] = [stopword(lang, i) for i in range(spec.stopwords)]
        drafts: list[tuple[int, list[str]]] = []
        for topic in range(spec.topics):
            for _ in range(spec.docs_per_topic_per_lang):
                length = int(round(scale * rng.integers(spec.doc_length_mean - spec.doc_length_spread,
                                                        spec.doc_length_mean + spec.doc_length_spread + 1)))
                length = max(1, length)
                kinds = rng.choice(4, size=length, p=mix)
                word_idx = rng.choice(spec.vocab_per_topic, size=length, p=weights)
                group_idx = rng.integers(spec.group_vocab, size=length)
                bg_idx = rng.integers(spec.background_vocab, size=length)
                leak_topic = rng.integers(spec.topics, size=length)
                group = topic // spec.group_size
                words = [
                    topic_word(lang, topic, w) if kind == 0
                    else group_word(lang, group, g) if kind == 1
                    else background_word(lang, b) if kind == 2
                    else topic_word(lang, lt, w)
                    for kind, w, g, b, lt in zip(kinds.tolist(), word_idx.tolist(), group_idx.tolist(),
                                                 bg_idx.tolist(), leak_topic.tolist())
                ]
                drafts.append((topic, words))
        order = rng.permutation(len(drafts))
        docs, texts, qrels = [], {}, Qrels()
        count = 0
        for n, k in enumerate(order):
            topic, words = drafts[k]
            doc_id = f"{lang.upper()}-{n:06d}"
            text = list(words)
            if stops[lang]:
                for pos in sorted(np.flatnonzero(rng.random(len(words)) < spec.stopword_rate), reverse=True):
                    text.insert(pos, stops[lang][rng.integers(len(stops[lang]))])
            texts[doc_id] = " ".join(text)
            docs.append(Document(doc_id, lang, tuple(tokenize(texts[doc_id], lang, set(stops[lang])))))
            count += len(words)
            qrels.entries[(topic + 1, doc_id)] = 1
        topic_of = {doc_id: q - 1 for (q, doc_id) in qrels.entries}
        for topic in range(spec.topics):
            others = [d for d, t in topic_of.items() if t != topic]
            take = min(spec.judged_nonrelevant, len(others))
            for j in rng.choice(len(others), size=take, replace=False):
                qrels.entries[(topic + 1, others[j])] = 0
        queries = [Query(t + 1, lang, tuple(topic_word(lang, t, i) for i in range(spec.query_terms)))
                   for t in range(spec.topics)]
        collections[lang] = TestCollection(lang, docs, queries, qrels)
        raw_text[lang] = texts
        emitted[lang] = count
    translations = [tuple(topic_word(lang, t, i) for lang in codes)
                    for t in range(spec.topics) for i in range(spec.vocab_per_topic)]
    translations += [tuple(group_word(lang, g, i) for lang in codes)
                     for g in range(n_groups) for i in range(spec.group_vocab)]
    return SyntheticData(spec, collections, raw_text, stops, emitted, translations)
