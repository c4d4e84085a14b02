"""TREC-style test collections: documents, topics, qrels, tokenization."""

from __future__ import annotations

import io
import logging
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Mapping

import regex

log = logging.getLogger(__name__)

# Punctuation and symbol runs act as token boundaries, like whitespace.
_SPLIT = regex.compile(r"[\p{P}\p{S}\s]+")

_DOC = re.compile(rb"<DOC>(.*?)</DOC>", re.S | re.I)
_DOCNO = re.compile(rb"<DOCNO>\s*(.*?)\s*</DOCNO>", re.S | re.I)
_TEXT = re.compile(rb"<TEXT>(.*?)</TEXT>", re.S | re.I)
_TOP = re.compile(r"<top\b[^>]*>(.*?)</top>", re.S | re.I)
_NUM = re.compile(r"<num>\s*(?:Number:)?\s*([^<\s]*)", re.I)
_TITLE = re.compile(r"<title>(.*?)(?:</title>|(?=<)|\Z)", re.S | re.I)


class ParseError(ValueError):
    """Malformed TREC input."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    lang: str
    tokens: tuple[str, ...]

    @property
    def raw_length(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Query:
    query_id: int
    lang: str
    title_tokens: tuple[str, ...]


@dataclass
class Qrels:
    """Binary relevance judgments keyed by (query_id, doc_id)."""

    entries: dict[tuple[int, str], int] = field(default_factory=dict)

    def by_query(self) -> dict[int, dict[str, int]]:
        out: dict[int, dict[str, int]] = {}
        for (q, d), rel in self.entries.items():
            out.setdefault(q, {})[d] = rel
        return out

    def judged(self, query_id: int) -> dict[str, int]:
        return {d: rel for (q, d), rel in self.entries.items() if q == query_id}

    def relevant(self, query_id: int) -> set[str]:
        return {d for d, rel in self.judged(query_id).items() if rel}

    def query_ids(self) -> list[int]:
        return sorted({q for q, _ in self.entries})


class TestCollection:
    """One language's documents, queries and judgments. Treated as immutable."""

    __test__ = False  # not a pytest class

    def __init__(
        self,
        lang: str,
        documents: Iterable[Document],
        queries: Iterable[Query],
        qrels: Qrels,
    ):
        self.lang = lang
        self.documents: dict[str, Document] = {}
        for doc in documents:
            if doc.doc_id in self.documents:
                raise ParseError(f"duplicate DOCNO {doc.doc_id!r}")
            self.documents[doc.doc_id] = doc
        self.queries: dict[int, Query] = {q.query_id: q for q in queries}
        self.qrels = qrels
        self._judged = qrels.by_query()
        vocab: Counter[str] = Counter()
        for doc in self.documents.values():
            vocab.update(doc.tokens)
        self.vocabulary = vocab

    def judged(self, query_id: int) -> dict[str, int]:
        return self._judged.get(query_id, {})

    def relevant_set(self, query_id: int) -> set[str]:
        return {d for d, rel in self.judged(query_id).items() if rel and d in self.documents}

    @property
    def total_tokens(self) -> int:
        return sum(d.raw_length for d in self.documents.values())

    def __repr__(self) -> str:
        return (
            f"TestCollection({self.lang!r}, docs={len(self.documents)}, "
            f"queries={len(self.queries)}, judgments={len(self.qrels.entries)})"
        )


def normalize(text: str) -> str:
    return unicodedata.normalize("NFC", text).lower()


def tokenize(text: str, lang: str = "", stopwords: Iterable[str] = ()) -> list[str]:
    """Split on whitespace/punctuation, NFC-normalize, lowercase, drop stopwords.

    ``lang`` is accepted for interface symmetry; normalization does not vary
    by language (``str.lower`` is a no-op for caseless scripts).
    """
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    return [t for t in _SPLIT.split(normalize(text)) if t and t not in stop]


def load_stopwords(path: str | Path | None) -> frozenset[str]:
    if path is None:
        return frozenset()
    with open(path, encoding="utf-8") as fh:
        return frozenset(normalize(line.strip()) for line in fh if line.strip())


def _read(stream: BinaryIO | bytes) -> bytes:
    return stream if isinstance(stream, bytes) else stream.read()


def parse_trec_documents(
    stream: BinaryIO | bytes, lang: str, stopwords: Iterable[str] = ()
) -> list[Document]:
    data = _read(stream)
    stop = frozenset(stopwords)
    docs: list[Document] = []
    seen: set[str] = set()
    for m in _DOC.finditer(data):
        body = m.group(1)
        no = _DOCNO.search(body)
        if no is None or not no.group(1).strip():
            raise ParseError(f"DOC record at byte offset {m.start()} has no DOCNO")
        doc_id = no.group(1).decode("utf-8").strip()
        if doc_id in seen:
            raise ParseError(f"duplicate DOCNO {doc_id!r} at byte offset {m.start()}")
        seen.add(doc_id)
        text = " ".join(t.decode("utf-8") for t in _TEXT.findall(body))
        docs.append(Document(doc_id, lang, tuple(tokenize(text, lang, stop))))
    return docs


def parse_topics(
    stream: BinaryIO | bytes, lang: str, stopwords: Iterable[str] = ()
) -> list[Query]:
    """Parse TREC/FIRE topics; only the title field is kept."""
    text = _read(stream).decode("utf-8")
    stop = frozenset(stopwords)
    queries = []
    for m in _TOP.finditer(text):
        block = m.group(1)
        num = _NUM.search(block)
        title = _TITLE.search(block)
        if num is None or not num.group(1):
            raise ParseError(f"topic block missing <num>: {block[:60]!r}")
        if title is None:
            raise ParseError(f"topic {num.group(1)} missing <title>")
        digits = re.sub(r"\D", "", num.group(1))
        if not digits:
            raise ParseError(f"topic number {num.group(1)!r} is not numeric")
        tokens = tokenize(title.group(1), lang, stop)
        if not tokens:
            log.warning("topic %s (%s) has an empty title after stopping", digits, lang)
        queries.append(Query(int(digits), lang, tuple(tokens)))
    return queries


def parse_qrels(stream: BinaryIO | bytes) -> Qrels:
    qrels = Qrels()
    for lineno, line in enumerate(_read(stream).decode("utf-8").splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise ParseError(f"qrels line {lineno}: expected 4 columns, got {len(parts)}")
        qid, _, doc_id, rel = parts
        try:
            qrels.entries[(int(qid), doc_id)] = 1 if int(rel) > 0 else 0
        except ValueError:
            raise ParseError(f"qrels line {lineno}: non-integer qid or relevance") from None
    return qrels


def write_trec_documents(docs: Iterable[Document], out: io.TextIOBase) -> None:
    for doc in docs:
        out.write(f"<DOC>\n<DOCNO>{doc.doc_id}</DOCNO>\n<TEXT>{' '.join(doc.tokens)}</TEXT>\n</DOC>\n")


def write_topics(queries: Iterable[tuple[int, Iterable[str]]], out: io.TextIOBase) -> None:
    for qid, terms in queries:
        out.write(f"<top>\n<num>{qid}</num>\n<title>{' '.join(terms)}</title>\n</top>\n")


def write_qrels(qrels: Qrels, out: io.TextIOBase) -> None:
    for (qid, doc_id), rel in sorted(qrels.entries.items()):
        out.write(f"{qid} 0 {doc_id} {rel}\n")


def load_collection(
    lang: str,
    docs: str | Path,
    topics: str | Path,
    qrels: str | Path,
    stopwords: str | Path | None = None,
) -> TestCollection:
    stop = load_stopwords(stopwords)
    with open(docs, "rb") as fh:
        documents = parse_trec_documents(fh, lang, stop)
    with open(topics, "rb") as fh:
        queries = parse_topics(fh, lang, stop)
    with open(qrels, "rb") as fh:
        judgments = parse_qrels(fh)
    return TestCollection(lang, documents, queries, judgments)


def aligned_query_ids(collections: Mapping[str, TestCollection]) -> list[int]:
    """Query ids present in every language.

    Raises if an id is held by more than one but fewer than all languages.
    """
    holders: dict[int, int] = Counter()
    for coll in collections.values():
        holders.update(coll.queries.keys())
    n = len(collections)
    partial = sorted(q for q, k in holders.items() if 1 < k < n)
    if partial:
        raise ValueError(f"queries only partially aligned across languages: {partial}")
    return sorted(q for q, k in holders.items() if k == n)


def collection_to_json(coll: TestCollection) -> dict:
    return {
        "lang": coll.lang,
        "documents": [[d.doc_id, list(d.tokens)] for d in coll.documents.values()],
        "queries": [[q.query_id, list(q.title_tokens)] for q in coll.queries.values()],
        "qrels": [[q, d, rel] for (q, d), rel in sorted(coll.qrels.entries.items())],
    }


def collection_from_json(data: Mapping) -> TestCollection:
    lang = data["lang"]
    return TestCollection(
        lang,
        (Document(i, lang, tuple(toks)) for i, toks in data["documents"]),
        (Query(int(q), lang, tuple(toks)) for q, toks in data["queries"]),
        Qrels({(int(q), d): int(rel) for q, d, rel in data["qrels"]}),
    )
