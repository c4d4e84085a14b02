"""Skip-gram with negative sampling, trained from scratch on fused documents.

The training loop is a single-threaded numba kernel so that a fixed seed gives
bit-identical vectors. ``sgns_loss`` / ``sgns_gradients`` are a plain numpy
statement of the same objective, used for gradient checking.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numba
import numpy as np

from .fusion import SEP, untag

log = logging.getLogger(__name__)

MODEL_MAGIC = "#xlir-sgns"
NEG_TABLE_SIZE = 1_000_000
MIN_ALPHA = 1e-4


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 100
    learning_rate: float = 0.01
    min_count: int = 1
    window: int = 25
    negatives: int = 5
    epochs: int = 5
    seed: int = 1

    def __post_init__(self):
        for name in ("dim", "min_count", "window", "negatives", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError("vectors differ in length")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


class EmbeddingModel:
    """Tagged-token vocabulary with dense vectors and per-language kNN."""

    def __init__(self, vocab: Sequence[str], vectors: np.ndarray, config: TrainConfig | None = None):
        vectors = np.asarray(vectors, dtype=np.float32)
        if vectors.shape[0] != len(vocab):
            raise ValueError("one vector per vocabulary entry required")
        self.vocab = list(vocab)
        self.index = {t: i for i, t in enumerate(self.vocab)}
        self.vectors = vectors
        self.config = config
        self._by_lang: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __len__(self) -> int:
        return len(self.vocab)

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[self.index[token]]

    def languages(self) -> list[str]:
        return sorted({untag(t)[0] for t in self.vocab})

    def _language_block(self, lang: str) -> tuple[np.ndarray, np.ndarray]:
        block = self._by_lang.get(lang)
        if block is None:
            prefix = lang + SEP
            rows = np.array(sorted((i for i, t in enumerate(self.vocab) if t.startswith(prefix)),
                                   key=lambda i: self.vocab[i]), dtype=np.int64)
            mat = self.vectors[rows].astype(np.float64)
            norms = np.linalg.norm(mat, axis=1, keepdims=True)
            mat = np.divide(mat, norms, out=np.zeros_like(mat), where=norms > 0)
            block = (rows, mat)
            self._by_lang[lang] = block
        return block

    def nearest_in_language(self, query_vec: np.ndarray, target: str, tau: int) -> list[tuple[str, float]]:
        """Top-``tau`` target-language tokens by cosine, ties broken by term."""
        if tau < 1:
            raise ValueError("tau must be >= 1")
        rows, mat = self._language_block(target)
        if rows.size == 0:
            raise KeyError(f"no vocabulary entries for language {target!r}")
        q = np.asarray(query_vec, dtype=np.float64)
        norm = np.linalg.norm(q)
        if norm == 0:
            raise ValueError("query vector is zero")
        sims = np.clip(mat @ (q / norm), -1.0, 1.0)
        order = np.argsort(-sims, kind="stable")[:tau]
        return [(self.vocab[rows[i]], float(sims[i])) for i in order]

    # -- persistence --------------------------------------------------------

    def _rows(self) -> Iterable[str]:
        for token, vec in zip(self.vocab, self.vectors):
            yield token + " " + " ".join(f"{x:.9g}" for x in vec.tolist()) + "\n"

    def save(self, path: str | Path) -> None:
        header = {"dim": self.dim, "vocab_size": len(self.vocab),
                  "config": asdict(self.config) if self.config else None}
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{MODEL_MAGIC} {json.dumps(header, sort_keys=True)}\n")
            fh.writelines(self._rows())

    def save_word2vec_text(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.vocab)} {self.dim}\n")
            fh.writelines(self._rows())

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingModel":
        """Read either the native format or word2vec text format."""
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
            config = None
            if first.startswith(MODEL_MAGIC):
                header = json.loads(first[len(MODEL_MAGIC):])
                dim = header["dim"]
                if header.get("config"):
                    config = TrainConfig(**header["config"])
            else:
                _, dim = map(int, first.split())
            vocab, rows = [], []
            for line in fh:
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise ValueError(f"bad vector record for {parts[0]!r}")
                vocab.append(parts[0])
                rows.append([float(x) for x in parts[1:]])
        return cls(vocab, np.array(rows, dtype=np.float32).reshape(len(vocab), dim), config)


# -- objective (numpy reference) -------------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def sgns_loss(syn0: np.ndarray, syn1: np.ndarray, batch: Sequence[tuple[int, int, Sequence[int]]]) -> float:
    """Negative-sampling loss summed over (center, context, negatives) triples."""
    total = 0.0
    for c, o, negs in batch:
        v = syn0[c]
        total -= np.log(_sigmoid(syn1[o] @ v))
        for k in negs:
            total -= np.log(_sigmoid(-(syn1[k] @ v)))
    return float(total)


def sgns_gradients(syn0, syn1, batch):
    """Analytic gradients of ``sgns_loss`` w.r.t. both matrices."""
    g0 = np.zeros_like(syn0, dtype=np.float64)
    g1 = np.zeros_like(syn1, dtype=np.float64)
    for c, o, negs in batch:
        v = syn0[c]
        for k, label in [(o, 1.0)] + [(k, 0.0) for k in negs]:
            coef = _sigmoid(syn1[k] @ v) - label
            g0[c] += coef * syn1[k]
            g1[k] += coef * v
    return g0, g1


# -- training kernel --------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _sgd_pair(syn0, syn1, center, targets, labels, alpha, neu1e):
    """One SGD step on a single center word against positive/negative targets."""
    dim = syn0.shape[1]
    for j in range(dim):
        neu1e[j] = 0.0
    for n in range(targets.shape[0]):
        t = targets[n]
        f = 0.0
        for j in range(dim):
            f += np.float64(syn0[center, j]) * np.float64(syn1[t, j])
        g = (labels[n] - 1.0 / (1.0 + np.exp(-f))) * alpha
        for j in range(dim):
            neu1e[j] += g * syn1[t, j]
            syn1[t, j] += g * syn0[center, j]
    for j in range(dim):
        syn0[center, j] += neu1e[j]


@numba.njit(cache=True, nogil=True)
def _train_epoch(syn0, syn1, ids, starts, table, window, negatives,
                 alpha0, min_alpha, total_words, words_done, state):
    dim = syn0.shape[1]
    neu1e = np.zeros(dim, dtype=np.float64)
    targets = np.zeros(negatives + 1, dtype=np.int64)
    labels = np.zeros(negatives + 1, dtype=np.float64)
    labels[0] = 1.0
    mult = np.uint64(25214903917)
    inc = np.uint64(11)
    tsize = np.uint64(table.shape[0])
    for d in range(starts.shape[0] - 1):
        lo, hi = starts[d], starts[d + 1]
        for i in range(lo, hi):
            alpha = alpha0 - (alpha0 - min_alpha) * words_done / total_words
            if alpha < min_alpha:
                alpha = min_alpha
            words_done += 1
            center = ids[i]
            state = state * mult + inc
            b = np.int64(state % np.uint64(window))
            span = window - b
            for j in range(max(lo, i - span), min(hi, i + span + 1)):
                if j == i:
                    continue
                context = ids[j]
                targets[0] = context
                m = 1
                for _ in range(negatives):
                    state = state * mult + inc
                    neg = table[np.int64((state >> np.uint64(16)) % tsize)]
                    if neg == context:
                        continue
                    targets[m] = neg
                    labels[m] = 0.0
                    m += 1
                _sgd_pair(syn0, syn1, center, targets[:m], labels[:m], alpha, neu1e)
    return words_done, state


def build_vocab(docs: Iterable[Sequence[str]], min_count: int = 1) -> tuple[list[str], np.ndarray]:
    counts = Counter()
    for doc in docs:
        counts.update(doc)
    kept = sorted((t for t, n in counts.items() if n >= min_count), key=lambda t: (-counts[t], t))
    return kept, np.array([counts[t] for t in kept], dtype=np.int64)


def negative_table(counts: np.ndarray, power: float = 0.75, size: int = NEG_TABLE_SIZE) -> np.ndarray:
    """Lookup table sampling word ids proportionally to count**power."""
    weights = counts.astype(np.float64) ** power
    cdf = np.cumsum(weights) / weights.sum()
    table = np.searchsorted(cdf, (np.arange(size) + 0.5) / size, side="right")
    return np.minimum(table, len(counts) - 1).astype(np.int64)


def train(corpus: Iterable, cfg: TrainConfig = TrainConfig()) -> EmbeddingModel:
    """Train SGNS vectors. ``corpus`` holds token sequences or FusedDocuments."""
    docs = [tuple(getattr(d, "tokens", d)) for d in corpus]
    if not docs:
        raise ValueError("empty training corpus")
    vocab, counts = build_vocab(docs, cfg.min_count)
    if not vocab:
        raise ValueError("vocabulary empty after min_count filtering")
    index = {t: i for i, t in enumerate(vocab)}
    encoded = [[index[t] for t in d if t in index] for d in docs]
    ids = np.fromiter((i for d in encoded for i in d), dtype=np.int64)
    starts = np.cumsum([0] + [len(d) for d in encoded]).astype(np.int64)

    rng = np.random.default_rng(cfg.seed)
    syn0 = ((rng.random((len(vocab), cfg.dim)) - 0.5) / cfg.dim).astype(np.float32)
    syn1 = np.zeros((len(vocab), cfg.dim), dtype=np.float32)
    table = negative_table(counts)

    total = max(1, ids.size * cfg.epochs)
    done = 0
    state = np.uint64(cfg.seed)
    for epoch in range(cfg.epochs):
        done, state = _train_epoch(syn0, syn1, ids, starts, table, cfg.window, cfg.negatives,
                                   cfg.learning_rate, min(MIN_ALPHA, cfg.learning_rate),
                                   total, done, state)
        state = np.uint64(state)
        log.debug("epoch %d done (%d/%d words)", epoch + 1, done, total)
    if not np.all(np.isfinite(syn0)):
        raise FloatingPointError("training diverged")
    return EmbeddingModel(vocab, syn0, cfg)
