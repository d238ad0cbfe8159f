"""Pairwise diversity features and the relational aggregation over a selected set."""

from __future__ import annotations

import math
from collections import Counter
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse

from .corpus import CorpusStats, Document
from .plsa import PlsaModel, doc_topic_posterior

DIVERSITY_FEATURES = ("cosine", "jaccard", "subtopic_kl")
AGGREGATES = {"min": np.min, "avg": np.mean, "max": np.max}


def idf(stats: CorpusStats, term: str) -> float:
    return math.log((stats.doc_count + 1) / (stats.doc_frequency.get(term, 0) + 1))


def tfidf_vector(doc: Document, stats: CorpusStats) -> dict[str, float]:
    return {t: c * idf(stats, t) for t, c in Counter(doc.tokens).items()}


def cosine_diversity(doc_i: Document, doc_j: Document, stats: CorpusStats) -> float:
    si, sj = tfidf_vector(doc_i, stats), tfidf_vector(doc_j, stats)
    ni = math.sqrt(sum(v * v for v in si.values()))
    nj = math.sqrt(sum(v * v for v in sj.values()))
    if ni == 0 or nj == 0:
        return 1.0
    dot = sum(v * sj[t] for t, v in si.items() if t in sj)
    return min(1.0, max(0.0, 1.0 - dot / (ni * nj)))


def jaccard_diversity(doc_i: Document, doc_j: Document) -> float:
    a, b = set(doc_i.tokens), set(doc_j.tokens)
    if not a and not b:
        return 0.0
    return 1.0 - len(a & b) / len(a | b)


def smooth(p: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    p = np.asarray(p, dtype=float) + eps
    return p / p.sum(axis=-1, keepdims=True)


def kl_divergence(p: Sequence[float], q: Sequence[float], eps: float = 1e-6) -> float:
    """KL(p || q) in nats after eps-smoothing both sides."""
    p, q = smooth(p, eps), smooth(q, eps)
    return max(0.0, float(np.sum(p * np.log(p / q))))


def subtopic_kl_diversity(model: PlsaModel, doc_i: Document, doc_j: Document, eps: float = 1e-6) -> float:
    return kl_divergence(doc_topic_posterior(model, doc_i), doc_topic_posterior(model, doc_j), eps)


def kl_to_unit(kl: float) -> float:
    """Monotone map of a KL value into [0, 1) so it is on the same scale as the other features."""
    return kl / (1.0 + kl)


def diversity_vector(doc_i: Document, doc_j: Document, stats: CorpusStats,
                     model: PlsaModel, eps: float = 1e-6) -> np.ndarray:
    return np.array([cosine_diversity(doc_i, doc_j, stats), jaccard_diversity(doc_i, doc_j),
                     subtopic_kl_diversity(model, doc_i, doc_j, eps)])


def utility_view(vector: Sequence[float]) -> np.ndarray:
    """The form a diversity vector takes inside the utility: KL squashed into [0, 1)."""
    cos, jac, kl = vector
    return np.array([cos, jac, kl_to_unit(kl)])


def relational_aggregate(relations: Mapping[str, Sequence[float]] | Sequence[Sequence[float]],
                         mode: str = "min") -> np.ndarray:
    """Component-wise aggregate of a candidate's diversity vectors against the selected set.

    An empty selected set yields zeros, so the diversity term contributes nothing.
    """
    if mode not in AGGREGATES:
        raise ValueError(f"unknown aggregate {mode!r}")
    rows = list(relations.values()) if isinstance(relations, Mapping) else list(relations)
    if not rows:
        return np.zeros(len(DIVERSITY_FEATURES))
    return AGGREGATES[mode](np.asarray(rows, dtype=float), axis=0)


class DiversitySpace:
    """Vectorized diversity features for a fixed set of documents.

    Rows are the documents passed in, in order.  The arrays here are what the
    selection kernels read; ``against`` is the reference vectorized route.
    """

    def __init__(self, docs: Sequence[Document], stats: CorpusStats,
                 posteriors: np.ndarray | None, eps: float = 1e-6, num_topics: int = 1):
        self.docs = list(docs)
        n = len(self.docs)
        vocab: dict[str, int] = {}
        indptr, indices, weights = [0], [], []
        for doc in self.docs:
            for term, c in sorted(Counter(doc.tokens).items()):
                w = vocab.setdefault(term, len(vocab))
                indices.append(w)
                weights.append(c * idf(stats, term))
            indptr.append(len(indices))
        self.n_terms = len(vocab)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(weights, dtype=float)
        self.tfidf = sparse.csr_matrix((self.data, self.indices, self.indptr), shape=(n, self.n_terms))
        self.binary = sparse.csr_matrix((np.ones_like(self.data), self.indices, self.indptr),
                                        shape=(n, self.n_terms))
        self.norms = np.sqrt(np.asarray(self.tfidf.multiply(self.tfidf).sum(axis=1)).ravel())
        self.set_sizes = np.diff(self.indptr).astype(float)
        if posteriors is None:
            posteriors = np.full((n, num_topics), 1.0 / num_topics)
        self.post = smooth(posteriors, eps) if n else np.zeros((0, posteriors.shape[1]))
        self.log_post = np.log(self.post)

    def __len__(self):
        return len(self.docs)

    def against(self, j: int, rows: np.ndarray) -> np.ndarray:
        """Utility-view diversity vectors of ``rows`` relative to row ``j``, shape ``(len(rows), 3)``."""
        rows = np.asarray(rows, dtype=np.intp)
        out = np.empty((rows.size, 3))
        dot = self.tfidf[rows] @ self.tfidf[j].toarray().ravel()
        denom = self.norms[rows] * self.norms[j]
        zero = denom == 0
        out[:, 0] = np.where(zero, 1.0, 1.0 - dot / np.where(zero, 1.0, denom))
        np.clip(out[:, 0], 0.0, 1.0, out=out[:, 0])
        inter = self.binary[rows] @ self.binary[j].toarray().ravel()
        union = self.set_sizes[rows] + self.set_sizes[j] - inter
        empty = union == 0
        out[:, 1] = np.where(empty, 0.0, 1.0 - inter / np.where(empty, 1.0, union))
        p = self.post[rows]
        kl = np.zeros(rows.size)
        for z in range(p.shape[1]):
            kl += p[:, z] * (self.log_post[rows, z] - self.log_post[j, z])
        kl = np.maximum(kl, 0.0)
        out[:, 2] = kl / (1.0 + kl)
        return out
