"""Relevance features for a (topic, document) pair.

The vector layout is fixed by ``FEATURES``; ``SCHEMA_VERSION`` is written into
weights files so a model trained on one layout is never applied to another.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import CorpusStats, DataError, Document, Topic

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FEATURES = ("tf_idf", "bm25", "lm_dirichlet", "mrf_ordered", "mrf_unordered",
            "recency", "user_rank", "retweet")
HOUR_MS = 3_600_000


@dataclass(frozen=True)
class FeatureParams:
    k1: float = 1.2
    b: float = 0.75
    mu: float = 2500.0
    lambda_r: float = 0.02  # per hour
    ordered_window: int = 1
    unordered_window: int = 8
    plsa_topics: int = 5
    plsa_iters: int = 100
    plsa_tol: float = 1e-4
    kl_eps: float = 1e-6

    @classmethod
    def from_mapping(cls, values: dict) -> "FeatureParams":
        kwargs = {}
        for f in fields(cls):
            if f.name in values:
                kwargs[f.name] = type(f.default)(values[f.name])
        return cls(**kwargs)


def read_kv_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _tf(doc: Document) -> Counter:
    return Counter(doc.tokens)


def tf_idf_score(topic: Topic, doc: Document, stats: CorpusStats, tf: Counter | None = None) -> float:
    tf = tf if tf is not None else _tf(doc)
    n = stats.doc_count
    score = 0.0
    for q in topic.query_tokens:
        c = tf.get(q, 0)
        if c:
            score += c * math.log((n + 1) / (stats.doc_frequency.get(q, 0) + 1))
    return score


def bm25_score(topic: Topic, doc: Document, stats: CorpusStats, k1: float = 1.2, b: float = 0.75,
               tf: Counter | None = None) -> float:
    tf = tf if tf is not None else _tf(doc)
    n = stats.doc_count
    norm = k1 * (1 - b + b * len(doc.tokens) / stats.avg_doc_len) if stats.avg_doc_len > 0 else k1
    score = 0.0
    for q in topic.query_tokens:
        c = tf.get(q, 0)
        if c:
            df = stats.doc_frequency.get(q, 0)
            idf = math.log((n - df + 0.5) / (df + 0.5) + 1)
            score += idf * c * (k1 + 1) / (c + norm)
    return score


def lm_dirichlet_score(topic: Topic, doc: Document, stats: CorpusStats, mu: float = 2500.0,
                       tf: Counter | None = None) -> float:
    if stats.total_tokens == 0:
        raise ValueError("empty collection")
    tf = tf if tf is not None else _tf(doc)
    total = stats.total_tokens
    floor = 1.0 / (2 * total)
    denom = len(doc.tokens) + mu
    score = 0.0
    for q in topic.query_tokens:
        cf = stats.collection_frequency.get(q, 0)
        p_c = cf / total if cf else floor
        score += math.log((tf.get(q, 0) + mu * p_c) / denom)
    return score


def _positions(tokens: Sequence[str], term: str) -> list[int]:
    return [i for i, t in enumerate(tokens) if t == term]


def mrf_ordered(topic: Topic, doc: Document, window: int = 1) -> float:
    q = topic.query_tokens
    count = 0
    for a, b in zip(q, q[1:]):
        pa, pb = _positions(doc.tokens, a), set(_positions(doc.tokens, b))
        count += sum(1 for p in pa for d in range(1, window + 1) if p + d in pb)
    return math.log1p(count)


def mrf_unordered(topic: Topic, doc: Document, window: int = 8) -> float:
    q = topic.query_tokens
    count = 0
    for a, b in zip(q, q[1:]):
        pa, pb = _positions(doc.tokens, a), _positions(doc.tokens, b)
        hits = sum(1 for i in pa for j in pb if i != j and abs(i - j) < window)
        count += hits // 2 if a == b else hits
    return math.log1p(count)


def recency_feature(topic: Topic, doc: Document, lambda_r: float = 0.02, now_ms: int | None = None) -> float:
    now = topic.tracking_epoch_ms if now_ms is None else now_ms
    lag = now - doc.epoch_ms
    if lag < 0:
        logger.warning("document %s is newer than the tracking time; recency clamped", doc.doc_id)
        lag = 0
    return math.exp(-lambda_r * lag / HOUR_MS)


def user_rank_feature(doc: Document) -> float:
    return math.log1p(doc.followers)


def retweet_feature(doc: Document) -> float:
    return math.log1p(doc.retweets)


def raw_relevance_vector(topic: Topic, doc: Document, stats: CorpusStats,
                         params: FeatureParams = FeatureParams(), now_ms: int | None = None) -> np.ndarray:
    tf = _tf(doc)
    return np.array([
        tf_idf_score(topic, doc, stats, tf=tf),
        bm25_score(topic, doc, stats, params.k1, params.b, tf=tf),
        # a window with no tokens at all has no language model; every doc gets the same value
        lm_dirichlet_score(topic, doc, stats, params.mu, tf=tf) if stats.total_tokens else 0.0,
        mrf_ordered(topic, doc, params.ordered_window),
        mrf_unordered(topic, doc, params.unordered_window),
        recency_feature(topic, doc, params.lambda_r, now_ms),
        user_rank_feature(doc),
        retweet_feature(doc),
    ])


def minmax_normalize(raw: np.ndarray) -> np.ndarray:
    """Column-wise min-max into [0, 1]; constant columns map to 0.5."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape[0] == 0:
        return raw.copy()
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    span = hi - lo
    flat = span == 0
    out = (raw - lo) / np.where(flat, 1.0, span)
    out[:, flat] = 0.5
    return np.clip(out, 0.0, 1.0)


def assemble_relevance_vectors(topic: Topic, docs: Sequence[Document], stats: CorpusStats,
                               params: FeatureParams = FeatureParams(),
                               now_ms: int | None = None) -> np.ndarray:
    """Normalized relevance vectors for one candidate window, shape ``(len(docs), 8)``."""
    raw = np.empty((len(docs), len(FEATURES)))
    for i, doc in enumerate(docs):
        raw[i] = raw_relevance_vector(topic, doc, stats, params, now_ms)
    return minmax_normalize(raw)


def assemble_relevance_vector(topic: Topic, doc: Document, stats: CorpusStats,
                              params: FeatureParams = FeatureParams(),
                              window: Sequence[Document] | None = None,
                              now_ms: int | None = None) -> np.ndarray:
    """Normalized vector for ``doc`` relative to its candidate ``window``."""
    window = list(window) if window is not None else [doc]
    idx = next((i for i, d in enumerate(window) if d.doc_id == doc.doc_id), None)
    if idx is None:
        window.append(doc)
        idx = len(window) - 1
    return assemble_relevance_vectors(topic, window, stats, params, now_ms)[idx]
