"""PLSA fitted by EM over a candidate pool.

Only non-zero (document, term) cells are stored, so an iteration costs
O(nnz * Z).  Posteriors exposed to the diversity features are the
word-averaged E-step responsibilities, not the ``p(z|d)`` parameters.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Document

_TINY = 1e-300


@dataclass
class PlsaModel:
    num_topics: int
    vocab: list[str]
    p_w_given_z: np.ndarray  # (Z, V)
    doc_ids: list[str]
    p_z_given_d: np.ndarray  # (D, Z)
    posteriors: np.ndarray  # (D, Z) word-averaged responsibilities
    log_likelihood_trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.term_index = {t: i for i, t in enumerate(self.vocab)}
        self.doc_index = {d: i for i, d in enumerate(self.doc_ids)}

    def to_json(self) -> dict:
        return {
            "num_topics": self.num_topics,
            "vocab": self.vocab,
            "p_w_given_z": self.p_w_given_z.tolist(),
            "doc_ids": self.doc_ids,
            "p_z_given_d": self.p_z_given_d.tolist(),
            "posteriors": self.posteriors.tolist(),
            "log_likelihood_trace": self.log_likelihood_trace,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PlsaModel":
        z = data["num_topics"]
        return cls(z, list(data["vocab"]),
                   np.asarray(data["p_w_given_z"], dtype=float).reshape(z, -1),
                   list(data["doc_ids"]),
                   np.asarray(data["p_z_given_d"], dtype=float).reshape(-1, z),
                   np.asarray(data["posteriors"], dtype=float).reshape(-1, z),
                   list(data["log_likelihood_trace"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "PlsaModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def _cells(documents: Sequence[Document], term_index: dict[str, int], grow: bool):
    rows, cols, counts = [], [], []
    for d, doc in enumerate(documents):
        for term, c in sorted(Counter(doc.tokens).items()):
            w = term_index.get(term)
            if w is None:
                if not grow:
                    continue
                w = term_index[term] = len(term_index)
            rows.append(d)
            cols.append(w)
            counts.append(c)
    return (np.asarray(rows, dtype=np.intp), np.asarray(cols, dtype=np.intp),
            np.asarray(counts, dtype=float))


def _responsibilities(rows, cols, p_z_d, p_w_z):
    # p(z|d,w) for each stored cell, shape (nnz, Z)
    joint = p_z_d[rows] * p_w_z[:, cols].T
    mix = joint.sum(axis=1)
    return joint / np.maximum(mix, _TINY)[:, None], mix


def _word_average(rows, counts, resp, n_docs, z):
    weighted = resp * counts[:, None]
    out = np.zeros((n_docs, z))
    for k in range(z):
        out[:, k] = np.bincount(rows, weights=weighted[:, k], minlength=n_docs)
    length = out.sum(axis=1)
    empty = length <= 0
    out[empty] = 1.0 / z
    out[~empty] /= length[~empty, None]
    return out


def plsa_fit(documents: Sequence[Document], Z: int = 5, max_iters: int = 100, tol: float = 1e-4,
             seed: int = 0, init: tuple[np.ndarray, np.ndarray] | None = None) -> PlsaModel:
    """EM for PLSA; stops after ``max_iters`` or when the log-likelihood gain drops below ``tol``.

    ``init`` optionally gives the starting ``(p_w_given_z, p_z_given_d)``;
    otherwise a seeded uniform-plus-noise start is used.
    """
    if not documents:
        raise ValueError("plsa_fit needs at least one document")
    if Z < 1:
        raise ValueError("Z must be >= 1")
    for doc in documents:
        if not doc.tokens:
            raise ValueError(f"document {doc.doc_id} has no tokens")

    term_index: dict[str, int] = {}
    rows, cols, counts = _cells(documents, term_index, grow=True)
    n_docs, n_terms = len(documents), len(term_index)
    doc_len = np.bincount(rows, weights=counts, minlength=n_docs)

    if init is not None:
        p_w_z = np.array(init[0], dtype=float).reshape(Z, n_terms)
        p_z_d = np.array(init[1], dtype=float).reshape(n_docs, Z)
    else:
        rng = np.random.default_rng(seed)
        p_w_z = 1.0 + 1e-2 * rng.random((Z, n_terms))
        p_z_d = 1.0 + 1e-2 * rng.random((n_docs, Z))
    p_w_z /= p_w_z.sum(axis=1, keepdims=True)
    p_z_d /= p_z_d.sum(axis=1, keepdims=True)

    resp, mix = _responsibilities(rows, cols, p_z_d, p_w_z)
    trace = [float(np.dot(counts, np.log(np.maximum(mix, _TINY))))]
    for _ in range(max_iters):
        weighted = resp * counts[:, None]
        for k in range(Z):
            p_w_z[k] = np.bincount(cols, weights=weighted[:, k], minlength=n_terms)
            p_z_d[:, k] = np.bincount(rows, weights=weighted[:, k], minlength=n_docs)
        p_w_z /= np.maximum(p_w_z.sum(axis=1, keepdims=True), _TINY)
        p_z_d /= doc_len[:, None]
        resp, mix = _responsibilities(rows, cols, p_z_d, p_w_z)
        trace.append(float(np.dot(counts, np.log(np.maximum(mix, _TINY)))))
        if trace[-1] - trace[-2] < tol:
            break

    vocab = [None] * n_terms
    for term, i in term_index.items():
        vocab[i] = term
    posteriors = _word_average(rows, counts, resp, n_docs, Z)
    return PlsaModel(Z, vocab, p_w_z, [d.doc_id for d in documents], p_z_d, posteriors, trace)


def fold_in(model: PlsaModel, documents: Sequence[Document], iters: int = 20) -> np.ndarray:
    """Word-averaged posteriors for unseen documents, with ``p(w|z)`` frozen."""
    z = model.num_topics
    if not documents:
        return np.zeros((0, z))
    rows, cols, counts = _cells(documents, dict(model.term_index), grow=False)
    n = len(documents)
    p_z_d = np.full((n, z), 1.0 / z)
    if rows.size == 0:
        return p_z_d
    doc_len = np.bincount(rows, weights=counts, minlength=n)
    known = doc_len > 0
    for _ in range(iters):
        resp, _ = _responsibilities(rows, cols, p_z_d, model.p_w_given_z)
        weighted = resp * counts[:, None]
        for k in range(z):
            p_z_d[:, k] = np.bincount(rows, weights=weighted[:, k], minlength=n)
        p_z_d[known] /= doc_len[known, None]
        p_z_d[~known] = 1.0 / z
    resp, _ = _responsibilities(rows, cols, p_z_d, model.p_w_given_z)
    return _word_average(rows, counts, resp, n, z)


def doc_topic_posterior(model: PlsaModel, doc: Document, allow_fold_in: bool = True) -> np.ndarray:
    i = model.doc_index.get(doc.doc_id)
    if i is not None:
        return model.posteriors[i].copy()
    if not allow_fold_in:
        raise KeyError(f"document {doc.doc_id} was not in the fitted pool")
    return fold_in(model, [doc])[0]


def posteriors_for(model: PlsaModel, documents: Sequence[Document]) -> np.ndarray:
    """Posterior rows for ``documents``: stored rows where known, fold-in otherwise."""
    out = np.empty((len(documents), model.num_topics))
    missing = []
    for i, doc in enumerate(documents):
        j = model.doc_index.get(doc.doc_id)
        if j is None:
            missing.append(i)
        else:
            out[i] = model.posteriors[j]
    if missing:
        out[missing] = fold_in(model, [documents[i] for i in missing])
    return out
