"""Weight learning.

``sequential``: log-likelihood of reproducing an ideal selection sequence
step by step under a softmax over the remaining candidates, with the
diversity aggregate conditioned on the ideal prefix (teacher forcing).

``listwise``: ListMLE (Plackett-Luce) over the grade-sorted permutation of
the relevant documents, relevance weights only.
"""

from __future__ import annotations

import hashlib
import logging
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .corpus import CorpusStats, Document, Topic, build_stats
from .divfeat import DiversitySpace
from .metrics import MetricParams, Qrels, ideal_ranking
from .plsa import posteriors_for
from .relfeat import FEATURES, FeatureParams, assemble_relevance_vectors
from .select import WeightVector, fit_pool_model

logger = logging.getLogger(__name__)

N_REL = len(FEATURES)
N_ALL = N_REL + 3


class DivergenceError(RuntimeError):
    pass


@dataclass
class TrainingInstance:
    topic_id: str
    doc_ids: list[str]
    relevance: np.ndarray  # (n, 8)
    ideal: list[int]  # pool indices in selection order
    # per step: feature rows of the remaining candidates and the row of the ideal pick
    steps: list[tuple[np.ndarray, int]] = field(default_factory=list)
    grades: np.ndarray | None = None  # max graded judgment per pool doc


def build_ideal_sequence(topic: Topic, pool: Sequence[str], qrels: Qrels, params: MetricParams,
                         length: int) -> list[str]:
    """Greedy gain-maximizing order over the judged part of ``pool``; only positive-gain docs.

    Equal-gain documents are ordered by higher grade, then by a hash of the
    doc_id, so the target carries no accidental preference for old or new items.
    """
    tid = topic.topic_id

    def tiebreak(doc_id: str):
        grade = sum(sub.get(doc_id, 0) for sub in qrels.judgments.get(tid, {}).values())
        return (-grade, hashlib.sha1(doc_id.encode()).hexdigest(), doc_id)

    seq = ideal_ranking(topic, qrels, MetricParams(params.alpha, params.gamma, params.beta, length,
                                                   params.discount_kind, params.dynamic), pool, tiebreak)
    if not seq:
        logger.warning("topic %s: no relevant documents in the training pool", topic.topic_id)
    return seq


def make_steps(relevance: np.ndarray, ideal: Sequence[int], space: DiversitySpace | None) -> list[tuple[np.ndarray, int]]:
    """Teacher-forced step matrices ``[x_i, h_S(R_i)]`` for each ideal pick."""
    n = relevance.shape[0]
    remaining = np.ones(n, dtype=bool)
    h = np.zeros((n, 3))
    steps = []
    for s, target in enumerate(ideal):
        rows = np.flatnonzero(remaining)
        phi = np.hstack([relevance[rows], h[rows] if s else np.zeros((rows.size, 3))])
        steps.append((phi, int(np.searchsorted(rows, target))))
        remaining[target] = False
        if space is not None:
            div = space.against(target, np.arange(n))
            h = div if s == 0 else np.minimum(h, div)
    return steps


def build_instance(topic: Topic, pool: Sequence[Document], qrels: Qrels, *, length: int = 20,
                   metric: MetricParams = MetricParams(), stats: CorpusStats | None = None,
                   params: FeatureParams = FeatureParams(), now_ms: int | None = None,
                   with_diversity: bool = True) -> TrainingInstance | None:
    pool = list(pool)
    if not pool:
        return None
    stats = stats if stats is not None else build_stats(pool)
    rel = assemble_relevance_vectors(topic, pool, stats, params, now_ms)
    ids = [d.doc_id for d in pool]
    index = {d: i for i, d in enumerate(ids)}
    seq = build_ideal_sequence(topic, ids, qrels, metric, length)
    if not seq:
        return None
    ideal = [index[d] for d in seq]
    space = None
    if with_diversity:
        model = fit_pool_model(pool, params)
        post = posteriors_for(model, pool) if model is not None else None
        space = DiversitySpace(pool, stats, post, params.kl_eps, params.plsa_topics)
    grades = np.array([qrels.max_grade(topic.topic_id, d) for d in ids], dtype=float)
    return TrainingInstance(topic.topic_id, ids, rel, ideal, make_steps(rel, ideal, space), grades)


def _theta(weights: WeightVector) -> np.ndarray:
    return np.asarray(weights.omega_r + weights.omega_d, dtype=float)


def _weights(theta: np.ndarray, objective: str = "manual", trained_on: str = "") -> WeightVector:
    return WeightVector(theta[:N_REL].tolist(), theta[N_REL:].tolist(), objective=objective, trained_on=trained_on)


def sequential_log_likelihood(weights: WeightVector | np.ndarray, instance: TrainingInstance) -> float:
    theta = weights if isinstance(weights, np.ndarray) else _theta(weights)
    total = 0.0
    for phi, target in instance.steps:
        u = phi @ theta
        total += u[target] - logsumexp(u)
    return float(total)


def sequential_gradient(weights: WeightVector | np.ndarray, instance: TrainingInstance) -> np.ndarray:
    """Gradient over the concatenated ``(omega_r, omega_d)`` vector."""
    theta = weights if isinstance(weights, np.ndarray) else _theta(weights)
    grad = np.zeros(N_ALL)
    for phi, target in instance.steps:
        u = phi @ theta
        prob = np.exp(u - logsumexp(u))
        grad += phi[target] - prob @ phi
    return grad


def _listwise_order(instance: TrainingInstance) -> np.ndarray:
    grades = instance.grades
    order = sorted(range(len(grades)), key=lambda i: (-grades[i], instance.doc_ids[i]))
    return np.asarray(order, dtype=np.intp)


def listwise_log_likelihood(weights: WeightVector | np.ndarray, instance: TrainingInstance) -> float:
    theta = weights if isinstance(weights, np.ndarray) else _theta(weights)
    order = _listwise_order(instance)
    s = instance.relevance[order] @ theta[:N_REL]
    n_rel = int(np.count_nonzero(instance.grades > 0))
    # suffix logsumexp: lse[k] = log sum_{j >= k} exp(s_j)
    lse = np.logaddexp.accumulate(s[::-1])[::-1]
    return float(np.sum(s[:n_rel] - lse[:n_rel]))


def listwise_gradient(weights: WeightVector | np.ndarray, instance: TrainingInstance) -> np.ndarray:
    theta = weights if isinstance(weights, np.ndarray) else _theta(weights)
    order = _listwise_order(instance)
    x = instance.relevance[order]
    s = x @ theta[:N_REL]
    n_rel = int(np.count_nonzero(instance.grades > 0))
    grad = np.zeros(N_ALL)
    for k in range(n_rel):
        tail = s[k:]
        prob = np.exp(tail - logsumexp(tail))
        grad[:N_REL] += x[k] - prob @ x[k:]
    return grad


_OBJECTIVES = {
    "sequential": (sequential_log_likelihood, sequential_gradient, lambda inst: len(inst.steps)),
    "listwise": (listwise_log_likelihood, listwise_gradient,
                 lambda inst: int(np.count_nonzero(inst.grades > 0))),
}


def fit_weights(instances: Sequence[TrainingInstance], objective: str = "sequential", lr: float = 0.05,
                iters: int = 200, seed: int = 0, trained_on: str = "", return_trace: bool = False):
    """Full-batch gradient ascent from zero on the mean per-step log-likelihood."""
    if not instances:
        raise ValueError("no training instances")
    if objective not in _OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    f, grad_f, n_steps = _OBJECTIVES[objective]
    order = list(instances)
    random.Random(seed).shuffle(order)
    total_steps = sum(n_steps(inst) for inst in order)
    if total_steps == 0:
        raise ValueError("training instances contain no steps")

    def value_and_grad(theta):
        value, grad = 0.0, np.zeros(N_ALL)
        for inst in order:
            value += f(theta, inst)
            grad += grad_f(theta, inst)
        return value / total_steps, grad / total_steps

    theta = np.zeros(N_ALL)
    value, grad = value_and_grad(theta)
    trace = [value]
    drops = 0
    for _ in range(iters):
        theta = theta + lr * grad
        if objective == "listwise":
            theta[N_REL:] = 0.0
        value, grad = value_and_grad(theta)
        drops = drops + 1 if value < trace[-1] else 0
        trace.append(value)
        if drops >= 10:
            raise DivergenceError(f"likelihood fell for 10 consecutive iterations at lr={lr}; use a smaller lr")
    weights = _weights(theta, objective, trained_on)
    return (weights, trace) if return_trace else weights
