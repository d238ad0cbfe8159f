"""Glue between the library modules and the command line: train, run, evaluate."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from .corpus import Document, Topic, build_stats
from .learn import build_instance, fit_weights
from .metrics import DAY_MS, MetricParams, Qrels, window_view
from .relfeat import HOUR_MS, FeatureParams
from .select import STRATEGIES, ResultSet, WeightVector, partition_windows, run_stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    strategy: str = "dp"
    K: int = 20
    m: int = 10
    window_length: float = 48.0  # hours
    weights: str = ""
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.K <= 0:
            raise ValueError("K must be positive")
        if self.strategy == "dp" and not 0 < self.m <= self.K:
            raise ValueError(f"need 0 < m <= K for dp, got m={self.m}, K={self.K}")
        if self.window_length <= 0:
            raise ValueError("window_length must be positive")

    @property
    def window_length_ms(self) -> int:
        return int(round(self.window_length * HOUR_MS))


def train(stream: Sequence[Document], topics: Sequence[Topic], qrels: Qrels, *, objective: str = "sequential",
          gain: str = "classic", train_hours: float = 48.0, K: int = 20, params: FeatureParams = FeatureParams(),
          metric: MetricParams = MetricParams(), lr: float = 0.05, iters: int = 200, seed: int = 0,
          origin_ms: int | None = None) -> WeightVector:
    """Fit weights on the first ``train_hours`` of the stream, one instance per topic."""
    windows = partition_windows(stream, int(round(train_hours * HOUR_MS)), origin_ms)
    if not windows:
        raise ValueError("empty stream")
    first = windows[0]
    stats = build_stats(first.documents)
    docs = {d.doc_id: d for d in first.documents}
    metric = replace(metric, dynamic=(gain == "dynamic"))
    instances = []
    for topic in topics:
        view = window_view(qrels, topic, docs, first.end_ms) if metric.dynamic else qrels
        judged = qrels.judged_docs(topic.topic_id)
        # train on the judged part of the window, as with labeled diversity collections
        pool = [d for d in first.documents if d.doc_id in judged]
        inst = build_instance(topic, pool, view, length=K, metric=metric, stats=stats,
                              params=params, now_ms=first.end_ms, with_diversity=(objective == "sequential"))
        if inst is not None:
            instances.append(inst)
    if not instances:
        raise ValueError("no topic has relevant documents in the training window")
    tag = f"{objective}/{gain}/first {train_hours:g}h/{len(instances)} topics"
    return fit_weights(instances, objective, lr=lr, iters=iters, seed=seed, trained_on=tag)


def _run_topic(args) -> tuple[str, list[ResultSet]]:
    topic, stream, cfg, weights, params, origin, backend = args
    results = run_stream(topic, stream, cfg.strategy, weights, cfg.K, cfg.window_length_ms, cfg.m,
                         params=params, origin_ms=origin, backend=backend)
    for rs in results:
        for it in rs.items:
            it.doc = None  # keep worker results small
    return topic.topic_id, results


def run_topics(topics: Sequence[Topic], stream: Sequence[Document], cfg: RunConfig, weights: WeightVector,
               params: FeatureParams = FeatureParams(), origin_ms: int | None = None,
               backend: str | None = None) -> list[tuple[str, list[ResultSet]]]:
    """Run one strategy for every topic; output order follows ``topics`` regardless of workers."""
    jobs = [(t, list(stream), cfg, weights, params, origin_ms, backend) for t in topics]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_run_topic, jobs))
    return [_run_topic(j) for j in jobs]


__all__ = ["RunConfig", "train", "run_topics", "DAY_MS"]
