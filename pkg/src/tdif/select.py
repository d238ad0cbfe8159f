"""Utility scoring, greedy selection and the per-window strategies.

Three strategies share one driver (``run_stream``):

* ``dp``       keep the top-(K-m) previous items by their recorded utility,
               greedily admit new items from the current window only;
* ``allbatch`` re-select K items from everything seen so far;
* ``toprel``   the K most relevant items of the current window, no diversity.

Every emitted result set is displayed in timeline order, newest first.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .corpus import CorpusStats, Document, Topic, build_stats
from .divfeat import DiversitySpace, relational_aggregate, utility_view
from .plsa import PlsaModel, plsa_fit, posteriors_for
from .relfeat import FEATURES, SCHEMA_VERSION, FeatureParams, assemble_relevance_vectors

STRATEGIES = ("dp", "toprel", "allbatch")


class SchemaError(ValueError):
    pass


@dataclass
class WeightVector:
    omega_r: list[float]
    omega_d: list[float]
    schema_version: int = SCHEMA_VERSION
    objective: str = "manual"
    trained_on: str = ""

    def __post_init__(self):
        self.omega_r = [float(w) for w in self.omega_r]
        self.omega_d = [float(w) for w in self.omega_d]
        if not all(np.isfinite(self.omega_r + self.omega_d)):
            raise ValueError("weights must be finite")

    def check(self, n_relevance: int = len(FEATURES)) -> None:
        if self.schema_version != SCHEMA_VERSION or len(self.omega_r) != n_relevance or len(self.omega_d) != 3:
            raise SchemaError(
                f"weights schema v{self.schema_version} ({len(self.omega_r)}+{len(self.omega_d)}) "
                f"does not match features v{SCHEMA_VERSION} ({n_relevance}+3)")

    @classmethod
    def zeros(cls) -> "WeightVector":
        return cls([0.0] * len(FEATURES), [0.0] * 3)

    def to_json(self) -> dict:
        return {"schema_version": self.schema_version, "omega_r": self.omega_r,
                "omega_d": self.omega_d, "objective": self.objective, "trained_on": self.trained_on}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "WeightVector":
        data = json.loads(Path(path).read_text())
        w = cls(data["omega_r"], data["omega_d"], int(data["schema_version"]),
                data.get("objective", "manual"), data.get("trained_on", ""))
        w.check()
        return w


@dataclass
class ScoredItem:
    doc_id: str
    epoch_ms: int
    utility_at_selection: float
    window_index: int
    doc: Document | None = field(default=None, repr=False, compare=False)


@dataclass
class ResultSet:
    items: list[ScoredItem] = field(default_factory=list)
    window_index: int = -1
    utility_evals: int = 0
    pair_evals: int = 0
    elapsed_s: float = 0.0

    def __post_init__(self):
        self.items.sort(key=lambda it: (-it.epoch_ms, it.doc_id))
        ids = [it.doc_id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate doc_id in result set")

    @property
    def doc_ids(self) -> list[str]:
        return [it.doc_id for it in self.items]

    def __len__(self):
        return len(self.items)


@dataclass
class CandidateWindow:
    window_index: int
    start_ms: int
    end_ms: int
    documents: list[Document]

    def __post_init__(self):
        for d in self.documents:
            if not self.start_ms <= d.epoch_ms < self.end_ms:
                raise ValueError(f"{d.doc_id} outside window [{self.start_ms}, {self.end_ms})")


@dataclass
class Counters:
    utility_evals: int = 0
    pair_evals: int = 0


def _linear(x: np.ndarray, w: Sequence[float]) -> np.ndarray | float:
    # fixed left-to-right order so scalar and vectorized paths round identically
    acc = x[..., 0] * w[0]
    for k in range(1, len(w)):
        acc = acc + x[..., k] * w[k]
    return acc


def utility_score(relevance: Sequence[float], relations, weights: WeightVector, mode: str = "min") -> float:
    """Linear utility of a candidate given its diversity vectors against the selected set.

    ``relations`` maps selected doc ids (or is a list) to raw diversity vectors
    ``(cosine, jaccard, kl)``; an empty set leaves only the relevance term.
    """
    x = np.asarray(relevance, dtype=float)
    if x.shape != (len(weights.omega_r),):
        raise SchemaError(f"relevance vector has {x.size} features, weights expect {len(weights.omega_r)}")
    weights.check(x.size)
    rows = list(relations.values()) if isinstance(relations, dict) else list(relations)
    u = float(_linear(x, weights.omega_r))
    if rows:
        h = relational_aggregate([utility_view(r) for r in rows], mode)
        for k in range(3):
            u = u + float(h[k]) * weights.omega_d[k]
    return u


def _id_rank(docs: Sequence[Document]) -> np.ndarray:
    order = sorted(range(len(docs)), key=lambda i: docs[i].doc_id)
    rank = np.empty(len(docs), dtype=np.int64)
    rank[order] = np.arange(len(docs))
    return rank


def fit_pool_model(docs: Sequence[Document], params: FeatureParams, seed: int = 0) -> PlsaModel | None:
    usable = [d for d in docs if d.tokens]
    if not usable:
        return None
    return plsa_fit(usable, params.plsa_topics, params.plsa_iters, params.plsa_tol, seed)


def greedy_select(pool: Sequence[Document], already_selected: Sequence[Document], weights: WeightVector,
                  m: int, *, topic: Topic, stats: CorpusStats | None = None,
                  params: FeatureParams = FeatureParams(), now_ms: int | None = None,
                  model: PlsaModel | None = None, relevance: np.ndarray | None = None,
                  counters: Counters | None = None, window_index: int = 0,
                  backend: str | None = None) -> list[ScoredItem]:
    """Pick up to ``m`` documents from ``pool`` one at a time by maximal utility.

    Each pick is scored against everything selected so far, including
    ``already_selected``.  Utilities within a relative 1e-12 of the best are
    ties; they go to the newer document, then the smaller doc_id.
    """
    weights.check()
    if m <= 0 or not pool:
        return []
    pool = list(pool)
    anchors = list(already_selected)
    docs = pool + anchors
    if stats is None:
        stats = build_stats(docs)
    if relevance is None:
        relevance = assemble_relevance_vectors(topic, pool, stats, params, now_ms)
    use_div = any(w != 0.0 for w in weights.omega_d)
    if use_div:
        if model is None:
            model = fit_pool_model(pool, params)
        post = posteriors_for(model, docs) if model is not None else None
    else:
        post = None
    space = DiversitySpace(docs, stats, post, params.kl_eps, params.plsa_topics)
    rel_u = np.zeros(len(docs))
    rel_u[:len(pool)] = _linear(relevance, weights.omega_r)
    epochs = np.array([d.epoch_ms for d in docs], dtype=np.int64)
    omega_d = np.asarray(weights.omega_d, dtype=float) if use_div else np.zeros(3)
    anchor_rows = np.arange(len(pool), len(docs), dtype=np.intp) if use_div else np.zeros(0, dtype=np.intp)
    rows, utils, evals, pairs = kernels.greedy_kernel(
        space.indptr, space.indices, space.data, space.norms, space.set_sizes,
        space.post, space.log_post, rel_u, epochs, _id_rank(docs),
        np.arange(len(pool), dtype=np.intp), anchor_rows, omega_d, int(m), backend=backend)
    if counters is not None:
        counters.utility_evals += evals
        counters.pair_evals += pairs
    return [ScoredItem(docs[r].doc_id, docs[r].epoch_ms, float(u), window_index, docs[r])
            for r, u in zip(rows, utils)]


def _retain(previous: ResultSet, keep: int) -> list[ScoredItem]:
    ranked = sorted(previous.items, key=lambda it: (-it.utility_at_selection, -it.epoch_ms, it.doc_id))
    return ranked[:max(keep, 0)]


def dp_window_step(previous: ResultSet, window: CandidateWindow, weights: WeightVector, K: int, m: int,
                   *, topic: Topic, stats: CorpusStats | None = None,
                   params: FeatureParams = FeatureParams(), counters: Counters | None = None,
                   backend: str | None = None) -> ResultSet:
    """Keep the top-(K-m) previous items, then greedily admit m new ones from the window.

    The set only reaches K items once a previous window has supplied K-m of them.
    """
    if not 0 < m <= K:
        raise ValueError(f"need 0 < m <= K, got m={m}, K={K}")
    retained = _retain(previous, K - m)
    kept_ids = {it.doc_id for it in retained}
    pool = [d for d in window.documents if d.doc_id not in kept_ids]
    anchors = [it.doc for it in retained]
    if any(a is None for a in anchors):
        raise ValueError("retained items must carry their documents")
    if stats is None:
        stats = build_stats(pool + anchors)
    new = greedy_select(pool, anchors, weights, m, topic=topic, stats=stats,
                        params=params, now_ms=window.end_ms, counters=counters,
                        window_index=window.window_index, backend=backend)
    return ResultSet(retained + new, window.window_index)


def toprel_window_step(previous: ResultSet | None, window: CandidateWindow, weights: WeightVector, K: int,
                       *, topic: Topic, stats: CorpusStats | None = None,
                       params: FeatureParams = FeatureParams(), counters: Counters | None = None) -> ResultSet:
    """The K highest relevance-only utilities of this window; diversity weights are ignored."""
    docs = window.documents
    if not docs:
        return ResultSet([], window.window_index)
    if stats is None:
        stats = build_stats(docs)
    rel = assemble_relevance_vectors(topic, docs, stats, params, window.end_ms)
    u = _linear(rel, weights.omega_r)
    order = sorted(range(len(docs)), key=lambda i: (-u[i], -docs[i].epoch_ms, docs[i].doc_id))[:K]
    if counters is not None:
        counters.utility_evals += len(docs)
    return ResultSet([ScoredItem(docs[i].doc_id, docs[i].epoch_ms, float(u[i]), window.window_index, docs[i])
                      for i in order], window.window_index)


def allbatch_step(all_docs_so_far: Sequence[Document], weights: WeightVector, K: int, *, topic: Topic,
                  window_index: int = 0, now_ms: int | None = None, stats: CorpusStats | None = None,
                  params: FeatureParams = FeatureParams(), counters: Counters | None = None,
                  backend: str | None = None) -> ResultSet:
    """Greedy selection of K items from scratch over every document seen so far."""
    seen, docs = set(), []
    for d in all_docs_so_far:
        if d.doc_id not in seen:
            seen.add(d.doc_id)
            docs.append(d)
    items = greedy_select(docs, [], weights, K, topic=topic, stats=stats, params=params, now_ms=now_ms,
                          counters=counters, window_index=window_index, backend=backend)
    return ResultSet(items, window_index)


def partition_windows(stream: Iterable[Document], window_length_ms: int,
                      origin_ms: int | None = None) -> list[CandidateWindow]:
    """Split a stream into consecutive half-open windows anchored at ``origin_ms``
    (default: the earliest timestamp).  Empty interior windows are kept."""
    if window_length_ms <= 0:
        raise ValueError("window_length must be positive")
    docs = sorted(stream, key=lambda d: d.epoch_ms)
    if not docs:
        return []
    origin = docs[0].epoch_ms if origin_ms is None else origin_ms
    if docs[0].epoch_ms < origin:
        raise ValueError("stream starts before the window origin")
    n = (docs[-1].epoch_ms - origin) // window_length_ms + 1
    buckets: list[list[Document]] = [[] for _ in range(n)]
    for d in docs:
        buckets[(d.epoch_ms - origin) // window_length_ms].append(d)
    return [CandidateWindow(w, origin + w * window_length_ms, origin + (w + 1) * window_length_ms, b)
            for w, b in enumerate(buckets)]


def run_stream(topic: Topic, stream: Sequence[Document], strategy: str, weights: WeightVector, K: int,
               window_length_ms: int, m: int = 10, *, params: FeatureParams = FeatureParams(),
               origin_ms: int | None = None, backend: str | None = None) -> list[ResultSet]:
    """Apply one strategy window by window; returns the result set after each window.

    Collection statistics are cumulative over the stream up to the current window.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if window_length_ms <= 0:
        raise ValueError("window_length must be positive")
    weights.check()
    if strategy == "dp" and not 0 < m <= K:
        raise ValueError(f"need 0 < m <= K, got m={m}, K={K}")
    windows = partition_windows(stream, window_length_ms, origin_ms)
    stats = CorpusStats()
    seen: list[Document] = []
    previous = ResultSet([], -1)
    out = []
    for window in windows:
        t0 = time.perf_counter()
        counters = Counters()
        stats.update(window.documents)
        seen.extend(window.documents)
        if strategy == "dp":
            result = dp_window_step(previous, window, weights, K, m, topic=topic, stats=stats,
                                    params=params, counters=counters, backend=backend)
        elif strategy == "toprel":
            result = toprel_window_step(previous, window, weights, K, topic=topic, stats=stats,
                                        params=params, counters=counters)
        else:
            result = allbatch_step(seen, weights, K, topic=topic, window_index=window.window_index,
                                   now_ms=window.end_ms, stats=stats, params=params,
                                   counters=counters, backend=backend)
        result.utility_evals = counters.utility_evals
        result.pair_evals = counters.pair_evals
        result.elapsed_s = time.perf_counter() - t0
        out.append(result)
        previous = result
    return out


RUN_HEADER = ("topic_id", "window_index", "rank", "doc_id", "epoch_ms", "utility")


def format_run(topic_id: str, results: Sequence[ResultSet]) -> list[str]:
    lines = []
    for rs in results:
        for rank, it in enumerate(rs.items, 1):
            lines.append(f"{topic_id}\t{rs.window_index}\t{rank}\t{it.doc_id}\t{it.epoch_ms}\t"
                         f"{it.utility_at_selection:.12g}")
    return lines


def write_run(blocks: Iterable[tuple[str, Sequence[ResultSet]]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(RUN_HEADER) + "\n")
        for topic_id, results in blocks:
            for line in format_run(topic_id, results):
                fh.write(line + "\n")
