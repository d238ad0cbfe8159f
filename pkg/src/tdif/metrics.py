"""Intent-aware diversity measures (alpha-NDCG, ERR-IA, NRBP) and their dynamic variants.

All six share one form: a probability-weighted sum over subtopics of
per-rank gains ``g * (1 - alpha)^c`` divided by a rank discount, normalized by
the same sum for a greedily built ideal ranking.  The dynamic variants
multiply each gain by ``gamma ** t_rcy * u_r`` (recency grade and source
confidence grade).
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import DataError, Document, Topic

DAY_MS = 86_400_000
DISCOUNTS = ("ndcg", "err", "nrbp")
MEASURES = {
    "alpha-ndcg": ("ndcg", False),
    "err-ia": ("err", False),
    "nrbp": ("nrbp", False),
    "d-ndcg": ("ndcg", True),
    "d-err": ("err", True),
    "d-nrbp": ("nrbp", True),
}


@dataclass
class Qrels:
    # topic -> subtopic -> doc -> grade in {0, 1, 2}
    judgments: dict[str, dict[str, dict[str, int]]] = field(default_factory=dict)
    # (topic, doc) -> t_rcy grade; a float lag in days when raw recency is in use
    recency_grade: dict[tuple[str, str], float] = field(default_factory=dict)
    # doc -> u_r in {1, 2, 3}
    confidence_grade: dict[str, int] = field(default_factory=dict)

    def add(self, topic_id: str, subtopic_id: str, doc_id: str, grade: int) -> None:
        if grade not in (0, 1, 2):
            raise DataError(f"grade {grade} outside {{0,1,2}} for {topic_id}/{subtopic_id}/{doc_id}")
        self.judgments.setdefault(topic_id, {}).setdefault(subtopic_id, {})[doc_id] = grade

    def judged_docs(self, topic_id: str) -> set[str]:
        return {d for sub in self.judgments.get(topic_id, {}).values() for d in sub}

    def grade(self, topic_id: str, subtopic_id: str, doc_id: str) -> int:
        return self.judgments.get(topic_id, {}).get(subtopic_id, {}).get(doc_id, 0)

    def max_grade(self, topic_id: str, doc_id: str) -> int:
        return max((sub.get(doc_id, 0) for sub in self.judgments.get(topic_id, {}).values()), default=0)


@dataclass(frozen=True)
class MetricParams:
    alpha: float = 0.5
    gamma: float = 0.5
    beta: float = 0.8
    cutoff: int = 20
    discount_kind: str = "ndcg"
    dynamic: bool = False
    raw_recency: bool = False

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if not 0 < self.beta < 1:
            raise ValueError("beta must be in (0, 1)")
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        if self.discount_kind not in DISCOUNTS:
            raise ValueError(f"discount_kind must be one of {DISCOUNTS}")

    @classmethod
    def for_measure(cls, name: str, **kwargs) -> "MetricParams":
        kind, dynamic = MEASURES[name]
        return cls(discount_kind=kind, dynamic=dynamic, **kwargs)


def discount(k: int, params: MetricParams) -> float:
    """Rank discount D_k for 1-based rank k."""
    if params.discount_kind == "ndcg":
        return math.log2(k + 1)
    if params.discount_kind == "err":
        return float(k)
    return (1.0 / params.beta) ** (k - 1)


def rescale_recency(topic: Topic, doc: Document, thresholds: tuple[int, int] = (2 * DAY_MS, 7 * DAY_MS),
                    now_ms: int | None = None) -> int:
    """0 = latest, 1 = recent, 2 = history."""
    thr1, thr2 = thresholds
    if thr1 >= thr2:
        raise ValueError("recency thresholds must be increasing")
    now = topic.tracking_epoch_ms if now_ms is None else now_ms
    lag = max(0, now - doc.epoch_ms)
    if lag <= thr1:
        return 0
    if lag <= thr2:
        return 1
    return 2


def rescale_confidence(followers: int, thresholds: tuple[float, float] = (1e3, 1e5)) -> int:
    """1 = normal, 2 = important, 3 = significant account."""
    lo, hi = thresholds
    if followers >= hi:
        return 3
    if followers >= lo:
        return 2
    return 1


def _factor(topic_id: str, doc_id: str, qrels: Qrels, params: MetricParams) -> float:
    if not params.dynamic:
        return 1.0
    t = qrels.recency_grade.get((topic_id, doc_id), 0)
    u = qrels.confidence_grade.get(doc_id, 1)
    return params.gamma ** t * u


def _binary(topic_id: str, subtopic_id: str, doc_id: str, qrels: Qrels) -> int:
    return 1 if qrels.grade(topic_id, subtopic_id, doc_id) >= 1 else 0


def gain_at_rank(ranking: Sequence[str], k: int, subtopic_id: str, qrels: Qrels, params: MetricParams,
                 topic_id: str) -> float:
    """Gain of the document at 1-based rank ``k`` for one subtopic (undiscounted)."""
    if not 1 <= k <= len(ranking):
        raise ValueError(f"rank {k} outside ranking of length {len(ranking)}")
    doc = ranking[k - 1]
    g = _binary(topic_id, subtopic_id, doc, qrels)
    if not g:
        return 0.0
    c = sum(_binary(topic_id, subtopic_id, d, qrels) for d in ranking[:k - 1])
    return g * (1 - params.alpha) ** c * _factor(topic_id, doc, qrels, params)


def _raw_score(ranking: Sequence[str], topic: Topic, qrels: Qrels, params: MetricParams) -> float:
    tid = topic.topic_id
    counts = defaultdict(int)
    total = 0.0
    for k, doc in enumerate(ranking[:params.cutoff], 1):
        f = _factor(tid, doc, qrels, params)
        d = discount(k, params)
        for sub, p in topic.subtopics:
            if _binary(tid, sub, doc, qrels):
                total += p * (1 - params.alpha) ** counts[sub] * f / d
                counts[sub] += 1
    return total


def ideal_ranking(topic: Topic, qrels: Qrels, params: MetricParams,
                  pool: Iterable[str] | None = None, tiebreak=None) -> list[str]:
    """Greedy ranking of the judged pool maximizing each rank's gain.

    Ties go to the smallest ``tiebreak(doc_id)`` (default: the doc_id itself).
    """
    tid = topic.topic_id
    candidates = sorted(qrels.judged_docs(tid) if pool is None else set(pool), key=tiebreak)
    rel = {}
    for doc in candidates:
        subs = [(s, p) for s, p in topic.subtopics if _binary(tid, s, doc, qrels)]
        if subs:
            rel[doc] = (subs, _factor(tid, doc, qrels, params))
    counts = defaultdict(int)
    remaining = [d for d in candidates if d in rel]
    out: list[str] = []
    while remaining and len(out) < params.cutoff:
        best, best_gain = None, -1.0
        for doc in remaining:
            subs, f = rel[doc]
            gain = sum(p * (1 - params.alpha) ** counts[s] for s, p in subs) * f
            if gain > best_gain:
                best, best_gain = doc, gain
        out.append(best)
        remaining.remove(best)
        for s, _ in rel[best][0]:
            counts[s] += 1
    return out


def diversity_measure(ranking: Sequence[str], topic: Topic, qrels: Qrels, params: MetricParams = MetricParams(),
                      pool: Iterable[str] | None = None) -> float:
    if topic.topic_id not in qrels.judgments:
        raise KeyError(f"topic {topic.topic_id} has no judgments")
    norm = _raw_score(ideal_ranking(topic, qrels, params, pool), topic, qrels, params)
    if norm <= 0:
        return 0.0
    # greedy ideal is not always optimal; keep the score inside [0, 1]
    return min(1.0, _raw_score(ranking, topic, qrels, params) / norm)


# --- file formats -------------------------------------------------------------

def load_qrels(path: str | Path, sidecar: str | Path | None = None) -> Qrels:
    qrels = Qrels()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0] == "topic_id":
                continue
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns")
            try:
                qrels.add(parts[0], parts[1], parts[2], int(parts[3]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if sidecar is not None:
        with open(sidecar, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts or parts[0] == "topic_id":
                    continue
                if len(parts) != 4:
                    raise DataError(f"{sidecar}:{lineno}: expected 4 columns")
                t_rcy, u_r = int(parts[2]), int(parts[3])
                if t_rcy not in (0, 1, 2) or u_r not in (1, 2, 3):
                    raise DataError(f"{sidecar}:{lineno}: grade out of range")
                qrels.recency_grade[(parts[0], parts[1])] = t_rcy
                qrels.confidence_grade[parts[1]] = u_r
    return qrels


def write_qrels(qrels: Qrels, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("topic_id\tsubtopic_id\tdoc_id\tgrade\n")
        for tid, subs in qrels.judgments.items():
            for sub, docs in subs.items():
                for doc, g in docs.items():
                    fh.write(f"{tid}\t{sub}\t{doc}\t{g}\n")


def read_run(path: str | Path) -> dict[tuple[str, int], list[str]]:
    rows = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split("\t")
            if not parts[0] or parts[0] == "topic_id":
                continue
            if len(parts) != 6:
                raise DataError(f"{path}:{lineno}: expected 6 tab-separated columns")
            try:
                rows[(parts[0], int(parts[1]))].append((int(parts[2]), parts[3]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return {key: [d for _, d in sorted(v)] for key, v in rows.items()}


# --- run evaluation -------------------------------------------------------------

def window_view(qrels: Qrels, topic: Topic, docs: Mapping[str, Document], now_ms: int,
                thresholds: tuple[int, int] = (2 * DAY_MS, 7 * DAY_MS), raw_recency: bool = False) -> Qrels:
    """Qrels with recency/confidence grades filled for documents lacking sidecar values."""
    recency = dict(qrels.recency_grade)
    confidence = dict(qrels.confidence_grade)
    tid = topic.topic_id
    for doc_id in qrels.judged_docs(tid):
        doc = docs.get(doc_id)
        if doc is None:
            continue
        if raw_recency:
            recency[(tid, doc_id)] = max(0, now_ms - doc.epoch_ms) / DAY_MS
        elif (tid, doc_id) not in qrels.recency_grade:
            recency[(tid, doc_id)] = rescale_recency(topic, doc, thresholds, now_ms)
        confidence.setdefault(doc_id, rescale_confidence(doc.followers))
    return replace(qrels, recency_grade=recency, confidence_grade=confidence)


def evaluate_run(run: Mapping[tuple[str, int], Sequence[str]], topics: Sequence[Topic], qrels: Qrels,
                 measures: Sequence[str] = ("alpha-ndcg", "d-ndcg"), *,
                 stream: Sequence[Document] | None = None, window_length_ms: int = 2 * DAY_MS,
                 origin_ms: int | None = None, base: MetricParams = MetricParams()) -> list[tuple[str, int, str, float]]:
    """Score every (topic, window); appends per-window means over topics as topic ``mean``.

    With a stream, each window is judged against the documents published
    before its end, and recency is measured from that end.
    """
    by_id = {t.topic_id: t for t in topics}
    unknown = sorted({tid for tid, _ in run if tid not in by_id})
    if unknown:
        raise DataError(f"run references unknown topics: {', '.join(unknown)}")
    for name in measures:
        if name not in MEASURES:
            raise ValueError(f"unknown measure {name!r}")

    docs: dict[str, Document] = {}
    if stream:
        from .select import partition_windows
        docs = {d.doc_id: d for d in stream}
        windows = [(w.window_index, w.end_ms) for w in partition_windows(stream, window_length_ms, origin_ms)]
    else:
        windows = [(w, None) for w in sorted({w for _, w in run})]

    rows = []
    for topic in topics:
        if topic.topic_id not in qrels.judgments:
            raise DataError(f"topic {topic.topic_id} absent from qrels")
        for w, end in windows:
            ranking = run.get((topic.topic_id, w), [])
            if end is not None:
                view = window_view(qrels, topic, docs, end, raw_recency=base.raw_recency)
                pool = [d for d in qrels.judged_docs(topic.topic_id) if d in docs and docs[d].epoch_ms < end]
            else:
                view, pool = qrels, None
            for name in measures:
                kind, dynamic = MEASURES[name]
                params = replace(base, discount_kind=kind, dynamic=dynamic)
                rows.append((topic.topic_id, w, name, diversity_measure(ranking, topic, view, params, pool)))
    means = defaultdict(list)
    for _, w, name, v in rows:
        means[(w, name)].append(v)
    for (w, name), vals in sorted(means.items()):
        rows.append(("mean", w, name, math.fsum(vals) / len(vals)))
    return rows


def write_scores(rows: Iterable[tuple[str, int, str, float]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["topic_id", "window_index", "metric", "value"])
        for tid, w, name, v in rows:
            writer.writerow([tid, w, name, f"{v:.12g}"])
