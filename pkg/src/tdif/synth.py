"""Seeded synthetic topic streams with subtopic-level judgments.

Each topic has two query words and several subtopics, each with a small
vocabulary of its own.  Half of the subtopics are running when the stream
opens; the rest are born at staggered times, stay active for a few days and
then fade to a trickle, so fresh relevant material keeps moving to new
subtopics.  The youngest active subtopic is the loudest one.

Every day also carries a viral post about the loudest subtopic that is copied
many times (only the original is judged relevant), chatter that borrows the
topic's vocabulary without being about the query (judged non-relevant), and
unrelated noise (unjudged).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Document, Topic, write_jsonl, write_topics
from .metrics import DAY_MS, Qrels, write_qrels

EPOCH0_MS = 1_296_000_000_000  # late January 2011
_CONS = "bdfgklmnprtvz"
_VOWELS = "aou"


@dataclass(frozen=True)
class SynthConfig:
    topics: int = 5
    days: int = 16
    docs_per_day: int = 200
    seed: int = 0
    subtopics: int = 10
    active_days: float = 6.0
    trickle: float = 0.05
    relevant_share: float = 0.35
    duplicate_share: float = 0.12
    query_noise_share: float = 0.15
    hot_boost: float = 3.0
    subtopic_vocab: int = 6
    filler_max: int = 4


def _words(rng: np.random.Generator, n: int, taken: set[str], syllables: int = 3) -> list[str]:
    out = []
    while len(out) < n:
        w = "".join(rng.choice(list(_CONS)) + rng.choice(list(_VOWELS)) for _ in range(syllables))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


def _followers(rng: np.random.Generator) -> int:
    return int(min(5e6, math.floor(rng.lognormal(5.5, 2.0))))


def generate(cfg: SynthConfig) -> tuple[list[Document], list[Topic], Qrels]:
    if min(cfg.topics, cfg.days, cfg.docs_per_day) <= 0:
        raise ValueError("topics, days and docs_per_day must be positive")
    rng = np.random.default_rng(cfg.seed)
    taken: set[str] = set()
    filler = _words(rng, 400, taken, 2)
    zipf = 1.0 / np.arange(1, len(filler) + 1)
    zipf /= zipf.sum()
    horizon_ms = cfg.days * DAY_MS

    raw = []  # (epoch_ms, text, followers, retweets, topic_id, subtopic or None, grade)
    topics = []
    for k in range(cfg.topics):
        tid = f"T{k + 1:02d}"
        query = _words(rng, 2, taken)
        sub_vocab = [_words(rng, cfg.subtopic_vocab, taken) for _ in range(cfg.subtopics)]
        # half of the subtopics are already running when the stream opens; the rest arrive later
        early = cfg.subtopics // 2
        late = cfg.subtopics - early
        births = np.concatenate([-2.0 + 0.5 * np.arange(early),
                                 np.linspace(2.0, max(2.0, cfg.days - 4.0), late) if late else []])
        births = births + rng.uniform(0, 0.5, cfg.subtopics)
        topics.append(Topic.from_query(tid, " ".join(query), EPOCH0_MS + horizon_ms,
                                       [f"{tid}.{s + 1}" for s in range(cfg.subtopics)]))

        def intensity(day: float) -> np.ndarray:
            age = day - births
            # full rate while active, a thin trickle afterwards, nothing before birth;
            # the youngest active subtopic is the one everybody talks about
            rate = np.where(age < 0, 0.0, np.where(age < cfg.active_days, 1.0, cfg.trickle))
            active = np.flatnonzero((age >= 0) & (age < cfg.active_days))
            if active.size:
                rate[active[np.argmin(age[active])]] *= cfg.hot_boost
            return rate + 1e-3

        for day in range(cfg.days):
            n = cfg.docs_per_day
            n_rel = int(round(n * cfg.relevant_share))
            n_dup = int(round(n * cfg.duplicate_share))
            n_qn = int(round(n * cfg.query_noise_share))
            n_noise = n - n_rel - n_dup - n_qn
            day_ms = EPOCH0_MS + day * DAY_MS
            for _ in range(n_rel):
                t = day + rng.random()
                w = intensity(t)
                s = int(rng.choice(cfg.subtopics, p=w / w.sum()))
                hot = s == int(np.argmax(w))
                grade = 2 if rng.random() < (0.7 if hot else 0.3) else 1
                n_sub = int(rng.integers(3, 6))
                body = (list(rng.choice(sub_vocab[s], size=n_sub, replace=False))
                        + list(rng.choice(filler, size=int(rng.integers(1, cfg.filler_max)), p=zipf)))
                rng.shuffle(body)
                # strong posts quote the whole query, weaker ones often only part of it
                q = query if grade == 2 or rng.random() < 0.5 else [query[int(rng.integers(2))]]
                cut = int(rng.integers(0, len(body) + 1))
                words = body[:cut] + q + body[cut:]
                raw.append((int(EPOCH0_MS + t * DAY_MS), " ".join(words), _followers(rng),
                            int(rng.poisson(3)), tid, f"{tid}.{s + 1}", grade))
            # one viral post per day for the hottest subtopic, copied many times
            w = intensity(day + 0.5)
            hot = int(np.argmax(w))
            text = " ".join(["rt"] + query + list(sub_vocab[hot][:3]) + _words(rng, 1, taken))
            # only the original post is judged relevant; the copies add nothing new
            times = np.sort(day_ms + (rng.random(n_dup) * DAY_MS).astype(np.int64))
            for c, t in enumerate(times):
                raw.append((int(t), text, _followers(rng), int(rng.integers(200, 2000)), tid,
                            f"{tid}.{hot + 1}" if c == 0 else None, 2 if c == 0 else 0))
            # chatter that touches the topic's vocabulary without being about the query
            for _ in range(n_qn):
                w = intensity(day + rng.random())
                s = int(rng.choice(cfg.subtopics, p=w / w.sum()))
                words = ([query[int(rng.integers(2))]]
                         + list(rng.choice(sub_vocab[s], size=int(rng.integers(2, 4)), replace=False))
                         + list(rng.choice(filler, size=int(rng.integers(2, 6)), p=zipf)))
                rng.shuffle(words)
                raw.append((day_ms + int(rng.random() * DAY_MS), " ".join(words), _followers(rng),
                            int(rng.poisson(1)), tid, None, 0))
            for _ in range(n_noise):
                words = list(rng.choice(filler, size=int(rng.integers(4, 10)), p=zipf))
                raw.append((day_ms + int(rng.random() * DAY_MS), " ".join(words), _followers(rng),
                            int(rng.poisson(1)), None, None, None))

    order = sorted(range(len(raw)), key=lambda i: (raw[i][0], i))
    docs, qrels = [], Qrels()
    for rank, i in enumerate(order):
        epoch, text, followers, retweets, tid, sub, grade = raw[i]
        doc_id = f"tw{rank:07d}"
        docs.append(Document.from_text(doc_id, epoch, text, followers, retweets))
        if tid is not None and grade is not None:
            qrels.add(tid, sub if sub is not None else f"{tid}.1", doc_id, grade)
    return docs, topics, qrels


def write_dataset(cfg: SynthConfig, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    docs, topics, qrels = generate(cfg)
    paths = {"stream": out / "stream.jsonl", "topics": out / "topics.json", "qrels": out / "qrels.tsv"}
    write_jsonl(docs, paths["stream"])
    write_topics(topics, paths["topics"])
    write_qrels(qrels, paths["qrels"])
    return paths
