"""Stream ingestion, tokenization and collection statistics."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

from nltk.stem.porter import PorterStemmer


class DataError(ValueError):
    """Raised for malformed input files."""


_URL = re.compile(r"https?://\S*")
_SPLIT = re.compile(r"[^0-9a-z#@]+")
_stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


@lru_cache(maxsize=1 << 16)
def stem(token: str) -> str:
    # hashtag/mention prefixes stay attached; only the body is stemmed
    prefix = ""
    while token and token[0] in "#@":
        prefix += token[0]
        token = token[1:]
    if not token:
        return prefix
    return prefix + _stemmer.stem(token)


def tokenize(raw_text: str) -> list[str]:
    """Lowercase, drop URLs, split on anything but ``[0-9a-z#@]``, Porter-stem.

    Stopwords are kept.

    >>> tokenize("Obama Debates debate")
    ['obama', 'debat', 'debat']
    >>> tokenize("RT @bbc: win http://t.co/x")
    ['rt', '@bbc', 'win']
    """
    text = _URL.sub(" ", raw_text.lower())
    return [stem(t) for t in _SPLIT.split(text) if t]


@dataclass(frozen=True)
class Document:
    doc_id: str
    epoch_ms: int
    raw_text: str
    tokens: tuple[str, ...]
    followers: int = 0
    retweets: int = 0

    def __post_init__(self):
        if self.epoch_ms < 0:
            raise ValueError(f"{self.doc_id}: epoch_ms must be >= 0")
        if self.followers < 0 or self.retweets < 0:
            raise ValueError(f"{self.doc_id}: negative follower/retweet count")

    @classmethod
    def from_text(cls, doc_id: str, epoch_ms: int, text: str, followers: int = 0, retweets: int = 0) -> "Document":
        return cls(doc_id, int(epoch_ms), text, tuple(tokenize(text)), int(followers), int(retweets))

    def to_json(self) -> dict:
        return {
            "id": self.doc_id,
            "epoch_ms": self.epoch_ms,
            "text": self.raw_text,
            "followers": self.followers,
            "retweets": self.retweets,
        }


@dataclass(frozen=True)
class Topic:
    topic_id: str
    query_tokens: tuple[str, ...]
    tracking_epoch_ms: int
    subtopics: tuple[tuple[str, float], ...]
    query: str = ""

    def __post_init__(self):
        if not self.query_tokens:
            raise ValueError(f"topic {self.topic_id}: empty query")
        if not self.subtopics:
            raise ValueError(f"topic {self.topic_id}: no subtopics")
        total = math.fsum(p for _, p in self.subtopics)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"topic {self.topic_id}: subtopic probabilities sum to {total}")

    @classmethod
    def from_query(cls, topic_id: str, query: str, tracking_epoch_ms: int, subtopics) -> "Topic":
        """``subtopics`` is a sequence of ids or of ``(id, p)`` pairs; missing p means uniform."""
        subtopics = list(subtopics)
        ids = [s[0] if isinstance(s, (tuple, list)) else s for s in subtopics]
        probs = [s[1] if isinstance(s, (tuple, list)) else None for s in subtopics]
        if any(p is None for p in probs):
            probs = [1.0 / len(ids)] * len(ids)
        return cls(topic_id, tuple(tokenize(query)), int(tracking_epoch_ms),
                   tuple(zip(map(str, ids), map(float, probs))), query)

    @property
    def subtopic_ids(self) -> list[str]:
        return [s for s, _ in self.subtopics]

    def to_json(self) -> dict:
        return {
            "topic_id": self.topic_id,
            "query": self.query or " ".join(self.query_tokens),
            "tracking_epoch_ms": self.tracking_epoch_ms,
            "subtopics": [{"id": s, "p": p} for s, p in self.subtopics],
        }


@dataclass
class CorpusStats:
    doc_count: int = 0
    total_tokens: int = 0
    doc_frequency: Counter = field(default_factory=Counter)
    collection_frequency: Counter = field(default_factory=Counter)

    @property
    def avg_doc_len(self) -> float:
        return self.total_tokens / self.doc_count if self.doc_count else 0.0

    def update(self, documents: Iterable[Document]) -> "CorpusStats":
        """Extend in place with more documents; returns self."""
        for doc in documents:
            self.doc_count += 1
            self.total_tokens += len(doc.tokens)
            self.collection_frequency.update(doc.tokens)
            self.doc_frequency.update(set(doc.tokens))
        return self

    def copy(self) -> "CorpusStats":
        return CorpusStats(self.doc_count, self.total_tokens,
                           Counter(self.doc_frequency), Counter(self.collection_frequency))


def build_stats(documents: Iterable[Document]) -> CorpusStats:
    return CorpusStats().update(documents)


_REQUIRED = ("id", "epoch_ms", "text", "followers", "retweets")


def parse_document(obj: dict, where: str = "") -> Document:
    for name in _REQUIRED:
        if name not in obj:
            raise DataError(f"{where}missing field {name}")
    try:
        return Document.from_text(str(obj["id"]), int(obj["epoch_ms"]), str(obj["text"]),
                                  int(obj["followers"]), int(obj["retweets"]))
    except (TypeError, ValueError) as exc:
        raise DataError(f"{where}{exc}") from exc


def ingest_jsonl(path: str | Path) -> list[Document]:
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise DataError(f"line {lineno}: expected a JSON object")
            doc = parse_document(obj, f"line {lineno}: ")
            if doc.doc_id in seen:
                raise DataError(f"line {lineno}: duplicate doc_id {doc.doc_id}")
            seen.add(doc.doc_id)
            docs.append(doc)
    return docs


def write_jsonl(documents: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in documents:
            fh.write(json.dumps(doc.to_json(), ensure_ascii=False) + "\n")


def load_topics(path: str | Path) -> list[Topic]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("topics", [data])
    topics = []
    for i, obj in enumerate(data):
        try:
            subs = [(s["id"], s["p"]) if "p" in s else s["id"] for s in obj["subtopics"]]
            topics.append(Topic.from_query(str(obj["topic_id"]), obj["query"],
                                           int(obj["tracking_epoch_ms"]), subs))
        except KeyError as exc:
            raise DataError(f"topic {i}: missing field {exc.args[0]}") from exc
        except ValueError as exc:
            raise DataError(str(exc)) from exc
    return topics


def write_topics(topics: Sequence[Topic], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([t.to_json() for t in topics], fh, indent=1)
        fh.write("\n")
