import numpy as np
import pytest

from tdif.corpus import Document, Topic

T0 = 1_300_000_000_000
HOUR = 3_600_000

WORDS = ["storm", "flood", "river", "bridge", "closed", "rescue", "team", "rain", "city", "power",
         "outage", "school", "road", "water", "level", "#flood", "@mayor", "update", "night", "north"]


def doc(doc_id, text, epoch_ms=T0, followers=0, retweets=0):
    return Document.from_text(doc_id, epoch_ms, text, followers, retweets)


def random_docs(rng, n, prefix="d", span_ms=48 * HOUR, words=WORDS, min_len=3, max_len=9, start=T0):
    out = []
    for i in range(n):
        k = int(rng.integers(min_len, max_len + 1))
        text = " ".join(rng.choice(words, size=k))
        out.append(Document.from_text(f"{prefix}{i:03d}", start + int(rng.integers(0, span_ms)), text,
                                      int(rng.integers(0, 10_000)), int(rng.integers(0, 50))))
    return out


@pytest.fixture
def topic():
    return Topic.from_query("T1", "storm flood", T0 + 48 * HOUR, ["T1.a", "T1.b"])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
