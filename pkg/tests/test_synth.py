import pytest

from tdif.corpus import ingest_jsonl, load_topics
from tdif.metrics import load_qrels
from tdif.synth import SynthConfig, generate, write_dataset

SMALL = SynthConfig(topics=2, days=6, docs_per_day=50, seed=4)


def test_same_seed_same_data_and_different_seed_differs():
    a, b = generate(SMALL), generate(SMALL)
    assert a[0] == b[0] and a[1] == b[1] and a[2] == b[2]
    c = generate(SynthConfig(topics=2, days=6, docs_per_day=50, seed=5))
    assert [d.raw_text for d in c[0]] != [d.raw_text for d in a[0]]


def test_sizes_and_ordering():
    docs, topics, qrels = generate(SMALL)
    assert len(docs) == 2 * 6 * 50
    assert len(topics) == 2
    assert [d.epoch_ms for d in docs] == sorted(d.epoch_ms for d in docs)
    assert len({d.doc_id for d in docs}) == len(docs)


def test_referential_integrity(tmp_path):
    paths = write_dataset(SMALL, tmp_path)
    docs = {d.doc_id: d for d in ingest_jsonl(paths["stream"])}
    topics = load_topics(paths["topics"])
    qrels = load_qrels(paths["qrels"])
    subtopics = {s for t in topics for s, _ in t.subtopics}
    assert set(qrels.judgments) == {t.topic_id for t in topics}
    for tid, subs in qrels.judgments.items():
        for sub, judged in subs.items():
            assert sub in subtopics and sub.startswith(tid + ".")
            assert set(judged) <= set(docs)
    for t in topics:
        assert t.tracking_epoch_ms >= max(d.epoch_ms for d in docs.values())
        relevant = [d for d in qrels.judged_docs(t.topic_id) if qrels.max_grade(t.topic_id, d) > 0]
        assert relevant


def test_only_the_first_copy_of_a_viral_post_is_relevant():
    docs, topics, qrels = generate(SMALL)
    by_text = {}
    for d in docs:
        by_text.setdefault(d.raw_text, []).append(d)
    copies = [group for text, group in by_text.items() if text.startswith("rt ") and len(group) > 1]
    assert copies
    for group in copies:
        grades = [max(qrels.max_grade(t.topic_id, d.doc_id) for t in topics) for d in group]
        assert grades[0] == 2 and sum(grades[1:]) == 0


def test_rejects_empty_configuration():
    with pytest.raises(ValueError):
        generate(SynthConfig(topics=0))
