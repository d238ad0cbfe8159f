import numpy as np
import pytest

from tdif.corpus import build_stats
from tdif.divfeat import diversity_vector
from tdif.plsa import plsa_fit
from tdif.relfeat import FEATURES, FeatureParams, assemble_relevance_vectors
from tdif.select import (CandidateWindow, Counters, ResultSet, SchemaError, ScoredItem, WeightVector,
                         allbatch_step, dp_window_step, format_run, greedy_select, partition_windows,
                         run_stream, toprel_window_step, utility_score)

from conftest import HOUR, T0, doc, random_docs

PARAMS = FeatureParams(plsa_topics=3)


def random_weights(rng, diversity=True):
    return WeightVector(list(rng.normal(size=len(FEATURES))),
                        list(rng.normal(size=3) if diversity else np.zeros(3)))


def oracle_greedy(pool, anchors, relevance, weights, m, stats, model):
    """Plain per-step argmax over utility_score, written without the vectorized kernel."""
    chosen, remaining = [], list(range(len(pool)))
    while remaining and len(chosen) < m:
        selected = list(anchors) + [pool[i] for i in chosen]
        scores = {}
        for i in remaining:
            rel = [diversity_vector(pool[i], s, stats, model, PARAMS.kl_eps) for s in selected]
            scores[i] = utility_score(relevance[i], rel, weights)
        best = max(scores.values())
        tied = [i for i in remaining if scores[i] >= best - 1e-12 * max(1.0, abs(best))]
        pick = min(tied, key=lambda i: (-pool[i].epoch_ms, pool[i].doc_id))
        chosen.append(pick)
        remaining.remove(pick)
    return [(pool[i].doc_id, scores_i) for i, scores_i in zip(chosen, [None] * len(chosen))]


@pytest.mark.parametrize("seed", range(12))
def test_greedy_matches_independent_argmax(topic, seed):
    rng = np.random.default_rng(seed)
    pool = random_docs(rng, int(rng.integers(5, 16)), prefix="p")
    anchors = random_docs(rng, int(rng.integers(0, 4)), prefix="a", start=T0 - 48 * HOUR)
    stats = build_stats(pool + anchors)
    model = plsa_fit(pool, Z=3, seed=0)
    relevance = assemble_relevance_vectors(topic, pool, stats, PARAMS, T0 + 48 * HOUR)
    weights = random_weights(rng)
    m = int(rng.integers(1, len(pool) + 2))
    got = greedy_select(pool, anchors, weights, m, topic=topic, stats=stats, params=PARAMS,
                        model=model, relevance=relevance)
    want = oracle_greedy(pool, anchors, relevance, weights, m, stats, model)
    assert [it.doc_id for it in got] == [d for d, _ in want]
    assert len(got) == min(m, len(pool))


def test_recorded_utility_is_the_utility_at_pick_time(topic, rng):
    pool = random_docs(rng, 10)
    stats = build_stats(pool)
    model = plsa_fit(pool, Z=3, seed=0)
    rel = assemble_relevance_vectors(topic, pool, stats, PARAMS, T0)
    weights = random_weights(rng)
    got = greedy_select(pool, [], weights, 4, topic=topic, stats=stats, params=PARAMS, model=model, relevance=rel)
    by_id = {d.doc_id: i for i, d in enumerate(pool)}
    for k, it in enumerate(got):
        before = [pool[by_id[p.doc_id]] for p in got[:k]]
        dv = [diversity_vector(pool[by_id[it.doc_id]], s, stats, model) for s in before]
        assert it.utility_at_selection == pytest.approx(utility_score(rel[by_id[it.doc_id]], dv, weights),
                                                        rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("omega_d", [[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.5, 0.2, 0.3]])
def test_exact_duplicates_break_ties_by_time_then_id(topic, omega_d):
    text = "storm flood river"
    pool = [doc("b", text, T0), doc("a", text, T0), doc("c", text, T0 + 5), doc("z", "school road power")]
    weights = WeightVector([0.0] * len(FEATURES), omega_d)
    rel = np.zeros((4, len(FEATURES)))
    got = greedy_select(pool, [], weights, 3, topic=topic, params=PARAMS, relevance=rel)
    ids = [it.doc_id for it in got]
    if omega_d[0] == 0.0 and omega_d[1] == 0.0 and omega_d[2] == 0.0:
        assert ids == ["c", "a", "b"]  # everything ties: newest first, then smaller id
    else:
        # the first pick is the newest duplicate; the distinct doc is more diverse than the other copies
        assert ids[:2] == ["c", "z"]


def test_recency_free_ties_use_doc_id(topic):
    pool = [doc("d2", "storm"), doc("d1", "storm"), doc("d3", "storm")]
    got = greedy_select(pool, [], WeightVector.zeros(), 3, topic=topic, params=PARAMS,
                        relevance=np.zeros((3, len(FEATURES))))
    assert [it.doc_id for it in got] == ["d1", "d2", "d3"]


def test_greedy_edge_cases(topic):
    assert greedy_select([], [], WeightVector.zeros(), 3, topic=topic) == []
    assert greedy_select([doc("a", "storm")], [], WeightVector.zeros(), 0, topic=topic) == []


def _window(i, docs, length=HOUR, origin=T0):
    return CandidateWindow(i, origin + i * length, origin + (i + 1) * length, docs)


def test_dp_strict_m_fixture(topic):
    weights = WeightVector([1.0] + [0.0] * (len(FEATURES) - 1), [0.5, 0.5, 0.0])
    w0 = _window(0, [doc("a", "storm flood", T0 + 1), doc("b", "storm", T0 + 2)])
    w1 = _window(1, [doc("c", "flood river", T0 + HOUR + 1)])
    w2 = _window(2, [])
    r0 = dp_window_step(ResultSet([], -1), w0, weights, K=2, m=1, topic=topic, params=PARAMS)
    assert len(r0) == 1
    r1 = dp_window_step(r0, w1, weights, K=2, m=1, topic=topic, params=PARAMS)
    assert sorted(r1.doc_ids) == sorted(r0.doc_ids + ["c"])
    r2 = dp_window_step(r1, w2, weights, K=2, m=1, topic=topic, params=PARAMS)
    best = max(r1.items, key=lambda it: (it.utility_at_selection, it.epoch_ms))
    assert r2.doc_ids == [best.doc_id]
    with pytest.raises(ValueError):
        dp_window_step(r0, w1, weights, K=2, m=3, topic=topic)


def test_dp_retains_by_recorded_utility(topic):
    items = [ScoredItem(f"x{i}", T0 - i, float(u), 0, doc(f"x{i}", "storm", T0 - i))
             for i, u in enumerate([0.3, 0.9, 0.1, 0.5])]
    prev = ResultSet(items, 0)
    out = dp_window_step(prev, _window(1, []), WeightVector.zeros(), K=4, m=2, topic=topic, params=PARAMS)
    assert set(out.doc_ids) == {"x1", "x3"}


def test_result_sets_are_newest_first():
    items = [ScoredItem("b", 5, 0.0, 0), ScoredItem("a", 5, 0.0, 0), ScoredItem("c", 9, 0.0, 0)]
    assert ResultSet(items).doc_ids == ["c", "a", "b"]
    with pytest.raises(ValueError):
        ResultSet([ScoredItem("a", 1, 0, 0), ScoredItem("a", 2, 0, 0)])


def test_dp_with_m_equal_k_matches_allbatch_on_one_window(topic, rng):
    docs = random_docs(rng, 30, span_ms=HOUR)
    weights = random_weights(rng)
    window = CandidateWindow(0, T0, T0 + HOUR, docs)
    stats = build_stats(docs)
    dp = dp_window_step(ResultSet([], -1), window, weights, K=6, m=6, topic=topic, stats=stats, params=PARAMS)
    ab = allbatch_step(docs, weights, 6, topic=topic, now_ms=T0 + HOUR, stats=stats, params=PARAMS)
    assert dp.doc_ids == ab.doc_ids


def test_toprel_ignores_diversity_weights(topic, rng):
    docs = random_docs(rng, 25, span_ms=HOUR)
    window = CandidateWindow(0, T0, T0 + HOUR, docs)
    w = random_weights(rng)
    w2 = WeightVector(w.omega_r, [5.0, -3.0, 2.0])
    a = toprel_window_step(None, window, w, 5, topic=topic)
    b = toprel_window_step(None, window, w2, 5, topic=topic)
    assert a.doc_ids == b.doc_ids and len(a) == 5
    assert toprel_window_step(None, _window(1, []), w, 5, topic=topic).doc_ids == []


def test_dp_does_less_work_than_allbatch(topic):
    rng = np.random.default_rng(3)
    stream = random_docs(rng, 240, span_ms=6 * HOUR)
    weights = random_weights(rng)
    K, m = 8, 3
    dp = run_stream(topic, stream, "dp", weights, K, HOUR, m, params=PARAMS, origin_ms=T0)
    ab = run_stream(topic, stream, "allbatch", weights, K, HOUR, params=PARAMS, origin_ms=T0)
    windows = partition_windows(stream, HOUR, T0)
    for w, d, a in zip(windows, dp, ab):
        assert d.utility_evals <= len(w.documents) * m
        if w.window_index >= 1:
            assert d.utility_evals < a.utility_evals
    # the set grows by m per window until it is full
    assert [len(r) for r in dp] == [min(K, m * (i + 1)) for i in range(len(dp))]


def test_partition_windows_keeps_empty_interior_windows():
    stream = [doc("a", "x", T0), doc("b", "x", T0 + 3 * HOUR - 1), doc("c", "x", T0 + 3 * HOUR)]
    ws = partition_windows(stream, HOUR)
    assert [len(w.documents) for w in ws] == [1, 0, 1, 1]
    assert ws[3].start_ms == T0 + 3 * HOUR
    assert partition_windows([], HOUR) == []
    with pytest.raises(ValueError):
        partition_windows(stream, 0)
    with pytest.raises(ValueError):
        CandidateWindow(0, T0, T0 + 1, [doc("late", "x", T0 + 1)])


def test_weight_schema_checks(tmp_path):
    w = WeightVector.zeros()
    with pytest.raises(SchemaError):
        WeightVector([0.0] * 3, [0.0] * 3).check()
    with pytest.raises(SchemaError):
        utility_score([0.0] * 3, [], w)
    with pytest.raises(ValueError):
        WeightVector([float("nan")] * len(FEATURES), [0.0] * 3)
    w.save(tmp_path / "w.json")
    assert WeightVector.load(tmp_path / "w.json") == w


def test_utility_score_min_aggregate():
    w = WeightVector([1.0] + [0.0] * (len(FEATURES) - 1), [1.0, 2.0, 4.0])
    x = [0.5] + [0.0] * (len(FEATURES) - 1)
    rels = [[0.2, 0.8, 1.0], [0.6, 0.4, 3.0]]
    # min of (0.2, 0.4, kl 1 -> 0.5)
    assert utility_score(x, rels, w) == pytest.approx(0.5 + 0.2 + 0.8 + 2.0)
    assert utility_score(x, [], w) == 0.5


def test_format_run_ranks_follow_display_order():
    rs = ResultSet([ScoredItem("old", 1, 0.5, 0), ScoredItem("new", 2, 0.25, 0)], 0)
    assert format_run("T1", [rs]) == ["T1\t0\t1\tnew\t2\t0.25", "T1\t0\t2\told\t1\t0.5"]


def test_counters_accumulate(topic, rng):
    c = Counters()
    pool = random_docs(rng, 10)
    greedy_select(pool, [], WeightVector.zeros(), 3, topic=topic, counters=c, params=PARAMS)
    assert c.utility_evals == 10 + 9 + 8
