import os
import subprocess
import sys

import numpy as np
import pytest

from tdif import kernels
from tdif.corpus import build_stats
from tdif.relfeat import FEATURES, FeatureParams
from tdif.select import WeightVector, greedy_select, run_stream

from conftest import HOUR, T0, doc, random_docs

needs_cython = pytest.mark.skipif("cython" not in kernels.available_backends(),
                                  reason="compiled extension not built")


@needs_cython
@pytest.mark.parametrize("seed", range(10))
def test_backends_agree_exactly(topic, seed):
    rng = np.random.default_rng(100 + seed)
    pool = random_docs(rng, int(rng.integers(1, 60)))
    anchors = random_docs(rng, int(rng.integers(0, 6)), prefix="a", start=T0 - 10 * HOUR)
    weights = WeightVector(list(rng.normal(size=len(FEATURES))), list(rng.normal(size=3)))
    kw = dict(topic=topic, stats=build_stats(pool + anchors), params=FeatureParams(plsa_topics=3), now_ms=T0)
    m = int(rng.integers(1, 15))
    py = greedy_select(pool, anchors, weights, m, backend="python", **kw)
    cy = greedy_select(pool, anchors, weights, m, backend="cython", **kw)
    assert [(i.doc_id, i.utility_at_selection) for i in py] == [(i.doc_id, i.utility_at_selection) for i in cy]


@needs_cython
def test_backends_agree_on_duplicates(topic):
    pool = [doc(f"d{i}", "storm flood", T0 + i % 3) for i in range(12)]
    weights = WeightVector([0.0] * len(FEATURES), [1.0, 1.0, 1.0])
    runs = [greedy_select(pool, [], weights, 6, topic=topic, backend=b) for b in ("python", "cython")]
    assert [i.doc_id for i in runs[0]] == [i.doc_id for i in runs[1]]


@needs_cython
def test_full_stream_identical_across_backends(topic):
    stream = random_docs(np.random.default_rng(9), 150, span_ms=5 * HOUR)
    w = WeightVector([1.0] * len(FEATURES), [0.5, 0.5, 0.5])
    a = run_stream(topic, stream, "dp", w, 6, HOUR, 3, backend="python")
    b = run_stream(topic, stream, "dp", w, 6, HOUR, 3, backend="cython")
    assert [r.doc_ids for r in a] == [r.doc_ids for r in b]
    assert [r.utility_evals for r in a] == [r.utility_evals for r in b]


def test_set_backend():
    before = kernels.get_backend()
    try:
        kernels.set_backend("python")
        assert kernels.get_backend() == "python"
        with pytest.raises(ValueError):
            kernels.set_backend("fortran")
        kernels.set_backend("auto")
        assert kernels.get_backend() in kernels.available_backends()
    finally:
        kernels.set_backend(before)


def test_pure_python_environment_switch():
    env = dict(os.environ, TDIF_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from tdif import kernels; print(kernels.get_backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
