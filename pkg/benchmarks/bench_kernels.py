"""Compare the compiled greedy kernel with the numpy fallback.

Times the kernel call alone (feature and PLSA preparation are shared and
excluded) on synthetic pools of increasing size, and checks that both
backends pick the same documents.

    python benchmarks/bench_kernels.py [--sizes 500,2000,5000] [--m 10] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tdif import kernels
from tdif.corpus import build_stats
from tdif.relfeat import FEATURES, FeatureParams, assemble_relevance_vectors
from tdif.select import WeightVector, fit_pool_model, greedy_select
from tdif.synth import SynthConfig, generate


def _timed(name, sink):
    inner = kernels._backends[name]

    def run(*args):
        t0 = time.perf_counter()
        out = inner(*args)
        sink.append(time.perf_counter() - t0)
        return out
    return run


def bench(size: int, m: int, anchors: int, repeat: int) -> dict:
    docs, topics, _ = generate(SynthConfig(topics=1, days=1, docs_per_day=size + anchors, seed=size))
    pool, fixed = docs[:size], docs[size:]
    topic = topics[0]
    params = FeatureParams()
    stats = build_stats(docs)
    relevance = assemble_relevance_vectors(topic, pool, stats, params)
    model = fit_pool_model(pool, params)
    rng = np.random.default_rng(0)
    weights = WeightVector(list(rng.random(len(FEATURES))), [0.5, 0.5, 0.5])
    row = {"size": size}
    picks = {}
    for name in kernels.available_backends():
        times: list[float] = []
        kernels._backends[name], original = _timed(name, times), kernels._backends[name]
        try:
            for _ in range(repeat):
                picked = greedy_select(pool, fixed, weights, m, topic=topic, stats=stats, params=params,
                                       model=model, relevance=relevance, backend=name)
        finally:
            kernels._backends[name] = original
        row[name] = 1000 * min(times)
        picks[name] = [p.doc_id for p in picked]
    row["same"] = len({tuple(p) for p in picks.values()}) == 1
    return row


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="500,2000,5000")
    ap.add_argument("--m", type=int, default=10)
    ap.add_argument("--anchors", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    names = kernels.available_backends()
    print("pool\t" + "\t".join(f"{n}_ms" for n in names) + "\tspeedup\tidentical")
    for size in (int(s) for s in args.sizes.split(",")):
        row = bench(size, args.m, args.anchors, args.repeat)
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        cols = "\t".join(f"{row[n]:.2f}" for n in names)
        print(f"{size}\t{cols}\t{speed:.1f}x\t{row['same']}")


if __name__ == "__main__":
    main()
