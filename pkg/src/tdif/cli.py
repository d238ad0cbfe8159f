"""Command line entry point: ``tdif synth|train|run|eval|bench``.

Flags mirror the RunConfig field names.  ``--config FILE`` reads ``key = value``
lines whose values override the flags; feature parameters (k1, b, mu, ...)
may also be set there.  When no seed is given anywhere, ``TDIF_SEED`` is used.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import fields
from pathlib import Path

from . import kernels
from .corpus import DataError, ingest_jsonl, load_topics, write_jsonl, write_topics
from .metrics import MEASURES, MetricParams, load_qrels, read_run, evaluate_run, write_qrels, write_scores
from .pipeline import RunConfig, run_topics, train
from .relfeat import HOUR_MS, FeatureParams, read_kv_config
from .select import STRATEGIES, SchemaError, WeightVector, run_stream, write_run
from .synth import SynthConfig, generate

logger = logging.getLogger("tdif")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
FEATURE_KEYS = {f.name for f in fields(FeatureParams)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_run_flags(p: argparse.ArgumentParser, strategy: bool = True) -> None:
    if strategy:
        p.add_argument("--strategy", choices=STRATEGIES, default="dp")
    p.add_argument("--K", type=int, default=20)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--window-length", dest="window_length", type=float, default=48.0, help="hours")
    p.add_argument("--weights", default="")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--backend", choices=("auto",) + kernels.BACKENDS, default="auto")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; its values override flags")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tdif", description="Topic-focused dynamic information filtering")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a seeded synthetic stream, topics and qrels")
    p.add_argument("--topics", type=int, default=5)
    p.add_argument("--days", type=int, default=16)
    p.add_argument("--docs-per-day", dest="docs_per_day", type=int, default=200)
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)

    p = sub.add_parser("train", help="fit utility weights on the start of a stream")
    p.add_argument("--stream", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--sidecar")
    p.add_argument("--objective", choices=("sequential", "listwise"), default="sequential")
    p.add_argument("--gain", choices=("classic", "dynamic"), default="classic")
    p.add_argument("--train-hours", dest="train_hours", type=float, default=48.0)
    p.add_argument("--K", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("run", help="filter a stream window by window")
    p.add_argument("--stream", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--out", required=True)
    _add_run_flags(p)
    _add_common(p)

    p = sub.add_parser("eval", help="score a run file")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--stream", help="judge each window against documents published before its end")
    p.add_argument("--sidecar")
    p.add_argument("--metric", action="append", choices=sorted(MEASURES),
                   help="repeatable; default alpha-ndcg and d-ndcg")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.8)
    p.add_argument("--cutoff", type=int, default=20)
    p.add_argument("--raw-recency", dest="raw_recency", action="store_true")
    p.add_argument("--window-length", dest="window_length", type=float, default=48.0, help="hours")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("bench", help="mean per-window time and utility evaluations per strategy")
    p.add_argument("--stream", help="defaults to a synthetic single-topic stream")
    p.add_argument("--topics")
    p.add_argument("--strategies", default="dp,allbatch,toprel")
    p.add_argument("--docs-per-window", dest="docs_per_window", type=int, default=2000)
    p.add_argument("--windows", type=int, default=4)
    p.add_argument("--out", required=True)
    _add_run_flags(p, strategy=False)
    _add_common(p)
    return parser


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace) -> tuple[argparse.Namespace, dict]:
    """Overlay config-file values onto parsed flags; returns leftover feature settings."""
    if not getattr(args, "config", None):
        return args, {}
    try:
        values = read_kv_config(args.config)
    except OSError as exc:
        raise DataError(f"cannot read config: {exc}") from exc
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    features = {}
    for key, raw in values.items():
        if key in FEATURE_KEYS:
            features[key] = raw
            continue
        if key not in actions:
            raise UsageError(f"config: unknown key {key!r} for '{args.command}'")
        action = actions[key]
        try:
            if isinstance(action, argparse._StoreTrueAction):
                value = _bool(raw)
            elif isinstance(action, argparse._AppendAction):
                value = [v.strip() for v in raw.split(",") if v.strip()]
            else:
                value = action.type(raw) if action.type else raw
        except ValueError as exc:
            raise UsageError(f"config: bad value for {key}: {exc}") from exc
        if action.choices is not None:
            for v in value if isinstance(value, list) else [value]:
                if v not in action.choices:
                    raise UsageError(f"config: {key} must be one of {sorted(action.choices)}")
        setattr(args, key, value)
    return args, features


def resolve_seed(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("TDIF_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"TDIF_SEED must be an integer, got {env!r}") from exc
    return 0


def _feature_params(values: dict) -> FeatureParams:
    try:
        return FeatureParams.from_mapping(values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"config: {exc}") from exc


def _load_weights(path: str) -> WeightVector:
    if not path:
        raise UsageError("--weights is required")
    try:
        return WeightVector.load(path)
    except (KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: not a weights file ({exc})") from exc


def _run_config(args, seed: int, strategy: str | None = None) -> RunConfig:
    try:
        return RunConfig(strategy=strategy or args.strategy, K=args.K, m=args.m, window_length=args.window_length,
                         weights=args.weights, seed=seed, workers=max(1, args.workers))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_synth(args, features, seed) -> None:
    if min(args.topics, args.days, args.docs_per_day) <= 0:
        raise UsageError("topics, days and docs-per-day must be positive")
    cfg = SynthConfig(topics=args.topics, days=args.days, docs_per_day=args.docs_per_day, seed=seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    docs, topics, qrels = generate(cfg)
    write_jsonl(docs, out / "stream.jsonl")
    write_topics(topics, out / "topics.json")
    write_qrels(qrels, out / "qrels.tsv")
    logger.info("wrote %d documents, %d topics to %s", len(docs), len(topics), out)


def cmd_train(args, features, seed) -> None:
    stream = ingest_jsonl(args.stream)
    topics = load_topics(args.topics)
    qrels = load_qrels(args.qrels, args.sidecar)
    if args.K <= 0 or args.iters < 0 or args.lr <= 0 or args.train_hours <= 0:
        raise UsageError("K, lr and train-hours must be positive and iters non-negative")
    try:
        weights = train(stream, topics, qrels, objective=args.objective, gain=args.gain,
                        train_hours=args.train_hours, K=args.K, params=_feature_params(features),
                        lr=args.lr, iters=args.iters, seed=seed)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    weights.save(args.out)


def cmd_run(args, features, seed) -> None:
    cfg = _run_config(args, seed)
    weights = _load_weights(cfg.weights)
    stream = ingest_jsonl(args.stream)
    topics = load_topics(args.topics)
    kernels.set_backend(args.backend)
    blocks = run_topics(topics, stream, cfg, weights, _feature_params(features))
    write_run(blocks, args.out)


def cmd_eval(args, features, seed) -> None:
    try:
        base = MetricParams(alpha=args.alpha, gamma=args.gamma, beta=args.beta, cutoff=args.cutoff,
                            raw_recency=args.raw_recency)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.window_length <= 0:
        raise UsageError("window_length must be positive")
    run = read_run(args.run)
    qrels = load_qrels(args.qrels, args.sidecar)
    topics = load_topics(args.topics)
    stream = ingest_jsonl(args.stream) if args.stream else None
    measures = args.metric or ["alpha-ndcg", "d-ndcg"]
    rows = evaluate_run(run, topics, qrels, measures, stream=stream,
                        window_length_ms=int(round(args.window_length * HOUR_MS)), base=base)
    write_scores(rows, args.out)


def cmd_bench(args, features, seed) -> None:
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    bad = [s for s in strategies if s not in STRATEGIES]
    if bad or not strategies:
        raise UsageError(f"unknown strategies: {', '.join(bad) or '(none)'}")
    if args.stream:
        if not args.topics:
            raise UsageError("--topics is required with --stream")
        stream, topics = ingest_jsonl(args.stream), load_topics(args.topics)
    else:
        if args.docs_per_window <= 0 or args.windows <= 0:
            raise UsageError("docs-per-window and windows must be positive")
        days_per_window = args.window_length / 24.0
        per_day = max(1, int(round(args.docs_per_window / days_per_window)))
        days = max(1, int(math.ceil(args.windows * days_per_window)))
        stream, topics, _ = generate(SynthConfig(topics=1, days=days, docs_per_day=per_day, seed=seed))
    weights = _load_weights(args.weights) if args.weights else WeightVector([1.0] * 8, [1.0] * 3)
    params = _feature_params(features)
    kernels.set_backend(args.backend)
    rows = []
    for strategy in strategies:
        cfg = _run_config(args, seed, strategy)
        per_window: dict[int, list[tuple[float, int]]] = {}
        for topic in topics:
            for rs in run_stream(topic, stream, strategy, weights, cfg.K, cfg.window_length_ms, cfg.m, params=params):
                per_window.setdefault(rs.window_index, []).append((rs.elapsed_s, rs.utility_evals))
        for w, vals in sorted(per_window.items()):
            rows.append((strategy, str(w), 1000 * sum(v[0] for v in vals) / len(vals),
                         sum(v[1] for v in vals) / len(vals)))
        n = len(per_window)
        rows.append((strategy, "mean", sum(r[2] for r in rows[-n:]) / n, sum(r[3] for r in rows[-n:]) / n))
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["strategy", "window_index", "mean_ms", "utility_evals"])
        for strategy, w, ms, evals in rows:
            writer.writerow([strategy, w, f"{ms:.3f}", f"{evals:g}"])


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "run": cmd_run, "eval": cmd_eval, "bench": cmd_bench}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args, features = apply_config(parser, args)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if features and args.command in ("synth", "eval"):
            raise UsageError(f"feature settings do not apply to '{args.command}'")
        COMMANDS[args.command](args, features, resolve_seed(args))
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SchemaError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
