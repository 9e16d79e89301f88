"""Command-line surface: rank, select, kmeans, eval, simulate, report.

Every command is a pure function of its input files, flags, and seed, and
drops a manifest.json beside its outputs with enough provenance to reproduce
them. Flags can be overridden by ALRANK_-prefixed environment variables
(e.g. ALRANK_PHI=5).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import Clustering, default_k, kmeans_points, read_clustering_jsonl, write_clustering_jsonl
from .harness import run_active_learning, write_curve_csv, write_summary_csv, read_summary_csv
from .jsonl import SchemaError, iter_jsonl, require
from .learner import ToyLearnerConfig, evaluate, train_toy_ensemble
from .manifest import write_manifest
from .figures import render_run_figures
from .pool import load_pool_from_paths
from .runconfig import load_run_config, resolve_overrides
from .scorers import SCORER_STRATEGIES, ScoreReport, read_caption_sets, score_ids, sort_reports
from .select import select_capped, write_batch_jsonl
from .synthetic import generate


def _env(name: str):
    return os.environ.get(f"ALRANK_{name}")


def _env_or(name: str, fallback, cast):
    raw = _env(name)
    if raw is None:
        return fallback
    return cast(raw)


def _int_or_auto(raw):
    if raw == "auto":
        return "auto"
    return int(raw)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_features_file(path):
    ids, rows = [], []
    for lineno, obj in iter_jsonl(path):
        item_id = str(require(obj, "id", path, lineno))
        feats = require(obj, "features", path, lineno)
        if not isinstance(feats, list) or not feats:
            raise SchemaError(f"{path}:{lineno}: features must be a non-empty list")
        ids.append(item_id)
        rows.append(feats)
    if not ids:
        raise SchemaError(f"{path}: no feature records")
    order = np.argsort(ids)
    ids = [ids[i] for i in order]
    try:
        X = np.asarray([rows[i] for i in order], dtype=np.float64)
    except ValueError as exc:
        raise SchemaError(f"{path}: inconsistent feature dimensions ({exc})") from exc
    if X.ndim != 2:
        raise SchemaError(f"{path}: inconsistent feature dimensions")
    return ids, X


def _read_scores_file(path):
    reports = []
    for lineno, obj in iter_jsonl(path):
        reports.append(ScoreReport(
            str(require(obj, "id", path, lineno)),
            str(require(obj, "strategy", path, lineno)),
            float(require(obj, "value", path, lineno)),
            str(require(obj, "direction", path, lineno)),
        ))
    if not reports:
        raise SchemaError(f"{path}: no score records")
    return reports


def _write_scores_file(reports, path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in reports:
            obj = {"id": r.item_id, "strategy": r.strategy,
                   "value": r.value, "direction": r.direction}
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


# --- rank --------------------------------------------------------------------


def cmd_rank(args, parser) -> int:
    if args.strategy not in SCORER_STRATEGIES:
        parser.error(f"--strategy {args.strategy} is not a ranking strategy "
                     f"(choose from {', '.join(SCORER_STRATEGIES)})")
    if args.strategy != "random" and not args.ensemble_scores:
        parser.error(f"--strategy {args.strategy} requires --ensemble-scores")
    ids, _ = _read_features_file(args.features)
    sets = {}
    inputs = [args.features]
    if args.strategy != "random":
        vocab = None if args.vocab_size == "auto" else int(args.vocab_size)
        sets = read_caption_sets(args.ensemble_scores, vocab)
        inputs.append(args.ensemble_scores)
    reports = sort_reports(score_ids(ids, sets, args.strategy, seed=args.seed))
    out = _out_dir(args)
    scores_path = out / "scores.jsonl"
    _write_scores_file(reports, scores_path)
    config = {"strategy": args.strategy, "vocab_size": args.vocab_size}
    write_manifest(out / "manifest.json", "rank", config, args.seed,
                   inputs, [scores_path])
    return 0


# --- select ------------------------------------------------------------------


def cmd_select(args, parser) -> int:
    reports = _read_scores_file(args.scores)
    clustering = read_clustering_jsonl(args.clustering)
    batch = select_capped(reports, clustering, args.batch_size, args.phi,
                          round=args.round)
    out = _out_dir(args)
    batch_path = out / "batch.jsonl"
    write_batch_jsonl(batch, batch_path)
    config = {"phi": args.phi, "K": clustering.K, "batch_size": args.batch_size,
              "round": args.round, "strategy": batch.strategy,
              "relaxation_level": batch.relaxation_level}
    write_manifest(out / "manifest.json", "select", config, args.seed,
                   [args.scores, args.clustering], [batch_path])
    return 0


# --- kmeans ------------------------------------------------------------------


def cmd_kmeans(args, parser) -> int:
    ids, X = _read_features_file(args.features)
    k = default_k(len(ids)) if args.k == "auto" else int(args.k)
    centroids, labels, inertia, _ = kmeans_points(X, k, seed=args.seed,
                                                  max_iters=args.max_iters)
    clustering = Clustering(k, centroids,
                            {i: int(c) for i, c in zip(ids, labels)},
                            inertia, seed=args.seed)
    out = _out_dir(args)
    clust_path = out / "clustering.jsonl"
    write_clustering_jsonl(clustering, clust_path)
    config = {"k": args.k, "resolved_k": k, "max_iters": args.max_iters}
    write_manifest(out / "manifest.json", "kmeans", config, args.seed,
                   [args.features], [clust_path])
    return 0


# --- eval --------------------------------------------------------------------


def _auto_vocab(*pools) -> int:
    top = 0
    for pool in pools:
        for item in pool.items.values():
            for ref in item.references:
                if ref:
                    top = max(top, max(ref))
    return top + 2  # content ids plus the reserved stop symbol


def cmd_eval(args, parser) -> int:
    train_pool = load_pool_from_paths(args.features, args.references)
    val_features = args.val_features or args.features
    val_references = args.val_references or args.references
    val_pool = load_pool_from_paths(val_features, val_references)
    if args.vocab_size == "auto":
        vocab = _auto_vocab(train_pool, val_pool)
    else:
        vocab = int(args.vocab_size)
    config = ToyLearnerConfig(vocab_size=vocab, order=args.order,
                              smoothing=args.smoothing,
                              condition_buckets=args.buckets,
                              ensemble_size=args.ensemble_size,
                              bootstrap=not args.no_bootstrap, seed=args.seed)
    ensemble = train_toy_ensemble(list(train_pool.items.values()), config)
    bleu_v, loglik = evaluate(ensemble, list(val_pool.items.values()),
                              K=args.samples_k, temperature=args.temperature,
                              seed=args.seed, max_len=args.max_len)
    out = _out_dir(args)
    eval_path = out / "eval.json"
    with open(eval_path, "w", encoding="utf-8") as fh:
        json.dump({"bleu": bleu_v, "mean_loglik": loglik}, fh, sort_keys=True)
        fh.write("\n")
    cfg_dict = {"vocab_size": vocab, "order": args.order, "smoothing": args.smoothing,
                "buckets": args.buckets, "ensemble_size": args.ensemble_size,
                "bootstrap": not args.no_bootstrap, "samples_k": args.samples_k,
                "temperature": args.temperature, "max_len": args.max_len}
    write_manifest(out / "manifest.json", "eval", cfg_dict, args.seed,
                   [args.features, args.references, val_features, val_references],
                   [eval_path])
    print(f"bleu={bleu_v!r} mean_loglik={loglik!r}")
    return 0


# --- simulate ----------------------------------------------------------------


def _print_strategies() -> None:
    print("ranking strategies:")
    for name in SCORER_STRATEGIES:
        print(f"  {name}")
    print("selection-only strategies:")
    for name in ("coreset-greedy", "cluster-random"):
        print(f"  {name}")


def cmd_simulate(args, parser) -> int:
    if args.strategy == "list":
        _print_strategies()
        return 0
    run_cfg, resolved = load_run_config(args.config, resolve_overrides(args))
    train_items, val_items = generate(run_cfg.synthetic)
    from .pool import pool_from_items

    pool = pool_from_items(train_items)
    curve = run_active_learning(
        pool, val_items, run_cfg.strategy, run_cfg.learner,
        rounds_fraction=run_cfg.rounds_fraction, phi=run_cfg.phi,
        seeds=run_cfg.seeds, samples_k=run_cfg.samples_k,
        temperature=run_cfg.temperature, max_len=run_cfg.max_len,
        cluster_k=run_cfg.cluster_k)
    out = _out_dir(args)
    curve_path = out / "curve.csv"
    summary_path = out / "summary.csv"
    write_curve_csv(curve, curve_path)
    write_summary_csv(curve, summary_path)
    outputs = [curve_path, summary_path]
    if not args.no_figures:
        outputs.extend(render_run_figures({curve.strategy: curve.summary}, out))
    write_manifest(out / "manifest.json", "simulate", resolved, None,
                   [args.config], outputs)
    return 0


# --- report ------------------------------------------------------------------


def cmd_report(args, parser) -> int:
    merged: dict = {}
    for path in args.summary:
        for strategy, rows in read_summary_csv(path).items():
            if strategy in merged:
                raise ValueError(f"strategy {strategy!r} appears in more than one summary")
            merged[strategy] = rows
    if not merged:
        raise ValueError("no summary rows found")
    out = _out_dir(args)
    figures = render_run_figures(merged, out)
    write_manifest(out / "manifest.json", "report",
                   {"strategies": sorted(merged)}, None, args.summary, figures)
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alrank",
        description="Batch active-learning selection engine (rank, select, simulate).")
    parser.add_argument("--version", action="version", version=f"alrank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=_env_or("SEED", 0, int),
                       help="master seed; all stages derive named substreams")
        p.add_argument("--out-dir", required=True,
                       help="directory for outputs and manifest.json")

    p_rank = sub.add_parser("rank", help="score items and write a best-first ranking")
    p_rank.add_argument("--features", required=True)
    p_rank.add_argument("--ensemble-scores", default=_env("ENSEMBLE_SCORES"),
                        help="ensemble caption records (required unless --strategy random)")
    env_strategy = _env("STRATEGY")
    p_rank.add_argument("--strategy", required=env_strategy is None,
                        default=env_strategy)
    p_rank.add_argument("--vocab-size", type=_int_or_auto,
                        default=_env_or("VOCAB_SIZE", "auto", _int_or_auto))
    add_common(p_rank)

    p_select = sub.add_parser("select", help="turn a score file into a capped batch")
    p_select.add_argument("--scores", required=True)
    p_select.add_argument("--clustering", required=True)
    p_select.add_argument("--batch-size", type=int, required=True)
    p_select.add_argument("--phi", type=int, default=_env_or("PHI", 3, int))
    p_select.add_argument("--round", type=int, default=0)
    add_common(p_select)

    p_kmeans = sub.add_parser("kmeans", help="cluster a features file")
    p_kmeans.add_argument("--features", required=True)
    p_kmeans.add_argument("--k", type=_int_or_auto,
                          default=_env_or("K", "auto", _int_or_auto))
    p_kmeans.add_argument("--max-iters", type=int, default=100)
    add_common(p_kmeans)

    p_eval = sub.add_parser("eval", help="train the toy ensemble and evaluate it")
    p_eval.add_argument("--features", required=True)
    p_eval.add_argument("--references", required=True)
    p_eval.add_argument("--val-features")
    p_eval.add_argument("--val-references")
    p_eval.add_argument("--vocab-size", type=_int_or_auto,
                        default=_env_or("VOCAB_SIZE", "auto", _int_or_auto))
    p_eval.add_argument("--order", type=int, default=2)
    p_eval.add_argument("--smoothing", type=float, default=0.1)
    p_eval.add_argument("--buckets", type=int, default=16)
    p_eval.add_argument("--ensemble-size", type=int,
                        default=_env_or("ENSEMBLE_SIZE", 4, int))
    p_eval.add_argument("--samples-k", type=int, default=_env_or("SAMPLES_K", 8, int))
    p_eval.add_argument("--temperature", type=float,
                        default=_env_or("TEMPERATURE", 0.8, float))
    p_eval.add_argument("--max-len", type=int, default=12)
    p_eval.add_argument("--no-bootstrap", action="store_true")
    add_common(p_eval)

    p_sim = sub.add_parser("simulate", help="run the full acquisition loop on a config")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--strategy", default=_env("STRATEGY"),
                       help="override the config strategy; 'list' prints choices")
    p_sim.add_argument("--phi", type=int, default=_env_or("PHI", None, int))
    p_sim.add_argument("--batch-fraction", type=float,
                       default=_env_or("BATCH_FRACTION", None, float))
    p_sim.add_argument("--samples-k", type=int, default=_env_or("SAMPLES_K", None, int))
    p_sim.add_argument("--temperature", type=float,
                       default=_env_or("TEMPERATURE", None, float))
    p_sim.add_argument("--ensemble-size", type=int,
                       default=_env_or("ENSEMBLE_SIZE", None, int))
    p_sim.add_argument("--no-figures", action="store_true",
                       help="skip PNG rendering (CSV is always written)")
    add_common(p_sim)

    p_report = sub.add_parser("report", help="render figures from summary CSVs")
    p_report.add_argument("--summary", nargs="+", required=True)
    add_common(p_report)

    return parser


_HANDLERS = {
    "rank": cmd_rank,
    "select": cmd_select,
    "kmeans": cmd_kmeans,
    "eval": cmd_eval,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args, parser)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"alrank {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
