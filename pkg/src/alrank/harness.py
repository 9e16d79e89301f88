"""Desk-scale active-learning simulation loop.

Protocol per run seed: label a random 5% seed set, then repeat (train the
ensemble on the labeled set, evaluate on the held-out split, select another
5% with the chosen strategy, apply) until the pool is exhausted. With the
default 5% fraction that is exactly 20 evaluation points. Clustering for the
cap and the diversity diagnostics is computed once on the full pool and
reused across all rounds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .cluster import clusters_selected, default_k, kmeans, mean_nn_distance
from .learner import ToyLearnerConfig, evaluate, score_items, train_toy_ensemble
from .pool import Pool, apply_batch, batch_size_for_round, seed_split
from .scorers import DIRECTION, PAIRWISE_STRATEGIES, SCORER_STRATEGIES, ScoreReport
from .seeds import derive_seed
from .select import (SelectionBatch, select_capped, select_coreset_greedy,
                     select_random, select_random_capped)

HARNESS_STRATEGIES = SCORER_STRATEGIES + ("coreset-greedy", "cluster-random")

BOOTSTRAP_RESAMPLES = 1000
_CI_TAG = 0x51C3


@dataclass(frozen=True)
class RoundResult:
    round: int
    labeled_fraction: float
    eval_bleu: float
    eval_mean_loglik: float
    clusters_selected: int
    mean_nn_dist: float
    relaxation_level: int


@dataclass(frozen=True)
class RoundSummary:
    round: int
    labeled_fraction: float
    bleu_mean: float
    bleu_lo: float
    bleu_hi: float
    loglik_mean: float
    loglik_lo: float
    loglik_hi: float
    clusters_selected_mean: float
    mean_nn_dist_mean: float
    relaxation_level_mean: float


@dataclass
class LearningCurve:
    strategy: str
    seeds: list
    rounds: list  # rounds[i] is the RoundResult list for seeds[i]
    summary: list = field(default_factory=list)


def _bootstrap_interval(values: np.ndarray, rng) -> tuple:
    """Percentile bootstrap 95% interval for the mean."""
    n = len(values)
    idx = rng.integers(0, n, size=(BOOTSTRAP_RESAMPLES, n))
    means = values[idx].mean(axis=1)
    return float(np.percentile(means, 2.5)), float(np.percentile(means, 97.5))


def summarize(curve: LearningCurve) -> LearningCurve:
    """Attach per-round means and bootstrap 95% intervals across seeds."""
    n_rounds = {len(r) for r in curve.rounds}
    if len(n_rounds) != 1:
        raise ValueError("all seeds must share the same round structure")
    rng = np.random.default_rng(np.random.SeedSequence([_CI_TAG, *sorted(curve.seeds)]))
    summary = []
    for r in range(n_rounds.pop()):
        per_seed = [rounds[r] for rounds in curve.rounds]
        bleus = np.array([p.eval_bleu for p in per_seed])
        lls = np.array([p.eval_mean_loglik for p in per_seed])
        bleu_lo, bleu_hi = _bootstrap_interval(bleus, rng)
        ll_lo, ll_hi = _bootstrap_interval(lls, rng)
        summary.append(RoundSummary(
            round=r,
            labeled_fraction=per_seed[0].labeled_fraction,
            bleu_mean=float(bleus.mean()), bleu_lo=bleu_lo, bleu_hi=bleu_hi,
            loglik_mean=float(lls.mean()), loglik_lo=ll_lo, loglik_hi=ll_hi,
            clusters_selected_mean=float(np.mean([p.clusters_selected for p in per_seed])),
            mean_nn_dist_mean=float(np.mean([p.mean_nn_dist for p in per_seed])),
            relaxation_level_mean=float(np.mean([p.relaxation_level for p in per_seed])),
        ))
    curve.summary = summary
    return curve


def _select_batch(pool: Pool, strategy: str, clustering, batch_size: int,
                  phi: int | None, learner_ensemble, samples_k: int,
                  temperature: float, max_len: int, run_seed: int) -> SelectionBatch:
    round_no = pool.round + 1
    if strategy == "random":
        return select_random(pool, batch_size,
                             seed=derive_seed(run_seed, "select", pool.round))
    if strategy == "cluster-random":
        return select_random_capped(pool, clustering, batch_size, phi,
                                    seed=derive_seed(run_seed, "select", pool.round))
    if strategy == "coreset-greedy":
        return select_coreset_greedy(pool, batch_size)
    unlabeled = [pool.items[i] for i in pool.unlabeled]
    values = score_items(learner_ensemble, unlabeled, strategy, K=samples_k,
                         temperature=temperature, max_len=max_len,
                         seed=derive_seed(run_seed, "sampling", pool.round))
    reports = [ScoreReport(i, strategy, values[i], DIRECTION[strategy])
               for i in pool.unlabeled]
    return select_capped(reports, clustering, batch_size, phi,
                         round=round_no, strategy=strategy)


def run_active_learning(pool: Pool, val_items, strategy: str,
                        config: ToyLearnerConfig, rounds_fraction: float = 0.05,
                        phi: int | None = 3, seeds=(0,), samples_k: int = 8,
                        temperature: float = 0.8, max_len: int = 12,
                        cluster_k: int | None = None) -> LearningCurve:
    """Run the full acquisition loop once per seed and aggregate the curves."""
    if strategy not in HARNESS_STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy in PAIRWISE_STRATEGIES and config.ensemble_size < 2:
        raise ValueError(f"{strategy} needs ensemble_size >= 2")
    val_items = list(val_items)
    if not val_items:
        raise ValueError("need a held-out validation split")
    val_features = np.stack([it.features for it in val_items])
    n_items = pool.n
    k_clusters = default_k(n_items) if cluster_k is None else cluster_k
    curve = LearningCurve(strategy, list(seeds), [])
    for run_seed in seeds:
        p = pool.copy()
        if p.round != 0 or p.labeled:
            raise ValueError("harness pools must start unseeded")
        clustering = kmeans(p, k_clusters, seed=derive_seed(run_seed, "kmeans"))
        seed_split(p, rounds_fraction, seed=run_seed)
        learner_cfg = replace(config, seed=derive_seed(run_seed, "learner"))
        acquired = SelectionBatch(0, list(p.labeled), {}, 0, "seed")
        results = []
        while True:
            ensemble = train_toy_ensemble(p.labeled_items(), learner_cfg)
            bleu_val, ll_val = evaluate(ensemble, val_items, K=samples_k,
                                        temperature=temperature,
                                        seed=derive_seed(run_seed, "eval", p.round),
                                        max_len=max_len)
            labeled_features = p.feature_matrix(p.labeled)
            results.append(RoundResult(
                round=p.round,
                labeled_fraction=len(p.labeled) / n_items,
                eval_bleu=bleu_val,
                eval_mean_loglik=ll_val,
                clusters_selected=clusters_selected(acquired, clustering),
                mean_nn_dist=mean_nn_distance(val_features, labeled_features),
                relaxation_level=acquired.relaxation_level,
            ))
            if not p.unlabeled:
                break
            batch_size = batch_size_for_round(n_items, rounds_fraction, len(p.unlabeled))
            acquired = _select_batch(p, strategy, clustering, batch_size, phi,
                                     ensemble, samples_k, temperature, max_len, run_seed)
            apply_batch(p, acquired)
        curve.rounds.append(results)
    return summarize(curve)


def ensemble_size_sweep(pool: Pool, val_items, sizes, config: ToyLearnerConfig,
                        strategy: str = "divergence", **kwargs) -> list:
    """One learning curve per ensemble size, identical pool and seeds."""
    sizes = list(sizes)
    if any(s < 2 for s in sizes):
        raise ValueError("ensemble sizes must all be >= 2")
    curves = []
    for size in sizes:
        cfg = replace(config, ensemble_size=size)
        curves.append(run_active_learning(pool, val_items, strategy, cfg, **kwargs))
    return curves


def curve_auc(curve: LearningCurve) -> float:
    """Trapezoidal area under the per-round mean BLEU vs labeled fraction."""
    xs = [s.labeled_fraction for s in curve.summary]
    ys = [s.bleu_mean for s in curve.summary]
    return float(np.trapezoid(ys, xs))


def fraction_at_quality(curve: LearningCurve, quality: float = 0.95) -> float:
    """Smallest labeled fraction whose mean BLEU reaches quality * final BLEU."""
    final = curve.summary[-1].bleu_mean
    threshold = quality * final
    for s in curve.summary:
        if s.bleu_mean >= threshold:
            return s.labeled_fraction
    return curve.summary[-1].labeled_fraction


# --- CSV interfaces ----------------------------------------------------------

CURVE_COLUMNS = ["strategy", "seed", "round", "labeled_fraction", "bleu",
                 "mean_loglik", "clusters_selected", "mean_nn_dist",
                 "relaxation_level"]

SUMMARY_COLUMNS = ["strategy", "round", "labeled_fraction", "bleu_mean",
                   "bleu_lo", "bleu_hi", "loglik_mean", "loglik_lo",
                   "loglik_hi", "clusters_selected_mean", "mean_nn_dist_mean",
                   "relaxation_level_mean"]


def write_curve_csv(curves, path) -> None:
    if isinstance(curves, LearningCurve):
        curves = [curves]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_COLUMNS)
        for curve in curves:
            for seed, rounds in zip(curve.seeds, curve.rounds):
                for r in rounds:
                    writer.writerow([curve.strategy, seed, r.round,
                                     repr(r.labeled_fraction), repr(r.eval_bleu),
                                     repr(r.eval_mean_loglik), r.clusters_selected,
                                     repr(r.mean_nn_dist), r.relaxation_level])


def write_summary_csv(curves, path) -> None:
    if isinstance(curves, LearningCurve):
        curves = [curves]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for curve in curves:
            for s in curve.summary:
                writer.writerow([curve.strategy, s.round, repr(s.labeled_fraction),
                                 repr(s.bleu_mean), repr(s.bleu_lo), repr(s.bleu_hi),
                                 repr(s.loglik_mean), repr(s.loglik_lo), repr(s.loglik_hi),
                                 repr(s.clusters_selected_mean),
                                 repr(s.mean_nn_dist_mean),
                                 repr(s.relaxation_level_mean)])


def read_summary_csv(path) -> dict:
    """Summaries grouped by strategy, in file order."""
    out: dict = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["strategy"], []).append(RoundSummary(
                round=int(row["round"]),
                labeled_fraction=float(row["labeled_fraction"]),
                bleu_mean=float(row["bleu_mean"]),
                bleu_lo=float(row["bleu_lo"]), bleu_hi=float(row["bleu_hi"]),
                loglik_mean=float(row["loglik_mean"]),
                loglik_lo=float(row["loglik_lo"]), loglik_hi=float(row["loglik_hi"]),
                clusters_selected_mean=float(row["clusters_selected_mean"]),
                mean_nn_dist_mean=float(row["mean_nn_dist_mean"]),
                relaxation_level_mean=float(row["relaxation_level_mean"]),
            ))
    return out


def read_curve_csv(path) -> dict:
    """Per-seed round rows grouped by (strategy, seed)."""
    out: dict = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["strategy"], int(row["seed"]))
            out.setdefault(key, []).append(RoundResult(
                round=int(row["round"]),
                labeled_fraction=float(row["labeled_fraction"]),
                eval_bleu=float(row["bleu"]),
                eval_mean_loglik=float(row["mean_loglik"]),
                clusters_selected=int(row["clusters_selected"]),
                mean_nn_dist=float(row["mean_nn_dist"]),
                relaxation_level=int(row["relaxation_level"]),
            ))
    return out
