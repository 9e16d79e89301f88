"""Built-in toy ensemble sequence learner.

Each ensemble member is a closed-form add-alpha n-gram model conditioned on a
feature-space bucket: counts are keyed by (bucket, token context) and the
bucket-conditional next-token distribution is interpolated with the member's
bucket-agnostic context distribution using count weighting (t / (t + backoff)
on the bucket side). Buckets are the nearest of `condition_buckets` k-means
centers fit on the member's own view of the labeled features.

Bootstrap ensembles emulate how independently trained models behave: besides
resampling the data, each member carves feature space with its own k-means
fit and smooths with its own seeded prior direction (total smoothing mass is
alpha * V either way). Members therefore disagree most where no data
constrains them and converge as counts grow, which is what makes committee
disagreement a usable uncertainty signal. With bootstrap=False every member
sees the same data, the same centers, and the uniform add-alpha prior, so
members are bitwise-identical regardless of member index.

The top vocabulary id (vocab_size - 1) is reserved as the stop symbol:
sampled sequences carry it as their final token (that step's distribution row
is recorded and scored like any other position) and it is stripped whenever a
sample is used as caption text.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cluster import kmeans_points
from .metrics import ReferenceNgrams
from .scorers import (EPS_FLOOR, CaptionSample, EnsembleCaptionSet,
                      TokenDistribution, entropy_dense)
from .seeds import derive_seed, substream

BOS = -1


@dataclass(frozen=True)
class ToyLearnerConfig:
    vocab_size: int
    order: int = 2
    smoothing: float = 0.1
    condition_buckets: int = 16
    ensemble_size: int = 4
    bootstrap: bool = True
    backoff: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.smoothing <= 0.0:
            raise ValueError("smoothing must be > 0")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2 (content plus stop symbol)")
        if self.backoff < 0.0:
            raise ValueError("backoff must be >= 0")

    @property
    def stop_id(self) -> int:
        return self.vocab_size - 1


@dataclass
class Ensemble:
    config: ToyLearnerConfig
    centers: list          # per member: (buckets, D) k-means centers
    members: list          # per member: dict[(bucket, ctx)] -> count vector over V
    members_global: list   # per member: dict[ctx] -> count vector over V
    priors: list           # per member: smoothing pseudo-count vector, sums to alpha*V

    def assign_buckets(self, features: np.ndarray) -> np.ndarray:
        """Bucket of each item under each member; shape (n_items, L)."""
        F = np.atleast_2d(np.asarray(features, dtype=np.float64))
        cols = []
        for centers in self.centers:
            d2 = ((F[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
            cols.append(np.argmin(d2, axis=1))
        return np.stack(cols, axis=1)

    def bucket_vector(self, features: np.ndarray) -> tuple:
        return tuple(int(b) for b in self.assign_buckets(features)[0])


def train_toy_ensemble(labeled_items, config: ToyLearnerConfig) -> Ensemble:
    """Fit the ensemble on the labeled items; closed-form, fully deterministic."""
    items = sorted(labeled_items, key=lambda it: it.id)
    if not items:
        raise ValueError("cannot train on an empty labeled set")
    F = np.stack([it.features for it in items])
    n_buckets = min(config.condition_buckets, len(items))
    order, stop, V = config.order, config.stop_id, config.vocab_size

    all_centers = []
    members = []
    members_global = []
    priors = []
    for m in range(config.ensemble_size):
        if config.bootstrap:
            rng = substream(config.seed, "bootstrap", m)
            chosen = rng.integers(0, len(items), size=len(items))
            center_seed = derive_seed(config.seed, "buckets", m)
            prior_rng = substream(config.seed, "prior", m)
            prior = config.smoothing * V * prior_rng.dirichlet(np.full(V, 2.0))
        else:
            chosen = np.arange(len(items))
            center_seed = derive_seed(config.seed, "buckets")
            prior = np.full(V, config.smoothing)
        view = F[chosen]
        centers, _, _, _ = kmeans_points(view, n_buckets, seed=center_seed,
                                         max_iters=50)
        d2 = ((view[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        buckets = np.argmin(d2, axis=1)
        counts: dict = {}
        global_counts: dict = {}
        for j, i in enumerate(chosen):
            item = items[int(i)]
            bucket = int(buckets[j])
            for ref in item.references:
                ctx = (BOS,) * order
                for t in (*ref, stop):
                    arr = counts.get((bucket, ctx))
                    if arr is None:
                        arr = np.zeros(V)
                        counts[(bucket, ctx)] = arr
                    arr[t] += 1.0
                    garr = global_counts.get(ctx)
                    if garr is None:
                        garr = np.zeros(V)
                        global_counts[ctx] = garr
                    garr[t] += 1.0
                    ctx = ctx[1:] + (t,)
        all_centers.append(centers)
        members.append(counts)
        members_global.append(global_counts)
        priors.append(prior)
    return Ensemble(config, all_centers, members, members_global, priors)


class _Bundle:
    """Cached tables for one (bucket-vector, context): rows and tempered cumsums."""

    __slots__ = ("rows", "cum", "_kl_from", "_entropies")

    def __init__(self, rows: np.ndarray, cum: np.ndarray):
        self.rows = rows
        self.cum = cum
        self._kl_from = None
        self._entropies = None

    def kl_from(self) -> np.ndarray:
        """kl_from[p] = sum over q != p of KL(row_p || row_q).

        All pairs at once: with M = rows @ log(rows_floored).T, the (p, q) KL
        is M[p, p] - M[p, q], so the row sums give every ordered pair in one
        matmul. Matches kl_dense because every row is strictly positive and
        far above the floor.
        """
        if self._kl_from is None:
            logr = np.log(np.maximum(self.rows, EPS_FLOOR))
            M = self.rows @ logr.T
            L = len(self.rows)
            self._kl_from = L * np.diag(M) - M.sum(axis=1)
        return self._kl_from

    def entropies(self) -> np.ndarray:
        if self._entropies is None:
            self._entropies = np.array([entropy_dense(r) for r in self.rows])
        return self._entropies


class EnsembleTables:
    """Per-round cache of member conditionals.

    Keys are (bucket-vector, context): member m reads its own bucket
    bucket_vec[m]. Contexts absent from every member's tables share one
    uniform default bundle, so untouched regions of the sequence space cost
    nothing.
    """

    def __init__(self, ensemble: Ensemble, temperature: float):
        if temperature <= 0.0:
            raise ValueError("temperature must be > 0")
        self.ensemble = ensemble
        self.temperature = temperature
        cfg = ensemble.config
        self.V = cfg.vocab_size
        self.L = cfg.ensemble_size
        self.alpha = cfg.smoothing
        self.backoff = cfg.backoff
        self.global_known = set()
        for counts in ensemble.members_global:
            self.global_known.update(counts.keys())
        alpha_mass = self.alpha * self.V
        self._prior_rows = np.stack([p / alpha_mass for p in ensemble.priors])
        self.default = _Bundle(self._prior_rows, self._cumsums(self._prior_rows))
        self._bundles: dict = {}

    def _cumsums(self, rows: np.ndarray) -> np.ndarray:
        logr = np.log(rows)
        z = (logr - logr.max(axis=1, keepdims=True)) / self.temperature
        w = np.exp(z)
        probs = w / w.sum(axis=1, keepdims=True)
        return np.cumsum(probs, axis=1)

    def _global_row(self, m: int, ctx: tuple) -> np.ndarray:
        garr = self.ensemble.members_global[m].get(ctx)
        if garr is None:
            return self._prior_rows[m]
        prior = self.ensemble.priors[m]
        return (garr + prior) / (garr.sum() + self.alpha * self.V)

    def _member_row(self, m: int, bucket: int, ctx: tuple) -> np.ndarray:
        arr = self.ensemble.members[m].get((bucket, ctx))
        if arr is None:
            if self.backoff == 0.0:
                return self._prior_rows[m]
            return self._global_row(m, ctx)
        total = arr.sum()
        prior = self.ensemble.priors[m]
        bucket_row = (arr + prior) / (total + self.alpha * self.V)
        if self.backoff == 0.0:
            return bucket_row
        lam = total / (total + self.backoff)
        return lam * bucket_row + (1.0 - lam) * self._global_row(m, ctx)

    def bundle(self, bucket_vec: tuple, ctx: tuple) -> _Bundle:
        if ctx not in self.global_known:
            return self.default
        key = (bucket_vec, ctx)
        cached = self._bundles.get(key)
        if cached is None:
            rows = np.stack([self._member_row(m, bucket_vec[m], ctx)
                             for m in range(self.L)])
            cached = _Bundle(rows, self._cumsums(rows))
            self._bundles[key] = cached
        return cached


def _sample_sequence(tables: EnsembleTables, bucket_vec: tuple, producer: int,
                     max_len: int, rng) -> tuple:
    """One temperature sample from a member; returns (tokens, states)."""
    cfg = tables.ensemble.config
    ctx = (BOS,) * cfg.order
    stop = cfg.stop_id
    top = tables.V - 1
    draws = rng.random(max_len)
    tokens = []
    states = []
    bundle = tables.bundle
    for step in range(max_len):
        cum = bundle(bucket_vec, ctx).cum[producer]
        t = cum.searchsorted(draws[step], side="right")
        if t > top:
            t = top
        t = int(t)
        tokens.append(t)
        states.append(ctx)
        if t == stop:
            break
        ctx = ctx[1:] + (t,)
    return tokens, states


def _sample_item(tables: EnsembleTables, bucket_vec: tuple, K: int,
                 max_len: int, rng) -> list:
    """K samples per member, producer-major order: [(producer, tokens, states)]."""
    out = []
    for p in range(tables.L):
        for _ in range(K):
            tokens, states = _sample_sequence(tables, bucket_vec, p, max_len, rng)
            out.append((p, tokens, states))
    return out


def strip_stop(tokens, stop_id: int) -> list:
    """Caption-text view of a sample: drop the terminating stop symbol."""
    if tokens and tokens[-1] == stop_id:
        return list(tokens[:-1])
    return list(tokens)


def sample_captions(ensemble: Ensemble, item, K: int = 8, temperature: float = 0.8,
                    max_len: int = 12, seed: int = 0) -> EnsembleCaptionSet:
    """K temperature samples per member with every member's conditionals attached."""
    if K < 1:
        raise ValueError("K must be >= 1")
    tables = EnsembleTables(ensemble, temperature)
    bucket_vec = ensemble.bucket_vector(item.features)
    rng = substream(seed, "sampling", item.id)
    raw = _sample_item(tables, bucket_vec, K, max_len, rng)
    V = tables.V
    ids = np.arange(V, dtype=np.int64)
    samples = []
    for producer, tokens, states in raw:
        cond_rows = []
        for q in range(tables.L):
            row = []
            for ctx in states:
                probs = tables.bundle(bucket_vec, ctx).rows[q]
                row.append(TokenDistribution(ids, probs.copy(), 0.0, V))
            cond_rows.append(tuple(row))
        samples.append(CaptionSample(producer, tuple(tokens), tuple(cond_rows)))
    return EnsembleCaptionSet(item.id, tables.L, K, tuple(samples))


def _aggregate(strategy: str, raw: list, tables: EnsembleTables,
               bucket_vec: tuple, K: int) -> float:
    L = tables.L
    if strategy == "divergence":
        total = 0.0
        for p, tokens, states in raw:
            dsum = 0.0
            for ctx in states:
                dsum += tables.bundle(bucket_vec, ctx).kl_from()[p]
            total += (dsum / len(tokens)) / K
        return total / (L * (L - 1))
    if strategy == "agreement":
        total = 0.0
        for p, tokens, states in raw:
            cross = 0.0
            for ctx, t in zip(states, tokens):
                col = tables.bundle(bucket_vec, ctx).rows[:, t]
                logs = np.log(col)
                cross += float(logs.sum() - logs[p])
            total += cross / (K * len(tokens))
        return total / (L * (L - 1))
    if strategy == "likelihood":
        total = 0.0
        for p, tokens, states in raw:
            for ctx, t in zip(states, tokens):
                total += math.log(float(tables.bundle(bucket_vec, ctx).rows[p, t]))
        return total / (K * L)
    if strategy == "entropy":
        total = 0.0
        for p, tokens, states in raw:
            for ctx in states:
                total += float(tables.bundle(bucket_vec, ctx).entropies()[p])
        return total / (K * L)
    if strategy == "entropy-mc":
        total = 0.0
        for p, tokens, states in raw:
            for ctx, t in zip(states, tokens):
                prob = float(tables.bundle(bucket_vec, ctx).rows[p, t])
                total += -prob * math.log(prob)
        return total / (K * L)
    raise ValueError(f"strategy {strategy!r} is not an ensemble scorer")


def score_items(ensemble: Ensemble, items, strategy: str, K: int = 8,
                temperature: float = 0.8, max_len: int = 12, seed: int = 0) -> dict:
    """Fast-path scores for many items; matches score_pool over materialized
    records for the same seed (shared sampling and shared dense kernels)."""
    if strategy in ("divergence", "agreement") and ensemble.config.ensemble_size < 2:
        raise ValueError(f"{strategy} needs an ensemble of at least 2 members")
    items = list(items)
    tables = EnsembleTables(ensemble, temperature)
    if not items:
        return {}
    buckets = ensemble.assign_buckets(np.stack([it.features for it in items]))
    scores = {}
    for item, brow in zip(items, buckets):
        bucket_vec = tuple(int(b) for b in brow)
        rng = substream(seed, "sampling", item.id)
        raw = _sample_item(tables, bucket_vec, K, max_len, rng)
        scores[item.id] = _aggregate(strategy, raw, tables, bucket_vec, K)
    return scores


def evaluate(ensemble: Ensemble, val_items, K: int = 8, temperature: float = 0.8,
             seed: int = 0, max_len: int = 12) -> tuple:
    """Held-out quality: (mean BLEU of sampled captions, mean reference log-lik).

    BLEU: per member, K samples per item scored against the references, then
    averaged over samples, items, and members. Log-likelihood: per-token mean
    teacher-forced log-probability of each reference (stop symbol included),
    averaged over references, items, and members.
    """
    val_items = list(val_items)
    if not val_items:
        raise ValueError("empty validation set")
    tables = EnsembleTables(ensemble, temperature)
    cfg = ensemble.config
    stop = cfg.stop_id
    buckets = ensemble.assign_buckets(np.stack([it.features for it in val_items]))
    L = tables.L
    bleu_per_member = np.zeros(L)
    ll_per_member = np.zeros(L)
    ref_tables = {it.id: ReferenceNgrams(it.references) for it in val_items}
    for item, brow in zip(val_items, buckets):
        bucket_vec = tuple(int(b) for b in brow)
        rng = substream(seed, "eval-sampling", item.id)
        raw = _sample_item(tables, bucket_vec, K, max_len, rng)
        refs = ref_tables[item.id]
        for p, tokens, _ in raw:
            cand = strip_stop(tokens, stop)
            bleu_per_member[p] += refs.score(cand) / (K * len(val_items))
        for ref in item.references:
            seq = (*ref, stop)
            ctx = (BOS,) * cfg.order
            lp = np.zeros(L)
            for t in seq:
                lp += np.log(tables.bundle(bucket_vec, ctx).rows[:, t])
                ctx = ctx[1:] + (t,)
            ll_per_member += lp / (len(seq) * len(item.references) * len(val_items))
    return float(bleu_per_member.mean()), float(ll_per_member.mean())
