"""Turns score reports into acquisition batches.

The cluster cap takes at most phi picks per k-means cluster per round; when
that is infeasible for the requested batch size, the effective cap is raised
to 2*phi, 3*phi, ... and the number of raises is recorded as the batch's
relaxation level. Random and greedy k-center (coreset) baselines live here
too.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .scorers import ScoreReport, sort_reports
from .seeds import substream


@dataclass
class SelectionBatch:
    round: int
    ids: list
    per_cluster_counts: dict = field(default_factory=dict)
    relaxation_level: int = 0
    strategy: str = ""


def select_capped(reports, clustering, batch_size: int, phi: int | None,
                  round: int = 0, strategy: str | None = None) -> SelectionBatch:
    """Greedy best-first selection with a per-cluster cap of phi picks.

    Passes over the score-sorted reports, skipping items whose cluster is
    full; each pass that ends short of batch_size raises the effective cap by
    another phi. phi=None disables the cap (plain top-k).
    """
    reports = list(reports)
    if batch_size > len(reports):
        raise ValueError(f"batch size {batch_size} exceeds {len(reports)} scored items")
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    if phi is not None and phi < 1:
        raise ValueError("phi must be >= 1")
    ordered = sort_reports(reports)
    clusters = {}
    for r in ordered:
        if r.item_id not in clustering.assignment:
            raise ValueError(f"id {r.item_id!r} has no cluster assignment")
        clusters[r.item_id] = clustering.assignment[r.item_id]
    picked: list = []
    picked_set: set = set()
    counts: Counter = Counter()
    level = 0
    while len(picked) < batch_size:
        cap = math.inf if phi is None else phi * (level + 1)
        for r in ordered:
            if len(picked) == batch_size:
                break
            if r.item_id in picked_set:
                continue
            cluster = clusters[r.item_id]
            if counts[cluster] < cap:
                picked.append(r.item_id)
                picked_set.add(r.item_id)
                counts[cluster] += 1
        if len(picked) < batch_size:
            level += 1
    return SelectionBatch(round, picked, dict(counts), level,
                          strategy or (ordered[0].strategy if ordered else ""))


def select_random(pool, batch_size: int, seed: int, round: int | None = None) -> SelectionBatch:
    """Uniform sample without replacement from the unlabeled pool."""
    candidates = sorted(pool.unlabeled)
    if batch_size > len(candidates):
        raise ValueError(f"batch size {batch_size} exceeds {len(candidates)} unlabeled items")
    rng = substream(seed, "random-strategy", "batch")
    idx = rng.choice(len(candidates), size=batch_size, replace=False)
    ids = [candidates[int(i)] for i in idx]
    return SelectionBatch(pool.round + 1 if round is None else round, ids, {}, 0, "random")


def select_random_capped(pool, clustering, batch_size: int, phi: int | None,
                         seed: int, round: int | None = None) -> SelectionBatch:
    """Seeded-uniform scores fed through the cluster cap."""
    candidates = sorted(pool.unlabeled)
    if batch_size > len(candidates):
        raise ValueError(f"batch size {batch_size} exceeds {len(candidates)} unlabeled items")
    rng = substream(seed, "random-strategy", "capped")
    values = rng.random(len(candidates))
    reports = [ScoreReport(i, "random", float(v), "maximize")
               for i, v in zip(candidates, values)]
    batch = select_capped(reports, clustering, batch_size, phi,
                          round=pool.round + 1 if round is None else round,
                          strategy="cluster-random")
    return batch


def select_coreset_greedy(pool, batch_size: int, round: int | None = None) -> SelectionBatch:
    """Farthest-first traversal anchored on the labeled set.

    Repeatedly picks the unlabeled item with the greatest minimum distance to
    the labeled set plus the picks so far; ties break to the ascending id.
    """
    if not pool.labeled:
        raise ValueError("coreset selection needs at least one labeled anchor")
    candidates = sorted(pool.unlabeled)
    if batch_size > len(candidates):
        raise ValueError(f"batch size {batch_size} exceeds {len(candidates)} unlabeled items")
    F = pool.feature_matrix(candidates)
    anchors = pool.feature_matrix(sorted(pool.labeled))
    min_d2 = ((F[:, None, :] - anchors[None, :, :]) ** 2).sum(-1).min(axis=1)
    picked = []
    for _ in range(batch_size):
        j = int(np.argmax(min_d2))  # first max = lowest id on ties
        picked.append(candidates[j])
        d2_new = ((F - F[j]) ** 2).sum(-1)
        min_d2 = np.minimum(min_d2, d2_new)
        min_d2[j] = -1.0  # exclude from future argmax
    return SelectionBatch(pool.round + 1 if round is None else round,
                          picked, {}, 0, "coreset-greedy")


def cap_feasible(cluster_sizes, batch_size: int, phi: int) -> bool:
    """True when batch_size picks fit under a per-cluster cap of phi."""
    return sum(min(size, phi) for size in cluster_sizes) >= batch_size


# --- batch JSONL -------------------------------------------------------------


def write_batch_jsonl(batch: SelectionBatch, path) -> None:
    obj = {"round": batch.round, "strategy": batch.strategy,
           "ids": list(batch.ids), "relaxation_level": batch.relaxation_level}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def read_batch_jsonl(path) -> SelectionBatch:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.loads(fh.readline())
    return SelectionBatch(int(obj["round"]), [str(i) for i in obj["ids"]],
                          {}, int(obj["relaxation_level"]), str(obj["strategy"]))
