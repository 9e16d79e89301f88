"""k-means over pooled features plus the batch-diversity diagnostics.

Deterministic by construction: k-means++ seeding from a named substream,
nearest-centroid ties to the lowest index, empty clusters repaired by moving
the point farthest from its assigned centroid (the repaired centroid becomes
that point, so inertia never increases).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .jsonl import iter_jsonl
from .seeds import substream

_CHUNK = 1024


@dataclass
class Clustering:
    K: int
    centroids: np.ndarray
    assignment: dict
    inertia: float
    inertia_history: list = field(default_factory=list)
    seed: int = 0


def default_k(n_items: int) -> int:
    """One cluster per 20 items (ceiling), at least 1."""
    if n_items < 1:
        raise ValueError("need at least one item")
    return max(1, math.ceil(n_items / 20))


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, chunked over rows of X."""
    out = np.empty((len(X), len(C)))
    for start in range(0, len(X), _CHUNK):
        block = X[start:start + _CHUNK]
        out[start:start + _CHUNK] = ((block[:, None, :] - C[None, :, :]) ** 2).sum(-1)
    return out


def _plus_plus_init(X: np.ndarray, k: int, rng) -> np.ndarray:
    n = len(X)
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(-1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # all remaining points coincide with a center; take the first unchosen
            taken = set(chosen)
            nxt = next(i for i in range(n) if i not in taken)
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(-1))
    return X[chosen].astype(np.float64).copy()


def kmeans_points(X: np.ndarray, k: int, seed: int, max_iters: int = 100):
    """Lloyd's algorithm with k-means++ init.

    Returns (centroids, labels, inertia, inertia_history); the history is the
    inertia after each assignment step and is non-increasing.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if not (1 <= k <= n):
        raise ValueError(f"K={k} must satisfy 1 <= K <= {n}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    rng = substream(seed, "kmeans")
    C = _plus_plus_init(X, k, rng)
    history = []
    prev = None
    for _ in range(max_iters):
        D2 = _sq_dists(X, C)
        labels = np.argmin(D2, axis=1)
        counts = np.bincount(labels, minlength=k)
        if np.any(counts == 0):
            own = D2[np.arange(n), labels].copy()
            for cluster in range(k):
                if counts[cluster]:
                    continue
                # never strand another cluster: only move points that are
                # not their cluster's sole member
                movable = np.where(counts[labels] > 1, own, -1.0)
                j = int(np.argmax(movable))
                counts[labels[j]] -= 1
                labels[j] = cluster
                counts[cluster] = 1
                C[cluster] = X[j]
                own[j] = 0.0
            D2 = _sq_dists(X, C)
        inertia = float(D2[np.arange(n), labels].sum())
        history.append(inertia)
        if prev is not None and np.array_equal(prev, labels):
            return C, labels, inertia, history
        prev = labels
        for cluster in range(k):
            C[cluster] = X[labels == cluster].mean(axis=0)
    # iteration budget exhausted: one final assignment keeps the
    # nearest-centroid invariant without moving centroids
    D2 = _sq_dists(X, C)
    labels = np.argmin(D2, axis=1)
    inertia = float(D2[np.arange(n), labels].sum())
    history.append(inertia)
    return C, labels, inertia, history


def kmeans(pool, k: int, seed: int, max_iters: int = 100) -> Clustering:
    """Cluster the full pool's features; assignment keyed by item id."""
    ids = pool.ids()
    X = pool.feature_matrix(ids)
    C, labels, inertia, history = kmeans_points(X, k, seed, max_iters)
    assignment = {item_id: int(lab) for item_id, lab in zip(ids, labels)}
    return Clustering(k, C, assignment, inertia, history, seed)


def clusters_selected(batch, clustering: Clustering) -> int:
    """Distinct clusters represented in a selection batch."""
    seen = set()
    for item_id in batch.ids:
        if item_id not in clustering.assignment:
            raise ValueError(f"id {item_id!r} has no cluster assignment")
        seen.add(clustering.assignment[item_id])
    return len(seen)


def mean_nn_distance(query_features, reference_features) -> float:
    """Mean Euclidean distance from each query to its nearest reference."""
    Q = np.asarray(query_features, dtype=np.float64)
    R = np.asarray(reference_features, dtype=np.float64)
    if len(Q) == 0:
        raise ValueError("empty query list")
    if len(R) == 0:
        raise ValueError("empty reference list")
    if Q.shape[1] != R.shape[1]:
        raise ValueError("query/reference dimension mismatch")
    total = 0.0
    for start in range(0, len(Q), _CHUNK):
        block = Q[start:start + _CHUNK]
        d2 = ((block[:, None, :] - R[None, :, :]) ** 2).sum(-1)
        total += float(np.sqrt(d2.min(axis=1)).sum())
    return total / len(Q)


# --- clustering dump JSONL ---------------------------------------------------
# header {"K": int, "inertia": float, "seed": int} then {"id": str, "cluster": int}


def write_clustering_jsonl(clustering: Clustering, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"K": clustering.K, "inertia": clustering.inertia, "seed": clustering.seed}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for item_id in sorted(clustering.assignment):
            obj = {"id": item_id, "cluster": clustering.assignment[item_id]}
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def read_clustering_jsonl(path) -> Clustering:
    rows = iter_jsonl(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise ValueError(f"{path}: empty clustering file") from None
    assignment = {}
    for _, obj in rows:
        assignment[str(obj["id"])] = int(obj["cluster"])
    return Clustering(int(header["K"]), np.zeros((0, 0)), assignment,
                      float(header["inertia"]), seed=int(header.get("seed", 0)))
