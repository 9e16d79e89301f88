"""Dataset pool: the labeled/unlabeled partition and acquisition state.

Iteration order everywhere is ascending id order, so downstream tie-breaking
is reproducible. Acquisition is append-only: once labeled, an id never
returns to the unlabeled side.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .jsonl import SchemaError, iter_jsonl
from .seeds import substream


@dataclass(frozen=True)
class ItemRecord:
    """One pool item: unique id, pooled feature vector, reference captions."""

    id: str
    features: np.ndarray
    references: tuple

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1:
            raise ValueError(f"item {self.id!r}: features must be a flat vector")
        if not np.all(np.isfinite(feats)):
            raise ValueError(f"item {self.id!r}: features must be finite")
        object.__setattr__(self, "features", feats)
        refs = tuple(tuple(int(t) for t in ref) for ref in self.references)
        if not refs:
            raise ValueError(f"item {self.id!r}: empty reference list")
        if any(len(ref) == 0 for ref in refs):
            raise ValueError(f"item {self.id!r}: empty reference caption")
        object.__setattr__(self, "references", refs)


@dataclass
class Pool:
    items: dict
    labeled: list = field(default_factory=list)
    unlabeled: list = field(default_factory=list)
    round: int = 0
    round_labeled: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.items)

    @property
    def feature_dim(self) -> int:
        first = next(iter(self.items.values()))
        return len(first.features)

    def ids(self) -> list:
        return sorted(self.items)

    def labeled_items(self) -> list:
        return [self.items[i] for i in self.labeled]

    def feature_matrix(self, ids=None) -> np.ndarray:
        ids = self.ids() if ids is None else list(ids)
        return np.stack([self.items[i].features for i in ids])

    def copy(self) -> "Pool":
        return Pool(dict(self.items), list(self.labeled), list(self.unlabeled),
                    self.round, dict(self.round_labeled))


def pool_from_items(items) -> Pool:
    """Build an all-unlabeled pool from ItemRecords (ids must be unique)."""
    by_id: dict = {}
    dim = None
    for item in items:
        if item.id in by_id:
            raise ValueError(f"duplicate item id {item.id!r}")
        if dim is None:
            dim = len(item.features)
        elif len(item.features) != dim:
            raise ValueError(
                f"item {item.id!r}: feature dimension {len(item.features)} != {dim}"
            )
        by_id[item.id] = item
    if not by_id:
        raise ValueError("pool must contain at least one item")
    return Pool(items=by_id, unlabeled=sorted(by_id))


def load_pool(features_records, references_records) -> Pool:
    """Assemble a pool from parallel feature and reference record streams.

    Both streams must cover exactly the same ids; violations are rejected with
    the offending id in the message.
    """
    feats: dict = {}
    for rec in features_records:
        item_id = str(rec["id"])
        if item_id in feats:
            raise ValueError(f"duplicate feature record for id {item_id!r}")
        feats[item_id] = rec["features"]
    refs: dict = {}
    for rec in references_records:
        item_id = str(rec["id"])
        if item_id in refs:
            raise ValueError(f"duplicate reference record for id {item_id!r}")
        refs[item_id] = rec["references"]
    for item_id in feats:
        if item_id not in refs:
            raise ValueError(f"feature record for id {item_id!r} has no reference record")
    for item_id in refs:
        if item_id not in feats:
            raise ValueError(f"reference record for id {item_id!r} has no feature record")
    items = [ItemRecord(i, np.asarray(feats[i], dtype=np.float64),
                        tuple(tuple(r) for r in refs[i]))
             for i in sorted(feats)]
    return pool_from_items(items)


def load_pool_from_paths(features_path, references_path) -> Pool:
    def stream(path, required):
        for lineno, obj in iter_jsonl(path):
            for key in ("id", required):
                if key not in obj:
                    raise SchemaError(f"{path}:{lineno}: missing field {key!r}")
            yield obj

    return load_pool(stream(features_path, "features"),
                     stream(references_path, "references"))


def seed_split(pool: Pool, fraction: float, seed: int) -> Pool:
    """Label a uniformly sampled ceil(fraction*N) of the pool as the seed set."""
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"seed fraction {fraction!r} outside (0, 1]")
    if pool.round != 0 or pool.labeled:
        raise ValueError("pool already seeded")
    n_seed = math.ceil(fraction * pool.n)
    rng = substream(seed, "split")
    order = sorted(pool.unlabeled)
    picked_idx = rng.choice(len(order), size=n_seed, replace=False)
    picked = {order[int(i)] for i in picked_idx}
    pool.labeled = sorted(picked)
    pool.unlabeled = sorted(set(order) - picked)
    for item_id in picked:
        pool.round_labeled[item_id] = 0
    return pool


def apply_batch(pool: Pool, batch) -> Pool:
    """Move a selection batch to the labeled side; all-or-nothing."""
    unlabeled = set(pool.unlabeled)
    seen = set()
    for item_id in batch.ids:
        if item_id not in pool.items:
            raise ValueError(f"batch id {item_id!r} is not in the pool")
        if item_id not in unlabeled:
            raise ValueError(f"batch id {item_id!r} is already labeled")
        if item_id in seen:
            raise ValueError(f"batch id {item_id!r} appears twice")
        seen.add(item_id)
    pool.round += 1
    pool.labeled = sorted(set(pool.labeled) | seen)
    pool.unlabeled = sorted(unlabeled - seen)
    for item_id in seen:
        pool.round_labeled[item_id] = pool.round
    return pool


def batch_size_for_round(n_items: int, fraction: float, remaining: int) -> int:
    """ceil(fraction*N) per round, truncated to the remaining unlabeled count."""
    return min(math.ceil(fraction * n_items), remaining)


# --- JSONL dumps -----------------------------------------------------------


def write_features_jsonl(items, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in sorted(items, key=lambda it: it.id):
            obj = {"id": item.id, "features": [float(x) for x in item.features]}
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def write_references_jsonl(items, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in sorted(items, key=lambda it: it.id):
            obj = {"id": item.id, "references": [list(r) for r in item.references]}
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def write_pool_state_jsonl(pool: Pool, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        labeled = set(pool.labeled)
        for item_id in pool.ids():
            obj = {"id": item_id,
                   "labeled": item_id in labeled,
                   "round_labeled": pool.round_labeled.get(item_id)}
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
