"""Force-decoding export: ensemble caption records for the selection engine.

For every item, each ensemble member draws K samples; each sample is then
teacher-forced through every member to record the full cross-model grid of
next-token conditionals, truncated to the top_k most probable tokens with the
rest folded into the remainder bucket. Output conforms to the engine's
ensemble-scores and features JSONL schemas.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
import torch

from .model import load_checkpoint


@dataclass(frozen=True)
class ExportJob:
    checkpoint_paths: tuple
    item_source: str
    K: int = 8
    temperature: float = 0.8
    top_k: int = 64
    vocab_size: int | None = None  # default: taken from the checkpoints
    max_len: int = 12
    seed: int = 0
    greedy: bool = False

    def __post_init__(self):
        if len(self.checkpoint_paths) < 2:
            raise ValueError("ensemble strategies need at least 2 checkpoints")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k truncation must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")


def _derived_generator(seed: int, *labels) -> torch.Generator:
    tag = "/".join(str(x) for x in labels)
    digest = hashlib.sha256(f"{seed}/{tag}".encode("utf-8")).digest()
    gen = torch.Generator()
    gen.manual_seed(int.from_bytes(digest[:8], "little") & (2 ** 63 - 1))
    return gen


def _pool_features(raw) -> list:
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim == 2:  # temporal stack: mean-pool the time axis
        arr = arr.mean(axis=0)
    if arr.ndim != 1:
        raise ValueError("features must be a vector or a temporal stack of vectors")
    return [float(x) for x in arr]


def read_items(path) -> list:
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "id" not in rec or "features" not in rec:
                raise ValueError(f"{path}:{lineno}: need id and features fields")
            items.append((str(rec["id"]), _pool_features(rec["features"])))
    if not items:
        raise ValueError(f"{path}: no items")
    return sorted(items)


def _truncate(probs: np.ndarray, top_k: int) -> dict:
    """Keep the top_k most probable tokens (ties to the lower id), fold the
    rest into the remainder, and emit ids in ascending order.

    The remainder is the sum of the excluded probabilities, so a
    top_k = vocab_size export has an exact zero remainder at every position.
    """
    order = np.lexsort((np.arange(len(probs)), -probs))
    keep = np.sort(order[:top_k])
    excluded = order[top_k:]
    listed = probs[keep]
    positive = listed > 0.0
    remainder = float(probs[excluded].sum() + listed[~positive].sum())
    keep, listed = keep[positive], listed[positive]
    return {"t": [int(t) for t in keep],
            "p": [float(p) for p in listed],
            "rem": max(0.0, remainder)}


def load_ensemble(job: ExportJob) -> list:
    models = [load_checkpoint(p) for p in job.checkpoint_paths]
    tokenizers = {m.config.tokenizer_id for m in models}
    if len(tokenizers) != 1:
        raise ValueError(f"tokenizer mismatch between members: {sorted(tokenizers)}")
    vocabs = {m.config.vocab_size for m in models}
    if len(vocabs) != 1:
        raise ValueError("members disagree on vocabulary size")
    if job.vocab_size is not None and job.vocab_size != vocabs.pop():
        raise ValueError("job vocab_size does not match the checkpoints")
    dims = {m.config.feature_dim for m in models}
    if len(dims) != 1:
        raise ValueError("members disagree on feature dimension")
    if job.top_k > models[0].config.vocab_size:
        raise ValueError("top_k exceeds the vocabulary size")
    return models


def export_ensemble_records(job: ExportJob, scores_path, features_path) -> dict:
    """Run the export; returns counters {items, records}."""
    models = load_ensemble(job)
    items = read_items(job.item_source)
    n_records = 0
    with open(scores_path, "w", encoding="utf-8") as scores_fh, \
            open(features_path, "w", encoding="utf-8") as feats_fh:
        for item_id, feats in items:
            feats_fh.write(json.dumps({"id": item_id, "features": feats},
                                      separators=(",", ":")) + "\n")
            fvec = torch.tensor(feats, dtype=torch.float32)
            for producer, model in enumerate(models):
                for k in range(job.K):
                    gen = _derived_generator(job.seed, item_id, producer, k)
                    tokens = model.sample(fvec, job.max_len, job.temperature,
                                          gen, greedy=job.greedy)
                    cond = []
                    for other in models:
                        dists = other.prefix_distributions(fvec, tokens).numpy()
                        cond.append([_truncate(dists[w], job.top_k)
                                     for w in range(len(tokens))])
                    record = {"id": item_id, "producer": producer,
                              "tokens": tokens, "cond": cond}
                    scores_fh.write(json.dumps(record, separators=(",", ":")) + "\n")
                    n_records += 1
    return {"items": len(items), "records": n_records}
