"""Run-config parsing and validation for the simulate command."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

from .harness import HARNESS_STRATEGIES
from .learner import ToyLearnerConfig
from .synthetic import SyntheticConfig


@dataclass(frozen=True)
class RunConfig:
    strategy: str
    phi: int | None
    samples_k: int
    temperature: float
    max_len: int
    rounds_fraction: float
    cluster_k: int | None
    seeds: tuple
    learner: ToyLearnerConfig
    synthetic: SyntheticConfig


def resolve_overrides(args) -> dict:
    """Flag overrides for config fields; absent flags leave the config alone."""
    overrides = {}
    if args.strategy:
        overrides["strategy"] = args.strategy
    if args.phi is not None:
        overrides["phi"] = args.phi
    if args.batch_fraction is not None:
        overrides["rounds_fraction"] = args.batch_fraction
    if args.samples_k is not None:
        overrides["samples_k"] = args.samples_k
    if args.temperature is not None:
        overrides["temperature"] = args.temperature
    if args.ensemble_size is not None:
        overrides.setdefault("learner", {})["ensemble_size"] = args.ensemble_size
    return overrides


def _merge(base: dict, overrides: dict) -> dict:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict):
            merged[key] = {**merged.get(key, {}), **value}
        else:
            merged[key] = value
    return merged


def _sub_config(cls, raw: dict, prefix: str, problems: list):
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            problems.append(f"{prefix}.{key}: unknown field")
    try:
        return cls(**{k: v for k, v in raw.items() if k in known})
    except (TypeError, ValueError) as exc:
        problems.append(f"{prefix}: {exc}")
        return None


def parse_run_config(raw: dict) -> tuple:
    """Validate a raw config dict; returns (RunConfig, resolved_dict).

    Raises ValueError listing every problem found, one per line.
    """
    problems: list = []
    known_top = {"strategy", "phi", "samples_k", "temperature", "max_len",
                 "rounds_fraction", "cluster_k", "seeds", "learner", "synthetic"}
    for key in raw:
        if key not in known_top:
            problems.append(f"{key}: unknown field")

    strategy = raw.get("strategy", "random")
    if strategy not in HARNESS_STRATEGIES:
        problems.append(f"strategy: {strategy!r} not one of {sorted(HARNESS_STRATEGIES)}")
    phi = raw.get("phi", 3)
    if phi is not None and (not isinstance(phi, int) or phi < 1):
        problems.append("phi: must be null or an integer >= 1")
    samples_k = raw.get("samples_k", 8)
    if not isinstance(samples_k, int) or samples_k < 1:
        problems.append("samples_k: must be an integer >= 1")
    temperature = raw.get("temperature", 0.8)
    if not isinstance(temperature, (int, float)) or temperature <= 0:
        problems.append("temperature: must be > 0")
    max_len = raw.get("max_len", 12)
    if not isinstance(max_len, int) or max_len < 1:
        problems.append("max_len: must be an integer >= 1")
    rounds_fraction = raw.get("rounds_fraction", 0.05)
    if not isinstance(rounds_fraction, (int, float)) or not (0 < rounds_fraction <= 1):
        problems.append("rounds_fraction: must be in (0, 1]")
    cluster_k = raw.get("cluster_k", "auto")
    if cluster_k in ("auto", None):
        cluster_k = None
    elif not isinstance(cluster_k, int) or cluster_k < 1:
        problems.append("cluster_k: must be 'auto' or an integer >= 1")
        cluster_k = None
    seeds = raw.get("seeds", [0])
    if (not isinstance(seeds, list) or not seeds
            or not all(isinstance(s, int) and s >= 0 for s in seeds)):
        problems.append("seeds: must be a non-empty list of non-negative integers")
        seeds = [0]

    learner = _sub_config(ToyLearnerConfig, raw.get("learner", {}), "learner", problems)
    synthetic = _sub_config(SyntheticConfig, raw.get("synthetic", {}), "synthetic", problems)
    if learner is not None and synthetic is not None:
        if learner.vocab_size != synthetic.vocab_size:
            problems.append("learner.vocab_size must match synthetic.vocab_size")
    if problems:
        raise ValueError("invalid run config:\n  " + "\n  ".join(problems))

    cfg = RunConfig(strategy, phi, samples_k, float(temperature), max_len,
                    float(rounds_fraction), cluster_k, tuple(seeds),
                    learner, synthetic)
    resolved = {
        "strategy": cfg.strategy, "phi": cfg.phi, "samples_k": cfg.samples_k,
        "temperature": cfg.temperature, "max_len": cfg.max_len,
        "rounds_fraction": cfg.rounds_fraction,
        "cluster_k": "auto" if cfg.cluster_k is None else cfg.cluster_k,
        "seeds": list(cfg.seeds),
        "learner": {f.name: getattr(learner, f.name) for f in fields(ToyLearnerConfig)},
        "synthetic": {f.name: getattr(synthetic, f.name) for f in fields(SyntheticConfig)},
    }
    return cfg, resolved


def load_run_config(path, overrides: dict | None = None) -> tuple:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: run config must be a JSON object")
    if overrides:
        raw = _merge(raw, overrides)
    return parse_run_config(raw)
