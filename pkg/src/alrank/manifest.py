"""Run manifests: enough provenance to reproduce any command output."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass

from . import __version__


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_hash: str
    seed: int | None
    input_paths: list
    output_paths: list
    engine_version: str
    config: dict


def config_digest(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(path, command: str, config: dict, seed: int | None,
                   input_paths, output_paths) -> RunManifest:
    """Write atomically (tmp file + rename) so readers never see a partial file."""
    manifest = RunManifest(
        command=command,
        config_hash=config_digest(config),
        seed=seed,
        input_paths=[str(p) for p in input_paths],
        output_paths=[str(p) for p in output_paths],
        engine_version=__version__,
        config=config,
    )
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return manifest
