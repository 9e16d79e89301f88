"""JSONL helpers with line-numbered schema errors."""

from __future__ import annotations

import json


class SchemaError(ValueError):
    """A record violated its file schema; message carries the line number."""


def iter_jsonl(path):
    """Yield (lineno, object) for every non-empty line of a JSONL file."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc


def write_jsonl(path, objects) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objects:
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def require(obj: dict, key: str, path, lineno: int):
    if key not in obj:
        raise SchemaError(f"{path}:{lineno}: missing field {key!r}")
    return obj[key]
