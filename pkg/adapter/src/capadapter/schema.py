"""Validators for the engine's JSONL interchange formats.

The JSON Schema handles shape; `validate_ensemble_records` layers on the
cross-field rules a schema cannot express (cond grid dimensions, sorted token
ids, per-position probability mass within neural softmax tolerance).
"""

from __future__ import annotations

import json

import jsonschema

MASS_TOLERANCE = 1e-4

DISTRIBUTION_SCHEMA = {
    "type": "object",
    "required": ["t", "p", "rem"],
    "properties": {
        "t": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "p": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "rem": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

RECORD_SCHEMA = {
    "type": "object",
    "required": ["id", "producer", "tokens", "cond"],
    "properties": {
        "id": {"type": "string"},
        "producer": {"type": "integer", "minimum": 0},
        "tokens": {"type": "array", "items": {"type": "integer", "minimum": 0},
                   "minItems": 1},
        "cond": {"type": "array", "minItems": 1,
                 "items": {"type": "array", "items": DISTRIBUTION_SCHEMA}},
    },
    "additionalProperties": False,
}

FEATURES_SCHEMA = {
    "type": "object",
    "required": ["id", "features"],
    "properties": {
        "id": {"type": "string"},
        "features": {"type": "array", "items": {"type": "number"}, "minItems": 1},
    },
    "additionalProperties": False,
}

_record_validator = jsonschema.Draft202012Validator(RECORD_SCHEMA)
_features_validator = jsonschema.Draft202012Validator(FEATURES_SCHEMA)


class RecordValidationError(ValueError):
    pass


def validate_ensemble_records(path) -> dict:
    """Validate an ensemble-scores file; returns {"items": n, "records": m}."""
    per_item: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            errors = sorted(_record_validator.iter_errors(rec), key=str)
            if errors:
                raise RecordValidationError(f"{path}:{lineno}: {errors[0].message}")
            width = len(rec["tokens"])
            rows = rec["cond"]
            if any(len(row) != width for row in rows):
                raise RecordValidationError(
                    f"{path}:{lineno}: cond rows must have {width} columns")
            for row in rows:
                for cell in row:
                    if len(cell["t"]) != len(cell["p"]):
                        raise RecordValidationError(
                            f"{path}:{lineno}: t/p arrays differ in length")
                    if any(b <= a for a, b in zip(cell["t"], cell["t"][1:])):
                        raise RecordValidationError(
                            f"{path}:{lineno}: token ids not sorted ascending")
                    mass = sum(cell["p"]) + cell["rem"]
                    if not (1 - MASS_TOLERANCE <= mass <= 1 + MASS_TOLERANCE):
                        raise RecordValidationError(
                            f"{path}:{lineno}: probability mass {mass!r}")
            entry = per_item.setdefault(rec["id"], {"rows": len(rows), "count": 0})
            if entry["rows"] != len(rows):
                raise RecordValidationError(
                    f"{path}:{lineno}: inconsistent ensemble size for {rec['id']!r}")
            entry["count"] += 1
    if not per_item:
        raise RecordValidationError(f"{path}: no records")
    counts = {e["count"] for e in per_item.values()}
    if len(counts) != 1:
        raise RecordValidationError(f"{path}: unequal sample counts across items")
    return {"items": len(per_item), "records": sum(e["count"] for e in per_item.values())}


def validate_features(path) -> int:
    count = 0
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            errors = sorted(_features_validator.iter_errors(rec), key=str)
            if errors:
                raise RecordValidationError(f"{path}:{lineno}: {errors[0].message}")
            if dim is None:
                dim = len(rec["features"])
            elif len(rec["features"]) != dim:
                raise RecordValidationError(
                    f"{path}:{lineno}: feature dimension {len(rec['features'])} != {dim}")
            count += 1
    if count == 0:
        raise RecordValidationError(f"{path}: no records")
    return count
