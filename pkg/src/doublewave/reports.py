"""Deterministic report serialization.

Every delimited or JSON artifact the package writes goes through here so two
runs with the same config and seed produce byte-identical files regardless
of worker count. Floats are emitted in shortest round-trip form, keys are
sorted, and nothing time- or host-dependent is ever included.
"""
from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .snapshots import format_float


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return to_jsonable(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and (obj != obj):  # NaN is not valid JSON
        return None
    return obj


def write_json(path: str, payload) -> None:
    text = json.dumps(to_jsonable(payload), sort_keys=True, indent=2,
                      allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.write("\n")


def write_csv(path: str, header: list[str], rows) -> None:
    """Rows of floats (or strings, passed through) under a fixed header."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header))
        fh.write("\n")
        for row in rows:
            cells = [c if isinstance(c, str) else format_float(c) for c in row]
            fh.write(",".join(cells))
            fh.write("\n")


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(out_dir: str, scenario: str, config_text: str, seed: int,
                   outputs: list[str], extra: dict | None = None) -> str:
    payload = {
        "scenario": scenario,
        "config_sha256": sha256_text(config_text),
        "seed": seed,
        "outputs": sorted(outputs),
    }
    if extra:
        payload.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    write_json(path, payload)
    return path
