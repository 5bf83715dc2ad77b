"""Versioned JSON checkpoints: named, shape-annotated flat float arrays.

Floats round-trip exactly (json uses repr). Loading refuses version or shape
mismatches instead of guessing.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import CheckpointError

FORMAT = "cascadecite-arrays"
VERSION = 1


def dump_arrays(arrays: dict[str, np.ndarray], extra: dict | None = None) -> dict:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "arrays": {
            name: {"shape": list(a.shape), "values": np.asarray(a, dtype=np.float64).ravel().tolist()}
            for name, a in arrays.items()
        },
    }
    if extra:
        doc.update(extra)
    return doc


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray], extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(dump_arrays(arrays, extra), indent=1))


def parse_arrays(doc: dict, expected_shapes: dict[str, tuple[int, ...]] | None = None) -> dict[str, np.ndarray]:
    if doc.get("format") != FORMAT:
        raise CheckpointError(f"not a parameter checkpoint (format={doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise CheckpointError(
            f"checkpoint version {doc.get('version')!r} not supported (expected {VERSION})"
        )
    arrays = {}
    for name, rec in doc["arrays"].items():
        shape = tuple(rec["shape"])
        vals = np.asarray(rec["values"], dtype=np.float64)
        if vals.size != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"array {name!r}: {vals.size} values do not fill shape {shape}")
        arrays[name] = vals.reshape(shape)
    if expected_shapes is not None:
        missing = sorted(set(expected_shapes) - set(arrays))
        extra_names = sorted(set(arrays) - set(expected_shapes))
        if missing or extra_names:
            raise CheckpointError(
                f"checkpoint arrays do not match: missing {missing}, unexpected {extra_names}"
            )
        for name, shape in expected_shapes.items():
            if arrays[name].shape != tuple(shape):
                raise CheckpointError(
                    f"array {name!r} has shape {arrays[name].shape}, expected {tuple(shape)}"
                )
    return arrays


def load_arrays(path: str | Path, expected_shapes: dict[str, tuple[int, ...]] | None = None) -> tuple[dict[str, np.ndarray], dict]:
    doc = json.loads(Path(path).read_text())
    arrays = parse_arrays(doc, expected_shapes)
    extra = {k: v for k, v in doc.items() if k not in ("format", "version", "arrays")}
    return arrays, extra
