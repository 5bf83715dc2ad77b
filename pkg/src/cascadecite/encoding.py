"""Trees -> fixed-shape per-level degree sequences with adoption-time bins.

A schema fixes the level count K, one padded length per level, and the time
bin edges. Encoding a tree lists (degree, bin) for every node of each level,
sorted by degree descending with earlier adopters first on ties, then pads
with (0, bin 0) up to the schema length. Bin 0 is reserved for padding; real
adoption times map to bins 1..L.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import BinRangeError, ParseError, SchemaError, SchemaOverflowError
from .trees import CascadeTree

PAD_BIN = 0


class SeqEntry(NamedTuple):
    degree: int
    bin: int
    is_pad: bool


@dataclass(frozen=True)
class EncodingSchema:
    level_lengths: tuple[int, ...]
    bin_count: int
    window_T: int
    bin_edges: tuple[float, ...]  # len bin_count + 1, edges[0] = 0, edges[-1] = window_T

    def __post_init__(self):
        if len(self.level_lengths) < 1:
            raise SchemaError("schema needs at least one level")
        if any(l < 1 for l in self.level_lengths):
            raise SchemaError(f"level lengths must be >= 1, got {self.level_lengths}")
        if self.bin_count < 1:
            raise SchemaError(f"bin_count must be >= 1, got {self.bin_count}")
        if self.window_T < 1:
            raise SchemaError(f"window_T must be >= 1, got {self.window_T}")
        e = self.bin_edges
        if len(e) != self.bin_count + 1:
            raise SchemaError(f"need {self.bin_count + 1} bin edges, got {len(e)}")
        if e[0] != 0.0 or e[-1] != float(self.window_T):
            raise SchemaError(f"bin edges must run from 0 to window_T, got [{e[0]}, {e[-1]}]")
        if any(a >= b for a, b in zip(e, e[1:])):
            raise SchemaError(f"bin edges must increase strictly: {e}")

    @property
    def depth(self) -> int:
        return len(self.level_lengths)

    @property
    def total_length(self) -> int:
        return sum(self.level_lengths)


def uniform_bin_edges(bin_count: int, window_T: int) -> tuple[float, ...]:
    return tuple(l * window_T / bin_count for l in range(bin_count + 1))


def schema_from_corpus(
    trees: Sequence[CascadeTree], bin_count: int, window_T: int
) -> EncodingSchema:
    """Max depth and per-level max width over the corpus, uniform bin edges."""
    if not trees:
        raise SchemaError("cannot build a schema from an empty corpus")
    depth = max(len(t.levels) for t in trees)
    if depth == 0:
        raise SchemaError("corpus holds only root-only trees; no levels to size")
    lengths = [0] * depth
    for t in trees:
        for k, level in enumerate(t.levels):
            lengths[k] = max(lengths[k], len(level))
        worst = max((t.adoption_time[v] for v in t.parent), default=0)
        if worst >= window_T:
            raise SchemaError(
                f"tree {t.root!r} has adoption time {worst} outside window [0, {window_T})"
            )
    return EncodingSchema(
        level_lengths=tuple(lengths),
        bin_count=bin_count,
        window_T=window_T,
        bin_edges=uniform_bin_edges(bin_count, window_T),
    )


def time_bin(t: float, schema: EncodingSchema) -> int:
    """Index l with edge[l-1] <= t < edge[l]; domain is [0, window_T)."""
    if not (0 <= t < schema.window_T):
        raise BinRangeError(f"time {t} outside [0, {schema.window_T})")
    return int(np.searchsorted(schema.bin_edges, t, side="right"))


def node_degree(tree: CascadeTree, node: str) -> int:
    """Child count plus the parent link; the root has no parent link."""
    c = len(tree.children.get(node, ()))
    return c if node == tree.root else c + 1


def encode_level(
    pairs: Iterable[tuple[int, int]],
    length: int,
    schema: EncodingSchema,
    truncate: bool = False,
) -> tuple[SeqEntry, ...]:
    """Sort (degree, adoption_time) pairs and pad to the schema length.

    Descending degree, earlier adopters first on ties. Overlong levels raise
    unless truncate, which keeps the `length` largest-degree entries.
    """
    ordered = sorted(pairs, key=lambda p: (-p[0], p[1]))
    if len(ordered) > length:
        if not truncate:
            raise SchemaOverflowError(
                f"level holds {len(ordered)} nodes but schema allows {length}"
            )
        ordered = ordered[:length]
    entries = [SeqEntry(degree=d, bin=time_bin(t, schema), is_pad=False) for d, t in ordered]
    entries.extend(SeqEntry(degree=0, bin=PAD_BIN, is_pad=True) for _ in range(length - len(entries)))
    return tuple(entries)


@dataclass(frozen=True)
class DegreeSequence:
    levels: tuple[tuple[SeqEntry, ...], ...]

    def degree_rows(self) -> list[np.ndarray]:
        return [np.array([e.degree for e in lvl], dtype=np.float64) for lvl in self.levels]

    def bin_rows(self) -> list[np.ndarray]:
        return [np.array([e.bin for e in lvl], dtype=np.int64) for lvl in self.levels]

    def flatten_decayed(self, decay: np.ndarray) -> np.ndarray:
        """Concatenate all levels as degree * decay[bin] (padding stays 0)."""
        parts = [
            np.array([e.degree * decay[e.bin] for e in lvl], dtype=np.float64)
            for lvl in self.levels
        ]
        return np.concatenate(parts) if parts else np.zeros(0)


def fits_schema(tree: CascadeTree, schema: EncodingSchema) -> bool:
    if len(tree.levels) > schema.depth:
        return False
    return all(len(lvl) <= schema.level_lengths[k] for k, lvl in enumerate(tree.levels))


def encode(tree: CascadeTree, schema: EncodingSchema, truncate: bool = False) -> DegreeSequence:
    """Per-level sorted, padded (degree, bin) sequences for one tree.

    Levels past the tree's depth come out as all padding. Trees wider or
    deeper than the schema raise unless truncate, which drops the extra
    lowest-degree nodes per level and any levels past the schema depth.
    """
    if len(tree.levels) > schema.depth and not truncate:
        raise SchemaOverflowError(
            f"tree depth {len(tree.levels)} exceeds schema depth {schema.depth}"
        )
    out = []
    for k in range(schema.depth):
        nodes = tree.levels[k] if k < len(tree.levels) else ()
        pairs = [(node_degree(tree, v), tree.adoption_time[v]) for v in nodes]
        out.append(encode_level(pairs, schema.level_lengths[k], schema, truncate=truncate))
    return DegreeSequence(levels=tuple(out))


# ------------------------------------------------------------- serialization


@dataclass(frozen=True)
class EncodedSample:
    id: str
    seq: DegreeSequence
    growth: int | None


def schema_to_dict(schema: EncodingSchema) -> dict:
    return {
        "level_lengths": list(schema.level_lengths),
        "bin_count": schema.bin_count,
        "window_T": schema.window_T,
        "bin_edges": list(schema.bin_edges),
    }


def schema_from_dict(doc: dict) -> EncodingSchema:
    try:
        return EncodingSchema(
            level_lengths=tuple(int(x) for x in doc["level_lengths"]),
            bin_count=int(doc["bin_count"]),
            window_T=int(doc["window_T"]),
            bin_edges=tuple(float(x) for x in doc["bin_edges"]),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad schema record: {exc}") from None


def save_schema(path: str | Path, schema: EncodingSchema) -> None:
    Path(path).write_text(json.dumps(schema_to_dict(schema), indent=1))


def load_schema(path: str | Path) -> EncodingSchema:
    return schema_from_dict(json.loads(Path(path).read_text()))


def sample_to_dict(sample: EncodedSample) -> dict:
    return {
        "id": sample.id,
        "levels": [[{"d": e.degree, "bin": e.bin} for e in lvl] for lvl in sample.seq.levels],
        "label": sample.growth,
    }


def sample_from_dict(doc: dict) -> EncodedSample:
    try:
        levels = tuple(
            tuple(SeqEntry(degree=int(e["d"]), bin=int(e["bin"]), is_pad=int(e["bin"]) == PAD_BIN) for e in lvl)
            for lvl in doc["levels"]
        )
        growth = doc.get("label")
        return EncodedSample(
            id=doc["id"], seq=DegreeSequence(levels=levels),
            growth=None if growth is None else int(growth),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad encoded record: {exc}") from None


def write_encoded_jsonl(path: str | Path, samples: Iterable[EncodedSample]) -> int:
    count = 0
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps(sample_to_dict(s), separators=(",", ":")))
            fh.write("\n")
            count += 1
    return count


def read_encoded_jsonl(path: str | Path) -> list[EncodedSample]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(sample_from_dict(json.loads(line)))
            except (json.JSONDecodeError, ParseError) as exc:
                raise ParseError(f"{path} line {lineno}: {exc}") from None
    return out
