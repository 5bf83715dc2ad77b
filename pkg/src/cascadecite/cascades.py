"""Raw citation logs -> windowed citation cascades with growth labels.

A cascade is rooted at one cited paper. Its members are the papers citing
the root within the observation window of window_T days after the root's
publication; intra-cascade edges are citations among members, so every
member keeps a list of parent candidates (the members it cites, always
including the root). The growth label counts citers arriving strictly after
the window, up to the prediction horizon (or end-of-data).

All times are integer days. A citing paper's event time is its publication
date, measured from the corpus epoch (earliest date on file).
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    ConfigError,
    ContractError,
    MalformedCascadeError,
    ParseError,
    SplitError,
    StatsError,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CitationEvent:
    citing: str
    cited: str
    time: int  # days since corpus epoch; equals the citing paper's publication date


@dataclass(frozen=True)
class CascadeNode:
    id: str
    time: int  # days since the root's publication
    parents: tuple[str, ...]  # candidate parents, all adopted strictly earlier

    def __post_init__(self):
        if not self.parents:
            raise ContractError(f"node {self.id!r} has no parent candidates")


@dataclass(frozen=True)
class Cascade:
    root: str
    root_time: int  # days since corpus epoch
    window_T: int
    nodes: tuple[CascadeNode, ...]  # sorted by (time, id); root not included

    @property
    def size(self) -> int:
        """Node count including the root."""
        return len(self.nodes) + 1


@dataclass(frozen=True)
class GrowthLabel:
    observed_size: int  # citers inside the window
    final_size: int     # observed + growth
    growth: int

    def __post_init__(self):
        if self.growth < 0 or self.observed_size < 0:
            raise ContractError(f"negative label: {self}")
        if self.final_size != self.observed_size + self.growth:
            raise ContractError(
                f"final_size {self.final_size} != observed {self.observed_size} + growth {self.growth}"
            )


LabeledCascade = tuple[Cascade, GrowthLabel]


# ------------------------------------------------------------------- parsing


def _lines(src: str | Path | IO[str] | Iterable[str]) -> Iterator[tuple[int, str]]:
    if isinstance(src, (str, Path)):
        with open(src) as fh:
            for i, line in enumerate(fh, 1):
                yield i, line
    else:
        for i, line in enumerate(src, 1):
            yield i, line


def _parse_dates(dates: str | Path | IO[str] | Iterable[str]) -> dict[str, _dt.date]:
    out: dict[str, _dt.date] = {}
    for lineno, raw in _lines(dates):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"dates line {lineno}: expected 'id<TAB>YYYY-MM-DD', got {line!r}")
        pid, datestr = parts[0].strip(), parts[1].strip()
        try:
            d = _dt.date.fromisoformat(datestr)
        except ValueError:
            raise ParseError(f"dates line {lineno}: bad date {datestr!r}") from None
        out[pid] = d
    return out


def parse_citation_files(
    edges: str | Path | IO[str] | Iterable[str],
    dates: str | Path | IO[str] | Iterable[str],
    tally: dict | None = None,
) -> list[CitationEvent]:
    """Read tab-separated edge and date files into one event per dated citation.

    Lines starting with '#' are comments. Edges whose citing paper has no
    date, and self-citations, are dropped and counted in the warning tally.
    """
    date_by_paper = _parse_dates(dates)
    if not date_by_paper:
        raise ParseError("dates file holds no dates")
    epoch = min(date_by_paper.values())

    undated = 0
    self_loops = 0
    events: list[CitationEvent] = []
    for lineno, raw in _lines(edges):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ParseError(f"edges line {lineno}: expected 'citing<TAB>cited', got {line!r}")
        citing, cited = parts[0].strip(), parts[1].strip()
        if citing == cited:
            self_loops += 1
            continue
        d = date_by_paper.get(citing)
        if d is None:
            undated += 1
            continue
        events.append(CitationEvent(citing=citing, cited=cited, time=(d - epoch).days))

    if undated or self_loops:
        log.warning("dropped %d undated-citer edges and %d self-citations", undated, self_loops)
    if tally is not None:
        tally["undated_citer_edges"] = undated
        tally["self_citations"] = self_loops
        tally["events"] = len(events)
    return events


# ------------------------------------------------------------ cascade build


def build_cascades(
    events: Sequence[CitationEvent],
    window_T: int,
    horizon: int | None = None,
    min_observed: int = 10,
    tally: dict | None = None,
) -> list[LabeledCascade]:
    """Group events into per-root cascades and label future growth.

    horizon is the growth bracket width in days (growth counts citers with
    window_T < t <= window_T + horizon relative to the root); None means
    end-of-data. A root's own date comes from any event where it is the
    citer; roots that never cite get their window anchored one day before
    their first citation, so the first citer still adopts strictly after
    the root.
    """
    if window_T < 1:
        raise ConfigError(f"window_T must be >= 1 day, got {window_T}")
    if horizon is not None and horizon < 1:
        raise ConfigError(f"horizon must be >= 1 day or None, got {horizon}")
    if min_observed < 0:
        raise ConfigError(f"min_observed must be >= 0, got {min_observed}")

    date_of: dict[str, int] = {}
    for ev in events:
        seen = date_of.get(ev.citing)
        if seen is not None and seen != ev.time:
            raise MalformedCascadeError(
                f"paper {ev.citing!r} cites at two different times ({seen} and {ev.time})"
            )
        date_of[ev.citing] = ev.time

    citers_of: dict[str, dict[str, int]] = {}
    cites: dict[str, set[str]] = {}
    for ev in events:
        citers_of.setdefault(ev.cited, {})[ev.citing] = ev.time
        cites.setdefault(ev.citing, set()).add(ev.cited)

    anchored = 0
    dropped_not_after_root = 0
    filtered_small = 0
    out: list[LabeledCascade] = []
    for root in sorted(citers_of):
        citers = citers_of[root]
        root_time = date_of.get(root)
        if root_time is None:
            root_time = min(citers.values()) - 1
            anchored += 1

        rel = {}  # member -> days after root publication
        growth = 0
        for pid, t in citers.items():
            r = t - root_time
            if r < 1:
                dropped_not_after_root += 1
            elif r < window_T:
                rel[pid] = r
            elif r > window_T and (horizon is None or r <= window_T + horizon):
                growth += 1
            # r == window_T falls in neither the window nor the growth bracket

        if len(rel) < min_observed:
            filtered_small += 1
            continue

        nodes = []
        for pid in sorted(rel, key=lambda p: (rel[p], p)):
            cands = [(0, root)]  # root adopts at 0 and is cited by every member
            for q in cites.get(pid, ()):
                if q in rel and rel[q] < rel[pid]:
                    cands.append((rel[q], q))
            cands.sort()
            nodes.append(CascadeNode(id=pid, time=rel[pid], parents=tuple(c[1] for c in cands)))

        cascade = Cascade(root=root, root_time=root_time, window_T=window_T, nodes=tuple(nodes))
        label = GrowthLabel(observed_size=len(rel), final_size=len(rel) + growth, growth=growth)
        out.append((cascade, label))

    if anchored or dropped_not_after_root:
        log.warning(
            "%d roots anchored at first citation minus one day; %d citers at or before root date dropped",
            anchored, dropped_not_after_root,
        )
    if tally is not None:
        tally["roots_anchored_without_date"] = anchored
        tally["citers_not_after_root"] = dropped_not_after_root
        tally["roots_below_min_observed"] = filtered_small
        tally["cascades"] = len(out)
    return out


def split_dataset(
    items: Sequence, seed: int
) -> tuple[list, list, list]:
    """Seeded shuffle into 70/15/15; the odd leftover goes to validation."""
    n = len(items)
    if n < 3:
        raise SplitError(f"need at least 3 cascades to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_train = (7 * n) // 10
    rest = n - n_train
    n_val = (rest + 1) // 2
    shuffled = [items[i] for i in order]
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
    )


# ------------------------------------------------------------------- stats


@dataclass(frozen=True)
class CorpusStats:
    cascade_count: int
    avg_path_length: float
    avg_popularity: float
    avg_degree: float
    avg_edges: float
    avg_leaf_count: float


def compute_stats(trees: Sequence) -> CorpusStats:
    """Corpus means over tree-converted cascades.

    avg_degree uses the tree identity 2(n-1)/n; avg_edges reports the mean
    candidate-edge count of the cascades the trees came from.
    """
    if not trees:
        raise StatsError("no trees to summarize")
    paths, pops, degs, edges, leaves = [], [], [], [], []
    for t in trees:
        n = len(t.adoption_time)
        depths = [k + 1 for k, level in enumerate(t.levels) for _ in level]
        paths.append(float(np.mean(depths)) if depths else 0.0)
        pops.append(n - 1)
        degs.append(2.0 * (n - 1) / n)
        edges.append(t.source_edges)
        leaves.append(sum(1 for v in t.adoption_time if not t.children.get(v)))
    return CorpusStats(
        cascade_count=len(trees),
        avg_path_length=float(np.mean(paths)),
        avg_popularity=float(np.mean(pops)),
        avg_degree=float(np.mean(degs)),
        avg_edges=float(np.mean(edges)),
        avg_leaf_count=float(np.mean(leaves)),
    )


# --------------------------------------------------------------- synthetic


def generate_synthetic(
    n_cascades: int,
    size_range: tuple[int, int],
    time_horizon: int,
    attachment_bias: float,
    seed: int,
    *,
    window_T: int | None = None,
) -> list[LabeledCascade]:
    """Preferential-attachment cascades with increasing integer-day times.

    Each cascade draws its total size from size_range (inclusive, root
    included), then attaches node after node to an existing node with
    probability proportional to (child count + attachment_bias). Every node
    also cites the root, mirroring how real cascades are membership-defined.
    Nodes adopting before window_T are the observed cascade; the rest are
    counted in the growth label (window_T itself is never drawn, so sizes
    always reconcile). Same seed, same corpus, byte for byte.
    """
    lo, hi = size_range
    if n_cascades < 1:
        raise ConfigError(f"n_cascades must be >= 1, got {n_cascades}")
    if lo < 2 or hi < lo:
        raise ConfigError(f"size_range must satisfy 2 <= lo <= hi, got {size_range}")
    if time_horizon < hi + 2:
        raise ConfigError(
            f"time_horizon {time_horizon} too small for size_range {size_range}; need >= {hi + 2}"
        )
    if attachment_bias <= 0:
        raise ConfigError(f"attachment_bias must be > 0, got {attachment_bias}")
    if window_T is None:
        window_T = time_horizon // 2
    if not (1 <= window_T <= time_horizon):
        raise ConfigError(f"window_T must lie in [1, time_horizon], got {window_T}")

    rng = np.random.default_rng(seed)
    pool = np.array([t for t in range(1, time_horizon) if t != window_T])
    out: list[LabeledCascade] = []
    for ci in range(n_cascades):
        n = int(rng.integers(lo, hi + 1))
        times = np.sort(rng.choice(pool, size=n - 1, replace=False))
        root = f"s{ci:05d}"
        ids = [root] + [f"{root}n{j:03d}" for j in range(1, n)]
        child_count = np.zeros(n, dtype=np.float64)
        nodes: list[CascadeNode] = []
        observed = 0
        for j in range(1, n):
            weights = child_count[:j] + attachment_bias
            target = int(rng.choice(j, p=weights / weights.sum()))
            child_count[target] += 1
            t = int(times[j - 1])
            if t < window_T:
                parents = (ids[0],) if target == 0 else (ids[0], ids[target])
                nodes.append(CascadeNode(id=ids[j], time=t, parents=parents))
                observed += 1
        cascade = Cascade(root=root, root_time=0, window_T=window_T, nodes=tuple(nodes))
        label = GrowthLabel(observed_size=observed, final_size=n - 1, growth=n - 1 - observed)
        out.append((cascade, label))
    return out


# -------------------------------------------------------------------- jsonl


def cascade_to_dict(cascade: Cascade, label: GrowthLabel | None) -> dict:
    doc = {
        "root": cascade.root,
        "root_time": cascade.root_time,
        "window_T": cascade.window_T,
        "nodes": [{"id": n.id, "t": n.time, "parents": list(n.parents)} for n in cascade.nodes],
    }
    doc["label"] = (
        None if label is None else {"observed": label.observed_size, "growth": label.growth}
    )
    return doc


def cascade_from_dict(doc: dict) -> LabeledCascade | tuple[Cascade, None]:
    try:
        nodes = tuple(
            CascadeNode(id=n["id"], time=int(n["t"]), parents=tuple(n["parents"]))
            for n in doc["nodes"]
        )
        cascade = Cascade(
            root=doc["root"], root_time=int(doc["root_time"]),
            window_T=int(doc["window_T"]), nodes=nodes,
        )
        raw = doc.get("label")
        label = None
        if raw is not None:
            label = GrowthLabel(
                observed_size=int(raw["observed"]),
                final_size=int(raw["observed"]) + int(raw["growth"]),
                growth=int(raw["growth"]),
            )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad cascade record: {exc}") from None
    return cascade, label


def write_cascades_jsonl(path: str | Path, pairs: Iterable[tuple[Cascade, GrowthLabel | None]]) -> int:
    count = 0
    with open(path, "w") as fh:
        for cascade, label in pairs:
            fh.write(json.dumps(cascade_to_dict(cascade, label), separators=(",", ":")))
            fh.write("\n")
            count += 1
    return count


def read_cascades_jsonl(path: str | Path) -> list[tuple[Cascade, GrowthLabel | None]]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path} line {lineno}: {exc}") from None
            try:
                out.append(cascade_from_dict(doc))
            except ParseError as exc:
                raise ParseError(f"{path} line {lineno}: {exc}") from None
    return out
