"""Dataset ingestion, chronological splitting, windowing, and the synthetic
benchmark generator.

On-disk formats are deliberately plain: event rows as CSV, dataset metadata as
JSON, graphs and embeddings as CSV with explicit headers.  All loaders
validate ids and shapes against the metadata and fail with row context.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DataError

log = logging.getLogger(__name__)

EVENTS_HEADER = ["time_slot", "region_id", "category_id"]
GRAPH_HEADER = ["src", "dst", "weight"]
CLUSTERS_HEADER = ["region_id", "cluster_id"]


@dataclass
class DatasetMeta:
    """Static description of a dataset: sizes, slot duration, display names."""

    num_regions: int
    num_categories: int
    num_slots: int
    slot_duration_hours: float
    region_names: list
    category_names: list
    origin_timestamp: str = None

    def validate(self):
        if self.num_regions < 1 or self.num_categories < 1 or self.num_slots < 1:
            raise DataError(
                f"meta sizes must be positive, got regions={self.num_regions} "
                f"categories={self.num_categories} slots={self.num_slots}"
            )
        if self.slot_duration_hours <= 0:
            raise DataError(f"slot_duration_hours must be positive, got {self.slot_duration_hours}")
        if len(self.region_names) != self.num_regions:
            raise DataError(
                f"{len(self.region_names)} region names for {self.num_regions} regions"
            )
        if len(self.category_names) != self.num_categories:
            raise DataError(
                f"{len(self.category_names)} category names for {self.num_categories} categories"
            )
        return self

    def to_dict(self):
        out = {
            "num_regions": self.num_regions,
            "num_categories": self.num_categories,
            "num_slots": self.num_slots,
            "slot_duration_hours": self.slot_duration_hours,
            "region_names": list(self.region_names),
            "category_names": list(self.category_names),
        }
        if self.origin_timestamp is not None:
            out["origin_timestamp"] = self.origin_timestamp
        return out


@dataclass
class CrimeTensor:
    """Binary occurrence tensor (regions, categories, slots) plus timing info."""

    occurrences: np.ndarray
    slot_duration_hours: float
    origin_timestamp: str = None

    @property
    def n_regions(self):
        return self.occurrences.shape[0]

    @property
    def n_categories(self):
        return self.occurrences.shape[1]

    @property
    def n_slots(self):
        return self.occurrences.shape[2]


def load_meta(path):
    """Read and validate a meta.json file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read metadata {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"metadata {path} is not valid JSON: {exc}") from None
    required = {"num_regions", "num_categories", "num_slots", "slot_duration_hours",
                "region_names", "category_names"}
    allowed = required | {"origin_timestamp"}
    missing = required - set(raw)
    if missing:
        raise DataError(f"metadata {path} missing key(s): {', '.join(sorted(missing))}")
    unknown = set(raw) - allowed
    if unknown:
        raise DataError(f"metadata {path} has unknown key(s): {', '.join(sorted(unknown))}")
    return DatasetMeta(
        num_regions=int(raw["num_regions"]),
        num_categories=int(raw["num_categories"]),
        num_slots=int(raw["num_slots"]),
        slot_duration_hours=float(raw["slot_duration_hours"]),
        region_names=list(raw["region_names"]),
        category_names=list(raw["category_names"]),
        origin_timestamp=raw.get("origin_timestamp"),
    ).validate()


def save_meta(meta, path):
    with open(path, "w") as fh:
        json.dump(meta.to_dict(), fh, indent=2)
        fh.write("\n")


def ingest_events(events_path, meta):
    """Build the binary occurrence tensor from an event list.

    Every row marks (time_slot, region_id, category_id) as occurred; repeats
    are idempotent.  Ids outside the metadata ranges or malformed rows raise
    with the offending line number.
    """
    if isinstance(meta, (str, bytes)) or hasattr(meta, "__fspath__"):
        meta = load_meta(meta)
    y = np.zeros((meta.num_regions, meta.num_categories, meta.num_slots), dtype=np.uint8)
    try:
        fh = open(events_path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read events {events_path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EVENTS_HEADER:
            raise DataError(
                f"{events_path}: expected header {','.join(EVENTS_HEADER)}, "
                f"got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{events_path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                t, r, c = (int(v) for v in row)
            except ValueError:
                raise DataError(
                    f"{events_path}:{lineno}: non-integer field in {row}"
                ) from None
            if not 0 <= t < meta.num_slots:
                raise DataError(
                    f"{events_path}:{lineno}: time_slot {t} outside [0, {meta.num_slots})"
                )
            if not 0 <= r < meta.num_regions:
                raise DataError(
                    f"{events_path}:{lineno}: region_id {r} outside [0, {meta.num_regions})"
                )
            if not 0 <= c < meta.num_categories:
                raise DataError(
                    f"{events_path}:{lineno}: category_id {c} outside [0, {meta.num_categories})"
                )
            y[r, c, t] = 1
    return CrimeTensor(
        occurrences=y,
        slot_duration_hours=meta.slot_duration_hours,
        origin_timestamp=meta.origin_timestamp,
    )


def save_events(tensor, path):
    """Write the occurrence tensor back out as a sorted event list."""
    occ = tensor.occurrences if isinstance(tensor, CrimeTensor) else np.asarray(tensor)
    regions, categories, slots = np.nonzero(occ)
    order = np.lexsort((categories, regions, slots))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVENTS_HEADER)
        for i in order:
            writer.writerow([int(slots[i]), int(regions[i]), int(categories[i])])


def load_dataset(events_path, meta_path):
    """Convenience loader returning (CrimeTensor, DatasetMeta)."""
    meta = load_meta(meta_path)
    return ingest_events(events_path, meta), meta


def chrono_split(n_slots, train_frac, val_frac, min_slots=1):
    """Contiguous (train, val, test) slot ranges in chronological order.

    Returns three (start, stop) pairs partitioning range(n_slots).  Boundary
    slots go to the earlier split (floor for train stop, then for val stop).
    Raises if any split would be shorter than min_slots.
    """
    if isinstance(n_slots, CrimeTensor):
        n_slots = n_slots.n_slots
    if not (0.0 < train_frac < 1.0 and 0.0 <= val_frac < 1.0):
        raise ConfigError(f"bad split fractions train={train_frac} val={val_frac}")
    if train_frac + val_frac >= 1.0:
        raise ConfigError(
            f"train_frac + val_frac = {train_frac + val_frac} leaves no test slots"
        )
    train_stop = int(n_slots * train_frac)
    val_stop = train_stop + int(n_slots * val_frac)
    ranges = ((0, train_stop), (train_stop, val_stop), (val_stop, n_slots))
    names = ("train", "val", "test")
    for name, (start, stop) in zip(names, ranges):
        if stop - start < min_slots:
            raise DataError(
                f"{name} split has {stop - start} slot(s), need at least {min_slots} "
                f"(n_slots={n_slots}, train_frac={train_frac}, val_frac={val_frac})"
            )
    return ranges


def window_dataset(tensor, window, slot_range):
    """One-step-ahead samples inside a slot range.

    Returns (inputs (S, N, C, window), targets (S, N, C)) where sample s uses
    slots [start+s, start+s+window) as input and slot start+s+window as
    target.  No sample crosses the range boundary.
    """
    occ = tensor.occurrences if isinstance(tensor, CrimeTensor) else np.asarray(tensor)
    start, stop = slot_range
    if not (0 <= start <= stop <= occ.shape[2]):
        raise DataError(f"slot range {slot_range} outside [0, {occ.shape[2]}]")
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    if stop - start < window + 1:
        raise DataError(
            f"slot range {slot_range} has {stop - start} slot(s), "
            f"need at least {window + 1} for window {window}"
        )
    count = (stop - start) - window
    n, c = occ.shape[0], occ.shape[1]
    inputs = np.zeros((count, n, c, window), dtype=np.float64)
    targets = np.zeros((count, n, c), dtype=np.float64)
    for s in range(count):
        t0 = start + s
        inputs[s] = occ[:, :, t0:t0 + window]
        targets[s] = occ[:, :, t0 + window]
    return inputs, targets


def load_graph(path, n_regions):
    """Weighted directed graph from src,dst,weight CSV rows.

    Missing pairs are zero.  Self-loops are dropped with a warning; duplicate
    (src, dst) rows keep the last weight with a warning.  Negative weights or
    out-of-range ids raise.
    """
    a = np.zeros((n_regions, n_regions), dtype=np.float64)
    seen = set()
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read graph {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != GRAPH_HEADER:
            raise DataError(
                f"{path}: expected header {','.join(GRAPH_HEADER)}, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                src, dst, weight = int(row[0]), int(row[1]), float(row[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed row {row}") from None
            for name, v in (("src", src), ("dst", dst)):
                if not 0 <= v < n_regions:
                    raise DataError(
                        f"{path}:{lineno}: {name} {v} outside [0, {n_regions})"
                    )
            if weight < 0:
                raise DataError(f"{path}:{lineno}: negative weight {weight}")
            if src == dst:
                log.warning("%s:%d: dropping self-loop on region %d", path, lineno, src)
                continue
            if (src, dst) in seen:
                log.warning(
                    "%s:%d: duplicate edge (%d, %d), keeping the later weight",
                    path, lineno, src, dst,
                )
            seen.add((src, dst))
            a[src, dst] = weight
    return a


def save_graph(matrix, path, include_zeros=False):
    """Write a weight matrix as src,dst,weight CSV (nonzero edges only by
    default), rows sorted by (src, dst)."""
    a = np.asarray(matrix, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GRAPH_HEADER)
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                if i == j:
                    continue
                if a[i, j] != 0.0 or include_zeros:
                    writer.writerow([i, j, repr(float(a[i, j]))])


def load_embeddings(paths, n_regions):
    """Column-concatenated pre-trained region embeddings from one or more CSV
    files with header region_id,e0,e1,...  Every region must appear exactly
    once in each file."""
    if isinstance(paths, (str, bytes)) or hasattr(paths, "__fspath__"):
        paths = [paths]
    blocks = []
    for path in paths:
        try:
            fh = open(path, newline="")
        except OSError as exc:
            raise DataError(f"cannot read embeddings {path}: {exc}") from None
        with fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[0] != "region_id" or len(header) < 2:
                raise DataError(
                    f"{path}: expected header region_id,e0,... got {header}"
                )
            dim = len(header) - 1
            block = np.full((n_regions, dim), np.nan)
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != dim + 1:
                    raise DataError(
                        f"{path}:{lineno}: expected {dim + 1} fields, got {len(row)}"
                    )
                try:
                    rid = int(row[0])
                    vals = [float(v) for v in row[1:]]
                except ValueError:
                    raise DataError(f"{path}:{lineno}: malformed row") from None
                if not 0 <= rid < n_regions:
                    raise DataError(
                        f"{path}:{lineno}: region_id {rid} outside [0, {n_regions})"
                    )
                if not np.isnan(block[rid]).all():
                    raise DataError(f"{path}:{lineno}: region {rid} appears twice")
                block[rid] = vals
            if np.isnan(block).any():
                missing = np.nonzero(np.isnan(block).any(axis=1))[0]
                raise DataError(
                    f"{path}: missing embedding rows for regions {missing.tolist()}"
                )
        blocks.append(block)
    return np.concatenate(blocks, axis=1)


def load_clusters(path, n_regions):
    """Region -> cluster assignment from region_id,cluster_id CSV."""
    assign = np.full(n_regions, -1, dtype=np.int64)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read clusters {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CLUSTERS_HEADER:
            raise DataError(
                f"{path}: expected header {','.join(CLUSTERS_HEADER)}, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rid, cid = int(row[0]), int(row[1])
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: malformed row {row}") from None
            if not 0 <= rid < n_regions:
                raise DataError(f"{path}:{lineno}: region_id {rid} outside [0, {n_regions})")
            assign[rid] = cid
    if (assign < 0).any():
        missing = np.nonzero(assign < 0)[0]
        raise DataError(f"{path}: regions without a cluster: {missing.tolist()}")
    return assign


@dataclass(frozen=True)
class SynthSpec:
    """Controls for the planted-homophily synthetic benchmark."""

    n_regions: int = 10
    n_categories: int = 3
    n_slots: int = 200
    n_clusters: int = 2
    period: int = 8
    flip_prob: float = 0.1
    slot_duration_hours: float = 24.0
    seed: int = 0

    def validate(self):
        if self.n_regions < 2:
            raise ConfigError(f"need at least 2 regions, got {self.n_regions}")
        if self.n_categories < 1:
            raise ConfigError(f"need at least 1 category, got {self.n_categories}")
        if self.n_slots < 2:
            raise ConfigError(f"need at least 2 slots, got {self.n_slots}")
        if not 1 <= self.n_clusters <= self.n_regions:
            raise ConfigError(
                f"clusters must be in [1, {self.n_regions}], got {self.n_clusters}"
            )
        if self.period < 1:
            raise ConfigError(f"period must be >= 1, got {self.period}")
        if not 0.0 <= self.flip_prob < 0.5:
            raise ConfigError(f"flip_prob must be in [0, 0.5), got {self.flip_prob}")
        return self


@dataclass
class SynthResult:
    tensor: CrimeTensor
    meta: DatasetMeta
    clusters: np.ndarray
    graph: np.ndarray


def synth_generate(spec, out_dir=None):
    """Generate a clustered periodic occurrence dataset with planted homophily.

    Regions are assigned to clusters round-robin.  Each (cluster, category)
    pair gets a periodic binary template; every region repeats its cluster's
    templates over time with independent Bernoulli(flip_prob) bit flips.  The
    ground-truth graph connects all within-cluster pairs (i -> j for i < j,
    weight 1), so same-cluster regions agree on a label with probability
    (1-p)^2 + p^2.  With out_dir set, writes events.csv, meta.json, graph.csv
    and clusters.csv there.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, c, t = spec.n_regions, spec.n_categories, spec.n_slots

    clusters = np.arange(n) % spec.n_clusters
    templates = rng.integers(0, 2, size=(spec.n_clusters, c, spec.period)).astype(np.uint8)
    reps = -(-t // spec.period)
    tiled = np.tile(templates, (1, 1, reps))[:, :, :t]
    occ = tiled[clusters].copy()
    flips = rng.random((n, c, t)) < spec.flip_prob
    occ ^= flips.astype(np.uint8)

    graph = np.zeros((n, n), dtype=np.float64)
    for b in range(spec.n_clusters):
        members = np.nonzero(clusters == b)[0]
        for ii, i in enumerate(members):
            for j in members[ii + 1:]:
                graph[i, j] = 1.0

    meta = DatasetMeta(
        num_regions=n,
        num_categories=c,
        num_slots=t,
        slot_duration_hours=spec.slot_duration_hours,
        region_names=[f"region_{i}" for i in range(n)],
        category_names=[f"category_{j}" for j in range(c)],
        origin_timestamp="2020-01-01T00:00:00",
    ).validate()
    tensor = CrimeTensor(
        occurrences=occ,
        slot_duration_hours=spec.slot_duration_hours,
        origin_timestamp=meta.origin_timestamp,
    )
    result = SynthResult(tensor=tensor, meta=meta, clusters=clusters, graph=graph)

    if out_dir is not None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        save_events(tensor, os.path.join(out_dir, "events.csv"))
        save_meta(meta, os.path.join(out_dir, "meta.json"))
        save_graph(graph, os.path.join(out_dir, "graph.csv"))
        with open(os.path.join(out_dir, "clusters.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CLUSTERS_HEADER)
            for rid, cid in enumerate(clusters):
                writer.writerow([rid, int(cid)])
    return result
