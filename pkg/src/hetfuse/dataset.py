"""Per-source datasets: CSV ingestion, z-score standardization and splitting."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class SourceDataset:
    """Raw inputs/outputs of one source, in that source's own parameterization."""

    source_id: str
    input_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    output_name: str = "y"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        names = tuple(self.input_names)
        if not self.source_id:
            raise DatasetError("source_id must be a non-empty label")
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DatasetError(f"{self.source_id}: X has shape {X.shape} but y has {y.shape[0]} entries")
        if len(names) != X.shape[1]:
            raise DatasetError(f"{self.source_id}: {len(names)} input names for {X.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DatasetError(f"{self.source_id}: duplicate input names {names}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DatasetError(f"{self.source_id}: non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "input_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> "SourceDataset":
        return SourceDataset(self.source_id, self.input_names, self.X[idx], self.y[idx],
                             self.output_name, dict(self.metadata))


@dataclass(frozen=True)
class Standardizer:
    """Column-wise z-score transform (population standard deviation)."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float).reshape(-1)
        stds = np.asarray(self.stds, dtype=float).reshape(-1)
        if means.shape != stds.shape:
            raise DatasetError("means and stds differ in length")
        if not np.all(stds > 0):
            raise DatasetError(f"standard deviations must be positive, got {stds}")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @property
    def dim(self) -> int:
        return self.means.shape[0]

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise DatasetError(f"expected {self.dim} columns, got {X.shape[-1]}")
        return (X - self.means) / self.stds

    def inverse(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.stds + self.means

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.array(d["means"], dtype=float), np.array(d["stds"], dtype=float))

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))


def fit_standardizer(X) -> Standardizer:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] < 2:
        raise DatasetError("need at least 2 rows to fit a standardizer")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    # relative test so that columns constant up to rounding are also rejected
    scale = np.maximum(np.abs(means), 1.0)
    bad = np.flatnonzero(stds <= 1e-14 * scale)
    if bad.size:
        raise DatasetError(f"constant column(s) {bad.tolist()}: zero standard deviation")
    return Standardizer(means, stds)


@dataclass(frozen=True)
class FusedDataset:
    """Reference-space inputs of every source stacked, with source labels."""

    X: np.ndarray
    s: tuple[str, ...]
    y: np.ndarray
    ref_source_id: str
    input_names: tuple[str, ...]
    ref_standardizer: Standardizer
    sources: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        s = tuple(str(v) for v in self.s)
        sources = tuple(self.sources) or tuple(dict.fromkeys(s))
        if X.shape[0] != y.shape[0] or len(s) != y.shape[0]:
            raise DatasetError("X, s and y must have the same number of rows")
        if any(not v for v in s):
            raise DatasetError("empty source label in fused data")
        unknown = set(s) - set(sources)
        if unknown:
            raise DatasetError(f"labels {sorted(unknown)} not among declared sources {sources}")
        if self.ref_source_id not in sources:
            raise DatasetError(f"reference {self.ref_source_id!r} not among sources {sources}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "input_names", tuple(self.input_names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def rows_of(self, source_id: str) -> np.ndarray:
        return np.array([i for i, v in enumerate(self.s) if v == source_id], dtype=int)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction <= 1.0):
            raise DatasetError(f"train_fraction must be in (0, 1], got {self.train_fraction}")
        if self.seed < 0:
            raise DatasetError("seed must be non-negative")


def split(ds: SourceDataset, spec: SplitSpec) -> tuple[SourceDataset, SourceDataset]:
    """Seeded shuffle, then the first ceil(fraction * n) rows become training rows."""
    n_train = math.ceil(round(spec.train_fraction * ds.n, 9))
    if n_train < 1:
        raise DatasetError("split leaves an empty training set")
    perm = np.random.default_rng(spec.seed).permutation(ds.n)
    return ds.take(np.sort(perm[:n_train])), ds.take(np.sort(perm[n_train:]))


# --- CSV / manifest -------------------------------------------------------

def load_csv(path, input_columns: Sequence[str], output_column: str,
             source_id: str | None = None) -> SourceDataset:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    if not input_columns:
        raise DatasetError("schema needs at least one input column")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: no header row") from None
        dupes = sorted({h for h in header if header.count(h) > 1})
        if dupes:
            raise DatasetError(f"{path}: duplicate columns {dupes}")
        wanted = list(input_columns) + [output_column]
        if len(set(wanted)) != len(wanted):
            raise DatasetError(f"schema lists a column twice: {wanted}")
        missing = [c for c in wanted if c not in header]
        if missing:
            raise DatasetError(f"{path}: missing columns {missing}")
        cols = [header.index(c) for c in wanted]
        rows = []
        for i, record in enumerate(reader, start=1):
            if not any(cell.strip() for cell in record):
                continue
            try:
                vals = [float(record[c]) for c in cols]
            except (ValueError, IndexError):
                raise DatasetError(f"{path}: non-numeric or missing cell in row {i}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DatasetError(f"{path}: non-finite value in row {i}")
            rows.append(vals)
    if not rows:
        raise DatasetError(f"{path}: empty dataset")
    arr = np.array(rows, dtype=float)
    return SourceDataset(source_id or path.stem, tuple(input_columns), arr[:, :-1], arr[:, -1],
                         output_column)


def write_csv(ds: SourceDataset, path, extra_columns: dict | None = None) -> None:
    """Write inputs then output; floats use shortest round-trip repr."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        extra = extra_columns or {}
        w.writerow([*ds.input_names, ds.output_name, *extra])
        for i in range(ds.n):
            w.writerow([*map(repr, ds.X[i].tolist()), repr(float(ds.y[i])),
                        *(v[i] for v in extra.values())])


@dataclass(frozen=True)
class ManifestEntry:
    source_id: str
    csv_path: str
    input_columns: tuple[str, ...]
    output_column: str
    test_csv_path: str | None = None


def read_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing manifest: {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    entries = doc["sources"] if isinstance(doc, dict) else doc
    out = []
    for e in entries:
        try:
            out.append(ManifestEntry(e["source_id"], e["csv_path"], tuple(e["input_columns"]),
                                     e["output_column"], e.get("test_csv_path")))
        except KeyError as exc:
            raise DatasetError(f"manifest entry missing key {exc}") from None
    ids = [e.source_id for e in out]
    if len(set(ids)) != len(ids):
        raise DatasetError(f"duplicate source ids in manifest: {ids}")
    return out


def write_manifest(entries: Sequence[ManifestEntry], path, metadata: dict | None = None) -> None:
    doc = {"sources": [
        {k: v for k, v in (("source_id", e.source_id), ("csv_path", e.csv_path),
                           ("test_csv_path", e.test_csv_path),
                           ("input_columns", list(e.input_columns)),
                           ("output_column", e.output_column)) if v is not None}
        for e in entries]}
    if metadata:
        doc["metadata"] = metadata
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_manifest_sources(path, which: str = "train") -> list[SourceDataset]:
    """Load every source listed in a manifest; relative paths resolve against it."""
    base = Path(path).parent
    out = []
    for e in read_manifest(path):
        rel = e.csv_path if which == "train" else e.test_csv_path
        if rel is None:
            continue
        p = Path(rel)
        ds = load_csv(p if p.is_absolute() else base / p, e.input_columns, e.output_column,
                      source_id=e.source_id)
        out.append(ds)
    names = {ds.output_name for ds in out}
    if len(names) > 1:
        raise DatasetError(f"sources disagree on the output quantity: {sorted(names)}")
    return out
