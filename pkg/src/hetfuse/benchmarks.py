"""Analytic data generators: cantilever beams and a synthetic affine-map family."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .dataset import SourceDataset

# tip load (N), span (m), Young's modulus (Pa)
DEFAULT_LOAD = 1e4
DEFAULT_LENGTH = 1.0
DEFAULT_MODULUS = 2e11

SECTION_INPUTS = {
    "rectangular": ("B", "H"),
    "hollow_rect": ("B", "H", "b", "h"),
    "hollow_circ": ("R", "r"),
}
# inner dimension -> the outer dimension it must stay below
INNER_OF = {"b": "B", "h": "H", "r": "R"}

DEFAULT_RANGES = {"B": (0.05, 0.3), "H": (0.05, 0.3), "R": (0.05, 0.2)}
DEFAULT_INNER_RATIO = (0.2, 0.8)

# reference beam study: (source id, section, n_train, n_test)
PAPER_SUITE = (("RB", "rectangular", 30, 1000),
               ("HRB", "hollow_rect", 25, 1000),
               ("HCB", "hollow_circ", 8, 1000))


class InfeasibleSpecError(ValueError):
    pass


def second_moment(section: str, dims: dict) -> float:
    if section == "rectangular":
        return dims["B"] * dims["H"] ** 3 / 12.0
    if section == "hollow_rect":
        return (dims["B"] * dims["H"] ** 3 - dims["b"] * dims["h"] ** 3) / 12.0
    if section == "hollow_circ":
        return math.pi * (dims["R"] ** 4 - dims["r"] ** 4) / 4.0
    raise ValueError(f"unknown cross section {section!r}")


def tip_deflection(P: float, L: float, E: float, I: float) -> float:
    """Euler-Bernoulli cantilever, point load at the free end."""
    return P * L ** 3 / (3.0 * E * I)


@dataclass(frozen=True)
class BeamSpec:
    """One cross-section family.

    Outer dimensions are sampled from ``ranges``. Inner dimensions are either a
    fraction ``inner_ratio`` of their outer partner (default), or, when
    ``inner_ratio`` is None, sampled from absolute ``ranges`` and rejected
    until the wall thickness is positive.
    """

    section: str
    P: float = DEFAULT_LOAD
    L: float = DEFAULT_LENGTH
    E: float = DEFAULT_MODULUS
    ranges: dict = field(default_factory=lambda: dict(DEFAULT_RANGES))
    inner_ratio: tuple[float, float] | None = DEFAULT_INNER_RATIO
    seed: int = 0

    def __post_init__(self):
        if self.section not in SECTION_INPUTS:
            raise ValueError(f"unknown section {self.section!r}; choose from {sorted(SECTION_INPUTS)}")
        if min(self.P, self.L, self.E) <= 0:
            raise ValueError("load, length and modulus must be positive")
        for name in self.sampled_names:
            lo, hi = self.ranges[name]
            if not 0 < lo <= hi:
                raise ValueError(f"range for {name} must satisfy 0 < low <= high")
        if self.inner_ratio is not None and self.has_inner:
            lo, hi = self.inner_ratio
            if not 0 < lo <= hi < 1:
                raise ValueError("inner_ratio must satisfy 0 < low <= high < 1")

    @property
    def input_names(self) -> tuple[str, ...]:
        return SECTION_INPUTS[self.section]

    @property
    def has_inner(self) -> bool:
        return any(v in INNER_OF for v in self.input_names)

    @property
    def sampled_names(self) -> tuple[str, ...]:
        if self.inner_ratio is None:
            return self.input_names
        return tuple(v for v in self.input_names if v not in INNER_OF)

    def metadata(self) -> dict:
        return {"section": self.section, "load_case": "end point load, Euler-Bernoulli",
                "P_N": self.P, "L_m": self.L, "E_Pa": self.E,
                "ranges_m": {k: list(self.ranges[k]) for k in self.sampled_names},
                "inner_ratio": list(self.inner_ratio) if self.inner_ratio else None,
                "seed": self.seed}


def _sample_dims(spec: BeamSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    names = spec.input_names
    if spec.inner_ratio is not None:
        u = qmc.LatinHypercube(d=len(names), seed=rng).random(n)
        cols = {}
        for j, v in enumerate(names):
            if v in INNER_OF:
                continue
            lo, hi = spec.ranges[v]
            cols[v] = lo + (hi - lo) * u[:, j]
        rlo, rhi = spec.inner_ratio
        for j, v in enumerate(names):
            if v in INNER_OF:
                cols[v] = cols[INNER_OF[v]] * (rlo + (rhi - rlo) * u[:, j])
        return np.column_stack([cols[v] for v in names])

    # absolute ranges: Latin-hypercube batches, keep geometrically valid rows
    inner = [(names.index(v), names.index(INNER_OF[v])) for v in names if v in INNER_OF]
    for v in names:
        if v in INNER_OF and spec.ranges[v][0] >= spec.ranges[INNER_OF[v]][1]:
            raise InfeasibleSpecError(f"{v} can never be smaller than {INNER_OF[v]}")
    lo = np.array([spec.ranges[v][0] for v in names])
    hi = np.array([spec.ranges[v][1] for v in names])
    kept = []
    total = 0
    for _ in range(200):
        batch = qmc.scale(qmc.LatinHypercube(d=len(names), seed=rng).random(max(n, 16)), lo, hi)
        ok = np.all([batch[:, i] < batch[:, o] for i, o in inner], axis=0)
        kept.append(batch[ok])
        total += int(ok.sum())
        if total >= n:
            return np.vstack(kept)[:n]
    raise InfeasibleSpecError("geometric constraints are (almost) never satisfied by the ranges")


def beam_deflections(spec: BeamSpec, X: np.ndarray) -> np.ndarray:
    names = spec.input_names
    return np.array([tip_deflection(spec.P, spec.L, spec.E,
                                    second_moment(spec.section, dict(zip(names, row))))
                     for row in np.atleast_2d(X)])


def gen_beam(spec: BeamSpec, n: int, source_id: str | None = None,
             rng: np.random.Generator | None = None) -> SourceDataset:
    if n < 1:
        raise ValueError("n must be positive")
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    X = _sample_dims(spec, n, rng)
    y = beam_deflections(spec, X)
    return SourceDataset(source_id or spec.section, spec.input_names, X, y, "deflection",
                         spec.metadata())


def gen_paper_suite(seed: int = 0, sizes=PAPER_SUITE, **physics) -> list[SourceDataset]:
    """RB/HRB/HCB train and test sets, ordered (RB train, RB test, HRB train, ...)."""
    out = []
    for k, (sid, section, n_train, n_test) in enumerate(sizes):
        spec = BeamSpec(section, seed=seed, **physics)
        for role, n, stream in (("train", n_train, 0), ("test", n_test, 1)):
            rng = np.random.default_rng(np.random.SeedSequence([seed, k, stream]))
            ds = gen_beam(spec, n, sid, rng)
            out.append(SourceDataset(ds.source_id, ds.input_names, ds.X, ds.y, ds.output_name,
                                     {**ds.metadata, "split": role}))
    return out


def suite_pairs(datasets: list[SourceDataset]) -> dict[str, tuple[SourceDataset, SourceDataset]]:
    """Group a flat generated suite into {source_id: (train, test)}."""
    out: dict[str, dict] = {}
    for ds in datasets:
        out.setdefault(ds.source_id, {})[ds.metadata.get("split", "train")] = ds
    return {k: (v["train"], v.get("test")) for k, v in out.items()}


# --- synthetic heterogeneous family ----------------------------------------

def _trig(Z):
    Z = np.atleast_2d(Z)
    i = np.arange(Z.shape[1])
    return np.sum(np.sin(1.5 * Z + 0.5 * i), axis=1) + 0.3 * np.sum(Z, axis=1) ** 2


def _quadratic(Z):
    Z = np.atleast_2d(Z)
    return np.sum(Z ** 2, axis=1) + np.sum(Z, axis=1)


BASE_FUNCTIONS = {"trig": _trig, "quadratic": _quadratic}


def random_hidden_map(d_ref: int, d_s: int, rng: np.random.Generator):
    """Affine map sending the cube [-1, 1]^d_s into [-1, 1]^d_ref."""
    b = rng.uniform(-0.3, 0.3, size=d_ref)
    A = rng.normal(size=(d_ref, d_s))
    budget = (1.0 - np.abs(b)) * rng.uniform(0.7, 1.0, size=d_ref)
    A *= (budget / np.abs(A).sum(axis=1))[:, None]
    return A, b


@dataclass(frozen=True)
class SyntheticFamilySpec:
    d_ref: int = 2
    d_s: int = 2
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    base: str = "trig"
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.base not in BASE_FUNCTIONS:
            raise ValueError(f"unknown base function {self.base!r}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.A is not None and np.shape(self.A) != (self.d_ref, self.d_s):
            raise ValueError(f"hidden A must be {self.d_ref}x{self.d_s}")


def gen_synthetic_family(spec: SyntheticFamilySpec, n_ref: int, n_s: int):
    """Reference y = f(x) on [-1,1]^d_ref; source y = f(A x + b) on [-1,1]^d_s.

    Returns ``(reference, source, (A, b))``.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.A is None:
        A, b = random_hidden_map(spec.d_ref, spec.d_s, rng)
    else:
        A = np.asarray(spec.A, dtype=float)
        b = np.zeros(spec.d_ref) if spec.b is None else np.asarray(spec.b, dtype=float)
    f = BASE_FUNCTIONS[spec.base]
    X1 = qmc.scale(qmc.LatinHypercube(d=spec.d_ref, seed=rng).random(n_ref), -1, 1)
    X2 = qmc.scale(qmc.LatinHypercube(d=spec.d_s, seed=rng).random(n_s), -1, 1)
    y1 = f(X1) + spec.noise_sigma * rng.normal(size=n_ref)
    y2 = f(X2 @ A.T + b) + spec.noise_sigma * rng.normal(size=n_s)
    meta = {"base": spec.base, "noise_sigma": spec.noise_sigma, "seed": spec.seed}
    ref = SourceDataset("S1", tuple(f"x{i + 1}" for i in range(spec.d_ref)), X1, y1, "y", meta)
    src = SourceDataset("S2", tuple(f"u{i + 1}" for i in range(spec.d_s)), X2, y2, "y", meta)
    return ref, src, (A, b)
