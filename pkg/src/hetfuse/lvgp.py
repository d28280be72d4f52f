"""Latent-variable GP for one qualitative input (the data source).

Each level gets a learned point in a 2-D latent plane; the GP then runs on the
augmented input ``[x, z(level)]`` where the latent columns carry unit weight in
the Gaussian kernel. The anchor level sits at the origin and the next level is
pinned to the z1 axis, which removes translation and rotation freedom.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError

from .dataset import Standardizer, fit_standardizer
from .gp import PENALTY, GpConfig, GpModel, condition, output_scaling, profile_likelihood
from .optimize import latin_hypercube, multistart

LATENT_BOUND = 3.0
MAX_LATENT_DISTANCE = 3.0 * math.sqrt(2.0)


class UnknownLevelError(KeyError):
    pass


@dataclass(frozen=True)
class LvgpConfig:
    restarts: int = 12
    max_evals: int = 500
    log10_bounds: tuple[float, float] = (-6.0, 4.0)
    latent_bound: float = LATENT_BOUND
    nugget: float = 1e-8
    max_nugget: float = 1e-3
    seed: int = 0

    def quantitative(self) -> GpConfig:
        """Matching plain-GP optimizer settings, for like-for-like baselines."""
        return GpConfig(self.restarts, self.max_evals, self.log10_bounds, self.nugget,
                        self.max_nugget, self.seed)


@dataclass(frozen=True)
class LatentMap:
    levels: tuple[str, ...]
    coords: np.ndarray
    anchor_level: str

    def __post_init__(self):
        levels = tuple(str(v) for v in self.levels)
        coords = np.asarray(self.coords, dtype=float).reshape(len(levels), 2)
        if len(set(levels)) != len(levels):
            raise ValueError(f"duplicate levels {levels}")
        if self.anchor_level not in levels:
            raise UnknownLevelError(f"anchor {self.anchor_level!r} not among {levels}")
        coords.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "coords", coords)

    def index(self, level: str) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise UnknownLevelError(f"unknown level {level!r}; known levels: {list(self.levels)}") from None

    def coord(self, level: str) -> np.ndarray:
        return self.coords[self.index(level)]

    @staticmethod
    def order_levels(labels: Sequence[str], anchor: str) -> tuple[str, ...]:
        """Anchor first, remaining levels sorted by label."""
        rest = sorted(set(labels) - {anchor})
        return (anchor, *rest)

    @staticmethod
    def n_free(k: int) -> int:
        return 0 if k < 2 else 2 * k - 3

    @classmethod
    def from_free(cls, levels: Sequence[str], free) -> "LatentMap":
        # levels[0] is the anchor; levels[1] contributes only z1
        k = len(levels)
        free = np.asarray(free, dtype=float)
        coords = np.zeros((k, 2))
        if k >= 2:
            coords[1, 0] = free[0]
            coords[2:] = free[1:].reshape(k - 2, 2)
        return cls(tuple(levels), coords, levels[0])

    def free(self) -> np.ndarray:
        if len(self.levels) < 2:
            return np.zeros(0)
        return np.concatenate([[self.coords[1, 0]], self.coords[2:].reshape(-1)])


@dataclass(frozen=True)
class LvgpModel:
    gp: GpModel
    latent: LatentMap
    source_column: tuple[str, ...]
    n_quantitative: int

    @property
    def levels(self) -> tuple[str, ...]:
        return self.latent.levels

    @property
    def phi(self) -> np.ndarray:
        return self.gp.phi[: self.n_quantitative]

    @property
    def input_space(self) -> str:
        return self.gp.input_space


def embed(x, level: str, latent: LatentMap) -> np.ndarray:
    return np.concatenate([np.asarray(x, dtype=float).reshape(-1), latent.coord(level)])


def embed_rows(X, s: Sequence[str], latent: LatentMap) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if len(s) != X.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {len(s)} labels")
    idx = np.array([latent.index(v) for v in s], dtype=int)
    return np.hstack([X, latent.coords[idx]])


def _augmented_standardizer(xs: Standardizer) -> Standardizer:
    # latent columns are used as-is
    return Standardizer(np.concatenate([xs.means, [0.0, 0.0]]),
                        np.concatenate([xs.stds, [1.0, 1.0]]))


def build_lvgp(X, s: Sequence[str], y, phi, latent: LatentMap, *, x_standardizer=None,
               nugget: float = 1e-8, max_nugget: float = 1e-3, input_names=(),
               input_space: str = "", seed: int = 0, trace: dict | None = None) -> LvgpModel:
    """Condition an LVGP at fixed kernel scales and latent coordinates."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    xs = x_standardizer or fit_standardizer(X)
    W = embed_rows(X, s, latent)
    full_phi = np.concatenate([np.asarray(phi, dtype=float), [1.0, 1.0]])
    gp = condition(W, y, full_phi, _augmented_standardizer(xs), nugget=nugget,
                   max_nugget=max_nugget, input_names=(*input_names, "z1", "z2"),
                   input_space=input_space, seed=seed, trace=trace)
    return LvgpModel(gp, latent, tuple(s), X.shape[1])


def fit_lvgp(X, s: Sequence[str], y, config: LvgpConfig = LvgpConfig(), *, anchor: str | None = None,
             input_names=(), input_space: str = "") -> LvgpModel:
    """Joint MLE over log10(phi) and the free latent coordinates."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=float).reshape(-1)
    s = tuple(str(v) for v in s)
    if len(s) != y.size or X.shape[0] != y.size:
        raise ValueError("X, s and y must have the same number of rows")
    if any(not v for v in s):
        raise ValueError("empty level label")
    distinct = sorted(set(s))
    if len(distinct) < 2:
        raise ValueError("fit_lvgp needs at least 2 distinct levels; use fit_gp for one source")
    if y.size < 3:
        raise ValueError("fit_lvgp needs n >= 3")
    anchor = anchor if anchor is not None else distinct[0]
    if anchor not in distinct:
        raise UnknownLevelError(f"anchor {anchor!r} has no rows; levels: {distinct}")
    levels = LatentMap.order_levels(s, anchor)
    k = len(levels)
    m = X.shape[1]

    xs = fit_standardizer(X)
    Xn = xs.transform(X)
    yc, ysc = output_scaling(y)
    yn = (y - yc) / ysc
    row_level = np.array([levels.index(v) for v in s], dtype=int)

    nf = LatentMap.n_free(k)
    zb = config.latent_bound
    lo = np.concatenate([np.full(m, config.log10_bounds[0]), np.full(nf, -zb)])
    hi = np.concatenate([np.full(m, config.log10_bounds[1]), np.full(nf, zb)])

    def objective(theta):
        coords = np.zeros((k, 2))
        coords[1, 0] = theta[m]
        coords[2:] = theta[m + 1:].reshape(k - 2, 2)
        W = np.hstack([Xn, coords[row_level]])
        phi = np.concatenate([10.0 ** theta[:m], [1.0, 1.0]])
        try:
            val = profile_likelihood(W, yn, phi, config.nugget, config.max_nugget).nll
        except (LinAlgError, FloatingPointError, ValueError):
            return PENALTY
        return val if np.isfinite(val) else PENALTY

    # Collapsed model first (every level at the origin, i.e. the plain GP on X),
    # from the same starts fit_gp would use. Its optimum seeds one extra LVGP
    # restart, so the joint fit can never end below the nested GP.
    zeros = np.zeros(nf)
    collapsed = multistart(lambda t: objective(np.concatenate([t, zeros])),
                           latin_hypercube(config.restarts, lo[:m], hi[:m], np.random.default_rng(config.seed)),
                           lo[:m], hi[:m], config.max_evals)

    rng = np.random.default_rng(config.seed)
    starts = np.hstack([latin_hypercube(config.restarts, lo[:m], hi[:m], rng),
                        rng.uniform(-zb, zb, size=(config.restarts, nf))])
    starts = np.vstack([starts, np.concatenate([collapsed.x, zeros])])
    res = multistart(objective, starts, lo, hi, config.max_evals)
    if res.fun >= PENALTY:
        raise FloatingPointError("every LVGP restart failed to produce a finite likelihood")
    latent = LatentMap.from_free(levels, res.x[m:])
    return build_lvgp(X, s, y, 10.0 ** res.x[:m], latent, x_standardizer=xs,
                      nugget=config.nugget, max_nugget=config.max_nugget, input_names=input_names,
                      input_space=input_space, seed=config.seed,
                      trace={**res.summary(), "collapsed_value": collapsed.fun})


def predict_lvgp(model: LvgpModel, Xq, sq: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    return model.gp.predict(embed_rows(Xq, tuple(sq), model.latent))


def latent_distance(latent: LatentMap, a: str, b: str) -> float:
    return float(np.linalg.norm(latent.coord(a) - latent.coord(b)))


def dissimilarity(model, ref_level: str) -> dict[str, float]:
    """Latent distance to ``ref_level`` divided by 3*sqrt(2); not clamped."""
    latent = model.latent if isinstance(model, LvgpModel) else model
    ref = latent.coord(ref_level)
    return {lvl: float(np.linalg.norm(latent.coords[i] - ref)) / MAX_LATENT_DISTANCE
            for i, lvl in enumerate(latent.levels)}


def export_latent(model, ref_level: str | None = None) -> list[tuple[str, float, float, float]]:
    latent = model.latent if isinstance(model, LvgpModel) else model
    ref = ref_level if ref_level is not None else latent.anchor_level
    D = dissimilarity(latent, ref)
    return [(lvl, float(latent.coord(lvl)[0]), float(latent.coord(lvl)[1]), D[lvl])
            for lvl in sorted(latent.levels)]


def write_latent_csv(rows, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "z1", "z2", "D"])
        for lvl, z1, z2, d in rows:
            w.writerow([lvl, repr(z1), repr(z2), repr(d)])


def read_latent_csv(path) -> list[tuple[str, float, float, float]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        return [(row["level"], float(row["z1"]), float(row["z2"]), float(row["D"])) for row in r]
