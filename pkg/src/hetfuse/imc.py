"""Input mapping calibration: affine maps from each source into the reference space.

A GP is fitted on the reference source (in its z-scored inputs). For every
other source, an affine map ``x_ref = A x_src + b`` (both sides z-scored) is
searched by a real-coded genetic algorithm that minimizes the mean squared
mismatch between the source outputs and the reference GP evaluated at the
mapped inputs.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dataset import FusedDataset, SourceDataset, Standardizer, fit_standardizer
from .gp import GpConfig, GpModel, fit_gp

log = logging.getLogger(__name__)


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ImcConfig:
    population: int = 60
    generations: int = 200
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    mutation_sigma: float = 1.0
    bounds: tuple[float, float] = (-5.0, 5.0)
    seed: int = 0
    elitism: int = 2
    tournament: int = 3

    def __post_init__(self):
        if self.population < 1 or self.generations < 1:
            raise ValueError("population and generations must be positive")
        if not (1 <= self.elitism <= self.population):
            raise ValueError("elitism must lie in [1, population]")
        if not (0 <= self.crossover_rate <= 1 and 0 <= self.mutation_rate <= 1):
            raise ValueError("crossover and mutation rates must lie in [0, 1]")
        if self.mutation_sigma <= 0:
            raise ValueError("mutation_sigma must be positive")
        if not self.bounds[0] < self.bounds[1]:
            raise ValueError("bounds must be (low, high) with low < high")
        if self.tournament < 1:
            raise ValueError("tournament size must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bounds"] = list(self.bounds)
        return d


@dataclass(frozen=True)
class LinearMap:
    A: np.ndarray
    b: np.ndarray
    source_id: str
    ref_id: str
    loss: float = float("nan")
    source_standardizer: Standardizer | None = None
    trace: tuple[float, ...] = field(default=(), compare=False)
    config: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise ValueError(f"A is {A.shape} but b has length {b.size}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("map entries must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "trace", tuple(float(v) for v in self.trace))

    @property
    def d_ref(self) -> int:
        return self.A.shape[0]

    @property
    def d_source(self) -> int:
        return self.A.shape[1]

    def to_dict(self) -> dict:
        return {"source_id": self.source_id, "ref_id": self.ref_id,
                "A": self.A.tolist(), "b": self.b.tolist(), "loss": self.loss,
                "source_standardizer": (self.source_standardizer.to_dict()
                                        if self.source_standardizer else None),
                "config_echo": self.config, "seed": self.config.get("seed")}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearMap":
        st = d.get("source_standardizer")
        return cls(np.array(d["A"], dtype=float), np.array(d["b"], dtype=float), d["source_id"],
                   d["ref_id"], float(d["loss"]), Standardizer.from_dict(st) if st else None,
                   (), d.get("config_echo") or {})


def apply_map(lmap: LinearMap, Xs_norm) -> np.ndarray:
    X = np.atleast_2d(np.asarray(Xs_norm, dtype=float))
    if X.shape[1] != lmap.d_source:
        raise ValueError(f"map expects {lmap.d_source} source columns, got {X.shape[1]}")
    return X @ lmap.A.T + lmap.b


def imc_loss(lmap: LinearMap, Xs_norm, ys, ref_gp: GpModel) -> float:
    """Mean squared output mismatch, in the reference GP's standardized output units."""
    pred = ref_gp.predict_mean(apply_map(lmap, Xs_norm))
    ys = np.asarray(ys, dtype=float).reshape(-1)
    if not np.all(np.isfinite(pred)):
        raise CalibrationError(f"non-finite reference prediction for source {lmap.source_id}")
    return float(np.mean(((ys - pred) / ref_gp.y_scale) ** 2))


def _population_loss(pop: np.ndarray, Xs: np.ndarray, ys_std: np.ndarray, ref_gp: GpModel,
                     d_ref: int) -> np.ndarray:
    # evaluate the whole population with a single batched prediction
    P, d_s = pop.shape[0], Xs.shape[1]
    if P == 0:
        return np.zeros(0)
    A =pop[:, : d_ref * d_s].reshape(P, d_ref, d_s)
    b = pop[:, d_ref * d_s:]
    mapped = np.einsum("pij,nj->pni", A, Xs) + b[:, None, :]
    pred = ref_gp.predict_mean(mapped.reshape(-1, d_ref)).reshape(P, -1)
    pred = (pred - ref_gp.y_center) / ref_gp.y_scale
    loss = np.mean((ys_std[None, :] - pred) ** 2, axis=1)
    return np.where(np.isfinite(loss), loss, np.inf)


def _tournament(rng, losses, size):
    cand = rng.integers(0, losses.size, size=size)
    return cand[np.argmin(losses[cand])]


def run_ga(Xs: np.ndarray, ys: np.ndarray, ref_gp: GpModel, d_ref: int,
           config: ImcConfig) -> tuple[np.ndarray, float, list[float]]:
    """Real-coded GA over the flattened (A, b) genome. Returns (genome, loss, trace)."""
    rng = np.random.default_rng(config.seed)
    d_s = Xs.shape[1]
    n_genes = d_ref * d_s + d_ref
    lo, hi = config.bounds
    ys_std = (ys - ref_gp.y_center) / ref_gp.y_scale

    pop = rng.uniform(lo, hi, size=(config.population, n_genes))
    # seeded individuals: the zero map, then the (rectangular) identity
    pop[0] = 0.0
    if config.population > 1:
        ident = np.zeros((d_ref, d_s))
        np.fill_diagonal(ident, 1.0)
        pop[1] = np.clip(np.concatenate([ident.ravel(), np.zeros(d_ref)]), lo, hi)
    losses = _population_loss(pop, Xs, ys_std, ref_gp, d_ref)
    trace = [float(np.min(losses))]

    for _ in range(config.generations):
        order = np.argsort(losses, kind="stable")
        children = [pop[i].copy() for i in order[: config.elitism]]
        while len(children) < config.population:
            p1 = pop[_tournament(rng, losses, config.tournament)]
            p2 = pop[_tournament(rng, losses, config.tournament)]
            if rng.random() < config.crossover_rate:
                child = np.where(rng.random(n_genes) < 0.5, p1, p2)
            else:
                child = p1.copy()
            mutate = rng.random(n_genes) < config.mutation_rate
            child = child + mutate * rng.normal(0.0, config.mutation_sigma, n_genes)
            children.append(np.clip(child, lo, hi))
        pop = np.array(children)
        child_losses = _population_loss(pop[config.elitism:], Xs, ys_std, ref_gp, d_ref)
        losses = np.concatenate([losses[order[: config.elitism]], child_losses])
        trace.append(float(np.min(losses)))

    if not np.any(np.isfinite(losses)):
        raise CalibrationError("every individual had a non-finite loss")
    best = int(np.argmin(losses))
    return pop[best], float(losses[best]), trace


def calibrate(source: SourceDataset, ref_gp: GpModel, ref_standardizer: Standardizer | None = None,
              config: ImcConfig = ImcConfig(), ref_id: str | None = None) -> LinearMap:
    """GA-calibrate one source's affine map into the reference's normalized input space."""
    if source.n < 1:
        raise CalibrationError(f"{source.source_id}: no rows")
    d_ref = ref_gp.dim
    if ref_standardizer is not None and ref_standardizer.dim != d_ref:
        raise CalibrationError("reference standardizer and GP disagree on dimension")
    if source.n >= 2:
        std = fit_standardizer(source.X)
    else:
        std = Standardizer(source.X[0], np.ones(source.d))
    Xs = std.transform(source.X)
    genome, _, trace = run_ga(Xs, source.y, ref_gp, d_ref, config)
    A = genome[: d_ref * source.d].reshape(d_ref, source.d)
    b = genome[d_ref * source.d:]
    rid = ref_id or ref_gp.input_space.partition(":")[2]
    draft = LinearMap(A, b, source.source_id, rid, source_standardizer=std)
    loss = imc_loss(draft, Xs, source.y, ref_gp)
    log.info("calibrated %s -> %s: loss %.3g", source.source_id, rid, loss)
    return LinearMap(A, b, source.source_id, rid, loss, std, tuple(trace), config.to_dict())


@dataclass(frozen=True)
class ReferenceSpace:
    """Everything needed to route raw source inputs into the reference space."""

    ref_id: str
    ref_standardizer: Standardizer
    maps: dict = field(default_factory=dict)
    input_names: tuple[str, ...] = ()

    @property
    def tag(self) -> str:
        return f"ref:{self.ref_id}"

    def to_reference(self, ds: SourceDataset) -> np.ndarray:
        if ds.source_id == self.ref_id:
            return self.ref_standardizer.transform(ds.X)
        try:
            lmap = self.maps[ds.source_id]
        except KeyError:
            raise KeyError(f"no map for source {ds.source_id!r}") from None
        return apply_map(lmap, lmap.source_standardizer.transform(ds.X))

    def to_dict(self) -> dict:
        return {"ref_id": self.ref_id, "ref_standardizer": self.ref_standardizer.to_dict(),
                "input_names": list(self.input_names),
                "maps": {k: v.to_dict() for k, v in self.maps.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "ReferenceSpace":
        return cls(d["ref_id"], Standardizer.from_dict(d["ref_standardizer"]),
                   {k: LinearMap.from_dict(v) for k, v in d["maps"].items()},
                   tuple(d.get("input_names", ())))


def select_reference(sources: Sequence[SourceDataset]) -> str:
    """Source with the most rows; ties go to the smallest label."""
    return min(sources, key=lambda ds: (-ds.n, ds.source_id)).source_id


def map_all_sources(sources: Sequence[SourceDataset], ref_id: str | None = None,
                    config: ImcConfig = ImcConfig(), gp_config: GpConfig = GpConfig()
                    ) -> tuple[list[LinearMap], FusedDataset, GpModel]:
    """Fit the reference GP, calibrate each other source against it, and stack the result."""
    if not sources:
        raise ValueError("no sources given")
    by_id = {ds.source_id: ds for ds in sources}
    if len(by_id) != len(sources):
        raise ValueError("duplicate source ids")
    ref_id = ref_id or select_reference(sources)
    if ref_id not in by_id:
        raise KeyError(f"reference {ref_id!r} not among sources {sorted(by_id)}")
    ref = by_id[ref_id]
    ref_std = fit_standardizer(ref.X)
    Xref = ref_std.transform(ref.X)
    ref_gp = fit_gp(Xref, ref.y, gp_config, input_names=ref.input_names, input_space=f"ref:{ref_id}")

    maps = []
    for ds in sources:
        if ds.source_id == ref_id:
            continue
        try:
            maps.append(calibrate(ds, ref_gp, ref_std, config, ref_id=ref_id))
        except Exception as exc:
            raise CalibrationError(f"source {ds.source_id}: {exc}") from exc

    space = ReferenceSpace(ref_id, ref_std, {m.source_id: m for m in maps}, ref.input_names)
    blocks_X, blocks_s, blocks_y = [Xref], [ref_id] * ref.n, [ref.y]
    for ds in sources:
        if ds.source_id == ref_id:
            continue
        blocks_X.append(space.to_reference(ds))
        blocks_s += [ds.source_id] * ds.n
        blocks_y.append(ds.y)
    order = (ref_id, *(ds.source_id for ds in sources if ds.source_id != ref_id))
    fused = FusedDataset(np.vstack(blocks_X), tuple(blocks_s), np.concatenate(blocks_y), ref_id,
                         ref.input_names, ref_std, order)
    return maps, fused, ref_gp


def reference_space(maps: Sequence[LinearMap], fused: FusedDataset) -> ReferenceSpace:
    return ReferenceSpace(fused.ref_source_id, fused.ref_standardizer,
                          {m.source_id: m for m in maps}, fused.input_names)
