"""Ordinary kriging with an anisotropic Gaussian kernel and profiled MLE.

The correlation between two points is ``exp(-sum_i phi_i (w_i - w'_i)^2)``.
The constant mean and process variance are profiled out of the likelihood in
closed form, so only the ``phi`` scales (searched as ``log10(phi)``) remain
for the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist, pdist, squareform

from .dataset import Standardizer, fit_standardizer
from .optimize import latin_hypercube, multistart

VARIANCE_FLOOR = 1e-12
PENALTY = 1e10


class NuggetError(LinAlgError):
    """Correlation matrix stays indefinite even at the largest allowed nugget."""


@dataclass(frozen=True)
class KernelParams:
    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float).reshape(-1)
        if not np.all(phi > 0):
            raise ValueError(f"kernel scales must be positive, got {phi}")
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_log10(cls, theta) -> "KernelParams":
        return cls(10.0 ** np.asarray(theta, dtype=float))

    @property
    def log10_phi(self) -> np.ndarray:
        return np.log10(self.phi)


@dataclass(frozen=True)
class GpConfig:
    restarts: int = 8
    max_evals: int = 500
    log10_bounds: tuple[float, float] = (-6.0, 4.0)
    nugget: float = 1e-8
    max_nugget: float = 1e-3
    seed: int = 0


def correlation(w, w2, params: KernelParams) -> float:
    w = np.asarray(w, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if w.shape != w2.shape or w.shape != params.phi.shape:
        raise ValueError(f"length mismatch: {w.shape}, {w2.shape}, phi {params.phi.shape}")
    return float(np.exp(-np.sum(params.phi * (w - w2) ** 2)))


def _phi_of(params) -> np.ndarray:
    return params.phi if isinstance(params, KernelParams) else np.asarray(params, dtype=float)


def correlation_matrix(X, phi, nugget: float = 0.0) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n == 1:
        return np.array([[1.0 + nugget]])
    # pdist + squareform keeps the matrix exactly symmetric
    d2 = squareform(pdist(X * np.sqrt(phi), "sqeuclidean"))
    C = np.exp(-d2)
    C[np.diag_indices(n)] = 1.0 + nugget
    return C


def cross_correlation(Xq, X, phi) -> np.ndarray:
    s = np.sqrt(phi)
    return np.exp(-cdist(np.asarray(Xq, dtype=float) * s, np.asarray(X, dtype=float) * s, "sqeuclidean"))


def nugget_ladder(start: float, stop: float) -> list[float]:
    """start, then tenfold steps up to stop; a zero start escalates from 1e-8."""
    out = [start]
    v = start * 10.0 if start > 0 else 1e-8
    while v <= stop * (1 + 1e-9):
        out.append(v)
        v *= 10.0
    return out


def factorize(X, phi, nugget: float = 1e-8, max_nugget: float = 1e-3):
    """Cholesky of C + nugget I, escalating the nugget tenfold on failure.

    Returns ``(L, nugget_used)``.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 1:
        raise ValueError("need at least one row")
    if nugget < 0:
        raise ValueError("nugget must be non-negative")
    base = correlation_matrix(X, phi, 0.0)
    for nug in nugget_ladder(nugget, max_nugget):
        C = base.copy()
        C[np.diag_indices_from(C)] += nug
        try:
            L = cholesky(C, lower=True, check_finite=False)
        except LinAlgError:
            continue
        if np.all(np.isfinite(L)) and np.all(np.diag(L) > 0):
            return L, nug
    raise NuggetError(f"correlation matrix not positive definite up to nugget {max_nugget}")


def build_correlation_matrix(X, params, nugget: float = 1e-8, max_nugget: float = 1e-3) -> np.ndarray:
    """C + nugget I at the smallest nugget (from ``nugget`` up) that factorizes."""
    phi = _phi_of(params)
    _, nug = factorize(X, phi, nugget, max_nugget)
    return correlation_matrix(X, phi, nug)


@dataclass(frozen=True)
class Profile:
    mu: float
    sigma2: float
    nll: float
    L: np.ndarray
    nugget: float


def profile_likelihood(X, y, phi, nugget: float = 1e-8, max_nugget: float = 1e-3) -> Profile:
    y = np.asarray(y, dtype=float)
    n = y.size
    L, nug = factorize(X, phi, nugget, max_nugget)
    ones = np.ones(n)
    Ci1 = cho_solve((L, True), ones, check_finite=False)
    Ciy = cho_solve((L, True), y, check_finite=False)
    mu = float(ones @ Ciy / (ones @ Ci1))
    r = y - mu
    quad = float(r @ cho_solve((L, True), r, check_finite=False))
    sigma2 = max(quad / n, VARIANCE_FLOOR)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    nll = 0.5 * n * np.log(2 * np.pi * sigma2) + 0.5 * logdet + quad / (2 * sigma2)
    return Profile(mu, sigma2, float(nll), L, nug)


def neg_log_likelihood(params, X, y, nugget: float = 1e-8, max_nugget: float = 1e-3) -> float:
    """Concentrated negative log-likelihood with mu and sigma^2 at their maximizers."""
    y = np.asarray(y, dtype=float).reshape(-1)
    X = np.asarray(X, dtype=float)
    if y.size < 2:
        raise ValueError("need n >= 2")
    phi = _phi_of(params)
    prof = profile_likelihood(X, y, phi, nugget, max_nugget)
    if not np.isfinite(prof.nll):
        raise FloatingPointError(f"non-finite likelihood at phi={phi.tolist()}")
    return prof.nll


@dataclass(frozen=True)
class GpModel:
    """A conditioned GP. Holds raw training data; normalization lives inside."""

    phi: np.ndarray
    mu: float
    sigma2: float
    nugget: float
    X_train: np.ndarray
    y_train: np.ndarray
    x_standardizer: Standardizer
    y_center: float
    y_scale: float
    input_names: tuple[str, ...] = ()
    input_space: str = ""
    seed: int = 0
    trace: dict = field(default_factory=dict, compare=False)
    # derived in __post_init__
    L: np.ndarray = field(init=False, repr=False, compare=False)
    alpha: np.ndarray = field(init=False, repr=False, compare=False)
    Ci1: np.ndarray = field(init=False, repr=False, compare=False)
    one_Ci_one: float = field(init=False, repr=False, compare=False)
    Xn: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        Xn = self.x_standardizer.transform(self.X_train)
        # exactly the nugget recorded at fit time: no escalation on reload
        L, _ = factorize(Xn, phi, self.nugget, self.nugget)
        yn = (np.asarray(self.y_train, dtype=float) - self.y_center) / self.y_scale
        alpha = cho_solve((L, True), yn - self.mu, check_finite=False)
        Ci1 = cho_solve((L, True), np.ones(yn.size), check_finite=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "X_train", np.asarray(self.X_train, dtype=float))
        object.__setattr__(self, "y_train", np.asarray(self.y_train, dtype=float))
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "Ci1", Ci1)
        object.__setattr__(self, "one_Ci_one", float(Ci1.sum()))
        object.__setattr__(self, "Xn", Xn)

    @property
    def dim(self) -> int:
        return self.X_train.shape[1]

    @property
    def params(self) -> KernelParams:
        return KernelParams(self.phi)

    def _cross(self, Xq):
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if Xq.shape[1] != self.dim:
            raise ValueError(f"query has {Xq.shape[1]} columns, model expects {self.dim}")
        Xqn = self.x_standardizer.transform(Xq)
        c = cross_correlation(Xqn, self.Xn, self.phi)
        if self.nugget > 0:
            # nugget belongs to the zero-distance correlation: exact at data sites
            c[cdist(Xqn, self.Xn, "sqeuclidean") == 0.0] += self.nugget
        return c

    def predict_mean(self, Xq) -> np.ndarray:
        c = self._cross(Xq)
        return self.y_center + self.y_scale * (self.mu + c @ self.alpha)

    def predict(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        c = self._cross(Xq)
        mean = self.mu + c @ self.alpha
        v = solve_triangular(self.L, c.T, lower=True, check_finite=False)
        u = 1.0 - c @ self.Ci1
        var = self.sigma2 * (1.0 - np.sum(v * v, axis=0) + u * u / self.one_Ci_one)
        var = np.maximum(var, 0.0)
        return self.y_center + self.y_scale * mean, self.y_scale ** 2 * var


def predict(model: GpModel, Xq) -> tuple[np.ndarray, np.ndarray]:
    return model.predict(Xq)


def output_scaling(y) -> tuple[float, float]:
    y = np.asarray(y, dtype=float)
    center = float(y.mean())
    scale = float(y.std())
    if not scale > 1e-14 * max(abs(center), 1.0):
        scale = 1.0
    return center, scale


def condition(X, y, phi, x_standardizer: Standardizer, *, nugget: float = 1e-8,
              max_nugget: float = 1e-3, input_names=(), input_space: str = "", seed: int = 0,
              trace: dict | None = None) -> GpModel:
    """Build a GpModel at fixed kernel scales (no optimization)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    yc, ys = output_scaling(y)
    prof = profile_likelihood(x_standardizer.transform(X), (y - yc) / ys, phi, nugget, max_nugget)
    return GpModel(np.asarray(phi, dtype=float), prof.mu, prof.sigma2, prof.nugget, X, y,
                   x_standardizer, yc, ys, tuple(input_names), input_space, seed, trace or {})


def fit_gp(X, y, config: GpConfig = GpConfig(), *, input_names=(), input_space: str = "") -> GpModel:
    """Multi-start MLE of log10(phi); inputs and output are standardized internally."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.size:
        raise ValueError("X and y row counts differ")
    if y.size < 2:
        raise ValueError("fit_gp needs n >= 2")
    xs = fit_standardizer(X)
    Xn = xs.transform(X)
    yc, ys = output_scaling(y)
    yn = (y - yc) / ys
    m = X.shape[1]
    lo = np.full(m, config.log10_bounds[0])
    hi = np.full(m, config.log10_bounds[1])

    def objective(theta):
        try:
            val = profile_likelihood(Xn, yn, 10.0 ** theta, config.nugget, config.max_nugget).nll
        except (LinAlgError, FloatingPointError, ValueError):
            return PENALTY
        return val if np.isfinite(val) else PENALTY

    rng = np.random.default_rng(config.seed)
    starts = latin_hypercube(config.restarts, lo, hi, rng)
    res = multistart(objective, starts, lo, hi, config.max_evals)
    if res.fun >= PENALTY:
        raise FloatingPointError("every restart failed to produce a finite likelihood")
    return condition(X, y, 10.0 ** res.x, xs, nugget=config.nugget, max_nugget=config.max_nugget,
                     input_names=input_names, input_space=input_space, seed=config.seed,
                     trace=res.summary())
