"""Multi-start bounded derivative-free minimization shared by the GP fitters."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc


def thread_count(n_tasks: int) -> int:
    """Worker count from HETFUSE_THREADS (unset -> 1, 0 -> one per CPU)."""
    raw = os.environ.get("HETFUSE_THREADS", "1").strip() or "1"
    n = int(raw)
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, min(n, n_tasks))


def pmap(fn: Callable, items: Sequence) -> list:
    # results come back in submission order, so reductions stay deterministic
    workers = thread_count(len(items))
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def latin_hypercube(n: int, lower, upper, rng: np.random.Generator) -> np.ndarray:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.size == 0:
        return np.zeros((n, 0))
    u = qmc.LatinHypercube(d=lower.size, seed=rng).random(n)
    return qmc.scale(u, lower, upper)


@dataclass(frozen=True)
class RestartResult:
    x: np.ndarray
    fun: float
    nfev: int


@dataclass(frozen=True)
class MultiStartResult:
    x: np.ndarray
    fun: float
    best_restart: int
    restarts: tuple[RestartResult, ...]

    def summary(self) -> dict:
        return {"best_restart": self.best_restart, "best_value": self.fun,
                "restart_values": [r.fun for r in self.restarts],
                "evaluations": sum(r.nfev for r in self.restarts)}


def _initial_simplex(x0, lower, upper, step_frac=0.1):
    step = step_frac * (upper - lower)
    simplex = [x0.copy()]
    for i in range(x0.size):
        v = x0.copy()
        v[i] = v[i] + step[i] if v[i] + step[i] <= upper[i] else v[i] - step[i]
        simplex.append(v)
    return np.array(simplex)


def nelder_mead(fun: Callable, x0, lower, upper, max_evals: int = 500, step: float = 0.25,
                cycles: int = 3) -> RestartResult:
    """Bounded Nelder-Mead; the budget is split over ``cycles`` fresh simplices
    built around the incumbent, which gets it off plateaus and out of collapsed
    simplices."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    if x.size == 0:
        return RestartResult(x, float(fun(x)), 1)
    bounds = list(zip(lower, upper))
    fx, nfev = np.inf, 0
    per_cycle = max(max_evals // cycles, x.size + 2)
    for _ in range(cycles):
        budget = min(per_cycle, max_evals - nfev)
        if budget < x.size + 2:
            break
        res = minimize(fun, x, method="Nelder-Mead", bounds=bounds,
                       options={"maxfev": budget, "xatol": 1e-6, "fatol": 1e-9,
                                "initial_simplex": _initial_simplex(x, lower, upper, step)})
        nfev += int(res.nfev)
        if res.fun <= fx:
            x, fx = np.clip(res.x, lower, upper), float(res.fun)
    return RestartResult(x, fx, nfev)


def multistart(fun: Callable, starts: np.ndarray, lower, upper, max_evals: int = 500,
               step: float = 0.25, cycles: int = 3) -> MultiStartResult:
    """Refine every start point; argmin over restarts, ties to the lowest index."""
    results = pmap(lambda x0: nelder_mead(fun, x0, lower, upper, max_evals, step, cycles),
                   list(starts))
    vals = np.array([r.fun if np.isfinite(r.fun) else np.inf for r in results])
    if not np.any(np.isfinite(vals)):
        raise FloatingPointError("all restarts failed numerically")
    best = int(np.argmin(vals))
    return MultiStartResult(results[best].x, results[best].fun, best, tuple(results))
