"""Independent reference computations. Nothing here imports hetfuse."""

import math

import numpy as np


def dense_corr(X, phi, nugget=0.0):
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    C = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            C[i, j] = math.exp(-sum(p * (a - b) ** 2 for p, a, b in zip(phi, X[i], X[j])))
    return C + nugget * np.eye(n)


def dense_nll(X, y, phi, nugget=1e-8):
    """Concentrated Gaussian negative log-likelihood via explicit det and inverse."""
    y = np.asarray(y, dtype=float)
    n = y.size
    C = dense_corr(X, phi, nugget)
    Ci = np.linalg.inv(C)
    one = np.ones(n)
    mu = (one @ Ci @ y) / (one @ Ci @ one)
    r = y - mu
    s2 = (r @ Ci @ r) / n
    return 0.5 * n * math.log(2 * math.pi * s2) + 0.5 * math.log(np.linalg.det(C)) + 0.5 * (r @ Ci @ r) / s2


def grid_fit_1d(x, y, grid):
    """Brute-force 1-D kriging: pick phi on a grid by dense likelihood, return a predictor."""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    y = np.asarray(y, dtype=float)
    m, s = x.mean(), x.std()
    xn = (x - m) / s
    yc, ys = y.mean(), y.std()
    yn = (y - yc) / ys
    best = min(grid, key=lambda p: dense_nll(xn, yn, [p]))
    C = dense_corr(xn, [best], 1e-8)
    Ci = np.linalg.inv(C)
    one = np.ones(y.size)
    mu = (one @ Ci @ yn) / (one @ Ci @ one)
    w = Ci @ (yn - mu)

    def f(xq):
        q = (np.asarray(xq, dtype=float).reshape(-1, 1) - m) / s
        c = np.exp(-best * (q - xn.T) ** 2)
        return yc + ys * (mu + c @ w)

    return f, best


def beam_deflection(P, L, E, I):
    return P * L ** 3 / (3 * E * I)


def hand_nrmse(pred, truth):
    pred, truth = np.asarray(pred, float), np.asarray(truth, float)
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(pred, truth)) / truth.size) / (truth.max() - truth.min())


def mp_dense_nll(X, y, phi, nugget=1e-8, digits=40):
    """Same quantity at ``digits`` significant digits (mpmath det and inverse)."""
    import mpmath

    with mpmath.workdps(digits):
        n = len(y)
        C = mpmath.matrix(n, n)
        for i in range(n):
            for j in range(n):
                d = sum(mpmath.mpf(p) * (mpmath.mpf(a) - mpmath.mpf(b)) ** 2
                        for p, a, b in zip(phi, X[i], X[j]))
                C[i, j] = mpmath.exp(-d) + (mpmath.mpf(nugget) if i == j else 0)
        Ci = C ** -1
        one = mpmath.matrix([1] * n)
        yv = mpmath.matrix([mpmath.mpf(float(v)) for v in y])
        mu = (one.T * Ci * yv)[0] / (one.T * Ci * one)[0]
        r = yv - one * mu
        q = (r.T * Ci * r)[0]
        s2 = q / n
        return float(n / 2 * mpmath.log(2 * mpmath.pi * s2) + mpmath.log(mpmath.det(C)) / 2 + q / (2 * s2))
