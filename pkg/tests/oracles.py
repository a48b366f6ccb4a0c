"""Independent reference implementations used only by the test suite."""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np


def newton_logistic(X, y, iters=200):
    """Plain Newton on the exact log-likelihood via dense normal-equation solves."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    b = np.zeros(X.shape[1])

    def nll(beta):
        eta = X @ beta
        return float(np.sum(np.logaddexp(0, eta) - y * eta))

    for _ in range(iters):
        p = 1 / (1 + np.exp(-(X @ b)))
        g = X.T @ (y - p)
        H = X.T @ (X * (p * (1 - p))[:, None])
        step = np.linalg.solve(H, g)
        t = 1.0
        while nll(b + t * step) > nll(b) and t > 1e-12:
            t /= 2
        b = b + t * step
        if np.max(np.abs(t * step)) < 1e-14:
            break
    return b


def qini_bruteforce(y, t, pred, J):
    """Qini coefficient by direct per-grid-point summation over sorted rows."""
    n = len(y)
    order = sorted(range(n), key=lambda i: (-pred[i], i))
    n_t_total = sum(t)
    xs, gs = [0.0], [0.0]
    for j in range(1, J + 1):
        top = order[: math.ceil(j * n / J)]
        nt = sum(t[i] for i in top)
        nc = len(top) - nt
        rt = sum(y[i] * t[i] for i in top)
        rc = sum(y[i] * (1 - t[i]) for i in top)
        h = rt - (rc * nt / nc if nc else 0.0)
        xs.append(len(top) / n)
        gs.append(100 * h / n_t_total)
    area = sum((xs[k] - xs[k - 1]) * (gs[k] + gs[k - 1]) / 2 for k in range(1, len(xs)))
    return area - gs[-1] / 2


def hypergeom_moments(N, n, r):
    """Mean and variance of the number of marked items among n draws from N with r marked,
    obtained by enumerating every subset (small N only)."""
    pop = [1] * r + [0] * (N - r)
    vals = [sum(pop[i] for i in s) for s in combinations(range(N), n)]
    m = sum(vals) / len(vals)
    v = sum((x - m) ** 2 for x in vals) / len(vals)
    return m, v


def hypergeom_moments_pmf(N, n, r):
    """Same moments by summing the exact pmf (usable for larger N)."""
    total = math.comb(N, n)
    m = v2 = 0.0
    for k in range(max(0, n - (N - r)), min(n, r) + 1):
        w = math.comb(r, k) * math.comb(N - r, n - k) / total
        m += w * k
        v2 += w * k * k
    return m, v2 - m * m
