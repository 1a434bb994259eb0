"""Independent reference computations used only by the tests.

Nothing here imports the package's numerical routines: each oracle is a
direct, slow or high-precision evaluation of the same quantity.
"""

import itertools
import math

import mpmath as mp
import numpy as np
from scipy import integrate


# --- decay engine -----------------------------------------------------------

def q_exact(s, beta, C):
    return (3 * mp.mpf(C)) ** (-1 / mp.mpf(beta)) * mp.mpf(s) ** (1 / mp.mpf(beta)) + mp.mpf(s)


def w_exact(y, beta, C, dps=40):
    """Inverse of q by high-precision bisection on ``[0, y]``."""
    with mp.workdps(dps):
        y = mp.mpf(y)
        lo, hi = mp.mpf(0), y
        for _ in range(4 * dps):
            mid = (lo + hi) / 2
            if q_exact(mid, beta, C) > y:
                hi = mid
            else:
                lo = mid
        return (lo + hi) / 2


def w_quadratic(y, C):
    """beta = 1/2: q(s) = s^2 / (3C)^2 + s solved by the quadratic formula."""
    c = (3.0 * C) ** -2.0
    return 2.0 * y / (1.0 + math.sqrt(1.0 + 4.0 * c * y))


def sequence_bound(n, n0, y_n0, beta, C):
    beta, C = mp.mpf(beta), mp.mpf(C)
    e = 1 - 1 / beta
    rate = (1 / beta - 1) * (1 + 3 * C) ** (-1 / beta)
    return ((n - n0) * rate + mp.mpf(y_n0) ** e) ** (1 / e)


# --- solver -----------------------------------------------------------------

def basis(j, L, x):
    return math.sqrt(2.0 / L) * np.sin(j * math.pi * x / L)


def projection_by_quadrature(a, L, g, modes):
    """``int_0^L g(u(x)) e_j(x) dx`` with adaptive quadrature, one mode at a time."""
    a = np.asarray(a, dtype=float)
    js = np.arange(1, a.size + 1)

    def u(x):
        return float(np.sum(a * basis(js, L, x)))

    out = []
    for j in modes:
        val, _ = integrate.quad(lambda x: g(u(x)) * basis(j, L, x), 0.0, L, limit=400, epsabs=1e-14, epsrel=1e-13)
        out.append(val)
    return np.array(out)


def oscillator(a0, b0, lam, t):
    w = math.sqrt(lam)
    return a0 * math.cos(w * t) + b0 / w * math.sin(w * t), b0 * math.cos(w * t) - a0 * w * math.sin(w * t)


# --- monotonicity constant --------------------------------------------------

def cp_scalar_scan(p, n=200_001):
    """Scalar minimum of the monotonicity ratio by homogeneity: a = 1, b = t in [-1, 1)."""
    t = np.linspace(-1.0, 1.0, n)[:-1]
    num = (1.0 - np.abs(t) ** p * t) * (1.0 - t)
    return float(np.min(num / np.abs(1.0 - t) ** (p + 2)))


# --- geometry ---------------------------------------------------------------

def semidistance_brute(xs, ys):
    best = 0.0
    for x in xs:
        nearest = math.inf
        for y in ys:
            nearest = min(nearest, math.sqrt(sum((xi - yi) ** 2 for xi, yi in zip(x, y))))
        best = max(best, nearest)
    return best


def optimal_partition_diameter(points, m):
    """Minimum over all labelings into at most ``m`` groups of the largest group diameter."""
    n = len(points)
    d = [[math.dist(points[i], points[j]) for j in range(n)] for i in range(n)]
    best = math.inf
    for labels in itertools.product(range(m), repeat=n - 1):
        labels = (0,) + labels
        worst = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                if labels[i] == labels[j] and d[i][j] > worst:
                    worst = d[i][j]
                    if worst >= best:
                        break
            if worst >= best:
                break
        best = min(best, worst)
    return best
