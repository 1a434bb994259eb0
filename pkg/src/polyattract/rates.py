"""Polynomial decay engine for discrete contraction semigroups.

The auxiliary map ``q(s) = (3C)^(-1/beta) s^(1/beta) + s`` is strictly
increasing on ``[0, inf)``; its inverse ``w`` drives the recursion
``y(n) = w(y(n-1))`` whose tail obeys an explicit algebraic bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError

_MAX_BRACKET_ITER = 200
_ABS_FLOOR = 1e-14
_STABILITY_WINDOW = 3


@dataclass(frozen=True)
class DecayParams:
    """Triple ``(beta, C, T)`` of the contraction hypothesis.

    ``bigT`` is the sampling period of the discrete semigroup ``S(nT)``.
    """

    beta: float
    bigC: float
    bigT: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise DomainError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.bigC > 0.0:
            raise DomainError(f"bigC must be positive, got {self.bigC}")
        if not self.bigT > 0.0:
            raise DomainError(f"bigT must be positive, got {self.bigT}")

    @property
    def q_coeff(self) -> float:
        """``(3C)^(-1/beta)``, the weight of the super-linear part of q."""
        return (3.0 * self.bigC) ** (-1.0 / self.beta)

    @property
    def tail_rate(self) -> float:
        """``(1/beta - 1)(1 + 3C)^(-1/beta)``, the per-step increment of y^(1-1/beta)."""
        return (1.0 / self.beta - 1.0) * (1.0 + 3.0 * self.bigC) ** (-1.0 / self.beta)


@dataclass
class IterationTrace:
    y: np.ndarray
    n0: int | None = None
    bound: np.ndarray = field(default_factory=lambda: np.empty(0))

    def differences(self) -> np.ndarray:
        return self.y[:-1] - self.y[1:]


def eval_q(s: float, p: DecayParams) -> float:
    if s < 0:
        raise DomainError(f"q is defined on s >= 0, got {s}")
    return p.q_coeff * s ** (1.0 / p.beta) + s


def _dq(s: float, p: DecayParams) -> float:
    return p.q_coeff / p.beta * s ** (1.0 / p.beta - 1.0) + 1.0


def eval_w(y: float, p: DecayParams) -> float:
    """Inverse of :func:`eval_q` on the half line.

    Since ``q(s) >= s`` the root lies in ``[0, y]``. The bracket is shrunk
    by safeguarded Newton steps (bisection whenever Newton leaves the
    bracket), then polished with a final Newton correction.
    """
    if y < 0:
        raise DomainError(f"w is defined on y >= 0, got {y}")
    if y == 0.0:
        return 0.0
    lo, hi = 0.0, float(y)
    # explicit starting guesses: the linear regime s ~ y and the power regime
    # s ~ (y / q_coeff)^beta bracket the root from above
    s = min(hi, (y / p.q_coeff) ** p.beta)
    tol = max(_ABS_FLOOR, 1e-15 * y)
    for _ in range(_MAX_BRACKET_ITER):
        g = eval_q(s, p) - y
        if g == 0.0:
            return s
        if g > 0:
            hi = s
        else:
            lo = s
        step = g / _dq(s, p)
        s_new = s - step
        if not lo < s_new < hi:
            s_new = 0.5 * (lo + hi)
        if abs(s_new - s) <= tol or hi - lo <= tol:
            s = s_new
            break
        s = s_new
    else:
        raise NumericalError(f"inverse of q did not converge for y={y}")
    # polishing
    for _ in range(2):
        g = eval_q(s, p) - y
        s_new = s - g / _dq(s, p)
        if s_new < 0 or not math.isfinite(s_new):
            break
        s = s_new
    return min(s, float(y))


def iterate_w(y0: float, n: int, p: DecayParams) -> IterationTrace:
    if y0 < 0:
        raise DomainError(f"y0 must be non-negative, got {y0}")
    if n < 1:
        raise DomainError(f"need n >= 1 iterations, got {n}")
    y = np.empty(n + 1)
    y[0] = y0
    for k in range(1, n + 1):
        y[k] = eval_w(y[k - 1], p)
    return IterationTrace(y=y)


def extend_trace(trace: IterationTrace, extra: int, p: DecayParams) -> IterationTrace:
    """Append ``extra`` further iterates to ``trace`` (returns a new trace)."""
    tail = iterate_w(trace.y[-1], extra, p).y[1:]
    return IterationTrace(y=np.concatenate([trace.y, tail]))


def _first_stable_index(y: np.ndarray) -> int | None:
    d = y[:-1] - y[1:]
    ok = (d > 0.0) & (d < 1.0)
    if ok.size < _STABILITY_WINDOW or not ok[-_STABILITY_WINDOW:].all():
        return None
    bad = np.flatnonzero(~ok)
    # difference d[i] belongs to index n = i + 1
    return 1 if bad.size == 0 else int(bad[-1]) + 2


def find_n0(trace: IterationTrace, p: DecayParams | None = None, max_len: int = 1_000_000) -> int:
    """Smallest ``n`` with ``0 < y(m-1) - y(m) < 1`` for every computed ``m >= n``.

    When ``p`` is given the trace is extended until the condition holds on
    the last three differences. The zero sequence gives 0.
    """
    y = trace.y
    if y[0] == 0.0:
        return 0
    n0 = _first_stable_index(y)
    while n0 is None:
        if p is None:
            raise DomainError("trace too short to locate N0; pass params to extend it")
        if y.size > max_len:
            raise NumericalError("N0 not found within the extension cap")
        trace = extend_trace(trace, max(_STABILITY_WINDOW, y.size), p)
        y = trace.y
        n0 = _first_stable_index(y)
    return n0


def closed_form_bound(n, n0: int, y_n0: float, p: DecayParams):
    """Algebraic tail bound on ``y(n)`` valid for ``n >= n0``; accepts arrays."""
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < n0):
        raise DomainError(f"bound holds only for n >= n0 = {n0}")
    if y_n0 == 0.0:
        out = np.zeros_like(n_arr)
    else:
        e = 1.0 - 1.0 / p.beta
        base = (n_arr - n0) * p.tail_rate + y_n0 ** e
        out = base ** (1.0 / e)
        # the bound never exceeds its value at n0; clip rounding noise
        out = np.minimum(np.where(n_arr == n0, y_n0, out), y_n0)
    return float(out) if out.ndim == 0 else out


def alpha_decay_bound(t, n0: int, alpha0: float, p: DecayParams):
    """Bound on the noncompactness measure of ``S(t)B0`` for ``t >= (n0+1)T``."""
    t_arr = np.asarray(t, dtype=float)
    t_min = (n0 + 1) * p.bigT
    if np.any(t_arr < t_min):
        raise DomainError(f"bound holds only for t >= (n0+1)T = {t_min}")
    if alpha0 < 0:
        raise DomainError("alpha0 must be non-negative")
    if alpha0 == 0.0:
        out = np.zeros_like(t_arr)
    else:
        e = 2.0 * (p.beta - 1.0) / p.beta
        # (t - t_min) / T rather than t / T - n0 - 1: exact near the threshold
        base = (t_arr - t_min) / p.bigT * p.tail_rate + alpha0 ** e
        out = 2.0 * base ** (1.0 / e)
        out = np.minimum(np.where(t_arr == t_min, 2.0 * alpha0, out), 2.0 * alpha0)
    return float(out) if out.ndim == 0 else out


def trace_with_bound(y0: float, n: int, p: DecayParams) -> IterationTrace:
    """Iterate, locate N0 and attach the closed-form bound for indices ``n0..n``."""
    trace = iterate_w(y0, n, p)
    n0 = find_n0(trace, p)
    if n0 > n:
        trace = extend_trace(trace, n0 - n, p)
    trace.n0 = n0
    idx = np.arange(n0, trace.y.size)
    trace.bound = np.atleast_1d(closed_form_bound(idx, n0, trace.y[n0], p))
    return trace
