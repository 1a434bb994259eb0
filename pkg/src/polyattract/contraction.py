"""Diagnostics for pairs of trajectories ``w``, ``v`` and their difference ``z = w - v``.

Everything here is computed from samples at step boundaries with the
trapezoid rule. Inputs may carry a leading batch axis; each pair is then
processed independently and scalar outputs become arrays over pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .solver import SimParams, SpectralSpace, State, advance, rowsum, smooth_random_state


def _trapz(y, t):
    # sequential accumulation so a pair gives the same bits alone or in a batch
    dt = np.diff(t).reshape((-1,) + (1,) * (np.ndim(y) - 1))
    return np.cumsum(0.5 * dt * (y[1:] + y[:-1]), axis=0)[-1]


def _tail_integral(y, t):
    """``int_t^T y`` for every sample ``t``."""
    dt = np.diff(t).reshape((-1,) + (1,) * (np.ndim(y) - 1))
    pieces = 0.5 * dt * (y[1:] + y[:-1])
    out = np.zeros_like(y)
    out[:-1] = np.cumsum(pieces[::-1], axis=0)[::-1]
    return out


def _dot(x, y):
    return rowsum(x * y)


@dataclass
class PairDiagnostics:
    """Time series and pseudometrics for one pair (or a batch of pairs).

    Series have time as leading axis. ``damping_pair`` is
    ``(|w_t|^p w_t - |v_t|^p v_t, z_t)``, ``f_pair`` is ``(f(w) - f(v), z_t)``
    and ``kernel_pair`` is ``(Psi(z_t), z_t)``.
    """

    times: np.ndarray
    k: float
    p: float
    Ez: np.ndarray
    damping_pair: np.ndarray
    f_pair: np.ndarray
    kernel_pair: np.ndarray
    norm_z: np.ndarray
    norm_zt: np.ndarray
    norm_psi_zt: np.ndarray
    zt_dot_z: np.ndarray
    f_dot_z: np.ndarray
    psi_dot_z: np.ndarray
    damping_dot_z: np.ndarray
    identity_residual: np.ndarray = field(init=False)
    rho1: np.ndarray = field(init=False)
    rho2: np.ndarray = field(init=False)
    velocity_integral: np.ndarray = field(init=False)
    zt_integral: np.ndarray = field(init=False)

    def __post_init__(self):
        t = self.times
        flux = self.k * self.damping_pair + self.f_pair - self.kernel_pair
        self.identity_residual = self.Ez - self.Ez[-1] - _tail_integral(flux, t)
        self.rho1 = _trapz(self.norm_psi_zt, t)
        self.rho2 = np.max(self.norm_z, axis=0)
        self.velocity_integral = _trapz(self.norm_zt**2, t)
        self.zt_integral = _trapz(self.norm_zt, t)

    @property
    def T(self) -> float:
        return float(self.times[-1] - self.times[0])


def _pair_sample(w: State, v: State, params: SimParams):
    space = params.space
    z = w.a - v.a
    zt = w.b - v.b
    p = params.p
    nw = np.sqrt(rowsum(w.b**2))[..., None]
    nv = np.sqrt(rowsum(v.b**2))[..., None]
    dpair = nw**p * w.b - nv**p * v.b
    fdiff = params.nonlinear_modal(w.a) - params.nonlinear_modal(v.a)
    psi = params.apply_kernel(zt)
    return dict(
        Ez=0.5 * rowsum(zt**2 + space.eigenvalues * z**2),
        damping_pair=_dot(dpair, zt),
        f_pair=_dot(fdiff, zt),
        kernel_pair=_dot(psi, zt),
        norm_z=np.sqrt(rowsum(z**2)),
        norm_zt=np.sqrt(rowsum(zt**2)),
        norm_psi_zt=np.sqrt(rowsum(psi**2)),
        zt_dot_z=_dot(zt, z),
        f_dot_z=_dot(fdiff, z),
        psi_dot_z=_dot(psi, z),
        damping_dot_z=_dot(dpair, z),
    )


def pair_suite(space: SpectralSpace, n: int = 100, radius: float = 1.0, seed: int = 42):
    """Seeded batch of ``n`` pairs inside the ball of the given energy radius.

    Pair ``i`` draws its two members from the streams ``seed ^ 2i`` and
    ``seed ^ (2i + 1)``; each member's norm is uniform in ``[0, radius]``.
    """
    if n < 1:
        raise DomainError("need at least one pair")
    first, second = [], []
    for i in range(n):
        for out, stream in ((first, seed ^ (2 * i)), (second, seed ^ (2 * i + 1))):
            rng = np.random.default_rng(stream)
            out.append(smooth_random_state(rng, space, rng.uniform(0.0, radius)))
    stack = lambda xs: State(np.array([x.a for x in xs]), np.array([x.b for x in xs]))
    return stack(first), stack(second)


def pair_evolve(y1: State, y2: State, T: float, params: SimParams) -> PairDiagnostics:
    """Advance both members with the same stepper, sampling every step."""
    if np.shape(y1.a) != np.shape(y2.a):
        raise DomainError("pair members live on different spaces")
    if np.shape(y1.a)[-1] != params.space.n_modes:
        raise DomainError("state does not match the spectral space")
    n_steps = int(round(T / params.dt))
    if n_steps < 1:
        raise DomainError("T must cover at least one step")
    batch = np.shape(y1.a)[:-1]
    both = State(np.stack([y1.a, y2.a]), np.stack([y1.b, y2.b]), y1.time)
    samples = []
    times = []
    for i in range(n_steps + 1):
        if i:
            both = advance(both, 1, params)
        w = State(both.a[0], both.b[0])
        v = State(both.a[1], both.b[1])
        samples.append(_pair_sample(w, v, params))
        times.append(y1.time + i * params.dt)
    series = {key: np.array([s[key] for s in samples]).reshape((n_steps + 1,) + batch) for key in samples[0]}
    return PairDiagnostics(times=np.array(times), k=params.k, p=params.p, **series)


def energy_identity_residual(diag: PairDiagnostics, t: float, T: float | None = None):
    """Energy identity on ``[t, T]`` for the difference equation, LHS minus RHS."""
    times = diag.times
    T = times[-1] if T is None else T
    if not (times[0] - 1e-12 <= t <= T <= times[-1] + 1e-12):
        raise DomainError(f"[{t}, {T}] is outside the sampled window [{times[0]}, {times[-1]}]")
    i = int(np.argmin(np.abs(times - t)))
    j = int(np.argmin(np.abs(times - T)))
    if i == j:
        return np.zeros_like(diag.Ez[i])
    sl = slice(i, j + 1)
    flux = diag.k * diag.damping_pair[sl] + diag.f_pair[sl] - diag.kernel_pair[sl]
    return diag.Ez[i] - diag.Ez[j] - _trapz(flux, times[sl])


def monotonicity_ratios(p: float, dim: int, n_samples: int, seed: int = 0) -> np.ndarray:
    """Ratios ``(|a|^p a - |b|^p b, a - b) / |a - b|^(p+2)`` over sampled pairs.

    Random pairs use Gaussian directions with log-uniform radii; the stress
    pairs (antipodal, nearly equal, orthogonal of equal length) are appended
    deterministically. Coincident pairs are dropped.
    """
    if dim < 1 or n_samples < 1:
        raise DomainError("dim and n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_samples, dim)) * np.exp(rng.uniform(-3, 3, (n_samples, 1)))
    b = rng.standard_normal((n_samples, dim)) * np.exp(rng.uniform(-3, 3, (n_samples, 1)))
    e = np.zeros(dim)
    e[0] = 1.0
    stress_a = [e, e, 2.0 * e, e]
    stress_b = [-e, e * (1 - 1e-6), -2.0 * e, 0.5 * e]
    if dim >= 2:
        f = np.zeros(dim)
        f[1] = 1.0
        stress_a.append(e)
        stress_b.append(f)
    a = np.vstack([a, stress_a])
    b = np.vstack([b, stress_b])
    return _ratio(a, b, p)


def _ratio(a, b, p):
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    nb = np.linalg.norm(b, axis=-1, keepdims=True)
    d = a - b
    nd = np.linalg.norm(d, axis=-1)
    keep = nd > 0
    num = np.sum((na**p * a - nb**p * b) * d, axis=-1)
    return num[keep] / nd[keep] ** (p + 2)


def estimate_cp(p: float, dim: int = 1, n_samples: int = 100_000, seed: int = 0) -> float:
    """Sampled minimum of the monotonicity ratio; an upper estimate of ``C_p``."""
    return float(np.min(monotonicity_ratios(p, dim, n_samples, seed)))


@dataclass
class VelocityCheck:
    lhs: np.ndarray
    rhs: np.ndarray
    base: np.ndarray
    slack: np.ndarray
    consistent: np.ndarray


def velocity_integral_check(diag: PairDiagnostics, cp: float, tol: float = 1e-8) -> VelocityCheck:
    """Both sides of the bound on ``int_0^T |z_t|^2`` through the damping monotonicity.

    The right side is ``(k C_p)^(-2/(p+2)) T^(p/(p+2)) base^(2/(p+2))`` with
    ``base = E_z(0) - E_z(T) - int (f(w) - f(v), z_t) + int (Psi(z_t), z_t)``.
    A base below ``-tol`` is flagged as inconsistent rather than raised.
    """
    k, p = diag.k, diag.p
    if k <= 0:
        raise DomainError("the velocity bound needs k > 0")
    T = diag.T
    base = diag.Ez[0] - diag.Ez[-1] - _trapz(diag.f_pair, diag.times) + _trapz(diag.kernel_pair, diag.times)
    consistent = base >= -tol
    e = 2.0 / (p + 2.0)
    rhs = (k * cp) ** (-e) * T ** (p / (p + 2.0)) * np.maximum(base, 0.0) ** e
    lhs = diag.velocity_integral
    return VelocityCheck(lhs=lhs, rhs=rhs, base=base, slack=rhs - lhs, consistent=consistent)


@dataclass
class ContractionReport:
    """Terms of the assembled contraction inequality for ``T E_z(T)``.

    ``g_terms`` grow with the pseudometrics (``rho2 = sup |z|`` and
    ``rho1 = int |Psi(z_t)|``); ``psi_terms`` are the nonlinear pair
    integrals that vanish along repeated limits.
    """

    T: float
    C: float
    lhs: np.ndarray
    g_sup_term: np.ndarray
    g_kernel_term: np.ndarray
    psi_double_f: np.ndarray
    velocity_term: np.ndarray
    rhs: np.ndarray
    satisfied: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    cross_term: np.ndarray
    exact_rhs: np.ndarray
    exact_residual: np.ndarray

    def terms(self) -> dict:
        keys = (
            "lhs", "g_sup_term", "g_kernel_term", "psi_double_f", "velocity_term", "rhs",
            "satisfied", "rho1", "rho2", "cross_term", "exact_rhs", "exact_residual",
        )
        return {key: getattr(self, key) for key in keys}


def _double_tail(y, t):
    """``int_0^T int_t^T y(tau) dtau dt``."""
    return _trapz(_tail_integral(y, t), t)


def contraction_report_from(diag: PairDiagnostics, cp: float, C: float) -> ContractionReport:
    t = diag.times
    T = diag.T
    k, p = diag.k, diag.p
    lhs = T * diag.Ez[-1]
    f_int = _trapz(diag.f_pair, t)
    g_sup = C * (T + 1.0) * diag.rho2
    g_kernel = T * C * diag.rho1
    psi_double = np.abs(_double_tail(diag.f_pair, t))
    e = 2.0 / (p + 2.0)
    base = diag.Ez[0] - diag.Ez[-1] + np.abs(f_int) + C * diag.rho1
    vel = (k * cp) ** (-e) * T ** (p / (p + 2.0)) * np.maximum(base, 0.0) ** e
    rhs = g_sup + g_kernel + psi_double + vel
    # the identity the inequality is assembled from, every term computed
    cross = -0.5 * (diag.zt_dot_z[-1] - diag.zt_dot_z[0])
    exact = (
        cross
        + diag.velocity_integral
        - 0.5 * _trapz(diag.f_dot_z, t)
        + 0.5 * _trapz(diag.psi_dot_z, t)
        - 0.5 * k * _trapz(diag.damping_dot_z, t)
        - k * _double_tail(diag.damping_pair, t)
        - _double_tail(diag.f_pair, t)
        + _double_tail(diag.kernel_pair, t)
    )
    return ContractionReport(
        T=T, C=C, lhs=lhs, g_sup_term=g_sup, g_kernel_term=g_kernel, psi_double_f=psi_double,
        velocity_term=vel, rhs=rhs, satisfied=lhs <= rhs, rho1=diag.rho1, rho2=diag.rho2,
        cross_term=cross, exact_rhs=exact, exact_residual=lhs - exact,
    )


def contraction_report(y1: State, y2: State, T: float, params: SimParams, cp: float, C: float):
    """Evolve the pair over ``[0, T]`` and assemble the contraction report."""
    return contraction_report_from(pair_evolve(y1, y2, T, params), cp, C)


def format_report(report: ContractionReport, index: int | None = None) -> str:
    """One ``key = value`` line per term; ``index`` selects a pair from a batch."""
    lines = [f"T = {report.T!r}", f"C = {report.C!r}"]
    for key, val in report.terms().items():
        val = np.asarray(val)
        if index is not None and val.ndim:
            val = val[index]
        lines.append(f"{key} = {val.item()!r}" if val.ndim == 0 else f"{key} = {val.tolist()!r}")
    return "\n".join(lines) + "\n"
