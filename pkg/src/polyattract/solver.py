"""Sine-Galerkin solver for the damped wave equation on an interval.

Solves

    u_tt - u_xx + k ||u_t||^p u_t + f(u) = int K(x, y) u_t(y) dy + h(x)

on ``(0, L)`` with homogeneous Dirichlet data. The unknown is expanded in
the orthonormal basis ``e_j(x) = sqrt(2/L) sin(j pi x / L)``, ``j = 1..J``.
Time stepping is the Strang composition ``L(dt/2) D(dt/2) N(dt) D(dt/2) L(dt/2)``
where ``L`` is the exact free-wave rotation, ``D`` the exact flow of the
nonlocal damping and ``N`` a Heun step for the frozen-``u`` reaction part.

All kernels operate on arrays whose last axis is the mode index, so a batch
of states (shape ``(B, J)``) is advanced with the same arithmetic as a single
state; every reduction runs along the last axis only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft

from . import _kernels
from .errors import DomainError, NumericalError


def rowsum(x) -> np.ndarray:
    """Sum over the last axis in strict sequential order.

    ``np.sum`` picks its SIMD blocking from memory alignment, so a row of a
    batch and the same row on its own can round differently. A cumulative
    sum has one fixed order, which keeps batched and single runs bit-identical.
    """
    x = np.asarray(x)
    return np.cumsum(x, axis=-1)[..., -1]


class SpectralSpace:
    """Sine basis of ``J`` modes plus the collocation grid for pointwise terms.

    The grid has ``M = 2J + 1`` interior nodes, enough to project a cubic of
    a ``J``-mode field onto the first ``J`` modes without aliasing.
    """

    def __init__(self, length: float = np.pi, n_modes: int = 64, n_nodes: int | None = None):
        if length <= 0:
            raise DomainError("length must be positive")
        if n_modes < 1:
            raise DomainError("need at least one mode")
        self.length = float(length)
        self.n_modes = int(n_modes)
        self.n_nodes = int(n_nodes) if n_nodes is not None else 2 * self.n_modes + 1
        if self.n_nodes < self.n_modes:
            raise DomainError("collocation grid must have at least n_modes nodes")
        j = np.arange(1, self.n_modes + 1)
        self.wavenumbers = j * np.pi / self.length
        self.eigenvalues = self.wavenumbers**2
        self.quad_nodes = self.length * np.arange(1, self.n_nodes + 1) / (self.n_nodes + 1)
        self.quad_weight = self.length / (self.n_nodes + 1)
        self._amp = np.sqrt(2.0 / self.length)

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    def basis(self, x) -> np.ndarray:
        """Values ``e_j(x)``, shape ``x.shape + (J,)``."""
        x = np.asarray(x, dtype=float)
        return self._amp * np.sin(np.multiply.outer(x, self.wavenumbers))

    def to_physical(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        pad = np.zeros(a.shape[:-1] + (self.n_nodes,))
        pad[..., : self.n_modes] = a
        return 0.5 * self._amp * fft.dst(pad, type=1, axis=-1)

    def to_modal(self, u) -> np.ndarray:
        """Discrete projection of grid values onto the resolved modes."""
        c = fft.dst(np.asarray(u, dtype=float), type=1, axis=-1)
        return (0.5 * self._amp * self.quad_weight) * c[..., : self.n_modes]

    def integrate(self, g) -> np.ndarray:
        """Quadrature of grid values vanishing at both endpoints."""
        return self.quad_weight * np.sum(g, axis=-1)

    def transform_matrices(self):
        """Dense ``(J, M)`` synthesis and ``(M, J)`` projection matrices."""
        if not hasattr(self, "_mats"):
            s = self._amp * np.sin(np.multiply.outer(self.wavenumbers, self.quad_nodes))
            self._mats = (np.ascontiguousarray(s), np.ascontiguousarray(self.quad_weight * s.T))
        return self._mats

    def project(self, func) -> np.ndarray:
        """Modal coefficients of a callable profile ``func(x)``."""
        return self.to_modal(func(self.quad_nodes))


@dataclass
class State:
    """Phase point ``(u, u_t)`` in modal coordinates; ``a``/``b`` may carry a batch axis."""

    a: np.ndarray
    b: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.shape != self.b.shape:
            raise DomainError("position and velocity coefficients differ in shape")

    def copy(self) -> "State":
        return State(self.a.copy(), self.b.copy(), self.time)

    def check_finite(self) -> "State":
        if not (np.isfinite(self.a).all() and np.isfinite(self.b).all()):
            raise NumericalError(f"non-finite state at t={self.time:.6g}")
        return self

    def norm_u(self):
        return np.sqrt(rowsum(self.a**2))

    def norm_ut(self):
        return np.sqrt(rowsum(self.b**2))

    def norm_grad_u(self, space: SpectralSpace):
        return np.sqrt(rowsum(space.eigenvalues * self.a**2))

    def energy_norm(self, space: SpectralSpace):
        """``||(u, u_t)||`` in ``H^1_0 x L^2``."""
        return np.sqrt(rowsum(space.eigenvalues * self.a**2 + self.b**2))


@dataclass(frozen=True)
class CubicNonlinearity:
    """``f(u) = c3 u^3 + c1 u`` with primitive ``F(u) = c3 u^4/4 + c1 u^2/2``."""

    c3: float = 1.0
    c1: float = -1.0

    def f(self, u):
        return u * (self.c3 * u * u + self.c1)

    def df(self, u):
        return 3.0 * self.c3 * u * u + self.c1

    def primitive(self, u):
        u2 = u * u
        return u2 * (0.25 * self.c3 * u2 + 0.5 * self.c1)

    @property
    def is_zero(self) -> bool:
        return self.c3 == 0.0 and self.c1 == 0.0

    def is_dissipative(self, lambda1: float) -> bool:
        """Discrete stand-in for ``liminf f'(s) > -lambda1``."""
        return self.c3 > 0.0 or (self.c3 == 0.0 and self.c1 > -lambda1)


@dataclass(frozen=True)
class KernelFactor:
    """One separable term ``sigma * phi(x) psi(y)`` with modal vectors ``phi``, ``psi``."""

    sigma: float
    phi: np.ndarray
    psi: np.ndarray


@dataclass
class SimParams:
    space: SpectralSpace = field(default_factory=SpectralSpace)
    k: float = 1.0
    p: float = 2.0
    nonlinearity: CubicNonlinearity = field(default_factory=CubicNonlinearity)
    h: np.ndarray | None = None
    kernel: list[KernelFactor] = field(default_factory=list)
    dt: float = 1e-3

    def __post_init__(self):
        if self.k < 0:
            raise DomainError(f"damping coefficient k must be non-negative, got {self.k}")
        if self.p <= 0:
            raise DomainError(f"damping exponent p must be positive, got {self.p}")
        if self.dt <= 0:
            raise DomainError(f"time step must be positive, got {self.dt}")
        J = self.space.n_modes
        self.h = np.zeros(J) if self.h is None else np.asarray(self.h, dtype=float)
        if self.h.shape != (J,):
            raise DomainError(f"forcing must have {J} modal coefficients")
        for fac in self.kernel:
            if np.shape(fac.phi) != (J,) or np.shape(fac.psi) != (J,):
                raise DomainError(f"kernel factors must have {J} modal coefficients")
        if self.kernel:
            self._kphi = np.array([fac.sigma * np.asarray(fac.phi, float) for fac in self.kernel])
            self._kpsi = np.array([np.asarray(fac.psi, float) for fac in self.kernel])
        else:
            self._kphi = self._kpsi = np.zeros((0, J))
        self._has_h = bool(np.any(self.h))
        self._half_rotation = _rotation(self.space, 0.5 * self.dt)
        to_phys, to_modal = self.space.transform_matrices()
        nl = self.nonlinearity
        self._kernel_args = (
            *self._half_rotation, to_phys, to_modal, float(nl.c3), float(nl.c1),
            self.h, np.ascontiguousarray(self._kphi), np.ascontiguousarray(self._kpsi),
            float(self.k), float(self.p), float(self.dt),
        )

    @property
    def dissipative(self) -> bool:
        return self.k > 0 and self.nonlinearity.is_dissipative(self.space.lambda1)

    def kernel_matrix(self) -> np.ndarray:
        """Dense modal matrix of the integral operator."""
        return self._kphi.T @ self._kpsi

    def kernel_norm(self) -> float:
        """Operator norm of the kernel on L^2 (largest singular value)."""
        if not self.kernel:
            return 0.0
        return float(np.linalg.norm(self.kernel_matrix(), ord=2))

    def apply_kernel(self, b) -> np.ndarray:
        """Modal coefficients of ``int K(x, y) v(y) dy`` for velocity coefficients ``b``."""
        b = np.asarray(b, dtype=float)
        out = np.zeros_like(b)
        for phi, psi in zip(self._kphi, self._kpsi):
            out = out + rowsum(b * psi)[..., None] * phi
        return out

    def nonlinear_modal(self, a) -> np.ndarray:
        """Modal projection of ``f(u(x))`` through the collocation grid."""
        if self.nonlinearity.is_zero:
            return np.zeros_like(np.asarray(a, dtype=float))
        u = self.space.to_physical(a)
        return self.space.to_modal(self.nonlinearity.f(u))

    def with_(self, **changes) -> "SimParams":
        return replace(self, **changes)


def default_params(n_modes: int = 64, dt: float = 1e-3, **overrides) -> SimParams:
    """Desk-scale defaults: L = pi, f(u) = u^3 - u, h = 0.1 e_1, K = 0.05 e_1 (x) e_1."""
    space = SpectralSpace(np.pi, n_modes)
    e1 = np.zeros(n_modes)
    e1[0] = 1.0
    kw = dict(
        space=space,
        k=1.0,
        p=2.0,
        nonlinearity=CubicNonlinearity(1.0, -1.0),
        h=0.1 * e1,
        kernel=[KernelFactor(0.05, e1, e1)],
        dt=dt,
    )
    kw.update(overrides)
    return SimParams(**kw)


def _rotation(space: SpectralSpace, dt: float):
    w = space.wavenumbers
    return np.cos(w * dt), np.sin(w * dt) / w, w * np.sin(w * dt)


def _rotate(a, b, rot):
    c, s_over_w, w_s = rot
    return a * c + b * s_over_w, b * c - a * w_s


def _damp(b, dt, k, p):
    # numpy scalars take a different pow() than arrays; keep the norm an array
    nb = np.atleast_1d(np.sqrt(rowsum(b * b)))
    scale = (1.0 + p * k * dt * nb**p) ** (-1.0 / p)
    return b * scale.reshape(b.shape[:-1] + (1,))


def _react(a, b, dt, params: SimParams):
    force = -params.nonlinear_modal(a)
    if params._has_h:
        force = force + params.h
    if params.kernel:
        k1 = force + params.apply_kernel(b)
        k2 = force + params.apply_kernel(b + dt * k1)
        return b + (0.5 * dt) * (k1 + k2)
    return b + dt * force


def linear_substep(s: State, dt: float, space: SpectralSpace) -> State:
    """Exact free-wave flow: each mode rotates with frequency ``sqrt(lambda_j)``."""
    if dt == 0:
        return s.copy()
    a, b = _rotate(s.a, s.b, _rotation(space, dt))
    return State(a, b, s.time).check_finite()


def damping_substep(s: State, dt: float, k: float, p: float) -> State:
    """Exact flow of ``b' = -k ||b||^p b`` with positions frozen.

    The direction of ``b`` is invariant and ``||b||^-p`` grows linearly at
    rate ``p k``.
    """
    if k == 0 or dt == 0:
        return s.copy()
    return State(s.a.copy(), _damp(s.b, dt, k, p), s.time).check_finite()


def reaction_substep(s: State, dt: float, params: SimParams) -> State:
    """Heun step for ``b' = -P f(u) + Psi(b) + h`` with positions frozen."""
    b = _react(s.a, s.b, dt, params)
    return State(s.a.copy(), b, s.time).check_finite()


def step(s: State, params: SimParams) -> State:
    """One Strang step ``L(dt/2) D(dt/2) N(dt) D(dt/2) L(dt/2)``."""
    return advance(s, 1, params)


def reference_step(s: State, params: SimParams) -> State:
    """The same Strang step composed from the public substeps (slow, FFT based)."""
    a, b = _strang(s.a, s.b, params)
    return State(a, b, s.time + params.dt).check_finite()


def _strang(a, b, params: SimParams):
    dt = params.dt
    rot = params._half_rotation
    a, b = _rotate(a, b, rot)
    if params.k:
        b = _damp(b, 0.5 * dt, params.k, params.p)
    b = _react(a, b, dt, params)
    if params.k:
        b = _damp(b, 0.5 * dt, params.k, params.p)
    return _rotate(a, b, rot)


def advance(s: State, n_steps: int, params: SimParams) -> State:
    """Advance a state (or a batch of states) by ``n_steps`` steps."""
    if n_steps < 0:
        raise DomainError("n_steps must be non-negative")
    J = np.shape(s.a)[-1]
    a = np.array(s.a, dtype=float, order="C").reshape(-1, J)
    b = np.array(s.b, dtype=float, order="C").reshape(-1, J)
    if n_steps:
        status = _kernels.strang_batch(a, b, n_steps, *params._kernel_args)
        bad = np.flatnonzero(status >= 0)
        if bad.size:
            i = int(bad[0])
            t_fail = s.time + (status[i] + 1) * params.dt
            raise NumericalError(f"non-finite state in member {i} at t={t_fail:.6g}")
    shape = np.shape(s.a)
    return State(a.reshape(shape), b.reshape(shape), s.time + n_steps * params.dt)


@dataclass
class Trajectory:
    """Samples of one (or a batch of) trajectories; leading axis is time."""

    times: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def state(self, i: int) -> State:
        return State(self.a[i], self.b[i], float(self.times[i]))

    def __len__(self):
        return self.times.size


def run(s: State, n_steps: int, params: SimParams, record_every: int = 1) -> Trajectory:
    """Advance ``n_steps`` steps recording every ``record_every``-th step boundary."""
    if record_every < 1:
        raise DomainError("record_every must be >= 1")
    times, a, b = [s.time], [s.a.copy()], [s.b.copy()]
    done = 0
    while done < n_steps:
        chunk = min(record_every, n_steps - done)
        s = advance(s, chunk, params)
        done += chunk
        times.append(s.time)
        a.append(s.a)
        b.append(s.b)
    return Trajectory(np.array(times), np.array(a), np.array(b))


def energy(s: State, params: SimParams):
    """``1/2 ||u_t||^2 + 1/2 ||grad u||^2 + int F(u) - (h, u)``."""
    space = params.space
    e = 0.5 * np.sum(s.b**2 + space.eigenvalues * s.a**2, axis=-1)
    if not params.nonlinearity.is_zero:
        u = space.to_physical(s.a)
        e = e + space.integrate(params.nonlinearity.primitive(u))
    if params._has_h:
        e = e - np.sum(params.h * s.a, axis=-1)
    if not np.all(np.isfinite(e)):
        raise NumericalError("non-finite energy")
    return e


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    dt = np.diff(t).reshape((-1,) + (1,) * (y.ndim - 1))
    out[1:] = np.cumsum(0.5 * dt * (y[1:] + y[:-1]), axis=0)
    return out


def energy_balance_residual(traj: Trajectory, params: SimParams) -> np.ndarray:
    """``E(t) - E(0) + k int |u_t|^(p+2) - int (Psi(u_t), u_t)`` at every sample."""
    E = np.array([energy(traj.state(i), params) for i in range(len(traj))])
    nb = np.sqrt(np.sum(traj.b**2, axis=-1))
    dissipated = params.k * nb ** (params.p + 2)
    injected = np.sum(params.apply_kernel(traj.b) * traj.b, axis=-1)
    return E - E[0] + _cumtrapz(dissipated, traj.times) - _cumtrapz(injected, traj.times)


def smooth_random_state(rng: np.random.Generator, space: SpectralSpace, radius: float) -> State:
    """Random phase point with algebraically decaying spectrum and energy norm ``radius``.

    Positions get weight ``j^-2`` and velocities ``j^-1`` before scaling, so
    ``(u, u_t)`` is a smooth profile whose high modes carry little energy.
    """
    j = np.arange(1, space.n_modes + 1)
    a = rng.standard_normal(space.n_modes) / j**2
    b = rng.standard_normal(space.n_modes) / j
    s = State(a, b)
    nrm = float(s.energy_norm(space))
    return State(a * radius / nrm, b * radius / nrm)
