"""Cloud experiments: absorbing-ball entry, attraction distances and rate fits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import _kernels
from .contraction import estimate_cp
from .errors import DomainError
from .solver import SimParams, SpectralSpace, State, advance, smooth_random_state

log = logging.getLogger(__name__)

NEVER = math.inf


# --- clouds -----------------------------------------------------------------

def stack(cloud) -> State:
    """A list of states (or an already batched state) as one batched state."""
    if isinstance(cloud, State):
        return cloud if np.ndim(cloud.a) == 2 else State(cloud.a[None], cloud.b[None], cloud.time)
    cloud = list(cloud)
    if not cloud:
        raise DomainError("empty cloud")
    return State(np.array([s.a for s in cloud]), np.array([s.b for s in cloud]), cloud[0].time)


def unstack(batch: State) -> list[State]:
    return [State(a, b, batch.time) for a, b in zip(batch.a, batch.b)]


def energy_coordinates(cloud, space: SpectralSpace) -> np.ndarray:
    """Rows ``(sqrt(lambda) a, b)`` whose Euclidean distance is the energy-norm distance."""
    if isinstance(cloud, np.ndarray):
        return cloud
    if not isinstance(cloud, State):
        cloud = list(cloud)
        if not cloud:
            return np.empty((0, 2 * space.n_modes))
    s = stack(cloud)
    return np.hstack([s.a * space.wavenumbers, s.b])


def evolve_cloud(cloud, t: float, params: SimParams):
    """Advance every member by time ``t``; returns the same container kind it was given."""
    n_steps = int(round(t / params.dt))
    if n_steps < 0:
        raise DomainError("t must be non-negative")
    as_list = not isinstance(cloud, State)
    batch = stack(cloud)
    out = advance(batch, n_steps, params)
    return unstack(out) if as_list else out


def sample_ball(rng: np.random.Generator, space: SpectralSpace, radius: float, n: int,
                inner: float = 0.0) -> State:
    """``n`` smooth random states with energy norm uniform in ``[inner, radius]``."""
    radii = rng.uniform(inner, radius, n)
    return stack([smooth_random_state(rng, space, r) for r in radii])


def seeded_cloud(seed: int, space: SpectralSpace, radius: float, n: int, inner: float = 0.0) -> State:
    """Member ``i`` is drawn from its own stream ``seed ^ i``."""
    members = []
    for i in range(n):
        rng = np.random.default_rng(seed ^ i)
        r = rng.uniform(inner, radius)
        members.append(smooth_random_state(rng, space, r))
    return stack(members)


# --- geometry ---------------------------------------------------------------

def semidistance(cloud, reference, space: SpectralSpace) -> float:
    """``max_x min_y |x - y|`` over cloud members ``x`` and reference members ``y``."""
    ref = energy_coordinates(reference, space)
    if ref.shape[0] == 0:
        raise DomainError("empty reference set")
    x = energy_coordinates(cloud, space)
    if x.shape[0] == 0:
        return 0.0
    return float(np.max(np.min(cdist(x, ref), axis=1)))


def greedy_centers(points: np.ndarray, m: int) -> list[int]:
    """Farthest-point traversal starting from the first point."""
    centers = [0]
    d = np.linalg.norm(points - points[0], axis=1)
    for _ in range(1, min(m, len(points))):
        c = int(np.argmax(d))
        centers.append(c)
        d = np.minimum(d, np.linalg.norm(points - points[c], axis=1))
    return centers


def _max_group_diameter(dist: np.ndarray, labels: np.ndarray) -> float:
    best = 0.0
    for g in np.unique(labels):
        idx = np.flatnonzero(labels == g)
        if idx.size > 1:
            best = max(best, float(dist[np.ix_(idx, idx)].max()))
    return best


def covering_diameter(cloud, m: int, space: SpectralSpace | None = None) -> float:
    """Largest group diameter of a greedy cover of the cloud by at most ``m`` groups.

    Points go to their nearest farthest-point center. The value is the
    smallest such diameter over cover sizes ``1..m`` (the centers are nested,
    so this costs one traversal) and is at most twice the optimal maximum
    diameter over partitions into ``m`` groups.
    """
    if m < 1:
        raise DomainError("cover size must be >= 1")
    pts = cloud if isinstance(cloud, np.ndarray) else energy_coordinates(cloud, space)
    n = pts.shape[0]
    if m >= n:
        return 0.0
    dist = cdist(pts, pts)
    centers = greedy_centers(pts, m)
    best = math.inf
    for size in range(1, m + 1):
        labels = np.argmin(dist[:, centers[:size]], axis=1)
        best = min(best, _max_group_diameter(dist, labels))
    return best


def thin_net(points: np.ndarray, eps: float) -> np.ndarray:
    """Indices of a greedy ``eps``-net: keep a point unless a kept point is within ``eps``."""
    kept: list[int] = []
    for i, x in enumerate(points):
        if not kept or np.min(np.linalg.norm(points[kept] - x, axis=1)) > eps:
            kept.append(i)
    return np.array(kept, dtype=int)


# --- bounds -----------------------------------------------------------------

def theoretical_bound(t, alpha0: float, t_star: float, k: float, p: float, cp: float):
    """``2 {alpha0^-p + p k C_p 6^(-(p+2)/2) (t - t_star - 1)}^(-1/p)`` for ``t > t_star + 1``."""
    t_arr = np.asarray(t, dtype=float)
    elapsed = t_arr - t_star - 1.0
    if np.any(elapsed <= 0):
        raise DomainError(f"bound holds only for t > t_star + 1 = {t_star + 1.0}")
    if alpha0 <= 0:
        return np.zeros_like(t_arr) if t_arr.ndim else 0.0
    rate = p * k * cp * 6.0 ** (-(p + 2.0) / 2.0)
    out = 2.0 * (alpha0 ** (-p) + rate * elapsed) ** (-1.0 / p)
    # pow rounding can overshoot the threshold value by an ulp
    out = np.minimum(out, 2.0 * alpha0)
    return float(out) if out.ndim == 0 else out


def t_bound_family(t, T: float, alpha0: float, t_star: float, k: float, p: float, cp: float, n0: int = 0):
    """Bound at sampling period ``T`` before optimising over ``T``.

    Elapsed time is measured from ``t_star + 1`` and must be at least
    ``(n0 + 1) T``.
    """
    if T <= 0:
        raise DomainError("T must be positive")
    t_arr = np.asarray(t, dtype=float)
    elapsed = t_arr - t_star - 1.0 - (n0 + 1) * T
    if np.any(elapsed < 0):
        raise DomainError(f"bound holds only for t >= t_star + 1 + (n0+1)T = {t_star + 1 + (n0 + 1) * T}")
    if alpha0 <= 0:
        return np.zeros_like(t_arr) if t_arr.ndim else 0.0
    e = 2.0 / (p + 2.0)
    denom = (T**e + 3.0 * (k * cp) ** (-e) * 2.0 ** (p / (p + 2.0))) ** (-(p + 2.0) / 2.0)
    out = 2.0 * (alpha0 ** (-p) + 0.5 * p * elapsed * denom) ** (-1.0 / p)
    return float(out) if out.ndim == 0 else out


# --- fitting ----------------------------------------------------------------

@dataclass
class RateFit:
    exponent: float
    amplitude: float
    rss: float
    window: tuple[float, float]
    n_points: int


def fit_rate(times, values, window: tuple[float, float] | None = None, t0: float = 0.0) -> RateFit:
    """Least-squares line through ``(log(t - t0), log d)`` inside ``window``.

    Non-positive samples (and times not after ``t0``) are dropped; fewer
    than five remaining points is an error.
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(values, dtype=float)
    lo, hi = (t.min(), t.max()) if window is None else window
    keep = (t >= lo) & (t <= hi) & (d > 0) & (t > t0) & np.isfinite(d)
    if keep.sum() < 5:
        raise DomainError(f"need at least 5 positive samples in window, got {int(keep.sum())}")
    x = np.log(t[keep] - t0)
    y = np.log(d[keep])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    rss = float(np.sum((A @ coef - y) ** 2))
    return RateFit(float(coef[0]), float(coef[1]), rss, (float(lo), float(hi)), int(keep.sum()))


# --- entering time ----------------------------------------------------------

def find_entering_time(times, norms, radius: float, dwell: int = 10) -> float:
    """First sampled time from which ``dwell`` consecutive samples lie in the ball.

    ``norms`` may be ``(n_samples,)`` or ``(n_samples, n_members)``; for a
    cloud the latest member entry is returned. ``NEVER`` if no entry.
    """
    if radius <= 0:
        raise DomainError("radius must be positive")
    t = np.asarray(times, dtype=float)
    nrm = np.asarray(norms, dtype=float)
    if nrm.ndim == 2:
        return max(find_entering_time(t, nrm[:, i], radius, dwell) for i in range(nrm.shape[1]))
    inside = nrm <= radius
    n = inside.size
    if n < dwell:
        return NEVER
    run = np.convolve(inside.astype(int), np.ones(dwell, dtype=int), mode="valid")
    hits = np.flatnonzero(run == dwell)
    return float(t[hits[0]]) if hits.size else NEVER


def calibrate_radius(params: SimParams, n: int = 16, radius: float = 5.0, t_run: float = 100.0,
                     tail: float = 0.5, sample_interval: float = 0.5, seed: int = 7) -> float:
    """1.1 times the largest energy norm seen over the final ``tail`` fraction of ``n`` runs."""
    cloud = seeded_cloud(seed, params.space, radius, n, inner=0.5 * radius)
    n_samples = int(round(t_run / sample_interval))
    steps = int(round(sample_interval / params.dt))
    peak = 0.0
    for i in range(1, n_samples + 1):
        cloud = advance(cloud, steps, params)
        if i >= (1.0 - tail) * n_samples:
            peak = max(peak, float(np.max(cloud.energy_norm(params.space))))
    return 1.1 * peak


def build_reference(params: SimParams, n: int = 256, burn_in: float = 200.0, eps: float = 1e-4,
                    radius: float = 1.0, seed: int = 1_000_003) -> np.ndarray:
    """Late-time surrogate of the attractor in energy coordinates, thinned to an ``eps``-net."""
    cloud = seeded_cloud(seed, params.space, radius, n)
    cloud = advance(cloud, int(round(burn_in / params.dt)), params)
    pts = energy_coordinates(cloud, params.space)
    return pts[thin_net(pts, eps)]


# --- cloud experiment -------------------------------------------------------

@dataclass
class HarnessConfig:
    cloud_size: int = 64
    seed: int = 42
    init_radius: float = 3.0
    horizon: float = 200.0
    sample_interval: float = 1.0
    reference_size: int = 256
    burn_in: float = 200.0
    eps: float = 1e-4
    cover_size: int = 8
    calib_members: int = 16
    calib_radius: float = 5.0
    calib_time: float = 100.0
    dwell: int = 10
    fit_start: float = 5.0
    window: tuple[float, float] | None = None
    cp: float | None = None

    def __post_init__(self):
        for name in ("cloud_size", "reference_size", "cover_size", "calib_members", "dwell"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1")
        for name in ("init_radius", "horizon", "sample_interval", "burn_in", "eps", "calib_radius", "calib_time"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")


@dataclass
class CloudSummary:
    times: np.ndarray
    dist: np.ndarray
    alpha_proxy: np.ndarray
    bound: np.ndarray
    radius: float
    t_star: float
    alpha0: float
    cp: float
    fit: RateFit | None
    bound_ok: bool
    n_reference: int
    extra: dict = field(default_factory=dict)

    @property
    def alpha_series(self):
        return np.column_stack([self.times, self.alpha_proxy])

    @property
    def dist_series(self):
        return np.column_stack([self.times, self.dist])


def run_cloud(params: SimParams, cfg: HarnessConfig | None = None, reference: np.ndarray | None = None,
              radius: float | None = None) -> CloudSummary:
    """Evolve a seeded cloud, measure distances to a late-time reference and check the bound."""
    cfg = cfg or HarnessConfig()
    space = params.space
    if radius is None:
        radius = calibrate_radius(params, cfg.calib_members, cfg.calib_radius, cfg.calib_time)
        log.info("absorbing radius %.6g", radius)
    if reference is None:
        reference = build_reference(params, cfg.reference_size, cfg.burn_in, cfg.eps)
        log.info("reference set with %d points", len(reference))
    cp = cfg.cp if cfg.cp is not None else estimate_cp(params.p, 1, 100_000, cfg.seed)

    cloud = seeded_cloud(cfg.seed, space, cfg.init_radius, cfg.cloud_size, inner=0.5 * cfg.init_radius)
    steps = int(round(cfg.sample_interval / params.dt))
    n_samples = int(round(cfg.horizon / cfg.sample_interval))
    times, dist, alpha, norms = [], [], [], []
    for i in range(n_samples + 1):
        if i:
            cloud = advance(cloud, steps, params)
        pts = energy_coordinates(cloud, space)
        times.append(i * steps * params.dt)
        dist.append(semidistance(pts, reference, space))
        alpha.append(covering_diameter(pts, cfg.cover_size))
        norms.append(np.linalg.norm(pts, axis=1))
    times = np.array(times)
    dist = np.array(dist)
    alpha = np.array(alpha)
    t_star = find_entering_time(times, np.array(norms), radius, cfg.dwell)

    bound = np.full_like(dist, np.nan)
    fit = None
    alpha0 = math.nan
    ok = False
    if math.isfinite(t_star):
        i_star = int(np.searchsorted(times, t_star))
        alpha0 = float(alpha[i_star])
        valid = times > t_star + 1.0
        bound[valid] = theoretical_bound(times[valid], alpha0, t_star, params.k, params.p, cp)
        check = times >= t_star + 2.0
        ok = bool(np.all(dist[check] <= bound[check]))
        window = cfg.window or (t_star + cfg.fit_start, times[-1])
        fit = fit_rate(times, dist, window)
    return CloudSummary(times, dist, alpha, bound, radius, t_star, alpha0, cp, fit, ok, len(reference))


# --- single mode ------------------------------------------------------------

def single_mode_envelope(p: float, k: float = 1.0, lam: float = 1.0, dt: float = 1e-5, t_end: float = 1e4,
                         sample_dt: float = 0.1, a0: float = 1.0, b0: float = 0.0):
    """Times and ``sqrt(u_t^2 + lam u^2)`` for the damped single-mode oscillator."""
    n_steps = int(round(t_end / dt))
    every = max(1, int(round(sample_dt / dt)))
    env = _kernels.single_mode_envelope(float(a0), float(b0), float(lam), float(k), float(p), float(dt),
                                        n_steps, every)
    times = np.arange(env.size) * every * dt
    return times, env


def single_mode_rate(p: float, k: float = 1.0, lam: float = 1.0, dt: float = 1e-5,
                     window: tuple[float, float] = (1e2, 1e4)) -> RateFit:
    """Fitted decay exponent of the velocity amplitude of the single-mode oscillator."""
    times, env = single_mode_envelope(p, k, lam, dt, window[1])
    return fit_rate(times, env, window)
