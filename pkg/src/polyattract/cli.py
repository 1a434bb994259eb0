"""Command-line experiment runner.

``polyattract MODE --config PATH [--out DIR] [--seed N]``

Every mode writes CSV series and a ``summary.txt`` of ``key = value`` lines
into the output directory. The output directory is taken from ``--out``,
then the ``POLYATTRACT_OUT`` environment variable, then ``output.dir`` in the
config, then ``./out``.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import contraction, harness, rates, solver
from .config import ConfigError, ExperimentConfig
from .errors import DomainError, NumericalError

log = logging.getLogger("polyattract")

OUT_ENV = "POLYATTRACT_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


# --- output helpers ---------------------------------------------------------

def fmt(x) -> str:
    """Shortest round-trip text for a number (``nan`` and ``inf`` spelled out)."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_csv(path: Path, header: list[str], columns) -> None:
    rows = zip(*columns)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_summary(path: Path, items: dict) -> None:
    with open(path, "w") as fh:
        for key, val in items.items():
            if isinstance(val, (list, tuple, np.ndarray)):
                val = " ".join(fmt(v) for v in np.ravel(val))
            elif not isinstance(val, str):
                val = fmt(val)
            fh.write(f"{key} = {val}\n")


def write_snapshots(path: Path, traj: solver.Trajectory) -> None:
    """Plain-text modal snapshots: a ``# t = ...`` line, then ``index a_j b_j`` per mode."""
    with open(path, "w") as fh:
        for i in range(len(traj)):
            fh.write(f"# t = {fmt(traj.times[i])}\n")
            for j, (aj, bj) in enumerate(zip(traj.a[i], traj.b[i]), 1):
                fh.write(f"{j} {fmt(aj)} {fmt(bj)}\n")
            fh.write("\n")


def svg_plot(path: Path, x, curves: dict, xlabel: str, ylabel: str, logy: bool = False) -> None:
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "polyattract"
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in curves.items():
        ax.plot(x, y, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --- config to objects ------------------------------------------------------

def _padded(values, n):
    out = np.zeros(n)
    out[: len(values)] = values
    return out


def sim_params(cfg: ExperimentConfig) -> solver.SimParams:
    n = cfg.get("solver.n_modes", 64)
    space = solver.SpectralSpace(cfg.get("solver.length", math.pi), n)
    h = _padded(cfg.get("solver.h", [0.1]), n)
    sig = cfg.get("solver.kernel_sigma", [0.05])
    phi = cfg.get("solver.kernel_phi", [1] * len(sig))
    psi = cfg.get("solver.kernel_psi", [1] * len(sig))
    kernel = []
    for s, i, j in zip(sig, phi, psi):
        e_i = np.zeros(n)
        e_i[i - 1] = 1.0
        e_j = np.zeros(n)
        e_j[j - 1] = 1.0
        kernel.append(solver.KernelFactor(s, e_i, e_j))
    return solver.SimParams(
        space=space,
        k=cfg.get("solver.k"),
        p=cfg.get("solver.p"),
        nonlinearity=solver.CubicNonlinearity(cfg.get("solver.c3", 1.0), cfg.get("solver.c1", -1.0)),
        h=h,
        kernel=kernel,
        dt=cfg.get("solver.dt", 1e-3),
    )


def decay_params(cfg: ExperimentConfig) -> rates.DecayParams:
    return rates.DecayParams(cfg.get("rates.beta"), cfg.get("rates.bigC"), cfg.get("rates.bigT", 1.0))


# --- modes ------------------------------------------------------------------

def mode_iterate(cfg, out: Path, seed: int) -> dict:
    p = decay_params(cfg)
    y0 = cfg.get("rates.y0")
    n = cfg.get("rates.n", 50)
    tr = rates.trace_with_bound(y0, n, p)
    idx = np.arange(tr.y.size)
    bound = np.full(tr.y.size, np.nan)
    if tr.n0 is not None and tr.y[tr.n0] > 0:
        tail = idx >= tr.n0
        bound[tail] = rates.closed_form_bound(idx[tail], tr.n0, tr.y[tr.n0], p)
    write_csv(out / "trace.csv", ["n", "y", "bound"], [idx, tr.y, bound])
    if cfg.get("output.plots", False):
        svg_plot(out / "trace.svg", idx, {"y(n)": tr.y, "closed form": bound}, "n", "y", logy=True)
    return {"N0": tr.n0, "n_iterations": tr.y.size - 1, "trace": tr.y}


def mode_bound(cfg, out: Path, seed: int) -> dict:
    p = decay_params(cfg)
    alpha0 = cfg.get("bound.alpha0")
    T = p.bigT
    tr = rates.iterate_w(alpha0**2, 10, p)
    n0 = rates.find_n0(tr, p)
    t_start = (n0 + 1) * T
    t_end = cfg.get("bound.t_end", t_start + 100.0 * T)
    if t_end <= t_start:
        raise ConfigError(f"bound.t_end must exceed (N0+1)T = {t_start}", "bound.t_end")
    t = np.linspace(t_start, t_end, cfg.get("bound.n_points", 201))
    ab = rates.alpha_decay_bound(t, n0, alpha0, p)
    cols, header = [t, ab], ["t", "alpha_bound"]
    if "solver.k" in cfg and "solver.p" in cfg:
        k, pp = cfg.get("solver.k"), cfg.get("solver.p")
        cp = cfg.get("bound.cp", 2.0 ** (-pp))
        t_star = cfg.get("bound.t_star", 0.0)
        elapsed = t - t_start
        wave = np.full(t.size, 2.0 * alpha0)
        wave[1:] = harness.theoretical_bound(t_star + 1.0 + elapsed[1:], alpha0, t_star, k, pp, cp)
        cols += [t_star + 1.0 + elapsed, wave]
        header += ["t_wave", "wave_bound"]
    write_csv(out / "bound.csv", header, cols)
    if cfg.get("output.plots", False):
        svg_plot(out / "bound.svg", t, {"alpha bound": ab}, "t", "bound")
    return {"N0": n0, "alpha0": alpha0, "t_start": t_start, "bound_at_start": ab[0], "bound_at_end": ab[-1]}


def mode_simulate(cfg, out: Path, seed: int) -> dict:
    params = sim_params(cfg)
    space = params.space
    n = space.n_modes
    if "simulate.init_a" in cfg or "simulate.init_b" in cfg:
        s = solver.State(_padded(cfg.get("simulate.init_a", []), n), _padded(cfg.get("simulate.init_b", []), n))
    else:
        rng = np.random.default_rng(seed ^ 0)
        s = solver.smooth_random_state(rng, space, cfg.get("simulate.init_radius", 1.0))
    n_steps = int(round(cfg.get("simulate.t_end", 10.0) / params.dt))
    every = cfg.get("simulate.record_every", max(1, n_steps // 1000))
    traj = solver.run(s, n_steps, params, every)
    times = np.arange(len(traj)) * every * params.dt
    times[-1] = n_steps * params.dt
    E = np.array([solver.energy(traj.state(i), params) for i in range(len(traj))])
    st = solver.State(traj.a, traj.b)
    cols = [times, E, st.norm_u(), st.norm_ut(), st.norm_grad_u(space)]
    write_csv(out / "trajectory.csv", ["time", "E", "norm_u", "norm_ut", "norm_grad_u"], cols)
    if cfg.get("output.snapshots", False):
        write_snapshots(out / "snapshots.txt", solver.Trajectory(times, traj.a, traj.b))
    if cfg.get("output.plots", False):
        svg_plot(out / "energy.svg", times, {"E": E}, "t", "energy")
    res = solver.energy_balance_residual(traj, params)
    return {
        "n_steps": n_steps,
        "E_initial": E[0],
        "E_final": E[-1],
        "E_drift": float(np.max(np.abs(E - E[0]))),
        "balance_residual_max": float(np.max(np.abs(res))),
    }


def mode_pair(cfg, out: Path, seed: int) -> dict:
    params = sim_params(cfg)
    space = params.space
    if params.k <= 0:
        raise ConfigError("pair mode needs solver.k > 0", "solver.k")
    T = cfg.get("pair.T", 1.0)
    count = cfg.get("pair.count", 10)
    radius = cfg.get("pair.radius", 1.0)
    cp = cfg.get("pair.cp") or contraction.estimate_cp(params.p, 1, 100_000, seed)
    y1, y2 = contraction.pair_suite(space, count, radius, seed)
    diag = contraction.pair_evolve(y1, y2, T, params)
    vc = contraction.velocity_integral_check(diag, cp)
    rep = contraction.contraction_report_from(diag, cp, cfg.get("pair.C", 1.0))
    terms = rep.terms()
    header = ["pair"] + list(terms) + ["velocity_lhs", "velocity_rhs", "velocity_slack"]
    cols = [np.arange(count)] + [np.asarray(v) for v in terms.values()] + [vc.lhs, vc.rhs, vc.slack]
    write_csv(out / "pairs.csv", header, cols)
    with open(out / "report.txt", "w") as fh:
        for i in range(count):
            fh.write(f"pair = {i}\n")
            fh.write(contraction.format_report(rep, i))
            fh.write(f"velocity_slack = {fmt(vc.slack[i])}\n\n")
    return {
        "pairs": count,
        "T": T,
        "cp": cp,
        "C": rep.C,
        "min_velocity_slack": float(np.min(vc.slack)),
        "velocity_ok": bool(np.all(vc.slack >= -1e-6)),
        "contraction_satisfied": int(np.sum(rep.satisfied)),
        "max_exact_residual": float(np.max(np.abs(rep.exact_residual))),
    }


def harness_config(cfg, seed: int) -> harness.HarnessConfig:
    kw = {}
    for key in ("cloud_size", "init_radius", "horizon", "sample_interval", "burn_in", "reference_size", "eps",
                "cover_size", "calib_members", "calib_radius", "calib_time", "cp"):
        if f"harness.{key}" in cfg:
            kw[key] = cfg.get(f"harness.{key}")
    if "harness.window_start" in cfg or "harness.window_end" in cfg:
        kw["window"] = (cfg.get("harness.window_start", 0.0), cfg.get("harness.window_end", math.inf))
    return harness.HarnessConfig(seed=seed, **kw)


def mode_cloud(cfg, out: Path, seed: int) -> dict:
    params = sim_params(cfg)
    hc = harness_config(cfg, seed)
    res = harness.run_cloud(params, hc)
    write_csv(out / "cloud.csv", ["t", "dist", "alpha_proxy", "bound"], [res.times, res.dist, res.alpha_proxy, res.bound])
    if cfg.get("output.plots", False):
        svg_plot(out / "cloud.svg", res.times, {"dist": res.dist, "bound": res.bound, "alpha proxy": res.alpha_proxy},
                 "t", "energy-norm distance", logy=True)
    fit = res.fit
    return {
        "t_star": res.t_star,
        "absorbing_radius": res.radius,
        "alpha0": res.alpha0,
        "cp": res.cp,
        "reference_points": res.n_reference,
        "fitted_exponent": fit.exponent if fit else math.nan,
        "fit_window": list(fit.window) if fit else [],
        "target_exponent": -0.8 / params.p,
        "pass": bool(res.bound_ok and fit is not None and fit.exponent <= -0.8 / params.p),
    }


def mode_rates(cfg, out: Path, seed: int) -> dict:
    k, p = cfg.get("solver.k"), cfg.get("solver.p")
    lam = cfg.get("decay.lam", 1.0)
    dt = cfg.get("decay.dt", 1e-5)
    t_end = cfg.get("decay.t_end", 1e4)
    lo = cfg.get("decay.window_start", 1e2)
    times, env = harness.single_mode_envelope(p, k, lam, dt, t_end, a0=cfg.get("decay.a0", 1.0))
    if not np.all(np.isfinite(env)):
        raise NumericalError("non-finite single-mode amplitude")
    fit = harness.fit_rate(times, env, (lo, t_end))
    keep = slice(None, None, max(1, times.size // 2000))
    write_csv(out / "decay.csv", ["t", "amplitude"], [times[keep], env[keep]])
    if cfg.get("output.plots", False):
        svg_plot(out / "decay.svg", times[keep][1:], {"amplitude": env[keep][1:]}, "t", "amplitude", logy=True)
    return {
        "fitted_exponent": fit.exponent,
        "target_exponent": -1.0 / p,
        "relative_error": abs(fit.exponent + 1.0 / p) * p,
        "fit_window": list(fit.window),
    }


MODES = {
    "iterate": mode_iterate,
    "bound": mode_bound,
    "simulate": mode_simulate,
    "pair": mode_pair,
    "cloud": mode_cloud,
    "rates": mode_rates,
}


def output_dir(cfg: ExperimentConfig, out: str | None) -> Path:
    return Path(out or os.environ.get(OUT_ENV) or cfg.get("output.dir") or "out")


def run(cfg: ExperimentConfig, out: str | None = None) -> int:
    """Dispatch to the configured mode; returns the process exit status."""
    seed = cfg.get("seed", 0)
    path = output_dir(cfg, out)
    try:
        # build every object up front so bad combinations fail before any work
        if cfg.mode in ("iterate", "bound"):
            decay_params(cfg)
        if "solver.k" in cfg and "solver.p" in cfg:
            sim_params(cfg)
        if cfg.mode == "cloud":
            harness_config(cfg, seed)
    except (DomainError, ValueError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        summary = MODES[cfg.mode](cfg, path, seed)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        write_summary(path / "summary.txt", {"mode": cfg.mode, "seed": seed, "status": "numerical failure",
                                             "error": str(exc)})
        return EXIT_NUMERIC
    head = {"mode": cfg.mode, "seed": seed, "status": "ok"}
    write_summary(path / "summary.txt", {**head, **summary})
    log.info("%s finished in %.2f s, outputs in %s", cfg.mode, time.perf_counter() - start, path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyattract", description=__doc__.splitlines()[0])
    ap.add_argument("mode", nargs="?", choices=sorted(MODES), help="overrides the config's mode key")
    ap.add_argument("--config", required=True, help="key = value configuration file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int, help="overrides the config seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        cfg = cfgmod.load(args.config, overrides)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
