"""Compiled Strang stepper.

Each member of a batch is advanced by the same scalar code, so results do not
depend on batch size or order. The sine transforms are dense matrix products
arranged so the innermost loop runs over the output index (no reassociated
reductions).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _damp_row(b, scale_dt, k, p):
    s = 0.0
    for j in range(b.shape[0]):
        s += b[j] * b[j]
    nb = np.sqrt(s)
    fac = (1.0 + p * k * scale_dt * nb**p) ** (-1.0 / p)
    for j in range(b.shape[0]):
        b[j] *= fac


@njit(cache=True)
def _kernel_apply(b, kphi, kpsi, out):
    for j in range(out.shape[0]):
        out[j] = 0.0
    for r in range(kphi.shape[0]):
        s = 0.0
        for j in range(b.shape[0]):
            s += b[j] * kpsi[r, j]
        for j in range(out.shape[0]):
            out[j] += s * kphi[r, j]


@njit(cache=True)
def strang_batch(a, b, n_steps, cos_h, sow_h, ws_h, to_phys, to_modal, c3, c1,
                 h, kphi, kpsi, k, p, dt):
    """Advance every row of ``(a, b)`` in place by ``n_steps`` Strang steps.

    Returns, per row, the index of the first step producing a non-finite
    value, or -1.
    """
    n_rows, J = a.shape
    M = to_phys.shape[1]
    status = np.full(n_rows, -1, dtype=np.int64)
    u = np.empty(M)
    force = np.empty(J)
    k1 = np.empty(J)
    k2 = np.empty(J)
    btmp = np.empty(J)
    has_nl = c3 != 0.0 or c1 != 0.0
    has_kernel = kphi.shape[0] > 0
    half = 0.5 * dt
    for r in range(n_rows):
        ar = a[r]
        br = b[r]
        for n in range(n_steps):
            for j in range(J):
                aj = ar[j]
                bj = br[j]
                ar[j] = aj * cos_h[j] + bj * sow_h[j]
                br[j] = bj * cos_h[j] - aj * ws_h[j]
            if k != 0.0:
                _damp_row(br, half, k, p)
            for j in range(J):
                force[j] = h[j]
            if has_nl:
                for m in range(M):
                    u[m] = 0.0
                for j in range(J):
                    aj = ar[j]
                    row = to_phys[j]
                    for m in range(M):
                        u[m] += aj * row[m]
                for m in range(M):
                    um = u[m]
                    fm = um * (c3 * um * um + c1)
                    row = to_modal[m]
                    for j in range(J):
                        force[j] -= fm * row[j]
            if has_kernel:
                _kernel_apply(br, kphi, kpsi, k1)
                for j in range(J):
                    k1[j] += force[j]
                    btmp[j] = br[j] + dt * k1[j]
                _kernel_apply(btmp, kphi, kpsi, k2)
                for j in range(J):
                    br[j] += half * (k1[j] + force[j] + k2[j])
            else:
                for j in range(J):
                    br[j] += dt * force[j]
            if k != 0.0:
                _damp_row(br, half, k, p)
            ok = True
            for j in range(J):
                aj = ar[j]
                bj = br[j]
                ar[j] = aj * cos_h[j] + bj * sow_h[j]
                br[j] = bj * cos_h[j] - aj * ws_h[j]
                if not (np.isfinite(ar[j]) and np.isfinite(br[j])):
                    ok = False
            if not ok:
                status[r] = n
                break
    return status


@njit(cache=True)
def single_mode_envelope(a, b, lam, k, p, dt, n_steps, sample_every):
    """Strang run of ``u'' + k|u'|^p u' + lam u = 0`` recording ``sqrt(b^2 + lam a^2)``.

    With no reaction part the two half damping flows merge into one exact
    full-step flow and consecutive half rotations into one full rotation, so
    each step costs one rotation and one damping update.
    """
    w = np.sqrt(lam)
    ch, sh = np.cos(0.5 * w * dt), np.sin(0.5 * w * dt)
    cf, sf = np.cos(w * dt), np.sin(w * dt)
    n_samples = n_steps // sample_every + 1
    env = np.empty(n_samples)
    env[0] = np.sqrt(b * b + lam * a * a)
    c = p * k * dt
    # first half rotation
    a, b = a * ch + b * sh / w, b * ch - a * w * sh
    out = 1
    for n in range(1, n_steps + 1):
        if p == 2.0:
            b = b / np.sqrt(1.0 + c * b * b)
        elif p == 1.0:
            b = b / (1.0 + c * abs(b))
        else:
            b = b * (1.0 + c * abs(b) ** p) ** (-1.0 / p)
        if n % sample_every == 0:
            # close the step with a half rotation to read the state at t_n
            ar = a * ch + b * sh / w
            br = b * ch - a * w * sh
            env[out] = np.sqrt(br * br + lam * ar * ar)
            out += 1
        a, b = a * cf + b * sf / w, b * cf - a * w * sf
    return env
