"""Time-stepping kernels for the characteristics-aligned scheme.

One step on the uniform grid (dt = da):

1. shift the profile one cell along the characteristics and apply the
   per-cell survival factor ``decay[i] = exp(-(D + beta_bar_i) da)``;
2. advance S with classical RK4, the consumption term <q, f> interpolated
   linearly in time between the old and the new profile;
3. close the renewal condition ``f0 = mu(S_new) (K_int + wk[0] f0)`` exactly.

Steps 2 and 3 are coupled through the new boundary value, which enters the
new <q, f>. The coupling is resolved by fixed-point iteration on the scalar
``f0`` (it contracts at rate O(dt)), so no partial sums are recomputed.

Two interchangeable implementations exist: explicit loops compiled with
numba, and a vectorised numpy version. ``advance`` dispatches on the active
backend.
"""
from __future__ import annotations

import numpy as np

from . import _accel

STATUS_OK = 0
STATUS_SUBSTRATE_LEFT = 1
STATUS_BOUNDARY_CLOSURE = 2
STATUS_NO_FIXED_POINT = 3

MAX_FIXED_POINT = 60
# columns of the per-step output table
COL_S, COL_MASS, COL_KF, COL_QF, COL_X = range(5)
N_COLS = 5


def _close_boundary(S, Q_prev, K_int, Q_int, f0, wk0, wq0, dt, D, S_in, kind, p1, p2):
    """Return (status, S_new, f0_new, Q_new) for one step."""

    def growth(s):
        if kind == 0:
            return p1 * s
        return p1 * s / (p2 + s)

    def rk4(Q1):
        # consumption interpolated linearly between the old and new profile
        Qm = 0.5 * (Q_prev + Q1)
        k1 = D * (S_in - S) - growth(S) * Q_prev
        s2 = S + 0.5 * dt * k1
        k2 = D * (S_in - s2) - growth(s2) * Qm
        s3 = S + 0.5 * dt * k2
        k3 = D * (S_in - s3) - growth(s3) * Qm
        s4 = S + dt * k3
        k4 = D * (S_in - s4) - growth(s4) * Q1
        return S + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    S1 = S
    Q1 = Q_int + wq0 * f0
    for _ in range(MAX_FIXED_POINT):
        Q1 = Q_int + wq0 * f0
        S1 = rk4(Q1)
        if not (S1 > 0.0 and S1 < S_in):
            return STATUS_SUBSTRATE_LEFT, S1, f0, Q1
        m = growth(S1)
        denom = 1.0 - m * wk0
        if denom <= 0.0:
            return STATUS_BOUNDARY_CLOSURE, S1, f0, Q1
        f_new = m * K_int / denom
        if abs(f_new - f0) <= 1e-15 * abs(f_new):
            return STATUS_OK, S1, f_new, Q_int + wq0 * f_new
        f0 = f_new
    return STATUS_NO_FIXED_POINT, S1, f0, Q1


def _growth(kind, p1, p2, S):
    if kind == 0:
        return p1 * S
    return p1 * S / (p2 + S)


_close_boundary_nb = _accel.njit(_close_boundary)
_growth_nb = _accel.njit(_growth)


@_accel.njit(reassociate=True)
def _advance_loops(f, S, Q_prev, n_steps, decay, wk, wq, wm, dt, D, S_in, kind, p1, p2, out):
    n = f.size
    tail_ratio = 0.0
    for step in range(n_steps):
        f0_old = f[0]
        K_int = 0.0
        Q_int = 0.0
        M_int = 0.0
        fmax = 0.0
        for i in range(n - 1, 0, -1):
            v = f[i - 1] * decay[i - 1]
            f[i] = v
            K_int += wk[i] * v
            Q_int += wq[i] * v
            M_int += wm[i] * v
            fmax = max(fmax, v)
        status, S1, f0, Q1 = _close_boundary_nb(S, Q_prev, K_int, Q_int, f0_old, wk[0], wq[0],
                                                dt, D, S_in, kind, p1, p2)
        if status != STATUS_OK:
            return status, step, S, Q_prev, tail_ratio
        f[0] = f0
        fmax = max(fmax, f0)
        if fmax > 0.0 and f[n - 1] / fmax > tail_ratio:
            tail_ratio = f[n - 1] / fmax
        S = S1
        Q_prev = Q1
        kf = K_int + wk[0] * f0
        out[step, 0] = S
        out[step, 1] = M_int + wm[0] * f0
        out[step, 2] = kf
        out[step, 3] = Q1
        out[step, 4] = _growth_nb(kind, p1, p2, S) * kf
    return STATUS_OK, n_steps, S, Q_prev, tail_ratio


def _advance_numpy(f, S, Q_prev, n_steps, decay, wk, wq, wm, dt, D, S_in, kind, p1, p2, out):
    tail_ratio = 0.0
    wk_in, wq_in, wm_in = wk[1:], wq[1:], wm[1:]
    for step in range(n_steps):
        f0_old = f[0]
        f[1:] = f[:-1] * decay
        interior = f[1:]
        K_int = float(wk_in @ interior)
        Q_int = float(wq_in @ interior)
        M_int = float(wm_in @ interior)
        status, S1, f0, Q1 = _close_boundary(S, Q_prev, K_int, Q_int, f0_old, wk[0], wq[0],
                                             dt, D, S_in, kind, p1, p2)
        if status != STATUS_OK:
            return status, step, S, Q_prev, tail_ratio
        f[0] = f0
        fmax = max(float(interior.max()), f0)
        if fmax > 0.0:
            tail_ratio = max(tail_ratio, float(f[-1]) / fmax)
        S = S1
        Q_prev = Q1
        kf = K_int + wk[0] * f0
        out[step] = (S, M_int + wm[0] * f0, kf, Q1, _growth(kind, p1, p2, S) * kf)
    return STATUS_OK, n_steps, S, Q_prev, tail_ratio


def advance(f: np.ndarray, S: float, Q_prev: float, n_steps: int, decay: np.ndarray,
            wk: np.ndarray, wq: np.ndarray, wm: np.ndarray, dt: float, D: float, S_in: float,
            kind: int, p1: float, p2: float, out: np.ndarray):
    """Advance ``f`` in place by ``n_steps``; fills ``out[:n_steps]``.

    Returns ``(status, steps_done, S, Q_prev, tail_ratio)`` where ``tail_ratio``
    is the largest f(a_max)/max f seen.
    """
    impl = _advance_loops if _accel.backend() == "numba" else _advance_numpy
    status, done, S, Q_prev, tail = impl(f, float(S), float(Q_prev), int(n_steps), decay, wk, wq, wm,
                                         float(dt), float(D), float(S_in), int(kind), float(p1),
                                         float(p2), out)
    return int(status), int(done), float(S), float(Q_prev), float(tail)
