"""Integration of the age-structured chemostat on a characteristics-aligned grid.

The time step equals the age step, so transport is exact: each step moves the
profile one cell and multiplies by the cell survival factor. The substrate
and the renewal boundary are the only approximated pieces (see ``kernels``).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .equilibrium import Equilibrium, trapezoid_weights
from .errors import BoundViolation, InconclusiveError, SchemeError
from .model import AgeFunction, AssumptionBData, ModelParams, verify_assumption_A

logger = logging.getLogger(__name__)

PROJECTION_RTOL = 1e-8
TAIL_WARN_RATIO = 1e-10


@dataclass(frozen=True)
class SchemeArrays:
    decay: np.ndarray
    wk: np.ndarray
    wq: np.ndarray
    wm: np.ndarray
    kind: int
    p1: float
    p2: float


def scheme_arrays(params: ModelParams) -> SchemeArrays:
    a = params.ages
    da = params.da
    beta = np.asarray(params.beta(a))
    decay = np.exp(-(params.D + 0.5 * (beta[1:] + beta[:-1])) * da)
    w = trapezoid_weights(params.n_age, da)
    kind, p1, p2 = params.mu.kernel_code()
    return SchemeArrays(decay, w * np.asarray(params.k(a)), w * np.asarray(params.q(a)), w, kind, p1, p2)


@dataclass(frozen=True)
class State:
    f: np.ndarray
    S: float
    t: float = 0.0

    def __post_init__(self):
        f = np.array(self.f, dtype=float)
        f.flags.writeable = False
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "S", float(self.S))
        object.__setattr__(self, "t", float(self.t))


def boundary_value(f: np.ndarray, S: float, params: ModelParams, arrays: SchemeArrays | None = None) -> float:
    """The f(0) compatible with f on a > 0: f0 = mu(S)(K_int + wk0 f0)."""
    arrays = arrays or scheme_arrays(params)
    K_int = float(arrays.wk[1:] @ f[1:])
    m = float(params.mu(S))
    denom = 1.0 - m * arrays.wk[0]
    if denom <= 0:
        raise SchemeError("grid too coarse for boundary closure")
    return m * K_int / denom


def initial_state(params: ModelParams, profile: AgeFunction | np.ndarray | Callable, S0: float,
                  t0: float = 0.0) -> State:
    """Sample an initial profile and, if needed, project f(0) onto the renewal condition."""
    a = params.ages
    f = np.array(profile(a) if callable(profile) else profile, dtype=float)
    if f.shape != a.shape:
        raise ValueError(f"profile has {f.size} samples, grid has {a.size}")
    if not (0 < S0 < params.S_in):
        raise ValueError("S0 must lie in (0, S_in)")
    if np.any(f <= 0) or not np.all(np.isfinite(f)):
        raise ValueError("initial profile must be strictly positive and finite")
    f0 = boundary_value(f, S0, params)
    if abs(f[0] - f0) > PROJECTION_RTOL * abs(f0):
        logger.warning("initial f(0)=%.12g projected to mu(S0)<k,f0>=%.12g", f[0], f0)
        f[0] = f0
    return State(f, S0, t0)


def equilibrium_state(eq: Equilibrium) -> State:
    return initial_state(eq.params, eq.f_star, eq.S_star)


@dataclass
class Trajectory:
    """Per-step scalars for every step plus profiles at a fixed stride."""

    params: ModelParams
    dt: float
    stride: int
    t: np.ndarray
    S: np.ndarray
    mass: np.ndarray
    kf: np.ndarray
    qf: np.ndarray
    x: np.ndarray
    snapshot_steps: np.ndarray
    profiles: np.ndarray | None
    initial: State
    neighbors: dict[int, np.ndarray] = field(default_factory=dict)
    max_tail_ratio: float = 0.0

    @property
    def snapshot_times(self) -> np.ndarray:
        return self.snapshot_steps * self.dt

    @property
    def n_steps(self) -> int:
        return self.t.size - 1

    def state(self, j: int) -> State:
        """Snapshot j as a State."""
        if self.profiles is None:
            raise ValueError("profiles were not kept")
        n = int(self.snapshot_steps[j])
        return State(self.profiles[j], self.S[n], self.t[n])

    def state_at_step(self, n: int) -> State:
        if n in self.neighbors:
            return State(self.neighbors[n], self.S[n], self.t[n])
        hits = np.nonzero(self.snapshot_steps == n)[0]
        if hits.size and self.profiles is not None:
            return State(self.profiles[hits[0]], self.S[n], self.t[n])
        raise KeyError(f"no profile recorded at step {n}")


def _record_plan(n_total: int, stride: int, fd_neighbors: bool) -> tuple[np.ndarray, list[int]]:
    snaps = np.arange(0, n_total + 1, stride, dtype=np.int64)
    marks = set(int(s) for s in snaps)
    if fd_neighbors:
        for s in snaps:
            for n in (int(s) - 1, int(s) + 1):
                if 0 <= n <= n_total:
                    marks.add(n)
    return snaps, sorted(marks)


def _raise_for_status(status: int, step: int, t: float) -> None:
    if status == kernels.STATUS_SUBSTRATE_LEFT:
        raise SchemeError(f"scheme instability: reduce dt (S left (0, S_in) at step {step}, t={t:.6g})")
    if status == kernels.STATUS_BOUNDARY_CLOSURE:
        raise SchemeError("grid too coarse for boundary closure")
    if status == kernels.STATUS_NO_FIXED_POINT:
        raise SchemeError(f"substrate/boundary coupling did not converge at step {step}")


def step(state: State, params: ModelParams, eq: Equilibrium | None = None) -> State:
    """One step of length dt = da."""
    arrays = scheme_arrays(params)
    f = np.array(state.f, dtype=float)
    out = np.empty((1, kernels.N_COLS))
    Q_prev = float(arrays.wq @ f)
    status, _, S, _, _ = kernels.advance(f, state.S, Q_prev, 1, arrays.decay, arrays.wk, arrays.wq,
                                         arrays.wm, params.da, params.D, params.S_in, arrays.kind,
                                         arrays.p1, arrays.p2, out)
    _raise_for_status(status, 0, state.t)
    return State(f, S, state.t + params.da)


def simulate(
    initial: State,
    params: ModelParams,
    eq: Equilibrium | None = None,
    horizon: float = 0.0,
    stride: int = 1,
    *,
    keep_profiles: bool = True,
    fd_neighbors: bool = False,
    observer: Callable[[int, State], None] | None = None,
    assert_bounds: bool = False,
    R: float | None = None,
    data: AssumptionBData | None = None,
) -> Trajectory:
    """Integrate from ``initial`` over ``[t0, t0 + horizon]``.

    Profiles are kept every ``stride`` steps (and at the steps just before and
    after each snapshot when ``fd_neighbors`` is set, for central differences).
    ``observer(step, state)`` is called at every recorded step, which allows
    long runs without storing profiles.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    dt = params.da
    n_total = int(math.ceil(horizon / dt - 1e-9)) if horizon > 0 else 0
    arrays = scheme_arrays(params)
    f = np.array(initial.f, dtype=float)
    S = initial.S
    Q_prev = float(arrays.wq @ f)

    table = np.empty((n_total + 1, kernels.N_COLS))
    kf0 = float(arrays.wk @ f)
    table[0] = (S, float(arrays.wm @ f), kf0, Q_prev, float(params.mu(S)) * kf0)
    snaps, marks = _record_plan(n_total, stride, fd_neighbors)
    snap_index = {int(s): j for j, s in enumerate(snaps)}
    profiles = np.empty((snaps.size, f.size)) if keep_profiles else None
    neighbors: dict[int, np.ndarray] = {}
    max_tail = 0.0

    def record(n: int) -> None:
        if keep_profiles:
            if n in snap_index:
                profiles[snap_index[n]] = f
            else:
                neighbors[n] = f.copy()
        if observer is not None:
            observer(n, State(f, S, initial.t + n * dt))

    done = 0
    if marks and marks[0] == 0:
        record(0)
    recorded = set(marks)
    # the last steps may fall between snapshots; they are advanced but not recorded
    for target in sorted(recorded | {n_total}):
        if target == 0:
            continue
        chunk = target - done
        status, advanced, S, Q_prev, tail = kernels.advance(
            f, S, Q_prev, chunk, arrays.decay, arrays.wk, arrays.wq, arrays.wm, dt, params.D,
            params.S_in, arrays.kind, arrays.p1, arrays.p2, table[done + 1:target + 1])
        max_tail = max(max_tail, tail)
        if status != kernels.STATUS_OK:
            _raise_for_status(status, done + advanced + 1, initial.t + (done + advanced + 1) * dt)
        done = target
        if done in recorded:
            record(done)
    if max_tail > TAIL_WARN_RATIO:
        logger.warning("profile reaches a_max: f(a_max)/max f = %.3g; increase a_max", max_tail)

    t = initial.t + dt * np.arange(n_total + 1)
    traj = Trajectory(
        params=params, dt=dt, stride=stride, t=t, S=table[:, kernels.COL_S].copy(),
        mass=table[:, kernels.COL_MASS].copy(), kf=table[:, kernels.COL_KF].copy(),
        qf=table[:, kernels.COL_QF].copy(), x=table[:, kernels.COL_X].copy(),
        snapshot_steps=snaps, profiles=profiles, initial=initial, neighbors=neighbors,
        max_tail_ratio=max_tail,
    )
    if assert_bounds:
        report = check_pathwise_bounds(traj, R=R, data=data)
        if not report.ok:
            raise BoundViolation("pathwise bound violated: " + ", ".join(report.failures))
    return traj


# ---------------------------------------------------------------------------
# explicit solution representation
# ---------------------------------------------------------------------------


def oracle_profile(t: float, a, x_times: np.ndarray, x_values: np.ndarray,
                   f0: Callable | tuple[np.ndarray, np.ndarray], params: ModelParams):
    """Density from the representation along characteristics.

    For a >= t the cohort was present initially: f0(a - t) exp(-D t - int_{a-t}^a beta).
    For a < t it was born at time t - a with density x(t - a), then decayed by
    exp(-D a - int_0^a beta). ``x`` is interpolated linearly in time.
    """
    a = np.asarray(a, dtype=float)
    if t < 0 or np.any(a < 0):
        raise ValueError("t and a must be non-negative")
    eps = 1e-9 * max(1.0, abs(x_times[-1]))
    born = t - a[a < t]
    if t > x_times[-1] + eps or (born.size and born.min() < x_times[0] - eps):
        raise ValueError("requested time outside recorded history")
    if callable(f0):
        initial = f0
    else:
        grid, vals = f0
        initial = lambda s: np.interp(s, grid, vals)  # noqa: E731
    B = params.beta.antiderivative
    old = a >= t
    out = np.empty_like(a)
    if np.any(old):
        ao = a[old]
        out[old] = np.asarray(initial(ao - t)) * np.exp(-params.D * t - (B(ao) - B(ao - t)))
    if np.any(~old):
        an = a[~old]
        out[~old] = np.interp(t - an, x_times, x_values) * np.exp(-params.D * an - B(an))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# trapping region and pathwise bounds
# ---------------------------------------------------------------------------


def lower_substrate_bound(params: ModelParams, F: float) -> float:
    """S_lower = D S_in / (2 (D + L_mu F |q|_inf))."""
    return params.D * params.S_in / (2.0 * (params.D + params.L_mu * F * params.q_sup))


def entry_time_bound(params: ModelParams, R: float, F: float, s: float) -> float:
    """Time after which a solution with R S0 + |f0|_1 = s is inside the trapping region."""
    D = params.D
    excess = max(s - F, 0.0)
    return math.log1p(excess / (F - R * params.S_in)) / D + math.log(2.0) / (D + params.L_mu * F * params.q_sup)


@dataclass(frozen=True)
class TrappingStatus:
    F: float
    S_lower: float
    entered_at: float | None
    T_bound: float
    slack: float

    @property
    def entered(self) -> bool:
        return self.entered_at is not None


def trapping_report(traj: Trajectory, F: float, R: float) -> TrappingStatus:
    """First time with R S + |f|_1 <= F and S >= S_lower, against the predicted bound."""
    params = traj.params
    if not F > R * params.S_in:
        raise ValueError("F must exceed R * S_in")
    S_lower = lower_substrate_bound(params, F)
    s0 = R * traj.S[0] + traj.mass[0]
    T_bound = entry_time_bound(params, R, F, s0)
    inside = (R * traj.S + traj.mass <= F) & (traj.S >= S_lower)
    slack = traj.stride * traj.dt
    if not np.any(inside):
        horizon = traj.t[-1] - traj.t[0]
        if horizon < T_bound + slack:
            raise InconclusiveError("inconclusive: extend horizon")
        raise BoundViolation(f"trajectory did not enter the trapping region by T = {T_bound:.6g}")
    entered = float(traj.t[int(np.argmax(inside))] - traj.t[0])
    if entered > T_bound + slack:
        raise BoundViolation(f"trapping region entered at {entered:.6g} > bound {T_bound:.6g}")
    return TrappingStatus(F, S_lower, entered, T_bound, slack)


@dataclass(frozen=True)
class BoundReport:
    tol: float
    margins: dict[str, float]

    @property
    def ok(self) -> bool:
        return all(m >= -self.tol for m in self.margins.values())

    @property
    def failures(self) -> list[str]:
        return [k for k, m in self.margins.items() if m < -self.tol]


def bound_tolerance(da: float) -> float:
    return 1e-6 + 10.0 * da


def check_pathwise_bounds(traj: Trajectory, R: float | None = None, data: AssumptionBData | None = None,
                          tol: float | None = None) -> BoundReport:
    """Smallest margin of each pathwise bound over all steps (negative means violated)."""
    params = traj.params
    if R is None:
        R = data.R if data is not None else verify_assumption_A(params, 1.0).worst_ratio
    tol = bound_tolerance(params.da) if tol is None else tol
    t = traj.t - traj.t[0]
    D, S_in = params.D, params.S_in
    S0, Y0 = traj.S[0], R * traj.S[0] + traj.mass[0]
    decay = np.exp(-D * t)
    margins = {
        "substrate upper": float(np.min(S_in - (S_in - S0) * decay - traj.S)),
        "total mass upper": float(np.min(R * S_in + (Y0 - R * S_in) * decay - (R * traj.S + traj.mass))),
    }
    floor = D * S_in / (D + params.L_mu * params.q_sup * (R * S_in + max(Y0 - R * S_in, 0.0)))
    margins["substrate lower"] = float(np.min(traj.S - min(S0, floor)))
    interior = min(np.min(traj.S), np.min(S_in - traj.S))
    margins["substrate interior"] = float(interior) if interior > 0 else -math.inf
    if data is not None:
        xi = traj.kf / traj.kf[0]
        zeta = traj.qf / traj.qf[0]
        margins["xi lower"] = float(np.min(xi - np.exp(D * (data.b - 1.0) * t)))
        margins["zeta lower"] = float(np.min(zeta - np.exp(D * (data.gamma - 1.0) * t)))
    if traj.profiles is not None:
        lowest = float(np.min(traj.profiles))
        margins["positivity"] = lowest if lowest > 0 else -math.inf
    return BoundReport(tol, margins)


__all__ = [
    "State", "Trajectory", "TrappingStatus", "BoundReport", "SchemeArrays", "scheme_arrays",
    "boundary_value", "initial_state", "equilibrium_state", "step", "simulate", "oracle_profile",
    "lower_substrate_bound", "entry_time_bound", "trapping_report", "check_pathwise_bounds",
    "bound_tolerance",
]
