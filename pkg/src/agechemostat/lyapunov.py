"""Normalized variables, the Lyapunov functional and its exact time derivative.

All age integrals are taken on the simulation grid. The reproduction and
consumption ratios use :func:`equilibrium.moment` (Simpson) against the same
quadrature of the sampled equilibrium profile, so they are exactly 1 at
equilibrium. Every other age integral (the weighted chi norm, the inner
products inside the derivative and the L1 distance) uses the trapezoid rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .equilibrium import Equilibrium, moment, trapezoid_weights
from .errors import DomainError, OutsideRegionError
from .model import AssumptionBData, Constant, ModelParams

Q_ATOL = 1e-10
Q_EDGE = 1e-6

# derivative terms that vanish identically when h = p = 0
HP_TERMS = ("p_v", "p_h_chi", "h_chi_w", "h_v_chi_norm", "h_chi_r_chi")


@dataclass(frozen=True)
class LyapunovWeights:
    """Free constants of the functional: weight rate sigma and B, Gamma, M."""

    sigma: float
    B: float
    Gamma: float
    M: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")
        for name in ("B", "Gamma", "M"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "B": self.B, "Gamma": self.Gamma, "M": self.M}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "LyapunovWeights":
        return cls(float(doc["sigma"]), float(doc["B"]), float(doc["Gamma"]), float(doc["M"]))


@dataclass(frozen=True)
class NormalizedVars:
    zeta: float
    xi: float
    v: np.ndarray
    chi: np.ndarray
    phi: float
    w: float
    g: float
    x: float


@dataclass(frozen=True)
class LyapunovValues:
    V: float
    V_phi: float
    V_w: float
    Q: float
    V_chi: float
    rho_chi_sq: float
    Psi: float | None = None
    E: float | None = None
    U: float | None = None
    U_terms: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class DecayReport:
    """Margins of U <= -z'Pz - c |rho chi|^2 at one state.

    ``slack`` uses the constant c as printed; ``slack_scaled`` uses B*c, the
    coefficient that the preceding estimate actually delivers.
    """

    U: float
    zPz: float
    c: float
    B_c: float
    rho_chi_sq: float
    slack: float
    slack_scaled: float
    tol: float
    z: np.ndarray
    k0: float

    @property
    def ok(self) -> bool:
        return self.slack <= self.tol

    @property
    def ok_scaled(self) -> bool:
        return self.slack_scaled <= self.tol


def _expm1_minus(y: float) -> float:
    """exp(y) - y - 1 without cancellation for small y."""
    if abs(y) < 1e-3:
        # Taylor to fifth order is exact to round-off here
        return y * y * (0.5 + y * (1.0 / 6.0 + y * (1.0 / 24.0 + y / 120.0)))
    return math.expm1(y) - y


def _adaptive_simpson(fn, a: float, b: float, atol: float, max_depth: int = 48) -> float:
    if a == b:
        return 0.0
    fa, fb = fn(a), fn(b)
    m = 0.5 * (a + b)
    fm = fn(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    stack = [(a, b, fa, fm, fb, whole, atol, 0)]
    total = 0.0
    while stack:
        lo, hi, flo, fmid, fhi, est, tol, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = fn(lm), fn(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        err = left + right - est
        if depth >= max_depth or abs(err) <= 15.0 * tol:
            total += left + right + err / 15.0
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * tol, depth + 1))
    return total


def Q_of_S(S: float, eq: Equilibrium, M: float, atol: float = Q_ATOL) -> float:
    """Substrate part of the functional, the integral of M(g-1)/((S_in-S)g) from S*."""
    S_in = eq.params.S_in
    if not (Q_EDGE * S_in <= S <= S_in * (1.0 - Q_EDGE)):
        raise DomainError(f"substrate {S!r} outside ({Q_EDGE:g} S_in, (1-{Q_EDGE:g}) S_in)")
    mu, mu_star = eq.params.mu, eq.mu_star

    def integrand(s):
        g = float(mu(s)) / mu_star
        return M * (g - 1.0) / ((S_in - s) * g)

    return _adaptive_simpson(integrand, eq.S_star, float(S), atol)


def _exp_tail(values: np.ndarray, da: float) -> float:
    """Exponential continuation of a decaying non-negative integrand beyond the grid."""
    last, prev = values[-1], values[-2]
    if last > 0 and prev > last:
        return float(last * da / math.log(prev / last))
    return 0.0


class Evaluator:
    """Precomputed grid arrays for repeated evaluation at one equilibrium."""

    def __init__(self, eq: Equilibrium, weights: LyapunovWeights | None = None,
                 data: AssumptionBData | None = None):
        p: ModelParams = eq.params
        self.eq = eq
        self.params = p
        self.weights = weights
        self.data = data
        a = p.ages
        self.da = p.da
        self.trap = trapezoid_weights(p.n_age, p.da)
        self.r = eq.r
        self.qf_star = moment(p.q, eq.f_star, a)
        self.kf_star = moment(p.k, eq.f_star, a)
        self.beta = np.asarray(p.beta(a), dtype=float) * np.ones_like(a)
        if weights is not None:
            self.rho2 = np.exp(-2.0 * weights.sigma * a)
            self.rho2_r = self.rho2 * self.r
        if data is not None:
            theta = data.theta if data.theta is not None else eq.theta
            self.theta = theta
            self.h = np.asarray(data.h(a), dtype=float) * np.ones_like(a)
            self.p = np.asarray(data.p(a), dtype=float) * np.ones_like(a)
            self.hp_zero = (isinstance(data.h, Constant) and data.h.c == 0
                            and isinstance(data.p, Constant) and data.p.c == 0)

    # -- normalized variables ------------------------------------------------

    def normalized(self, f: np.ndarray, S: float) -> NormalizedVars:
        p, eq = self.params, self.eq
        qf = moment(p.q, f, p.ages)
        kf = moment(p.k, f, p.ages)
        if not (qf > 0 and kf > 0):
            raise DomainError("state outside X: <q,f> and <k,f> must be positive")
        if not (0 < S < p.S_in):
            raise DomainError("state outside X: S must lie in (0, S_in)")
        zeta = qf / self.qf_star
        xi = kf / self.kf_star
        v = f / (eq.f_star0 * zeta)
        chi = v - self.r
        phi = math.log(xi / zeta)
        w = math.log((p.S_in - eq.S_star) * zeta / (p.S_in - S))
        mu_S = float(p.mu(S))
        return NormalizedVars(zeta, xi, v, chi, phi, w, mu_S / eq.mu_star, mu_S * kf)

    def rho_chi_sq(self, chi: np.ndarray) -> float:
        vals = self.rho2 * chi * chi
        return float(self.trap @ vals) + _exp_tail(vals, self.da)

    # -- functional ----------------------------------------------------------

    def values(self, f: np.ndarray, S: float, *, with_U: bool = True) -> tuple[NormalizedVars, LyapunovValues]:
        wt = self._need_weights()
        nv = self.normalized(f, S)
        V_phi = _expm1_minus(nv.phi)
        V_w = wt.Gamma * _expm1_minus(nv.w)
        Q = Q_of_S(S, self.eq, wt.M)
        rcs = self.rho_chi_sq(nv.chi)
        V_chi = 0.5 * wt.B * rcs
        V = V_phi + V_w + Q + V_chi
        diff = f - self.eq.f_star
        Psi = abs(S - self.eq.S_star) + float(np.max(np.abs(diff))) + float(self.trap @ np.abs(diff)) + V
        E = math.expm1(nv.phi) ** 2 + math.expm1(nv.w) ** 2 + (nv.g - 1.0) ** 2 + rcs
        U, terms = (None, {})
        if with_U and self.data is not None:
            terms = self.derivative_terms(nv, rcs)
            U = math.fsum(terms.values())
        return nv, LyapunovValues(V=V, V_phi=V_phi, V_w=V_w, Q=Q, V_chi=V_chi, rho_chi_sq=rcs,
                                  Psi=Psi, E=E, U=U, U_terms=terms)

    def derivative_terms(self, nv: NormalizedVars, rho_chi_sq: float) -> dict[str, float]:
        """Every summand of the exact derivative U, keyed by a short name."""
        wt = self._need_weights()
        if self.data is None:
            raise ValueError("the derivative needs assumption-B data")
        eq, d, D = self.eq, self.data, self.params.D
        B, Gamma, M, sigma = wt.B, wt.Gamma, wt.M, wt.sigma
        qr, k1, k2, theta = eq.qr, eq.kappa1, eq.kappa2, self.theta
        g = nv.g
        ep = math.expm1(nv.phi)
        ew = math.expm1(nv.w)
        gm = g - 1.0
        chi, v = nv.chi, nv.v
        trap = self.trap
        if self.hp_zero:
            p_v = th_chi = h_chi = h_v = 0.0
        else:
            p_v = float(trap @ (self.p * v))
            th_chi = float(trap @ ((theta * self.p - self.h) * chi))
            h_chi = float(trap @ (self.h * chi))
            h_v = float(trap @ (self.h * v))
        beta_chi = float(trap @ (self.beta * self.rho2 * chi * chi))
        r_chi = float(trap @ (self.rho2_r * chi))
        growth = k1 * g + d.delta
        e_minus = math.exp(-nv.phi)
        return {
            "alpha": -d.alpha * e_minus * ep * ep,
            "p_v": -theta * p_v / qr * e_minus * ep * ep,
            "phi_sq": -growth * ep * ep,
            "cross_g_phi": (k2 - k1) * gm * ep,
            "p_h_chi": th_chi / qr * ep,
            "w_sq": -Gamma * D * g * ew * ew,
            "cross_g_w": (Gamma * k1 - Gamma * D - D * M) * gm * ew,
            "boundary": 0.5 * B * (g * ep + gm) ** 2,
            "cross_phi_w": Gamma * growth * ep * ew,
            "g_sq": -D * M * gm * gm / g,
            "h_chi_w": Gamma * h_chi / qr * ew,
            "chi_norm": -B * (d.gamma * D + sigma + growth * math.exp(nv.phi)) * rho_chi_sq,
            "h_v_chi_norm": -B * h_v / qr * rho_chi_sq,
            "beta_chi": -B * beta_chi,
            "r_chi": -B * (growth * ep + k1 * gm) * r_chi,
            "h_chi_r_chi": -B * h_chi / qr * r_chi,
        }

    def _need_weights(self) -> LyapunovWeights:
        if self.weights is None:
            raise ValueError("Lyapunov weights are required")
        return self.weights

    # -- decay inequality ----------------------------------------------------

    def in_omega(self, f: np.ndarray, S: float, R: float, F: float, S_lower: float) -> bool:
        mass = float(self.trap @ f)
        return R * S + mass <= F and S >= S_lower

    def decay(self, f: np.ndarray, S: float, cert_eval, tol_rel: float = 1e-8) -> DecayReport:
        ce = cert_eval
        if not self.in_omega(f, S, ce.R, ce.cert.F, ce.S_lower):
            raise OutsideRegionError("decay inequality not asserted outside trapping region")
        nv, vals = self.values(f, S)
        sg = math.sqrt(nv.g)
        z = np.array([sg * math.expm1(nv.phi), sg * math.expm1(nv.w), (nv.g - 1.0) / sg])
        zPz = float(z @ ce.P @ z)
        U = vals.U
        B_c = ce.cert.B * ce.c
        tol = tol_rel * (1.0 + abs(U))
        return DecayReport(
            U=U, zPz=zPz, c=ce.c, B_c=B_c, rho_chi_sq=vals.rho_chi_sq,
            slack=U + zPz + ce.c * vals.rho_chi_sq, slack_scaled=U + zPz + B_c * vals.rho_chi_sq,
            tol=tol, z=z, k0=ce.k0,
        )


# ---------------------------------------------------------------------------
# functional entry points
# ---------------------------------------------------------------------------


def normalized_vars(state, eq: Equilibrium) -> NormalizedVars:
    return Evaluator(eq).normalized(np.asarray(state.f), state.S)


def lyapunov_V(state, eq: Equilibrium, weights: LyapunovWeights) -> LyapunovValues:
    return Evaluator(eq, weights).values(np.asarray(state.f), state.S, with_U=False)[1]


def measure_Psi(state, eq: Equilibrium, weights: LyapunovWeights) -> float:
    return lyapunov_V(state, eq, weights).Psi


def diagnostic_E(state, eq: Equilibrium, weights: LyapunovWeights | None = None) -> float:
    weights = weights or LyapunovWeights(0.0, 1.0, 1.0, 1.0)
    return lyapunov_V(state, eq, weights).E


def derivative_U(state, eq: Equilibrium, data: AssumptionBData,
                 weights: LyapunovWeights) -> tuple[float, dict[str, float]]:
    """U and its per-term breakdown."""
    vals = Evaluator(eq, weights, data).values(np.asarray(state.f), state.S)[1]
    return vals.U, vals.U_terms


def decay_check(state, eq: Equilibrium, data: AssumptionBData, cert_eval,
                tol_rel: float = 1e-8) -> DecayReport:
    """Evaluate the decay inequality for a certificate evaluation (see ``certificate``)."""
    ev = Evaluator(eq, cert_eval.cert.weights, data)
    return ev.decay(np.asarray(state.f), state.S, cert_eval, tol_rel)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

TABLE_COLUMNS = ("t", "V", "Q", "Psi", "E", "U", "U_fd", "slack", "slack_scaled",
                 "V_phi", "V_w", "V_Q", "V_chi", "in_omega")


class LyapunovMonitor:
    """Simulation observer that evaluates the functional at recorded steps.

    Pass it as ``observer`` to :func:`simulator.simulate` together with
    ``fd_neighbors=True`` to get central differences at step resolution.
    """

    def __init__(self, eq: Equilibrium, weights: LyapunovWeights, data: AssumptionBData | None = None,
                 cert_eval=None, tol_rel: float = 1e-8):
        self.ev = Evaluator(eq, weights, data)
        self.cert_eval = cert_eval
        self.tol_rel = tol_rel
        self.rows: dict[int, dict[str, float]] = {}

    def __call__(self, n: int, state) -> None:
        f = np.asarray(state.f)
        _, vals = self.ev.values(f, state.S)
        row = {"t": state.t, "V": vals.V, "Q": vals.Q, "Psi": vals.Psi, "E": vals.E,
               "U": vals.U if vals.U is not None else math.nan,
               "V_phi": vals.V_phi, "V_w": vals.V_w, "V_Q": vals.Q, "V_chi": vals.V_chi,
               "rho_chi_sq": vals.rho_chi_sq, "slack": math.nan, "slack_scaled": math.nan,
               "in_omega": math.nan}
        ce = self.cert_eval
        if ce is not None and vals.U is not None:
            inside = self.ev.in_omega(f, state.S, ce.R, ce.cert.F, ce.S_lower)
            row["in_omega"] = float(inside)
            if inside:
                nv = self.ev.normalized(f, state.S)
                sg = math.sqrt(nv.g)
                z = np.array([sg * math.expm1(nv.phi), sg * math.expm1(nv.w), (nv.g - 1.0) / sg])
                zPz = float(z @ ce.P @ z)
                row["slack"] = vals.U + zPz + ce.c * vals.rho_chi_sq
                row["slack_scaled"] = vals.U + zPz + ce.cert.B * ce.c * vals.rho_chi_sq
        self.rows[int(n)] = row

    def table(self, steps: Iterable[int], dt: float) -> dict[str, np.ndarray]:
        """Columns at ``steps``; U_fd is a central difference over the nearest recorded neighbours."""
        steps = [int(s) for s in steps]
        recorded = sorted(self.rows)
        out = {name: np.empty(len(steps)) for name in TABLE_COLUMNS}
        for j, n in enumerate(steps):
            row = self.rows[n]
            for name in TABLE_COLUMNS:
                if name != "U_fd":
                    out[name][j] = row[name]
            out["U_fd"][j] = self._central_difference(n, recorded, dt)
        return out

    def _central_difference(self, n: int, recorded: list[int], dt: float) -> float:
        i = recorded.index(n)
        if 0 < i < len(recorded) - 1:
            lo, hi = recorded[i - 1], recorded[i + 1]
            h = min(n - lo, hi - n)
            if n - h in self.rows and n + h in self.rows:
                return (self.rows[n + h]["V"] - self.rows[n - h]["V"]) / (2 * h * dt)
        return math.nan


def evaluate_trajectory(traj, eq: Equilibrium, weights: LyapunovWeights,
                        data: AssumptionBData | None = None, cert_eval=None) -> dict[str, np.ndarray]:
    """Evaluate stored snapshots (and their step neighbours, if kept) of a trajectory."""
    mon = LyapunovMonitor(eq, weights, data, cert_eval)
    steps = set(int(s) for s in traj.snapshot_steps) | set(traj.neighbors)
    for n in sorted(steps):
        mon(n, traj.state_at_step(n))
    return mon.table(traj.snapshot_steps, traj.dt)


__all__ = [
    "LyapunovWeights", "NormalizedVars", "LyapunovValues", "DecayReport", "Evaluator",
    "LyapunovMonitor", "Q_of_S", "normalized_vars", "lyapunov_V", "measure_Psi", "diagnostic_E",
    "derivative_U", "decay_check", "evaluate_trajectory", "HP_TERMS", "TABLE_COLUMNS",
]
