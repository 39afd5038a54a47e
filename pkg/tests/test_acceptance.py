"""Acceptance criteria, each run at its stated tolerance.

Every criterion prints one PASS/FAIL line (also collected in the terminal
summary). Criteria 4, 5 and 8 share the standard perturbed runs at two grid
steps, built once per session.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from agechemostat.certificate import (assemble_P, delta_quadratic, eigen_pd, feasibility_threshold_scan,
                                      gamma_interval, global_threshold, J_of_M, linearization_threshold,
                                      optimal_M, recipe_flip_point, sylvester_pd, tothkot_recipe)
from agechemostat.equilibrium import moment, solve_equilibrium
from agechemostat.lyapunov import LyapunovMonitor
from agechemostat.model import Tabulated, tothkot_assumption_b, tothkot_model
from agechemostat.simulator import (State, bound_tolerance, check_pathwise_bounds, entry_time_bound,
                                    initial_state, oracle_profile, simulate, trapping_report)

from conftest import record

# standard perturbed run of the constant-mortality model
Y, K_TILDE, L, D, S_IN = 2.0, 2.0, 1.0, 0.2, 2.0
HORIZON = 30.0 / D
SNAPSHOT_EVERY = 0.5  # time between Lyapunov snapshots
PROFILE_EVERY = 5.0  # time between stored profiles for the oracle comparison
FINE_STEPS = (1e-3, 5e-4)


@dataclass
class StandardRun:
    da: float
    params: object
    eq: object
    recipe: object
    traj: object
    table: dict
    profiles: dict
    seconds: float


class _Observer:
    """Lyapunov monitor plus a sparse copy of the profile."""

    def __init__(self, monitor, keep_every: int):
        self.monitor = monitor
        self.keep_every = keep_every
        self.profiles: dict[int, np.ndarray] = {}

    def __call__(self, n, state):
        self.monitor(n, state)
        if n % self.keep_every == 0:
            self.profiles[n] = np.array(state.f)


def _standard_run(da: float) -> StandardRun:
    t0 = time.perf_counter()
    params = tothkot_model(Y, K_TILDE, L, D, S_IN, da=da)
    eq = solve_equilibrium(params)
    data = tothkot_assumption_b(params, eq.theta)
    recipe = tothkot_recipe(D, L, K_TILDE, Y, eq, data)
    assert recipe.feasible, recipe.message
    stride = int(round(SNAPSHOT_EVERY / params.da))
    mon = LyapunovMonitor(eq, recipe.certificate.weights, data, recipe.report.evaluation)
    obs = _Observer(mon, stride * int(round(PROFILE_EVERY / SNAPSHOT_EVERY)))
    init = initial_state(params, 1.5 * eq.f_star, eq.S_star)
    traj = simulate(init, params, eq, HORIZON, stride, keep_profiles=False, fd_neighbors=True, observer=obs)
    table = mon.table(traj.snapshot_steps, traj.dt)
    return StandardRun(da, params, eq, recipe, traj, table, obs.profiles, time.perf_counter() - t0)


@pytest.fixture(scope="module")
def standard_runs():
    return {da: _standard_run(da) for da in FINE_STEPS}


def _moment_ode(eq):
    """Closed system for (<k,f>, |f|_1, S) of the constant-mortality model from f0 = 1.5 f*."""
    y0 = [1.5 * eq.f_star0 * Y / (D + L + K_TILDE), 1.5 * eq.f_star0 / (D + L), eq.S_star]
    mu = eq.params.mu

    def rhs(t, y):
        kf, mass, S = y
        m = float(mu(S))
        return [(Y * m - K_TILDE - L - D) * kf, m * kf - (L + D) * mass, D * (S_IN - S) - m * mass]

    return solve_ivp(rhs, (0.0, HORIZON), y0, method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)


# ---------------------------------------------------------------------------
# 1. closed-form equilibrium
# ---------------------------------------------------------------------------


def test_criterion_1_closed_form_equilibrium():
    Yc, Dc, Lc, kc, Sc = 2.0, 1.0, 0.5, 0.5, 2.0
    t0 = time.perf_counter()
    params = tothkot_model(Yc, kc, Lc, Dc, Sc, n_age=4001)
    eq = solve_equilibrium(params)
    a = params.ages
    r = np.exp(-(Dc + Lc) * a)
    kr, qr = moment(params.k, r, a), moment(params.q, r, a)
    seconds = time.perf_counter() - t0

    S_exact = (Dc + Lc + kc) / Yc
    f0_exact = Yc * Dc * (Dc + Lc) * (Sc - S_exact) / (Dc + Lc + kc)
    errs = {
        "S*": abs(eq.S_star - S_exact) / S_exact,
        "f*(0)": abs(eq.f_star0 - f0_exact) / f0_exact,
        "<k,r>": abs(kr - Yc / (Dc + Lc + kc)) / (Yc / (Dc + Lc + kc)),
        "<q,r>": abs(qr - 1.0 / (Dc + Lc)) * (Dc + Lc),
    }
    assert params.a_max == pytest.approx(40.0 / (Dc + Lc))
    ok = errs["S*"] <= 1e-10 and errs["f*(0)"] <= 1e-10 and errs["<k,r>"] <= 1e-8 and errs["<q,r>"] <= 1e-8
    ok = ok and seconds < 1.0
    record("1", ok, "rel errors " + ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + f"; {seconds:.2f} s")
    assert ok


# ---------------------------------------------------------------------------
# 2. stationarity
# ---------------------------------------------------------------------------


def _stationarity_residual(da: float) -> tuple[float, float]:
    params = tothkot_model(2.0, 0.5, 0.5, 1.0, 2.0, da=da)
    eq = solve_equilibrium(params)
    w = np.full(params.n_age, params.da)
    w[0] = w[-1] = params.da / 2
    f_star = eq.f_star
    norm = float(w @ f_star)
    worst = [0.0]

    def observe(n, state):
        worst[0] = max(worst[0], float(w @ np.abs(state.f - f_star)) / norm)

    t0 = time.perf_counter()
    traj = simulate(initial_state(params, f_star, eq.S_star), params, eq, 10.0 / params.D, 1,
                    keep_profiles=False, observer=observe)
    seconds = time.perf_counter() - t0
    s_res = float(np.max(np.abs(traj.S - eq.S_star))) / eq.S_star
    return max(s_res, worst[0]), seconds


def test_criterion_2_stationarity():
    res_1, seconds = _stationarity_residual(1e-3)
    res_2, _ = _stationarity_residual(5e-4)
    factor = res_1 / res_2
    ok = res_1 <= 1e-6 and factor >= 1.8 and seconds < 30.0
    record("2", ok, f"residual {res_1:.2e} at da=1e-3, {res_2:.2e} at 5e-4 (factor {factor:.2f}); {seconds:.1f} s")
    assert ok


# ---------------------------------------------------------------------------
# 3. pathwise bounds
# ---------------------------------------------------------------------------


def test_criterion_3_pathwise_bounds():
    rng = np.random.default_rng(7)
    params = tothkot_model(Y, K_TILDE, L, D, S_IN, n_age=4001)
    eq = solve_equilibrium(params)
    data = tothkot_assumption_b(params, eq.theta)
    F, R = 2.0 * Y * S_IN, Y
    tol = bound_tolerance(params.da)
    worst_margin, worst_entry = math.inf, -math.inf
    failures = []
    for trial in range(10):
        knots = np.linspace(0.0, params.a_max, 12)
        rate = rng.uniform(0.3, 1.5)
        values = rng.uniform(0.05, 4.0) * np.exp(-rate * knots) * rng.uniform(0.5, 1.5, knots.size)
        S0 = rng.uniform(0.1 * S_IN, 0.9 * S_IN)
        init = initial_state(params, Tabulated(tuple(knots), tuple(values)), S0)
        s0 = R * S0 + float(np.trapezoid(init.f, params.ages))
        T = entry_time_bound(params, R, F, s0)
        stride = 10
        traj = simulate(init, params, eq, max(T + 5.0, 20.0), stride, data=data)
        report = check_pathwise_bounds(traj, data=data)
        status = trapping_report(traj, F, R)
        worst_margin = min(worst_margin, min(report.margins.values()))
        worst_entry = max(worst_entry, status.entered_at - status.T_bound)
        if not report.ok:
            failures.append(f"trial {trial}: {report.failures}")
        if status.entered_at > status.T_bound + stride * traj.dt:
            failures.append(f"trial {trial}: entry {status.entered_at:.3g} > {status.T_bound:.3g}")
    ok = not failures
    record("3", ok, f"10 runs, smallest bound margin {worst_margin:.2e} (tol {tol:.1e}), "
                    f"entry minus bound at most {worst_entry:.3g}" + ("; " + "; ".join(failures) if failures else ""))
    assert ok


# ---------------------------------------------------------------------------
# 4. exact-derivative identity
# ---------------------------------------------------------------------------


def _fd_error(run: StandardRun) -> float:
    U, U_fd = run.table["U"], run.table["U_fd"]
    ok = ~np.isnan(U_fd)
    return float(np.max(np.abs(U_fd[ok] - U[ok])) / np.max(np.abs(U[ok])))


def test_criterion_4_derivative_identity(standard_runs):
    e1, e2 = (_fd_error(standard_runs[da]) for da in FINE_STEPS)
    factor = e1 / e2
    ok = e1 <= 0.05 and factor >= 1.8
    record("4", ok, f"max |U_fd - U| / max |U|: {e1:.2e} at dt=1e-3, {e2:.2e} at 5e-4 (factor {factor:.2f})")
    assert ok


# ---------------------------------------------------------------------------
# 5. decay inequality
# ---------------------------------------------------------------------------


def _decay_summary(run: StandardRun) -> dict:
    tab = run.table
    inside = tab["in_omega"] == 1.0
    tol = 1e-8 * (1.0 + np.abs(tab["U"]))
    V = tab["V"]
    return {
        "inside": int(inside.sum()),
        "all_inside": bool(inside.all()),
        "literal": float(np.max((tab["slack"] - tol)[inside])),
        "scaled": float(np.max((tab["slack_scaled"] - tol)[inside])),
        "monotone": bool(np.all(np.diff(V) <= 1e-8 * (1.0 + V[1:]))),
        "V_ratio": float(np.min(V) / V[0]),
        "V0": float(V[0]),
    }


def test_criterion_5_decay_with_scaled_dissipation(standard_runs):
    run = standard_runs[FINE_STEPS[0]]
    s = _decay_summary(run)
    Gamma = run.recipe.certificate.Gamma
    assert s["V0"] == pytest.approx(Gamma * (1.5 - math.log(1.5) - 1.0), rel=1e-6)
    assert s["all_inside"]
    assert s["scaled"] <= 0.0
    assert s["monotone"]
    assert s["V_ratio"] < 1e-6


@pytest.mark.xfail(strict=True, reason="the printed inequality uses c where the bound holds with B*c; "
                                       "see the decision ledger")
def test_criterion_5_decay_inequality_as_printed(standard_runs):
    s = _decay_summary(standard_runs[FINE_STEPS[0]])
    ok = s["literal"] <= 0.0 and s["monotone"] and s["V_ratio"] < 1e-6
    record("5", ok, f"{s['inside']} snapshots in the trapping region; slack with c exceeds tol by "
                    f"{s['literal']:.2e}; with B*c by {s['scaled']:.2e} (holds); V monotone {s['monotone']}, "
                    f"min V/V0 {s['V_ratio']:.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 6. threshold reproduction
# ---------------------------------------------------------------------------


def test_criterion_6_threshold_reproduction():
    t0 = time.perf_counter()
    details, ok = [], True
    for k, Lc in ((2.0, 1.0), (1.0, 2.0), (1.0, 1e-6)):
        T9, T10 = global_threshold(Lc, k), linearization_threshold(Lc, k)
        grid = np.linspace(0.5 * T9, 2.0 * T9, 50)
        rows = feasibility_threshold_scan(Lc, k, Y, grid, n_age=401)
        same = all(r.recipe_feasible == r.cond_global for r in rows)
        flip = recipe_flip_point(Lc, k, Y, 0.5 * T9, 2.0 * T9)
        flip_err = abs(flip - T9) / T9
        lin = np.array([r.cond_linearization for r in rows])
        glob = np.array([r.cond_global for r in rows])
        if 3 * k > 2 * Lc and Lc > 1e-3:
            # the global condition is the more conservative one
            order = bool(np.all(lin[glob]) and np.any(lin & ~glob))
        elif 3 * k < 2 * Lc:
            order = bool(np.all(glob[lin]) and np.any(glob & ~lin))
        else:
            order = abs(T9 - k / 8) <= 1e-5 and abs(T10 - k / 8) <= 1e-5
        ok = ok and same and flip_err <= 1e-6 and order
        details.append(f"(k={k:g}, L={Lc:g}) columns equal {same}, flip rel err {flip_err:.1e}, ordering {order}")
    seconds = time.perf_counter() - t0
    ok = ok and seconds < 10.0
    record("6", ok, "; ".join(details) + f"; {seconds:.1f} s")
    assert ok


# ---------------------------------------------------------------------------
# 7. matrix algebra
# ---------------------------------------------------------------------------


def _printed_matrix(cert, g_in, D, L, k):
    """Reduced form of the certificate matrix when h = p = 0 and delta = 0 (written out by hand)."""
    kappa1 = D + L
    tail = cert.B * g_in * (1.0 + cert.epsilon * kappa1 ** 2)
    G, M = cert.Gamma, cert.M
    return np.array([
        [L + D - tail, -G * (L + D) / 2.0, -k / 2.0],
        [-G * (L + D) / 2.0, G * D, (D * M - G * L) / 2.0],
        [-k / 2.0, (D * M - G * L) / 2.0, D * M - tail],
    ])


def test_criterion_7_matrix_algebra(recipe_eq, recipe_data):
    res = tothkot_recipe(D, L, K_TILDE, Y, recipe_eq, recipe_data)
    cert = res.certificate
    P, _ = assemble_P(recipe_eq, recipe_data, cert)
    expected = _printed_matrix(cert, float(recipe_eq.g(S_IN)), D, L, K_TILDE)
    entry_err = float(np.max(np.abs(P - expected) / np.maximum(np.abs(expected), 1e-300)))

    G1, G2 = gamma_interval(D, L, K_TILDE)
    roots = max(abs(delta_quadratic(G1, D, L, K_TILDE)), abs(delta_quadratic(G2, D, L, K_TILDE)))

    M_star = optimal_M(cert.Gamma, D, L, K_TILDE)
    J_star = J_of_M(M_star, cert.Gamma, D, L, K_TILDE)
    offsets = np.concatenate([-np.logspace(-6, 1, 40), np.logspace(-6, 1, 40)])
    argmax = all(J_star >= J_of_M(M_star + d, cert.Gamma, D, L, K_TILDE) for d in offsets)

    rng = np.random.default_rng(11)
    disagree = 0
    for _ in range(1000):
        X = rng.normal(size=(3, 3))
        S = 0.5 * (X + X.T) + rng.uniform(-1.0, 2.0) * np.eye(3)
        disagree += sylvester_pd(S) != eigen_pd(S)
    ok = entry_err <= 1e-12 and roots <= 1e-10 and argmax and disagree == 0
    record("7", ok, f"P entry rel err {entry_err:.1e}; |Delta| at roots {roots:.1e}; M argmax {argmax}; "
                    f"Sylvester/eigen disagreements {disagree}/1000")
    assert ok


# ---------------------------------------------------------------------------
# 8. oracle equivalence
# ---------------------------------------------------------------------------


def _oracle_errors(run: StandardRun) -> tuple[float, float]:
    sol = _moment_ode(run.eq)
    times = np.linspace(0.0, HORIZON, 60001)
    kf, mass, S = sol.sol(times)
    x = np.asarray(run.params.mu(S)) * kf
    f0 = (run.params.ages, 1.5 * run.eq.f_star)
    prof_err, scale = 0.0, 0.0
    for n, f in run.profiles.items():
        o = oracle_profile(n * run.traj.dt, run.params.ages, times, x, f0, run.params)
        prof_err = max(prof_err, float(np.max(np.abs(f - o))))
        scale = max(scale, float(np.max(np.abs(o))))
    ref = sol.sol(run.traj.t)
    mom_err = max(float(np.max(np.abs(run.traj.kf - ref[0])) / np.max(ref[0])),
                  float(np.max(np.abs(run.traj.qf - ref[1])) / np.max(ref[1])))
    return prof_err / scale, mom_err


def test_criterion_8_oracle_equivalence(standard_runs):
    (p1, m1), (p2, m2) = (_oracle_errors(standard_runs[da]) for da in FINE_STEPS)
    ok = p1 <= 5e-3 and p1 / p2 >= 1.8 and m1 <= 5e-3 and m1 / m2 >= 1.8
    record("8", ok, f"profile vs oracle {p1:.2e} -> {p2:.2e} (factor {p1 / p2:.2f}); "
                    f"moments vs closed ODE {m1:.2e} -> {m2:.2e} (factor {m1 / m2:.2f})")
    assert ok
