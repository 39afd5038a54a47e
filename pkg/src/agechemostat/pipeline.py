"""End-to-end reproduction for the constant-mortality model."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certificate import global_threshold, linearization_threshold, tothkot_recipe
from .equilibrium import Equilibrium, solve_equilibrium
from .lyapunov import LyapunovMonitor
from .model import GrowthLaw, ModelParams, tothkot_assumption_b, tothkot_model
from .simulator import State, initial_state, simulate

OVERSHOOT = 1.5
HORIZON_DILUTIONS = 30.0
MONOTONE_RTOL = 1e-8
# grid of the report run: on 4001 points the discretization floor of V is about 4e-8,
# the same size as the monotonicity tolerance
REPORT_N_AGE = 16001


@dataclass(frozen=True)
class StandardRun:
    initial: State
    horizon: float
    dt: float


def standard_perturbed_run(eq: Equilibrium, params: ModelParams | None = None,
                           horizon: float | None = None) -> StandardRun:
    """Initial data 1.5 f*, S = S*, run for 30/D on the model's own grid."""
    params = params or eq.params
    init = initial_state(params, OVERSHOOT * eq.f_star0 * eq.r, eq.S_star)
    return StandardRun(init, HORIZON_DILUTIONS / params.D if horizon is None else float(horizon), params.da)


@dataclass
class TothKotReport:
    inputs: dict
    S_star: float
    f_star0: float
    threshold_4_9: float
    threshold_4_10: float
    certificate: dict
    decay: dict | None = None
    feasible: bool = False
    message: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "inputs": self.inputs, "S_star": self.S_star, "f_star0": self.f_star0,
            "threshold_4_9": self.threshold_4_9, "threshold_4_10": self.threshold_4_10,
            "certificate": self.certificate,
        }
        if self.decay is not None:
            doc["decay"] = self.decay
        doc.update(self.extra)
        return doc


def decay_summary(eq: Equilibrium, recipe, horizon: float | None = None, snapshots: int = 300) -> dict:
    params = eq.params
    data = tothkot_assumption_b(params, eq.theta)
    run = standard_perturbed_run(eq, params, horizon)
    ce = recipe.report.evaluation
    mon = LyapunovMonitor(eq, recipe.certificate.weights, data, ce)
    n_steps = int(np.ceil(run.horizon / run.dt - 1e-9))
    stride = max(1, n_steps // snapshots)
    traj = simulate(run.initial, params, eq, run.horizon, stride, keep_profiles=False, observer=mon)
    tab = mon.table(traj.snapshot_steps, traj.dt)
    V = tab["V"]
    monotone = bool(np.all(np.diff(V) <= MONOTONE_RTOL * (1.0 + V[1:])))
    inside = tab["in_omega"] == 1.0
    return {
        "V0": float(V[0]), "V_horizon": float(V[-1]), "t_last_snapshot": float(tab["t"][-1]),
        "horizon": run.horizon, "dt": run.dt,
        "stride": stride, "monotone": monotone,
        "max_slack": float(np.nanmax(tab["slack"][inside])) if inside.any() else None,
        "max_slack_scaled": float(np.nanmax(tab["slack_scaled"][inside])) if inside.any() else None,
        "all_in_region": bool(inside.all()),
    }


def tothkot_report(Y: float, k_tilde: float, L: float, D: float, S_in: float, mu: GrowthLaw | None = None,
                   *, n_age: int = REPORT_N_AGE, da: float | None = None, horizon: float | None = None,
                   run_decay: bool = True) -> TothKotReport:
    params = tothkot_model(Y, k_tilde, L, D, S_in, mu, n_age=n_age, da=da)
    eq = solve_equilibrium(params)
    recipe = tothkot_recipe(D, L, k_tilde, Y, eq)
    cert_doc: dict = {"feasible": recipe.feasible, "message": recipe.message,
                      "Gamma1": recipe.Gamma1, "Gamma_max": recipe.Gamma_max}
    if recipe.certificate is not None:
        cert_doc["constants"] = recipe.certificate.to_dict()
    if recipe.report is not None:
        ce = recipe.report.evaluation
        cert_doc.update(lambda_min=ce.lambda_min, c=ce.c, k0=ce.k0, passed=recipe.report.passed)
    report = TothKotReport(
        inputs={"Y": Y, "k_tilde": k_tilde, "L": L, "D": D, "S_in": S_in, "mu": params.mu.to_dict(),
                "a_max": params.a_max, "n_age": params.n_age},
        S_star=eq.S_star, f_star0=eq.f_star0,
        threshold_4_9=global_threshold(L, k_tilde), threshold_4_10=linearization_threshold(L, k_tilde),
        certificate=cert_doc, feasible=recipe.feasible, message=recipe.message,
    )
    if recipe.feasible and run_decay:
        report.decay = decay_summary(eq, recipe, horizon)
    return report


__all__ = ["StandardRun", "standard_perturbed_run", "TothKotReport", "tothkot_report", "decay_summary"]
