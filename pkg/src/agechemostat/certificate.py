"""Sufficient stability conditions, the closed-form recipe and a generic search.

A :class:`Certificate` holds the free constants. :func:`evaluate_certificate`
turns it into everything the conditions need (weighted norms, the 3x3 matrix
P, the coupling constants G1..G4, the dissipation constant c and the
rate k0). :func:`check_conditions` then reports signed margins.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import qmc

from .equilibrium import Equilibrium, solve_equilibrium
from .errors import CertificateError
from .lyapunov import LyapunovWeights
from .model import AgeFunction, AssumptionBData, Constant, ExpDecay, GrowthLaw, ModelParams, tothkot_model
from .simulator import lower_substrate_bound

logger = logging.getLogger(__name__)

MARGINAL = 1e-12
DIVERGENT_NORM = "weighted norm diverges: rho^-1 h not square-integrable (increase sigma infeasible for this h)"


@dataclass(frozen=True)
class Certificate:
    sigma: float
    epsilon: float
    omega: float
    lam: float
    R1: float
    R2: float
    R3: float
    B: float
    Gamma: float
    M: float
    F: float

    def __post_init__(self):
        for name in ("epsilon", "omega", "R1", "R2", "R3", "B", "Gamma", "M", "F"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"certificate constant {name} must be positive and finite, got {value!r}")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError("certificate constant sigma must be >= 0")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("certificate constant lam must lie in [0, 1]")

    @property
    def weights(self) -> LyapunovWeights:
        return LyapunovWeights(self.sigma, self.B, self.Gamma, self.M)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Certificate":
        names = [f.name for f in dataclasses.fields(cls)]
        unknown = set(doc) - set(names)
        if unknown:
            raise ValueError(f"certificate: unknown fields {sorted(unknown)}")
        return cls(**{n: float(doc[n]) for n in names})


# ---------------------------------------------------------------------------
# weighted norms
# ---------------------------------------------------------------------------


def _exponential_terms(fn: AgeFunction) -> list[tuple[float, float]] | None:
    if isinstance(fn, Constant):
        return [(fn.c, 0.0)]
    if isinstance(fn, ExpDecay):
        return [(fn.amplitude, fn.rate)]
    return None


def _closed_form_sq(terms: list[tuple[float, float]], sigma: float) -> float:
    """Integral over [0, inf) of exp(2 sigma a) (sum c_i exp(-l_i a))^2."""
    terms = [(c, lam) for c, lam in terms if c != 0]
    for _, lam in terms:
        if lam <= sigma:
            raise CertificateError(DIVERGENT_NORM)
    return math.fsum(ci * cj / (li + lj - 2.0 * sigma) for ci, li in terms for cj, lj in terms)


def _grid_sq(values: np.ndarray, da: float) -> float:
    """Simpson on the grid plus an exponential tail; divergence when the integrand does not decay."""
    from scipy.integrate import simpson

    total = float(simpson(values, dx=da))
    last, prev = values[-1], values[-2]
    if last == 0:
        return total
    if not (prev > last > 0) or last > 1e-10 * max(total, 1e-300):
        raise CertificateError(DIVERGENT_NORM)
    return total + float(last * da / math.log(prev / last))


def weighted_norm(parts: Sequence[tuple[float, AgeFunction]], sigma: float, params: ModelParams) -> float:
    """L2 norm of exp(sigma a) * sum(coef * fn) over [0, inf)."""
    terms: list[tuple[float, float]] = []
    for coef, fn in parts:
        ex = _exponential_terms(fn)
        if ex is None:
            terms = None
            break
        terms.extend((coef * c, lam) for c, lam in ex)
    if terms is not None:
        return math.sqrt(max(_closed_form_sq(terms, sigma), 0.0))
    a = params.ages
    u = sum(coef * np.asarray(fn(a), dtype=float) for coef, fn in parts)
    return math.sqrt(_grid_sq(np.exp(2.0 * sigma * a) * u * u, params.da))


def rho_r_norm(eq: Equilibrium, sigma: float) -> float:
    params = eq.params
    if isinstance(params.beta, Constant):
        return math.sqrt(1.0 / (2.0 * (sigma + params.D + params.beta.c)))
    vals = np.exp(-2.0 * sigma * params.ages) * eq.r * eq.r
    return math.sqrt(_grid_sq(vals, params.da))


# ---------------------------------------------------------------------------
# small symmetric eigenproblem
# ---------------------------------------------------------------------------


def symmetric_eigenvalues(P: np.ndarray, max_sweeps: int = 60) -> tuple[float, float, float]:
    """Eigenvalues of a symmetric 3x3 matrix in ascending order (cyclic Jacobi rotations).

    Backward stable: each eigenvalue carries an absolute error of order
    eps * |P|, also when two eigenvalues are tiny compared with the third.
    """
    A = np.array(P, dtype=float)
    A = 0.5 * (A + A.T)
    scale = float(np.max(np.abs(A)))
    if scale == 0.0:
        return 0.0, 0.0, 0.0
    tiny = (np.finfo(float).eps * scale) ** 2
    for _ in range(max_sweeps):
        if A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2 <= tiny:
            break
        for i, j in ((0, 1), (0, 2), (1, 2)):
            if abs(A[i, j]) <= 1e-18 * scale:
                # far below the backward error; rotating would overflow tau
                A[i, j] = A[j, i] = 0.0
                continue
            tau = (A[j, j] - A[i, i]) / (2.0 * A[i, j])
            t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
            c = 1.0 / math.hypot(1.0, t)
            s = t * c
            rot = np.eye(3)
            rot[i, i] = rot[j, j] = c
            rot[i, j], rot[j, i] = s, -s
            A = rot.T @ A @ rot
            A[i, j] = A[j, i] = 0.0
    d = sorted(float(x) for x in np.diag(A))
    return d[0], d[1], d[2]


def trigonometric_eigenvalues(P: np.ndarray) -> tuple[float, float, float]:
    """Closed-form eigenvalues of a symmetric 3x3 matrix, ascending.

    Loses about half the digits of the small eigenvalues when two of them are
    much smaller than the third, so it is only a cross-check.
    """
    P = np.asarray(P, dtype=float)
    off = P[0, 1] ** 2 + P[0, 2] ** 2 + P[1, 2] ** 2
    if off == 0.0:
        return tuple(sorted((float(P[0, 0]), float(P[1, 1]), float(P[2, 2]))))
    q = float(np.trace(P)) / 3.0
    p2 = (P[0, 0] - q) ** 2 + (P[1, 1] - q) ** 2 + (P[2, 2] - q) ** 2 + 2.0 * off
    p = math.sqrt(p2 / 6.0)
    Bm = (P - q * np.eye(3)) / p
    half_det = (Bm[0, 0] * (Bm[1, 1] * Bm[2, 2] - Bm[1, 2] * Bm[2, 1])
                - Bm[0, 1] * (Bm[1, 0] * Bm[2, 2] - Bm[1, 2] * Bm[2, 0])
                + Bm[0, 2] * (Bm[1, 0] * Bm[2, 1] - Bm[1, 1] * Bm[2, 0])) / 2.0
    angle = math.acos(min(1.0, max(-1.0, half_det))) / 3.0
    largest = q + 2.0 * p * math.cos(angle)
    smallest = q + 2.0 * p * math.cos(angle + 2.0 * math.pi / 3.0)
    middle = 3.0 * q - largest - smallest
    return smallest, middle, largest


def leading_minors(P: np.ndarray) -> tuple[float, float, float]:
    P = np.asarray(P, dtype=float)
    m1 = P[0, 0]
    m2 = P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]
    m3 = (P[0, 0] * (P[1, 1] * P[2, 2] - P[1, 2] * P[2, 1])
          - P[0, 1] * (P[1, 0] * P[2, 2] - P[1, 2] * P[2, 0])
          + P[0, 2] * (P[1, 0] * P[2, 1] - P[1, 1] * P[2, 0]))
    return float(m1), float(m2), float(m3)


def sylvester_pd(P: np.ndarray) -> bool:
    return all(m > 0 for m in leading_minors(P))


def eigen_pd(P: np.ndarray) -> bool:
    return symmetric_eigenvalues(P)[0] > 0


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CertificateEval:
    cert: Certificate
    R: float
    theta: float
    S_lower: float
    g_lower: float
    g_in: float
    h_norm: float
    thp_norm: float
    rho_r: float
    A: float
    P: np.ndarray
    G1: float
    G2: float
    G3: float
    G4: float
    c: float
    lambda_min: float
    k0: float

    def to_dict(self) -> dict:
        return {
            "R": self.R, "theta": self.theta, "S_lower": self.S_lower, "g_lower": self.g_lower,
            "g_in": self.g_in, "norm_rho_inv_h": self.h_norm, "norm_rho_inv_theta_p_minus_h": self.thp_norm,
            "norm_rho_r": self.rho_r, "A": self.A, "P": self.P.tolist(), "G1": self.G1, "G2": self.G2,
            "G3": self.G3, "G4": self.G4, "c": self.c, "lambda_min": self.lambda_min, "k0": self.k0,
        }


def evaluate_certificate(eq: Equilibrium, data: AssumptionBData, cert: Certificate) -> CertificateEval:
    params = eq.params
    if not cert.F > data.R * params.S_in:
        raise CertificateError(f"F = {cert.F:.6g} must exceed R S_in = {data.R * params.S_in:.6g}")
    theta = data.theta if data.theta is not None else eq.theta
    qr, k1, k2, D = eq.qr, eq.kappa1, eq.kappa2, params.D
    S_lower = lower_substrate_bound(params, cert.F)
    g_lo = float(eq.g(S_lower))
    g_in = float(eq.g(params.S_in))
    h_norm = weighted_norm([(1.0, data.h)], cert.sigma, params)
    thp_norm = weighted_norm([(theta, data.p), (-1.0, data.h)], cert.sigma, params)
    rho_r = rho_r_norm(eq, cert.sigma)

    B, G, M, eps, lam, delta = cert.B, cert.Gamma, cert.M, cert.epsilon, cert.lam, data.delta
    A = (k1 * (1.0 - 2.0 * B * eps * delta) + delta * (1.0 - B * eps * delta) / g_in
         - B * (1.0 + eps * k1 ** 2) * g_in - G * delta * cert.R3 / (2.0 * g_lo)
         - (1.0 - lam) * cert.R1 * thp_norm / (2.0 * qr * g_lo))
    P = np.empty((3, 3))
    P[0, 0] = A
    P[0, 1] = P[1, 0] = -G * k1 / 2.0
    P[0, 2] = P[2, 0] = (k1 - k2) / 2.0
    P[1, 1] = G * (D - cert.R2 * h_norm / (2.0 * g_lo * qr) - delta / (2.0 * cert.R3 * g_lo))
    P[1, 2] = P[2, 1] = (G * D + D * M - G * k1) / 2.0
    P[2, 2] = D * M - B * g_in * (1.0 + eps * k1 ** 2)

    G1 = B * (h_norm / qr * (rho_r + G / (2.0 * B * cert.R2))
              + (1.0 - lam) * thp_norm / (2.0 * B * cert.R1 * qr) + rho_r ** 2 / (2.0 * eps))
    G2 = (1.0 - lam) * cert.R1 * thp_norm / (2.0 * qr)
    G3 = lam * thp_norm ** 2 / (2.0 * cert.omega * B * qr)
    G4 = cert.R2 * h_norm / (2.0 * qr) + delta / (2.0 * cert.R3)
    c = params.L + data.gamma * D + cert.sigma - G1 / B
    lmin = symmetric_eigenvalues(P)[0]
    k0 = min(lmin * min(g_lo, 1.0 / g_in), c)
    return CertificateEval(cert=cert, R=data.R, theta=theta, S_lower=S_lower, g_lower=g_lo, g_in=g_in,
                           h_norm=h_norm, thp_norm=thp_norm, rho_r=rho_r, A=A, P=P, G1=G1, G2=G2, G3=G3,
                           G4=G4, c=c, lambda_min=lmin, k0=k0)


def assemble_P(eq: Equilibrium, data: AssumptionBData, cert: Certificate) -> tuple[np.ndarray, float]:
    ce = evaluate_certificate(eq, data, cert)
    return ce.P.copy(), ce.A


@dataclass(frozen=True)
class ConditionReport:
    alpha_margin: float
    growth_margin: float
    dissipation_margin: float
    weight_margin: float
    lambda_min: float
    sylvester_minors: tuple[float, float, float]
    evaluation: CertificateEval

    @property
    def holds_alpha(self) -> bool:
        return self.alpha_margin >= 0

    @property
    def holds_growth(self) -> bool:
        return self.growth_margin >= 0

    @property
    def holds_dissipation(self) -> bool:
        return self.dissipation_margin > 0

    @property
    def holds_weight(self) -> bool:
        return self.weight_margin > 0

    @property
    def pd_status(self) -> str:
        """"pass", "marginal" (|lambda_min| within 1e-12 or the two tests disagree) or "fail"."""
        eig = self.lambda_min > MARGINAL
        syl = all(m > 0 for m in self.sylvester_minors)
        if abs(self.lambda_min) <= MARGINAL or eig != syl:
            return "marginal"
        return "pass" if eig else "fail"

    @property
    def holds_matrix(self) -> bool:
        return self.pd_status == "pass"

    @property
    def passed(self) -> bool:
        return (self.holds_alpha and self.holds_growth and self.holds_dissipation and self.holds_weight
                and self.holds_matrix)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "conditions": {
                "alpha": {"holds": self.holds_alpha, "margin": self.alpha_margin},
                "growth": {"holds": self.holds_growth, "margin": self.growth_margin},
                "dissipation": {"holds": self.holds_dissipation, "margin": self.dissipation_margin},
                "weight": {"holds": self.holds_weight, "margin": self.weight_margin},
                "matrix": {"holds": self.holds_matrix, "status": self.pd_status, "lambda_min": self.lambda_min,
                         "sylvester_minors": list(self.sylvester_minors)},
            },
            "derived": self.evaluation.to_dict(),
            "constants": self.evaluation.cert.to_dict(),
        }


def conditions_from_eval(eq: Equilibrium, data: AssumptionBData, ce: CertificateEval) -> ConditionReport:
    cert, qr = ce.cert, eq.qr
    return ConditionReport(
        alpha_margin=2.0 * qr * data.alpha - cert.omega * cert.lam,
        growth_margin=eq.kappa1 * ce.g_lower + data.delta - ce.G3,
        dissipation_margin=ce.c,
        weight_margin=1.0 - 2.0 * cert.B * cert.epsilon * data.delta,
        lambda_min=ce.lambda_min,
        sylvester_minors=leading_minors(ce.P),
        evaluation=ce,
    )


def check_conditions(eq: Equilibrium, data: AssumptionBData, cert: Certificate) -> ConditionReport:
    return conditions_from_eval(eq, data, evaluate_certificate(eq, data, cert))


# ---------------------------------------------------------------------------
# closed-form recipe for the constant-mortality model
# ---------------------------------------------------------------------------


def global_threshold(L: float, k_tilde: float) -> float:
    """Dilution threshold of the global result, k^2 / (8 (2L + k))."""
    if k_tilde == 0:
        return 0.0
    return k_tilde ** 2 / (8.0 * (2.0 * L + k_tilde))


def linearization_threshold(L: float, k_tilde: float) -> float:
    """Threshold from the linearization, (k - L)^2 / (8 k); reported as 0 when k = 0."""
    if k_tilde == 0:
        return 0.0
    return (k_tilde - L) ** 2 / (8.0 * k_tilde)


def gamma_interval(D: float, L: float, k_tilde: float) -> tuple[float, float]:
    """Roots of the quadratic delta_quadratic in Gamma."""
    s = math.sqrt(k_tilde / (L + D) + 1.0)
    return (s - 1.0) ** 2, (s + 1.0) ** 2


def gamma_max(D: float, L: float) -> float:
    return 4.0 * D / (L + D)


def delta_quadratic(Gamma: float, D: float, L: float, k_tilde: float) -> float:
    s = L + D
    return s * s * Gamma * Gamma - 2.0 * s * (2.0 * s + k_tilde) * Gamma + k_tilde ** 2


def J_of_M(M: float, Gamma: float, D: float, L: float, k_tilde: float) -> float:
    return (L + D) * (-D * D * M * M + D * Gamma * (4.0 * D + 2.0 * L - Gamma * (L + D) + k_tilde) * M
                      - Gamma * Gamma * L * (L + k_tilde))


def optimal_M(Gamma: float, D: float, L: float, k_tilde: float) -> float:
    return (4.0 * Gamma * D - Gamma ** 2 * (L + D) + 2.0 * Gamma * L + k_tilde * Gamma) / (2.0 * D)


def threshold_gap(D: float, L: float, k_tilde: float) -> float:
    return gamma_max(D, L) - gamma_interval(D, L, k_tilde)[0]


def reduced_matrix(Gamma: float, M: float, D: float, L: float, k_tilde: float) -> np.ndarray:
    """P with B = 0 for the constant-mortality model."""
    s = L + D
    return np.array([
        [s, -Gamma * s / 2.0, -k_tilde / 2.0],
        [-Gamma * s / 2.0, Gamma * D, (D * M - Gamma * L) / 2.0],
        [-k_tilde / 2.0, (D * M - Gamma * L) / 2.0, D * M],
    ])


@dataclass(frozen=True)
class RecipeResult:
    feasible: bool
    Gamma1: float
    Gamma_max: float
    certificate: Certificate | None = None
    report: ConditionReport | None = None
    message: str = ""


def tothkot_recipe(D: float, L: float, k_tilde: float, Y: float, eq: Equilibrium,
                   data: AssumptionBData | None = None, *, F_factor: float = 2.0) -> RecipeResult:
    """Closed-form certificate for constant mortality L and fecundity Y exp(-k_tilde a)."""
    if not (D > 0 and L > 0 and Y > 0 and k_tilde >= 0):
        raise ValueError("recipe needs D, L, Y > 0 and k_tilde >= 0")
    params = eq.params
    _check_family(params, D, L, k_tilde, Y)
    if data is None:
        from .model import tothkot_assumption_b

        data = tothkot_assumption_b(params, theta=eq.theta)
    G1, _ = gamma_interval(D, L, k_tilde)
    Gmax = gamma_max(D, L)
    if not G1 < Gmax:
        return RecipeResult(False, G1, Gmax, message=(
            f"infeasible: Gamma1 = {G1:.12g} >= 4D/(L+D) = {Gmax:.12g}"))
    Gamma = 0.5 * (G1 + Gmax)
    M = optimal_M(Gamma, D, L, k_tilde)
    sigma = 0.5 * (D + L)
    eps = 2.0 / (4.0 * sigma * (sigma + D + L))
    lmin0 = symmetric_eigenvalues(reduced_matrix(Gamma, M, D, L, k_tilde))[0]
    g_in = float(eq.g(params.S_in))
    k1 = eq.kappa1
    if not lmin0 > 0:
        return RecipeResult(False, G1, Gmax, message=f"infeasible: reduced matrix not positive definite "
                                                     f"(lambda_min = {lmin0:.3g})")
    B = lmin0 / (2.0 * g_in * (1.0 + eps * k1 ** 2))
    cert = Certificate(sigma=sigma, epsilon=eps, omega=1.0, lam=0.0, R1=1.0, R2=1.0, R3=1.0, B=B,
                       Gamma=Gamma, M=M, F=F_factor * data.R * params.S_in)
    report = check_conditions(eq, data, cert)
    if report.passed:
        return RecipeResult(True, G1, Gmax, cert, report, "feasible")
    if report.pd_status == "marginal" and report.holds_dissipation:
        return RecipeResult(False, G1, Gmax, cert, report,
                            f"infeasible: matrix condition marginal (lambda_min = {report.lambda_min:.3g})")
    raise CertificateError("recipe constants failed the condition check: " + repr(report.to_dict()["conditions"]))


def _check_family(params: ModelParams, D: float, L: float, k_tilde: float, Y: float) -> None:
    from .model import tothkot_parameters

    got = tothkot_parameters(params)
    want = (D, L, k_tilde, Y)
    if any(abs(a - b) > 1e-12 * max(1.0, abs(b)) for a, b in zip(got, want)):
        raise ValueError(f"equilibrium belongs to (D, L, k, Y) = {got}, not {want}")


def recipe_for(D: float, L: float, k_tilde: float, Y: float, S_in: float = 2.0,
               mu: GrowthLaw | None = None, n_age: int = 4001) -> RecipeResult:
    """Build the model, solve the equilibrium and run the recipe."""
    params = tothkot_model(Y, k_tilde, L, D, S_in, mu, n_age=n_age)
    return tothkot_recipe(D, L, k_tilde, Y, solve_equilibrium(params))


@dataclass(frozen=True)
class ScanRow:
    D: float
    recipe_feasible: bool
    cond_global: bool
    cond_linearization: bool


def feasibility_threshold_scan(L: float, k_tilde: float, Y: float, D_grid: Sequence[float],
                               S_in: float = 2.0, mu: GrowthLaw | None = None,
                               n_age: int = 4001) -> list[ScanRow]:
    T9, T10 = global_threshold(L, k_tilde), linearization_threshold(L, k_tilde)
    rows = []
    for D in D_grid:
        D = float(D)
        res = recipe_for(D, L, k_tilde, Y, S_in, mu, n_age)
        rows.append(ScanRow(D, res.feasible, D > T9, D >= T10))
    return rows


def recipe_flip_point(L: float, k_tilde: float, Y: float, D_lo: float, D_hi: float, S_in: float = 2.0,
                      mu: GrowthLaw | None = None, rtol: float = 1e-9, n_age: int = 401) -> float:
    """Bisect the dilution rate at which the recipe switches from infeasible to feasible."""
    if recipe_for(D_lo, L, k_tilde, Y, S_in, mu, n_age).feasible:
        raise ValueError("recipe already feasible at the lower end")
    if not recipe_for(D_hi, L, k_tilde, Y, S_in, mu, n_age).feasible:
        raise ValueError("recipe infeasible at the upper end")
    while D_hi - D_lo > rtol * D_hi:
        mid = 0.5 * (D_lo + D_hi)
        if recipe_for(mid, L, k_tilde, Y, S_in, mu, n_age).feasible:
            D_hi = mid
        else:
            D_lo = mid
    return 0.5 * (D_lo + D_hi)


# ---------------------------------------------------------------------------
# generic search
# ---------------------------------------------------------------------------

_LOG_COORDS = ("sigma", "epsilon", "omega", "R1", "R2", "R3", "B", "Gamma", "M", "F")


@dataclass(frozen=True)
class SearchResult:
    found: bool
    certificate: Certificate | None
    report: ConditionReport | None
    score: float
    evaluations: int

    @property
    def label(self) -> str:
        return "found" if self.found else "not found (non-conclusive: the conditions are only sufficient)"


def _search_box(eq: Equilibrium, data: AssumptionBData) -> dict[str, tuple[float, float]]:
    rate = eq.kappa1 + eq.params.D + eq.params.L
    RS = data.R * eq.params.S_in
    return {
        "sigma": (1e-3 * rate, 10.0 * rate),
        "epsilon": (1e-3 / rate, 1e3 / rate),
        "omega": (1e-3, 1e3),
        "R1": (1e-3, 1e3), "R2": (1e-3, 1e3), "R3": (1e-3, 1e3),
        "B": (1e-7, 10.0),
        "Gamma": (1e-3, 1e2),
        "M": (1e-3, 1e3),
        "F": (1.01 * RS, 10.0 * RS),
    }


def _decode(u: np.ndarray, box: dict, lam_cap: float) -> Certificate:
    vals = {}
    for i, name in enumerate(_LOG_COORDS):
        lo, hi = box[name]
        vals[name] = math.exp(math.log(lo) + float(u[i]) * (math.log(hi) - math.log(lo)))
    # lambda is clipped to the largest value the alpha condition admits
    lam = min(float(u[len(_LOG_COORDS)]), lam_cap / vals["omega"], 1.0)
    return Certificate(lam=max(lam, 0.0), **vals)


def _score(report: ConditionReport) -> float:
    ce = report.evaluation
    cert = ce.cert

    def norm(margin, scale):
        return margin / (abs(margin) + scale + 1e-300)

    parts = [
        norm(report.growth_margin, ce.G3),
        norm(report.dissipation_margin, ce.G1 / cert.B),
        norm(report.weight_margin, 1.0),
        norm(report.lambda_min, float(np.linalg.norm(ce.P))),
    ]
    if report.alpha_margin < 0:
        parts.append(-1.0)
    return min(parts)


def search_certificate(eq: Equilibrium, data: AssumptionBData, budget: int = 2000,
                       seed: int = 0) -> SearchResult:
    """Sobol exploration followed by compass search on the worst normalized margin."""
    if budget <= 0:
        return SearchResult(False, None, None, -math.inf, 0)
    box = _search_box(eq, data)
    dim = len(_LOG_COORDS) + 1
    lam_cap = 2.0 * eq.qr * data.alpha
    used = 0
    best = (-math.inf, None, None, None)

    def evaluate(u):
        nonlocal used, best
        used += 1
        cert = _decode(u, box, lam_cap)
        try:
            report = check_conditions(eq, data, cert)
        except CertificateError:
            return -math.inf, None, None
        s = _score(report)
        # strict improvement with a lexicographic tie-break keeps the result order-independent
        if s > best[0] or (s == best[0] and best[3] is not None and tuple(u) < tuple(best[3])):
            best = (s, cert, report, np.array(u))
        return s, cert, report

    m = max(0, int(math.floor(math.log2(max(1, budget // 2)))))
    sobol = qmc.Sobol(dim, scramble=True, seed=seed).random_base2(m)
    for u in sobol:
        if used >= budget:
            break
        _, cert, report = evaluate(u)
        if report is not None and report.passed:
            return SearchResult(True, cert, report, _score(report), used)

    if best[3] is None:
        return SearchResult(False, None, None, -math.inf, used)
    center = best[3].copy()
    center_score = best[0]
    step = 0.125
    while used < budget and step > 1e-6:
        improved = False
        for i in range(dim):
            for sign in (1.0, -1.0):
                if used >= budget:
                    break
                trial = center.copy()
                trial[i] = min(1.0, max(0.0, trial[i] + sign * step))
                if trial[i] == center[i]:
                    continue
                s, cert, report = evaluate(trial)
                if report is not None and report.passed:
                    return SearchResult(True, cert, report, s, used)
                if s > center_score:
                    center, center_score, improved = trial, s, True
                    break
        if not improved:
            step *= 0.5
    return SearchResult(False, best[1], best[2], best[0], used)


__all__ = [
    "Certificate", "CertificateEval", "ConditionReport", "RecipeResult", "ScanRow", "SearchResult",
    "evaluate_certificate", "assemble_P", "check_conditions", "conditions_from_eval",
    "symmetric_eigenvalues", "trigonometric_eigenvalues", "leading_minors", "sylvester_pd", "eigen_pd",
    "weighted_norm", "rho_r_norm",
    "global_threshold", "linearization_threshold", "gamma_interval", "gamma_max", "delta_quadratic", "J_of_M",
    "optimal_M", "threshold_gap", "reduced_matrix", "tothkot_recipe", "recipe_for", "feasibility_threshold_scan",
    "recipe_flip_point", "search_certificate", "MARGINAL",
]
