"""Chemostat model data: growth laws, age-dependent rate functions, parameters.

Every function family carries exact metadata (sup-norm, infimum, derivative,
antiderivative, tail behaviour) so that downstream checks do not pick up
discretisation error from numerical differentiation.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_N_AGE = 4001
# (D + L) * a_max >= 40 puts the truncated tail of the survivor profile below 5e-18
TAIL_DECADES = 40.0


def _as_output(a, values):
    if np.ndim(a) == 0:
        return float(values)
    return values


# ---------------------------------------------------------------------------
# growth laws
# ---------------------------------------------------------------------------


class GrowthLaw:
    """Specific growth rate mu(S) of the organisms."""

    family: str = ""

    def __call__(self, S):
        raise NotImplementedError

    def derivative(self, S):
        raise NotImplementedError

    def lipschitz(self, S_in: float) -> float:
        """max of mu' over [0, S_in]; mu' is monotone for both families."""
        return float(max(self.derivative(0.0), self.derivative(S_in)))

    def kernel_code(self) -> tuple[int, float, float]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Linear(GrowthLaw):
    c: float
    family = "linear"

    def __call__(self, S):
        S = np.asarray(S, dtype=float)
        return _as_output(S, self.c * S)

    def derivative(self, S):
        S = np.asarray(S, dtype=float)
        return _as_output(S, np.full_like(S, self.c))

    def kernel_code(self):
        return 0, float(self.c), 0.0

    def to_dict(self):
        return {"family": "linear", "c": self.c}


@dataclass(frozen=True)
class Monod(GrowthLaw):
    m: float
    a_half: float
    family = "monod"

    def __post_init__(self):
        if not self.a_half > 0:
            raise ValueError("Monod half-saturation constant must be positive")

    def __call__(self, S):
        S = np.asarray(S, dtype=float)
        return _as_output(S, self.m * S / (self.a_half + S))

    def derivative(self, S):
        S = np.asarray(S, dtype=float)
        return _as_output(S, self.m * self.a_half / (self.a_half + S) ** 2)

    def kernel_code(self):
        return 1, float(self.m), float(self.a_half)

    def to_dict(self):
        return {"family": "monod", "m": self.m, "a_half": self.a_half}


# ---------------------------------------------------------------------------
# age functions
# ---------------------------------------------------------------------------


class AgeFunction:
    """A rate or weight depending on age a >= 0."""

    family: str = ""

    def __call__(self, a):
        raise NotImplementedError

    def derivative(self, a):
        raise NotImplementedError

    def antiderivative(self, a):
        """Exact integral of the function over [0, a]."""
        raise NotImplementedError

    @property
    def sup_norm(self) -> float:
        raise NotImplementedError

    @property
    def infimum(self) -> float:
        raise NotImplementedError

    def integral(self) -> float:
        """Integral over [0, inf); may be ``inf``."""
        raise NotImplementedError

    def tail(self) -> tuple[float, float, float]:
        """``(start, amplitude, rate)`` with value ``amplitude * exp(-rate * a)`` for a >= start."""
        raise NotImplementedError

    def exponential(self) -> tuple[float, float] | None:
        """``(amplitude, rate)`` if the whole function is a single exponential."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(AgeFunction):
    c: float
    family = "constant"

    def __call__(self, a):
        a = np.asarray(a, dtype=float)
        return _as_output(a, np.full_like(a, self.c))

    def derivative(self, a):
        a = np.asarray(a, dtype=float)
        return _as_output(a, np.zeros_like(a))

    def antiderivative(self, a):
        a = np.asarray(a, dtype=float)
        return _as_output(a, self.c * a)

    @property
    def sup_norm(self):
        return abs(self.c)

    @property
    def infimum(self):
        return self.c

    def integral(self):
        return 0.0 if self.c == 0 else math.copysign(math.inf, self.c)

    def tail(self):
        return 0.0, self.c, 0.0

    def exponential(self):
        return self.c, 0.0

    def to_dict(self):
        return {"family": "constant", "c": self.c}


@dataclass(frozen=True)
class ExpDecay(AgeFunction):
    """``amplitude * exp(-rate * a)`` with rate >= 0."""

    amplitude: float
    rate: float
    family = "exp_decay"

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("ExpDecay rate must be non-negative")

    def __call__(self, a):
        a = np.asarray(a, dtype=float)
        return _as_output(a, self.amplitude * np.exp(-self.rate * a))

    def derivative(self, a):
        a = np.asarray(a, dtype=float)
        return _as_output(a, -self.rate * self.amplitude * np.exp(-self.rate * a))

    def antiderivative(self, a):
        a = np.asarray(a, dtype=float)
        if self.rate == 0:
            return _as_output(a, self.amplitude * a)
        return _as_output(a, self.amplitude * -np.expm1(-self.rate * a) / self.rate)

    @property
    def sup_norm(self):
        return abs(self.amplitude)

    @property
    def infimum(self):
        if self.rate == 0:
            return self.amplitude
        return min(0.0, self.amplitude)

    def integral(self):
        if self.amplitude == 0:
            return 0.0
        if self.rate == 0:
            return math.copysign(math.inf, self.amplitude)
        return self.amplitude / self.rate

    def tail(self):
        return 0.0, self.amplitude, self.rate

    def exponential(self):
        return self.amplitude, self.rate

    def to_dict(self):
        return {"family": "exp_decay", "amplitude": self.amplitude, "rate": self.rate}


@dataclass(frozen=True)
class Tabulated(AgeFunction):
    """Piecewise-linear interpolant through ``(knots, values)``, constant outside."""

    knots: tuple[float, ...]
    values: tuple[float, ...]
    family = "tabulated"

    def __post_init__(self):
        knots = tuple(float(x) for x in self.knots)
        values = tuple(float(x) for x in self.values)
        if len(knots) == 0 or len(knots) != len(values):
            raise ValueError("Tabulated needs equally many knots and values (at least one)")
        if knots[0] < 0 or any(b <= a for a, b in zip(knots, knots[1:])):
            raise ValueError("Tabulated knots must be non-negative and strictly increasing")
        if not all(math.isfinite(v) for v in values):
            raise ValueError("Tabulated values must be finite")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    @cached_property
    def _arrays(self):
        k = np.asarray(self.knots)
        v = np.asarray(self.values)
        slopes = np.diff(v) / np.diff(k) if k.size > 1 else np.zeros(0)
        cum = np.empty(k.size)
        cum[0] = v[0] * k[0]
        if k.size > 1:
            cum[1:] = cum[0] + np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(k))
        return k, v, slopes, cum

    def __call__(self, a):
        k, v, _, _ = self._arrays
        return _as_output(a, np.interp(np.asarray(a, dtype=float), k, v))

    def derivative(self, a):
        k, _, slopes, _ = self._arrays
        a = np.asarray(a, dtype=float)
        out = np.zeros_like(a)
        if slopes.size:
            j = np.searchsorted(k, a, side="right") - 1
            inside = (j >= 0) & (j < slopes.size)
            out[inside] = slopes[j[inside]]
        return _as_output(a, out)

    def antiderivative(self, a):
        k, v, slopes, cum = self._arrays
        a = np.asarray(a, dtype=float)
        out = np.empty_like(a)
        left = a <= k[0]
        right = a >= k[-1]
        mid = ~(left | right)
        out[left] = v[0] * a[left]
        out[right] = cum[-1] + v[-1] * (a[right] - k[-1])
        if np.any(mid):
            j = np.searchsorted(k, a[mid], side="right") - 1
            s = a[mid] - k[j]
            out[mid] = cum[j] + v[j] * s + 0.5 * slopes[j] * s * s
        return _as_output(a, out)

    @property
    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    @property
    def infimum(self):
        return float(np.min(self.values))

    def integral(self):
        if self.values[-1] != 0:
            return math.copysign(math.inf, self.values[-1])
        return float(self._arrays[3][-1])

    def tail(self):
        return self.knots[-1], self.values[-1], 0.0

    def to_dict(self):
        return {"family": "tabulated", "knots": list(self.knots), "values": list(self.values)}


# ---------------------------------------------------------------------------
# configuration parsing
# ---------------------------------------------------------------------------

_GROWTH_FIELDS = {"linear": {"c"}, "monod": {"m", "a_half"}}
_AGE_FIELDS = {"constant": {"c"}, "exp_decay": {"amplitude", "rate"}, "tabulated": {"knots", "values"}}


def _check_keys(doc: Mapping[str, Any], required: set[str], optional: set[str], where: str) -> None:
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{where}: expected an object")
    keys = set(doc)
    unknown = keys - required - optional
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = required - keys
    if missing:
        raise ConfigError(f"{where}: missing field(s) {sorted(missing)}")


def _number(doc, key, where) -> float:
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number")
    return float(value)


def growth_law_from_dict(doc: Mapping[str, Any], where: str = "mu") -> GrowthLaw:
    family = doc.get("family") if isinstance(doc, Mapping) else None
    if family not in _GROWTH_FIELDS:
        raise ConfigError(f"{where}.family: expected one of {sorted(_GROWTH_FIELDS)}")
    _check_keys(doc, {"family"} | _GROWTH_FIELDS[family], set(), where)
    try:
        if family == "linear":
            return Linear(_number(doc, "c", where))
        return Monod(_number(doc, "m", where), _number(doc, "a_half", where))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def age_function_from_dict(doc: Mapping[str, Any], where: str) -> AgeFunction:
    family = doc.get("family") if isinstance(doc, Mapping) else None
    if family not in _AGE_FIELDS:
        raise ConfigError(f"{where}.family: expected one of {sorted(_AGE_FIELDS)}")
    _check_keys(doc, {"family"} | _AGE_FIELDS[family], set(), where)
    try:
        if family == "constant":
            return Constant(_number(doc, "c", where))
        if family == "exp_decay":
            return ExpDecay(_number(doc, "amplitude", where), _number(doc, "rate", where))
        knots, values = doc["knots"], doc["values"]
        if not isinstance(knots, list) or not isinstance(values, list):
            raise ConfigError(f"{where}: knots and values must be lists")
        return Tabulated(tuple(knots), tuple(values))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc


# ---------------------------------------------------------------------------
# model parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Chemostat data and the truncated uniform age grid.

    ``a_max=None`` selects the default truncation ``(D + L) a_max = 40``.
    """

    mu: GrowthLaw
    beta: AgeFunction
    k: AgeFunction
    q: AgeFunction
    S_in: float
    D: float
    a_max: float | None = None
    n_age: int = DEFAULT_N_AGE

    def __post_init__(self):
        if not (self.S_in > 0 and math.isfinite(self.S_in)):
            raise ValueError("S_in must be positive")
        if not (self.D > 0 and math.isfinite(self.D)):
            raise ValueError("D must be positive")
        if int(self.n_age) != self.n_age or self.n_age < 2:
            raise ValueError("n_age must be an integer >= 2")
        object.__setattr__(self, "n_age", int(self.n_age))
        if self.a_max is None:
            object.__setattr__(self, "a_max", default_a_max(self.D, self.beta))
        if not (self.a_max > 0 and math.isfinite(self.a_max)):
            raise ValueError("a_max must be positive")
        object.__setattr__(self, "a_max", float(self.a_max))

    @property
    def da(self) -> float:
        return self.a_max / (self.n_age - 1)

    @cached_property
    def ages(self) -> np.ndarray:
        a = np.linspace(0.0, self.a_max, self.n_age)
        a.flags.writeable = False
        return a

    @cached_property
    def L(self) -> float:
        """Infimum of the mortality rate."""
        return float(self.beta.infimum)

    @cached_property
    def L_mu(self) -> float:
        return self.mu.lipschitz(self.S_in)

    @property
    def q_sup(self) -> float:
        return float(self.q.sup_norm)

    def regrid(self, *, da: float | None = None, n_age: int | None = None) -> "ModelParams":
        """Same model on a new grid.

        With ``da`` the number of intervals is rounded up to an even count and
        ``a_max`` is stretched so that the step is exactly ``da``.
        """
        if (da is None) == (n_age is None):
            raise ValueError("give exactly one of da or n_age")
        if n_age is not None:
            return dataclasses.replace(self, n_age=n_age)
        if not da > 0:
            raise ValueError("da must be positive")
        intervals = math.ceil(self.a_max / da - 1e-9)
        intervals += intervals % 2
        return dataclasses.replace(self, a_max=intervals * da, n_age=intervals + 1)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.to_dict(),
            "beta": self.beta.to_dict(),
            "k": self.k.to_dict(),
            "q": self.q.to_dict(),
            "S_in": self.S_in,
            "D": self.D,
            "a_max": self.a_max,
            "n_age": self.n_age,
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ModelParams":
        _check_keys(doc, {"mu", "beta", "k", "q", "S_in", "D"}, {"a_max", "n_age"}, "model")
        n_age = doc.get("n_age", DEFAULT_N_AGE)
        if isinstance(n_age, bool) or not isinstance(n_age, int):
            raise ConfigError("model.n_age: expected an integer")
        try:
            return cls(
                mu=growth_law_from_dict(doc["mu"]),
                beta=age_function_from_dict(doc["beta"], "beta"),
                k=age_function_from_dict(doc["k"], "k"),
                q=age_function_from_dict(doc["q"], "q"),
                S_in=_number(doc, "S_in", "model"),
                D=_number(doc, "D", "model"),
                a_max=None if doc.get("a_max") is None else _number(doc, "a_max", "model"),
                n_age=n_age,
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"model: {exc}") from exc


def default_a_max(D: float, beta: AgeFunction) -> float:
    return TAIL_DECADES / (D + max(float(beta.infimum), 0.0))


def tothkot_model(
    Y: float,
    k_tilde: float,
    L: float,
    D: float,
    S_in: float,
    mu: GrowthLaw | None = None,
    *,
    a_max: float | None = None,
    n_age: int = DEFAULT_N_AGE,
    da: float | None = None,
) -> ModelParams:
    """Constant mortality L, fecundity Y exp(-k_tilde a), unit consumption."""
    params = ModelParams(
        mu=Linear(1.0) if mu is None else mu,
        beta=Constant(L),
        k=ExpDecay(Y, k_tilde),
        q=Constant(1.0),
        S_in=S_in,
        D=D,
        a_max=a_max,
        n_age=n_age,
    )
    return params if da is None else params.regrid(da=da)


def tothkot_parameters(params: ModelParams) -> tuple[float, float, float, float]:
    """Recover ``(D, L, k_tilde, Y)`` from a model of the constant-mortality family."""
    if not (isinstance(params.beta, Constant) and isinstance(params.k, ExpDecay)
            and isinstance(params.q, Constant) and params.q.c == 1.0):
        raise ValueError("model is not of the constant-mortality / exponential-fecundity family")
    return params.D, params.beta.c, params.k.rate, params.k.amplitude


# ---------------------------------------------------------------------------
# assumption (B) decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionBData:
    """Constants and residuals of the differential relations linking k, q, beta, D.

    ``theta=None`` means "use the equilibrium value mu(S*) <q, r>".
    """

    b: float
    gamma: float
    alpha: float
    delta: float
    h: AgeFunction
    p: AgeFunction
    R: float
    theta: float | None = None

    def __post_init__(self):
        if self.alpha < 0 or self.delta < 0:
            raise ValueError("alpha and delta must be non-negative")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if self.theta is not None and not self.theta > 0:
            raise ValueError("theta must be positive")

    def with_theta(self, theta: float) -> "AssumptionBData":
        return dataclasses.replace(self, theta=float(theta))

    def to_dict(self) -> dict:
        doc = {
            "b": self.b, "gamma": self.gamma, "alpha": self.alpha, "delta": self.delta,
            "h": self.h.to_dict(), "p": self.p.to_dict(), "R": self.R,
        }
        if self.theta is not None:
            doc["theta"] = self.theta
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "AssumptionBData":
        where = "assumption_b"
        _check_keys(doc, {"b", "gamma", "alpha", "delta", "h", "p", "R"}, {"theta"}, where)
        try:
            return cls(
                b=_number(doc, "b", where),
                gamma=_number(doc, "gamma", where),
                alpha=_number(doc, "alpha", where),
                delta=_number(doc, "delta", where),
                h=age_function_from_dict(doc["h"], "h"),
                p=age_function_from_dict(doc["p"], "p"),
                R=_number(doc, "R", where),
                theta=None if doc.get("theta") is None else _number(doc, "theta", where),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{where}: {exc}") from exc


def tothkot_assumption_b(params: ModelParams, theta: float | None = None) -> AssumptionBData:
    """Decomposition with vanishing residuals for the constant-mortality family."""
    D, L, k_tilde, Y = tothkot_parameters(params)
    return AssumptionBData(
        b=-(k_tilde + L) / D, gamma=-L / D, alpha=0.0, delta=0.0,
        h=Constant(0.0), p=Constant(0.0), R=Y, theta=theta,
    )


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    witness: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_model(params: ModelParams, n_substrate: int = 1001) -> ValidationReport:
    """Check the standing assumptions on (mu, beta, k, q) and report witnesses."""
    S = np.linspace(0.0, params.S_in, n_substrate)
    mu_vals = np.asarray(params.mu(S))
    dmu = np.asarray(params.mu.derivative(S))
    a = params.ages
    checks = [
        Check("mu(0) = 0", bool(mu_vals[0] == 0.0), float(mu_vals[0])),
        Check("mu positive", bool(np.all(mu_vals[1:] > 0)), float(np.min(mu_vals[1:])),
              "min of mu over (0, S_in]"),
        Check("mu increasing", bool(np.all(dmu >= 0)), float(np.min(dmu)), "min of mu' over [0, S_in]"),
    ]
    for name in ("beta", "k", "q"):
        fn: AgeFunction = getattr(params, name)
        lowest = min(float(fn.infimum), float(np.min(fn(a))))
        checks.append(Check(f"{name} non-negative", lowest >= 0, lowest))
        checks.append(Check(f"{name} bounded", math.isfinite(fn.sup_norm), float(fn.sup_norm)))
    for name in ("k", "q"):
        fn = getattr(params, name)
        slope = float(np.max(np.abs(fn.derivative(a))))
        checks.append(Check(f"{name}' bounded", math.isfinite(slope), slope))
        total = float(fn.integral())
        checks.append(Check(f"integral {name} > 0", total > 0, total))
    report = ValidationReport(tuple(checks))
    if not report.ok:
        logger.info("model validation failed: %s", ", ".join(report.failures))
    return report


@dataclass(frozen=True)
class AssumptionAReport:
    ok: bool
    R: float
    worst_ratio: float
    witness_age: float
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


def verify_assumption_A(params: ModelParams, R: float, rtol: float = 1e-9) -> AssumptionAReport:
    """Check k(a) <= R q(a) on the grid and over the analytic tail."""
    if not R > 0:
        raise ValueError("R must be positive")
    a = params.ages
    kv = np.asarray(params.k(a))
    qv = np.asarray(params.q(a))
    bad = (qv <= 0) & (kv > 0)
    if np.any(bad):
        i = int(np.argmax(bad))
        return AssumptionAReport(False, R, math.inf, float(a[i]), "no finite R exists")
    ratio = np.where(qv > 0, kv / np.where(qv > 0, qv, 1.0), 0.0)
    i = int(np.argmax(ratio))
    worst, witness = float(ratio[i]), float(a[i])

    # beyond a_max both functions are single exponentials once past their last knot
    k_start, k_amp, k_rate = params.k.tail()
    q_start, q_amp, q_rate = params.q.tail()
    start = max(params.a_max, k_start, q_start)
    probes = [float(x) for x in getattr(params.k, "knots", ()) + getattr(params.q, "knots", ())
              if params.a_max < x <= start] + [start]
    for x in probes:
        kx, qx = float(params.k(x)), float(params.q(x))
        if kx > 0 and qx <= 0:
            return AssumptionAReport(False, R, math.inf, x, "no finite R exists")
        if qx > 0 and kx / qx > worst:
            worst, witness = kx / qx, x
    if k_amp > 0:
        if q_amp <= 0:
            return AssumptionAReport(False, R, math.inf, math.inf, "no finite R exists")
        if k_rate < q_rate:
            return AssumptionAReport(False, R, math.inf, math.inf, "no finite R exists")
        if k_rate == q_rate and k_amp / q_amp > worst:
            worst, witness = k_amp / q_amp, math.inf

    ok = worst <= R * (1.0 + rtol)
    msg = "" if ok else f"k/q reaches {worst:.6g} > R = {R:.6g} at a = {witness:.6g}"
    return AssumptionAReport(ok, R, worst, witness, msg)


@dataclass(frozen=True)
class ResidualReport:
    ok: bool
    h_mismatch: float
    p_mismatch: float
    min_h_residual: float
    min_p_residual: float
    theta: float
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


def assumption_b_residuals(params: ModelParams, data: AssumptionBData, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Residuals h and p computed from (k, q, beta, D) on the age grid."""
    a = params.ages
    D = params.D
    beta, k, q = params.beta(a), params.k(a), params.q(a)
    h = params.q.derivative(a) - beta * q - data.gamma * D * q - data.delta * theta * k
    p = params.k.derivative(a) - beta * k - (data.alpha / theta) * q - data.b * D * k
    return np.asarray(h), np.asarray(p)


def verify_assumption_B(params: ModelParams, data: AssumptionBData, tol: float = 1e-9,
                        theta: float | None = None) -> ResidualReport:
    """Compare the stated residuals h, p with those implied by the model."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if theta is None:
        theta = data.theta
    if theta is None:
        from .equilibrium import solve_equilibrium

        theta = solve_equilibrium(params).theta
    h_calc, p_calc = assumption_b_residuals(params, data, theta)
    a = params.ages
    h_gap = np.abs(np.asarray(data.h(a)) - h_calc) / (1.0 + np.abs(h_calc))
    p_gap = np.abs(np.asarray(data.p(a)) - p_calc) / (1.0 + np.abs(p_calc))
    h_min, p_min = float(np.min(h_calc)), float(np.min(p_calc))
    messages = []
    if h_min < -tol or p_min < -tol:
        messages.append("h or p not non-negative: assumption (B) violated")
    if np.max(h_gap) > tol or np.max(p_gap) > tol:
        messages.append("stated h or p does not match the computed residual")
    if data.b > 1 or data.gamma > 1:
        messages.append("b and gamma must not exceed 1")
    return ResidualReport(
        ok=not messages,
        h_mismatch=float(np.max(h_gap)),
        p_mismatch=float(np.max(p_gap)),
        min_h_residual=h_min,
        min_p_residual=p_min,
        theta=float(theta),
        message="; ".join(messages),
    )


__all__ = [
    "GrowthLaw", "Linear", "Monod", "AgeFunction", "Constant", "ExpDecay", "Tabulated",
    "ModelParams", "AssumptionBData", "ValidationReport", "Check", "AssumptionAReport", "ResidualReport",
    "validate_model", "verify_assumption_A", "verify_assumption_B", "assumption_b_residuals",
    "tothkot_model", "tothkot_parameters", "tothkot_assumption_b", "growth_law_from_dict",
    "age_function_from_dict", "default_a_max",
]
