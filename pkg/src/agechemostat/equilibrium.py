"""Survivor profile, age moments and the interior equilibrium (S*, f*)."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, optimize

from .errors import TailError, WashoutError
from .model import AgeFunction, Constant, ModelParams

logger = logging.getLogger(__name__)

DEFAULT_TAIL_TOL = 1e-10


def survivor_profile(params: ModelParams) -> np.ndarray:
    """r(a) = exp(-D a - int_0^a beta) on the grid, beta integrated by trapezoid."""
    a = params.ages
    beta = np.asarray(params.beta(a))
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (beta[1:] + beta[:-1]) * np.diff(a))))
    return np.exp(-params.D * a - cum)


def survivor_tail(params: ModelParams, r: np.ndarray) -> tuple[float, float] | None:
    """Exact exponential continuation of r beyond a_max, when beta is eventually constant."""
    start, amp, rate = params.beta.tail()
    if rate != 0 or start > params.a_max:
        return None
    decay = params.D + amp
    return float(r[-1] * math.exp(decay * params.a_max)), float(decay)


def exponential_moment(weight: AgeFunction, amplitude: float, rate: float) -> float | None:
    """Closed form of int_0^inf weight(a) * amplitude * exp(-rate a) da, if available."""
    form = weight.exponential()
    if form is None:
        return None
    c, lam = form
    if c == 0 or amplitude == 0:
        return 0.0
    if lam + rate <= 0:
        return math.inf
    return c * amplitude / (lam + rate)


def moment(
    weight: AgeFunction,
    profile: np.ndarray,
    ages: np.ndarray,
    *,
    profile_tail: tuple[float, float] | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
    return_tail: bool = False,
):
    """<weight, profile> on a uniform grid.

    Composite Simpson over [0, a_max]. When the profile continues as
    ``amplitude * exp(-rate a)`` (``profile_tail``) and the weight is a closed-form
    exponential, the tail integral is added exactly. Otherwise the tail is
    estimated from the last two samples and must stay below ``tail_tol``
    relative to the moment.
    """
    profile = np.asarray(profile, dtype=float)
    w = np.asarray(weight(ages), dtype=float)
    da = float(ages[1] - ages[0])
    value = float(integrate.simpson(w * profile, dx=da))
    a_end = float(ages[-1])

    tail = 0.0
    exact = profile_tail is not None and weight.exponential() is not None
    if exact:
        amp, rate = profile_tail
        c, lam = weight.exponential()
        if c != 0 and amp != 0:
            tail = c * amp * math.exp(-(lam + rate) * a_end) / (lam + rate)
        value += tail
    else:
        end = abs(w[-1] * profile[-1])
        if end > 0:
            prev, last = profile[-2], profile[-1]
            if last > 0 and prev > last:
                tail = end * da / math.log(prev / last)
            else:
                tail = math.inf
        if tail > tail_tol * max(abs(value), 1e-300):
            raise TailError(f"a_max too small: tail estimate {tail:.3g} for moment {value:.6g}")
    if return_tail:
        return value, tail
    return value


def trapezoid_weights(n: int, da: float) -> np.ndarray:
    w = np.full(n, da)
    w[0] = w[-1] = 0.5 * da
    return w


@dataclass(frozen=True, eq=False)
class Equilibrium:
    """Interior equilibrium and the constants derived from it."""

    params: ModelParams
    S_star: float
    f_star0: float
    r: np.ndarray
    kr: float
    qr: float
    theta: float
    kappa1: float
    kappa2: float
    r_norm1: float
    mu_star: float
    r_tail: tuple[float, float] | None = None

    @property
    def ages(self) -> np.ndarray:
        return self.params.ages

    @cached_property
    def f_star(self) -> np.ndarray:
        f = self.f_star0 * self.r
        f.flags.writeable = False
        return f

    def g(self, S):
        """Growth ratio mu(S)/mu(S*)."""
        return self.params.mu(S) / self.mu_star

    def to_dict(self) -> dict:
        return {
            "S_star": self.S_star, "f_star0": self.f_star0, "kr": self.kr, "qr": self.qr,
            "theta": self.theta, "kappa1": self.kappa1, "kappa2": self.kappa2,
            "r_norm1": self.r_norm1,
        }


def _moment_of_survivor(weight: AgeFunction, params: ModelParams, r: np.ndarray,
                        tail: tuple[float, float] | None) -> float:
    if isinstance(params.beta, Constant):
        exact = exponential_moment(weight, 1.0, params.D + params.beta.c)
        if exact is not None:
            return exact
    return moment(weight, r, params.ages, profile_tail=tail)


def solve_equilibrium(params: ModelParams, rtol: float = 1e-12) -> Equilibrium:
    """Solve mu(S*) <k, r> = 1 on (0, S_in) by bisection and build f*."""
    r = survivor_profile(params)
    tail = survivor_tail(params, r)
    kr = _moment_of_survivor(params.k, params, r, tail)
    qr = _moment_of_survivor(params.q, params, r, tail)
    r_norm1 = _moment_of_survivor(Constant(1.0), params, r, tail)
    if not (kr > 0 and qr > 0):
        raise WashoutError("no interior equilibrium (washout regime): <k, r> or <q, r> vanishes")
    mu = params.mu
    if not mu(params.S_in) * kr > 1.0:
        raise WashoutError(
            f"no interior equilibrium (washout regime): mu(S_in) <k, r> = {mu(params.S_in) * kr:.6g} <= 1"
        )
    S_star = optimize.bisect(lambda S: mu(S) * kr - 1.0, 0.0, params.S_in,
                             xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps), maxiter=400)
    mu_star = float(mu(S_star))
    f_star0 = params.D * (params.S_in - S_star) / (mu_star * qr)
    q0 = float(params.q(0.0))
    k0 = float(params.k(0.0))
    eq = Equilibrium(
        params=params, S_star=float(S_star), f_star0=float(f_star0), r=r, kr=float(kr), qr=float(qr),
        theta=mu_star * qr, kappa1=q0 / qr, kappa2=k0 / kr, r_norm1=float(r_norm1),
        mu_star=mu_star, r_tail=tail,
    )
    logger.debug("equilibrium S*=%.15g f*(0)=%.15g", eq.S_star, eq.f_star0)
    return eq


__all__ = [
    "Equilibrium", "survivor_profile", "survivor_tail", "moment", "exponential_moment",
    "solve_equilibrium", "trapezoid_weights",
]
