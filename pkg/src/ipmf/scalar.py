"""Closed-form 1D theory engine for iterative proportional Markovian fitting.

State convention: a :class:`ScalarIterate` tracks the endpoint joint of the
current process.  One endpoint always carries an exact ("pinned") marginal
of the problem; ``side`` records which one.  ``nu`` and ``s`` are the mean
and standard deviation of the other (free) endpoint, so with side="p0" they
describe the time-1 marginal and with side="p1" the time-0 marginal.

The correlation updates implement the two Markovian-projection maps:

* discrete, one interior point t:  rational map ``rho_new(rho)``;
* continuous:  ``rho_new = exp(-eps/2 * I)`` with
  ``I = integral_0^1 dt / Var(x_t)`` along the Brownian-bridge mixture.
  ``I`` has an elementary antiderivative; we evaluate it in a numerically
  stable arctangent/arctanh form that is exact across the discriminant
  sign change.

Everything is a pure function over immutable values.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Literal

__all__ = [
    "FormulaDomainError",
    "ScalarProblem",
    "ScalarIterate",
    "RateCertificate",
    "ParameterRanges",
    "xi",
    "p_inverse",
    "rho_star",
    "gamma_c",
    "gamma_d",
    "chi_improvement_factor",
    "continuous_correlation_update",
    "discrete_correlation_update",
    "grid_correlation_update",
    "imf_step_discrete",
    "imf_step_continuous",
    "ipf_step",
    "ipmf_round",
    "certificate",
    "chi_of",
]

Side = Literal["p0", "p1"]
Mode = Literal["discrete", "continuous"]


class FormulaDomainError(ArithmeticError):
    """The continuous-update formula left its real/range domain."""


@dataclass(frozen=True)
class ScalarProblem:
    """1D endpoint marginals N(mu0, sigma0^2), N(mu1, sigma1^2) and prior volatility."""

    mu0: float
    sigma0: float
    mu1: float
    sigma1: float
    epsilon: float

    def __post_init__(self) -> None:
        if not (self.sigma0 > 0.0 and self.sigma1 > 0.0 and self.epsilon > 0.0):
            raise ValueError("sigma0, sigma1 and epsilon must be positive")


@dataclass(frozen=True)
class ScalarIterate:
    """Endpoint joint state; see module docstring for the side convention."""

    nu: float
    s: float
    rho: float
    side: Side = "p0"

    def __post_init__(self) -> None:
        if not self.s > 0.0:
            raise ValueError("s must be positive")
        if not abs(self.rho) < 1.0:
            raise ValueError("|rho| must be < 1")
        if self.side not in ("p0", "p1"):
            raise ValueError("side must be 'p0' or 'p1'")

    def std_pair(self, problem: ScalarProblem) -> tuple[float, float]:
        """(time-0 std, time-1 std) of the current joint."""
        if self.side == "p0":
            return problem.sigma0, self.s
        return self.s, problem.sigma1


@dataclass(frozen=True)
class ParameterRanges:
    sigma1_min: float
    sigma1_max: float
    sigma0_min: float
    sigma0_max: float
    chi_min: float
    chi_max: float


@dataclass(frozen=True)
class RateCertificate:
    """Geometric rate factors and the parameter ranges they were taken over.

    alpha bounds |s_k^2 - sigma1^2| <= alpha^(2k) |s_0^2 - sigma1^2| and
    |nu_k - mu1| <= alpha^k |nu_0 - mu1|; beta bounds
    |chi_k - 1/eps| <= beta^(2k) |chi_0 - 1/eps|.
    """

    alpha: float
    beta: float
    gamma: float
    rho_star: float
    ranges: ParameterRanges

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma", "rho_star"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


def xi(rho: float, sigma: float, sigma_p: float) -> float:
    """Optimality coefficient chi = rho / (sigma sigma' (1 - rho^2)).

    Strictly increasing in rho; chi = 1/eps characterizes the static
    bridge solution between the marginals.
    """
    if not abs(rho) < 1.0:
        raise ValueError("|rho| must be < 1")
    return rho / (sigma * sigma_p * (1.0 - rho * rho))


def p_inverse(chi: float, sigma: float, sigma_p: float) -> float:
    """Inverse of `xi` in rho: the unique rho with xi(rho) = chi.

    Uses the cancellation-free form a / (sqrt(a^2 + 1/4) + 1/2) with
    a = chi sigma sigma'; chi = 0 maps to 0 (removable singularity).
    """
    if chi == 0.0:
        return 0.0
    a = chi * sigma * sigma_p
    return a / (math.sqrt(a * a + 0.25) + 0.5)


def rho_star(sigma0: float, sigma1: float, epsilon: float) -> float:
    """Correlation of the static bridge solution between the marginals.

    Equals (sqrt(sigma0^2 sigma1^2 + eps^2/4) - eps/2) / (sigma0 sigma1),
    evaluated in the equivalent cancellation-free form.
    """
    p = sigma0 * sigma1
    return p / (math.sqrt(p * p + 0.25 * epsilon * epsilon) + 0.5 * epsilon)


def gamma_c(sigma: float, sigma_p: float, epsilon: float) -> float:
    """Contraction factor of the continuous correlation update (= rho_star)."""
    return rho_star(sigma, sigma_p, epsilon)


def gamma_d(sigma: float, sigma_p: float, t: float, epsilon: float) -> float:
    """Contraction factor of the one-interior-point discrete update.

    Valid as a derivative bound on the nonnegative-correlation segment;
    see tests for a documented counterexample at strongly negative rho
    with asymmetric marginals.
    """
    if not 0.0 < t < 1.0:
        raise ValueError("t must be strictly inside (0, 1)")
    u = 1.0 - t
    num = (t * u) ** 2 * sigma ** 2 * sigma_p ** 2 \
        + t * u * (t * t * sigma_p ** 2 + u * u * sigma ** 2) * epsilon \
        + (t * u) ** 2 * epsilon ** 2
    den = u * u * (u * sigma ** 2 + t * sigma * sigma_p) ** 2 \
        + t * t * (t * sigma_p ** 2 + u * sigma * sigma_p) ** 2 \
        + t * u * (u * sigma + t * sigma_p) ** 2 * epsilon
    return 1.0 / (1.0 + num / den)


def chi_improvement_factor(rho: float, rho_fix: float, gamma: float) -> float:
    """Per-step factor l < 1 with |chi_new - 1/eps| <= l |chi - 1/eps|."""
    if not abs(rho) < 1.0:
        raise ValueError("|rho| must be < 1")
    if not 0.0 < rho_fix < 1.0:
        raise ValueError("rho_fix must lie in (0, 1)")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    m2 = max(rho_fix, abs(rho)) ** 2
    return 1.0 - (1.0 - gamma) * (1.0 - m2) ** 2 / (1.0 + m2)


def discrete_correlation_update(rho: float, sigma: float, sigma_p: float,
                                t: float, epsilon: float) -> float:
    """One-interior-point Markovian-projection correlation map."""
    if not 0.0 < t < 1.0:
        raise ValueError("t must be strictly inside (0, 1)")
    u = 1.0 - t
    num = (u * sigma + t * rho * sigma_p) * (t * sigma_p + u * rho * sigma)
    den = (u * u * sigma * sigma + 2.0 * t * u * rho * sigma * sigma_p
           + t * t * sigma_p * sigma_p + t * u * epsilon)
    return num / den


def _bridge_variance_integral(rho: float, sigma: float, sigma_p: float,
                              epsilon: float) -> float:
    """integral_0^1 dt / Var(x_t) with Var the reciprocal-process variance.

    Var(x_t) = (1-t)^2 sigma^2 + 2t(1-t) rho sigma sigma' + t^2 sigma'^2
               + eps t(1-t)  =  A t^2 + B t + C, strictly positive on [0, 1].
    The closed form is written through q = rd (u1 - u0), p = u1 u0 -/+ rd^2
    so that it stays accurate when the discriminant crosses zero.
    """
    a = sigma * sigma - 2.0 * rho * sigma * sigma_p + sigma_p * sigma_p - epsilon
    b = -2.0 * sigma * sigma + 2.0 * rho * sigma * sigma_p + epsilon
    c = sigma * sigma
    scale = max(abs(a), abs(b), c)
    if abs(a) <= 1e-14 * scale:
        if abs(b) <= 1e-14 * scale:
            return 1.0 / c
        return math.log1p(b / c) / b
    u0 = b                # 2 a t + b at t = 0
    u1 = 2.0 * a + b      # ... at t = 1
    disc = 4.0 * a * c - b * b
    if disc > 0.0:
        rd = math.sqrt(disc)
        return 2.0 / rd * math.atan2(rd * (u1 - u0), rd * rd + u1 * u0)
    if disc < 0.0:
        rd = math.sqrt(-disc)
        return 2.0 / rd * math.atanh(rd * (u1 - u0) / (u1 * u0 - rd * rd))
    return 2.0 / u0 - 2.0 / u1


def _closed_form_continuous(rho: float, sigma: float, sigma_p: float,
                            epsilon: float) -> float:
    return math.exp(-0.5 * epsilon
                    * _bridge_variance_integral(rho, sigma, sigma_p, epsilon))


def _printed_continuous(rho: float, sigma: float, sigma_p: float,
                        epsilon: float) -> float | None:
    """Literal c1/c2/c3 exponential-arctanh update, complex-capable.

    Returns None when the evaluation leaves its domain (non-real result,
    value outside (0, 1), or branch-cut artifacts of atanh at |arg| > 1).
    """
    s2 = sigma * sigma
    sp2 = sigma_p * sigma_p
    c1 = complex(epsilon + 2.0 * sp2 * (rho * s2 - sp2))
    c2 = complex(epsilon + 2.0 * s2 * (rho * sp2 - s2))
    c3 = cmath.sqrt((epsilon + 2.0 * (rho + 1.0) * s2 * sp2)
                    * (epsilon + 2.0 * (rho - 1.0) * s2 * sp2))
    if c3 == 0:
        return None
    try:
        val = cmath.exp(-epsilon * (cmath.atanh(c1 / c3) + cmath.atanh(c2 / c3)) / c3)
    except (ValueError, OverflowError, ZeroDivisionError):
        return None
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        return None
    out = val.real
    if not 0.0 < out < 1.0:
        return None
    return out


def continuous_correlation_update(rho: float, sigma: float, sigma_p: float,
                                  epsilon: float) -> tuple[float, str]:
    """Continuous Markovian-projection correlation map, with path record.

    The published constant-coefficient formula is tried first.  It must
    reproduce the fixed point rho_star to 1e-9 and agree with the
    closed-form integral; otherwise (the generic case away from
    sigma*sigma' = 1, where its coefficients are mis-scaled) the result
    falls back to the validated closed form.  Returns (rho_new, path)
    with path in {"printed", "closed-form"}.
    """
    exact = _closed_form_continuous(rho, sigma, sigma_p, epsilon)
    printed = _printed_continuous(rho, sigma, sigma_p, epsilon)
    if printed is not None:
        fix = rho_star(sigma, sigma_p, epsilon)
        printed_at_fix = _printed_continuous(fix, sigma, sigma_p, epsilon)
        if (printed_at_fix is not None
                and abs(printed_at_fix - fix) <= 1e-9
                and abs(printed - exact) <= 1e-9):
            return printed, "printed"
    return exact, "closed-form"


def grid_correlation_update(rho: float, sigma: float, sigma_p: float,
                            epsilon: float, n_interior: int = 512) -> float:
    """Discrete Markovian projection composed over a uniform fine grid.

    Independent oracle for the continuous update: the product of one-step
    regression coefficients converges to exp(-eps/2 * I) as the grid is
    refined.  Exact at rho_star for every grid.
    """
    if n_interior < 1:
        raise ValueError("n_interior must be >= 1")
    s0 = sigma * sigma
    s1 = sigma_p * sigma_p
    cross = rho * sigma * sigma_p
    n = n_interior + 1
    log_prod = 0.0
    for k in range(n):
        t = k / n
        u = (k + 1) / n
        var_t = ((1.0 - t) ** 2 * s0 + 2.0 * t * (1.0 - t) * cross
                 + t * t * s1 + epsilon * t * (1.0 - t))
        cov_tu = ((1.0 - t) * (1.0 - u) * s0
                  + ((1.0 - t) * u + t * (1.0 - u)) * cross
                  + t * u * s1 + epsilon * t * (1.0 - u))
        log_prod += math.log(cov_tu / var_t)
    return math.exp(log_prod) * s0 / (sigma * sigma_p)


def imf_step_discrete(iterate: ScalarIterate, problem: ScalarProblem,
                      t: float = 0.5) -> ScalarIterate:
    """Discrete Markovian-fitting step: marginals kept, rho contracted."""
    sigma, sigma_p = iterate.std_pair(problem)
    rho_new = discrete_correlation_update(iterate.rho, sigma, sigma_p, t,
                                          problem.epsilon)
    return ScalarIterate(iterate.nu, iterate.s, rho_new, iterate.side)


def imf_step_continuous(iterate: ScalarIterate, problem: ScalarProblem) -> ScalarIterate:
    """Continuous Markovian-fitting step: marginals kept, rho contracted."""
    sigma, sigma_p = iterate.std_pair(problem)
    rho_new, _ = continuous_correlation_update(iterate.rho, sigma, sigma_p,
                                               problem.epsilon)
    if not 0.0 < rho_new < 1.0:
        raise FormulaDomainError(
            f"continuous update left (0, 1): rho_new = {rho_new}")
    return ScalarIterate(iterate.nu, iterate.s, rho_new, iterate.side)


def ipf_step(iterate: ScalarIterate, problem: ScalarProblem) -> ScalarIterate:
    """Pin the free endpoint to its target marginal, keeping the conditional.

    Swaps `side`; the previously pinned endpoint becomes free with the
    transacted (nu', s').  The optimality coefficient chi is preserved
    exactly (same conditional, hence same x0-x1 coupling term).
    """
    if not iterate.s > 0.0:
        raise ValueError("degenerate iterate: s must be positive")
    rho = iterate.rho
    if iterate.side == "p0":
        # joint ((mu0, sigma0), (nu, s)); pin time-1 to (mu1, sigma1)
        sigma_pin, mu_pin = problem.sigma0, problem.mu0
        sigma_tgt, mu_tgt = problem.sigma1, problem.mu1
        new_side: Side = "p1"
    else:
        sigma_pin, mu_pin = problem.sigma1, problem.mu1
        sigma_tgt, mu_tgt = problem.sigma0, problem.mu0
        new_side = "p0"
    ratio = sigma_tgt / iterate.s
    s_new = sigma_pin * math.sqrt(1.0 - rho * rho * (1.0 - ratio * ratio))
    nu_new = mu_pin - (sigma_pin / iterate.s) * rho * (iterate.nu - mu_tgt)
    rho_new = rho * sigma_pin * sigma_tgt / (iterate.s * s_new)
    return ScalarIterate(nu_new, s_new, rho_new, new_side)


def ipmf_round(iterate: ScalarIterate, problem: ScalarProblem,
               mode: Mode = "discrete", t: float = 0.5) -> ScalarIterate:
    """One full round: IMF, pin to p1, IMF, pin back to p0."""
    if iterate.side != "p0":
        raise ValueError("round must start from an iterate pinned at p0")
    step = (lambda it: imf_step_discrete(it, problem, t)) if mode == "discrete" \
        else (lambda it: imf_step_continuous(it, problem))
    out = ipf_step(step(ipf_step(step(iterate), problem)), problem)
    assert out.side == "p0"
    return out


def chi_of(iterate: ScalarIterate, problem: ScalarProblem) -> float:
    """Optimality coefficient of the iterate's current joint."""
    sigma, sigma_p = iterate.std_pair(problem)
    return xi(iterate.rho, sigma, sigma_p)


def certificate(problem: ScalarProblem, init: ScalarIterate,
                mode: Mode = "discrete", t: float = 0.5) -> RateCertificate:
    """Geometric rate certificate (alpha, beta) for a problem instance.

    Ranges: the free time-1 std stays between s_0 and sigma1, the free
    time-0 std between sigma0 and s'_0 (the value after the first pin to
    p1), and |chi| between |chi_0| and 1/eps.  alpha and beta are the
    correlation and chi-improvement factors maximized over those ranges.
    """
    if init.side != "p0":
        raise ValueError("certificate expects an iterate pinned at p0")
    eps = problem.epsilon
    chi0 = chi_of(init, problem)
    chi_fix = 1.0 / eps
    if mode == "discrete":
        rho_tilde = discrete_correlation_update(init.rho, problem.sigma0,
                                                init.s, t, eps)
    else:
        rho_tilde, _ = continuous_correlation_update(init.rho, problem.sigma0,
                                                     init.s, eps)
    ratio = problem.sigma1 / init.s
    s_prime0 = problem.sigma0 * math.sqrt(
        1.0 - rho_tilde * rho_tilde * (1.0 - ratio * ratio))
    s1_min, s1_max = sorted((problem.sigma1, init.s))
    s0_min, s0_max = sorted((problem.sigma0, s_prime0))
    chi_min, chi_max = sorted((chi_fix, abs(chi0)))
    alpha = abs(p_inverse(chi_max, s0_max, s1_max))
    gamma = gamma_d(s0_max, s1_max, t, eps) if mode == "discrete" \
        else gamma_c(s0_max, s1_max, eps)
    beta = chi_improvement_factor(p_inverse(chi_max, s0_max, s1_max),
                                  p_inverse(chi_fix, s0_max, s1_max), gamma)
    return RateCertificate(
        alpha=alpha, beta=beta, gamma=gamma,
        rho_star=rho_star(problem.sigma0, problem.sigma1, eps),
        ranges=ParameterRanges(s1_min, s1_max, s0_min, s0_max,
                               chi_min, chi_max),
    )
