"""Explicit error bounds for the stochastic KM iteration.

All bounds control E||x_n - T x_n|| (or, for the Euclidean family, the
residual at a random iterate) in terms of:

kappa_bar
    a constant dominating ||T z_n - x_0|| (bounded range) or
    2 dist(x_0, Fix T) + mu * sum_k alpha_k nu_{k-1};
mu
    the norm-equivalence constant with ||x|| <= mu ||x||_2;
sigma
    a uniform bound on the noise level theta_n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConvolutionConditionError, DomainError, PreconditionError
from .sequences import (
    StepsizeSchedule,
    VarianceSchedule,
    nu_array,
    power_constants,
    sigma_fn,
)
from .specfun import adaptive_quad, dawson, hyp2f1_half

__all__ = [
    "BoundParams",
    "kappa_bar",
    "kappa_bar_horizon",
    "bound_general",
    "bound_convolution",
    "power_h",
    "bound_constant",
    "auto_alpha",
    "fixed_horizon_rate",
    "bound_power",
    "asymptote_power",
    "bound_euclidean",
    "bound_euclidean_sq",
    "euclidean_fixed_horizon",
    "euclidean_power",
    "high_prob_bound",
    "hyp2f1_half",
    "dawson",
]

_CONDITION_SLACK = 1e-12


@dataclass
class BoundParams:
    """Constants entering the bounds; ``variance`` may be a plain sigma."""

    kappa_bar: float
    mu: float
    variance: Union[VarianceSchedule, float]
    schedule: StepsizeSchedule

    def __post_init__(self):
        if self.kappa_bar < 0:
            raise DomainError("kappa_bar must be nonnegative")
        if self.mu < 1:
            raise DomainError("mu must be >= 1")
        if not isinstance(self.variance, VarianceSchedule):
            self.variance = VarianceSchedule.bounded(float(self.variance))

    def nu(self, n: int) -> np.ndarray:
        return nu_array(self.schedule, self.variance, n)


def _check_common(kappa_bar, mu, sigma, n):
    if kappa_bar < 0:
        raise DomainError("kappa_bar must be nonnegative")
    if mu < 1:
        raise DomainError("mu must be >= 1")
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    if n < 1:
        raise DomainError("n must be >= 1")


# -- kappa_bar -------------------------------------------------------------


def kappa_bar(mode: str, *, r=None, dist0=None, schedule=None, variance=None, mu=1.0, horizon=None):
    """The constant kappa_bar under either admissible hypothesis.

    ``mode='range'`` returns ``r``, a bound on sup_x ||T x - x_0||.

    ``mode='fixdist'`` returns 2 dist0 + mu (sum_{k=2}^N alpha_k nu_{k-1} + tail)
    for a power schedule with a > 2/3 and bounded noise.  The tail over k > N
    uses nu_{k-1} <= sigma sqrt(alpha_k) and an integral comparison, so the
    result dominates the infinite sum.
    """
    if mode == "range":
        if r is None or r < 0:
            raise DomainError("range mode needs r >= 0")
        return float(r)
    if mode != "fixdist":
        raise DomainError(f"unknown kappa_bar mode {mode!r}")
    if dist0 is None or dist0 < 0:
        raise DomainError("fixdist mode needs dist0 >= 0")
    if schedule is None or schedule.kind != "power" or schedule.a <= 2.0 / 3.0:
        raise DomainError("fixdist mode needs a power schedule with a > 2/3 (the sum may diverge otherwise)")
    if not isinstance(variance, VarianceSchedule):
        variance = VarianceSchedule.bounded(float(variance or 0.0))
    if variance.kind != "bounded":
        raise DomainError("fixdist mode needs a bounded variance to control the tail")
    N = int(horizon or 10**5)
    if N < 2:
        raise DomainError("horizon must be >= 2")
    al = schedule.alpha_array(N)
    nus = nu_array(schedule, variance, N)
    head = math.fsum((al[2:] * nus[1:-1]).tolist())
    p = 1.5 * schedule.a
    tail = variance.sigma * N ** (1.0 - p) / (p - 1.0)
    return 2.0 * dist0 + mu * (head + tail)


def kappa_bar_horizon(dist0: float, schedule: StepsizeSchedule, variance, mu: float, n: int) -> float:
    """2 dist0 + mu sum_{k=2}^n alpha_k nu_{k-1}.

    The expected-residual bound at step n only involves the first n noise
    terms, so this truncated constant is admissible at horizon n for any
    schedule, including constant stepsizes and a <= 2/3.
    """
    if dist0 < 0:
        raise DomainError("dist0 must be nonnegative")
    if not isinstance(variance, VarianceSchedule):
        variance = VarianceSchedule.bounded(float(variance))
    if n < 2:
        return 2.0 * dist0
    al = schedule.alpha_array(n)
    nus = nu_array(schedule, variance, n)
    return 2.0 * dist0 + mu * math.fsum((al[2:] * nus[1:-1]).tolist())


# -- general and convolution bounds -----------------------------------------


def bound_general(p: BoundParams, n: int, nu_seq=None) -> float:
    """kappa_bar sigma(tau_n) + 2 mu sum_{k=2}^n alpha_k sigma(tau_n - tau_k) nu_{k-1} + 4 mu nu_n."""
    if n < 1:
        raise DomainError("n must be >= 1")
    s = p.schedule
    nus = p.nu(n) if nu_seq is None else np.asarray(nu_seq, dtype=float)
    if len(nus) < n + 1:
        raise PreconditionError(f"need nu_0..nu_{n}, got {len(nus)} values")
    taus = s.tau_array(n)
    al = s.alpha_array(n)
    k = np.arange(2, n + 1)
    mid = np.sum(al[k] * sigma_fn(taus[n] - taus[k]) * nus[k - 1]) if n >= 2 else 0.0
    return float(p.kappa_bar * sigma_fn(taus[n]) + 2.0 * p.mu * mid + 4.0 * p.mu * nus[n])


def _vectorize(h):
    def hv(x):
        x = np.asarray(x, dtype=float)
        try:
            out = np.asarray(h(x), dtype=float)
            if out.shape == x.shape:
                return out
        except (TypeError, ValueError):
            pass
        return np.array([float(h(v)) for v in x.ravel()]).reshape(x.shape)

    return hv


def _validate_convolution(p: BoundParams, h, gamma, n, nus):
    s = p.schedule
    if n < 2:
        return
    taus = s.tau_array(n + 1)
    al = s.alpha_array(n + 1)
    k = np.arange(2, n + 1)
    lhs = nus[k - 1]
    rhs = (1.0 - al[k]) * _vectorize(h)(taus[k])
    bad = np.nonzero(lhs > rhs * (1.0 + _CONDITION_SLACK))[0]
    if bad.size:
        i = bad[0]
        raise ConvolutionConditionError("a", int(k[i]), float(lhs[i]), float(rhs[i]))
    w = al * (1.0 - al)
    lhs = w[k]
    rhs = gamma * w[k + 1]
    bad = np.nonzero(lhs > rhs * (1.0 + _CONDITION_SLACK))[0]
    if bad.size:
        i = bad[0]
        raise ConvolutionConditionError("b", int(k[i]), float(lhs[i]), float(rhs[i]))


def convolution_integral(h: Callable, tau_lo: float, tau_hi: float, rel_tol: float = 1e-9) -> float:
    """int_{tau_lo}^{tau_hi} h(x) / sqrt(tau_hi - x) dx.

    With u = sqrt(tau_hi - x) the integrand becomes 2 h(tau_hi - u**2), which
    is smooth up to the endpoint.
    """
    if tau_hi < tau_lo:
        raise DomainError("need tau_lo <= tau_hi")
    top = math.sqrt(tau_hi - tau_lo)
    if top == 0.0:
        return 0.0
    return adaptive_quad(lambda u: 2.0 * float(h(tau_hi - u * u)), 0.0, top, rel_tol=rel_tol)


def bound_convolution(
    p: BoundParams,
    h: Callable,
    gamma: float,
    n: int,
    nu_prev: Optional[float] = None,
    nu_last: Optional[float] = None,
    validate: bool = True,
) -> float:
    """Integral form of the bound for a decreasing convex majorant h.

    B_n = kappa_bar / sqrt(pi tau_n) + (2 mu gamma / sqrt(pi)) int_{tau_1}^{tau_n} h(x) / sqrt(tau_n - x) dx
          + 2 mu alpha_n nu_{n-1} + 4 mu nu_n

    Parameters
    ----------
    h : callable
        Must satisfy nu_{k-1} <= (1 - alpha_k) h(tau_k) for k >= 2.
    gamma : float
        Must satisfy alpha_k (1 - alpha_k) <= gamma alpha_{k+1} (1 - alpha_{k+1}).
    nu_prev, nu_last : float, optional
        Values used for nu_{n-1} and nu_n in the two last terms; any upper
        bounds are admissible.  Defaults are the exact values.
    validate : bool
        Check both conditions for every k <= n and raise
        ConvolutionConditionError naming the first offending k.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if gamma < 1:
        raise DomainError("gamma must be >= 1")
    s = p.schedule
    nus = p.nu(n)
    if validate:
        _validate_convolution(p, h, gamma, n, nus)
    taus = s.tau_array(n)
    tau_n = float(taus[n])
    first = p.kappa_bar / math.sqrt(math.pi * tau_n)
    integral = convolution_integral(h, float(taus[1]), tau_n)
    mid = 2.0 * p.mu * gamma / math.sqrt(math.pi) * integral
    nprev = float(nus[n - 1]) if nu_prev is None else float(nu_prev)
    nlast = float(nus[n]) if nu_last is None else float(nu_last)
    return first + mid + 2.0 * p.mu * s.alpha(n) * nprev + 4.0 * p.mu * nlast


def power_h(a: float, sigma: float):
    """The majorant h and ratio constant gamma used for alpha_n = 1/(n+1)**a.

    a < 1: h(x) = sigma (lambda_a + (1-a) x)**(-b_a); a = 1: h(x) = sigma omega exp(-x/2).
    """
    c = power_constants(a)
    if a == 1.0:
        om = c.omega

        def h(x):
            return sigma * om * np.exp(-np.asarray(x, dtype=float) / 2.0)

    else:
        lam, b, one_m = c.lambda_a, c.b_a, 1.0 - a

        def h(x):
            return sigma * (lam + one_m * np.asarray(x, dtype=float)) ** (-b)

    return h, c.gamma_a


# -- closed forms -------------------------------------------------------------


def bound_constant(kappa_bar: float, mu: float, sigma: float, alpha: float, n: int) -> float:
    """Bound for constant stepsizes alpha_n = alpha, with beta = 1 - alpha."""
    _check_common(kappa_bar, mu, sigma, n)
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    beta = 1.0 - alpha
    first = kappa_bar / math.sqrt(math.pi * alpha * beta * n)
    noise = 2.0 * mu * sigma * math.sqrt(alpha) / math.sqrt(1.0 + beta)
    return first + noise * (2.0 * math.sqrt(alpha * n / (math.pi * beta)) + alpha + 2.0)


def auto_alpha(n0: int) -> float:
    """alpha = 1 / (6 n0**(2/3)), the fixed-horizon choice."""
    if n0 < 1:
        raise DomainError("n0 must be >= 1")
    return 1.0 / (6.0 * n0 ** (2.0 / 3.0))


def fixed_horizon_rate(kappa_bar: float, mu: float, sigma: float, n0: int) -> float:
    """2 (kappa_bar + mu sigma) / n0**(1/6), valid at n0 with alpha = auto_alpha(n0)."""
    _check_common(kappa_bar, mu, sigma, n0)
    return 2.0 * (kappa_bar + mu * sigma) / n0 ** (1.0 / 6.0)


def bound_power(kappa_bar: float, mu: float, sigma: float, a: float, n: int) -> float:
    """Closed-form bound for alpha_n = 1/(n+1)**a, 1/2 <= a <= 1.

    a = 2/3 and a = 1 are detected by exact equality and use the logarithmic
    and Dawson forms respectively; other a < 1 use 2F1(b, 1/2; 3/2; z_n).
    """
    _check_common(kappa_bar, mu, sigma, n)
    if not 0.5 <= a <= 1.0:
        raise DomainError(f"a must lie in [1/2, 1], got {a!r}")
    s = StepsizeSchedule.power(a)
    c = power_constants(a)
    taus = s.tau_array(n)
    tau_n, tau_1 = float(taus[n]), float(taus[1])
    al = s.alpha(n)
    first = kappa_bar / math.sqrt(math.pi * tau_n)
    last = 2.0 * mu * sigma * (al + 2.0) * math.sqrt(al)
    span = tau_n - tau_1
    if a == 1.0:
        x = math.sqrt(max(tau_n - 0.25, 0.0) / 2.0)
        mid = 2.0 * math.sqrt(2.0) * mu * sigma * c.d_a / math.sqrt(math.pi) * dawson(x)
    elif a == 2.0 / 3.0:
        cc = 3.0 * c.lambda_a
        arg = 1.0 + 2.0 * (span + math.sqrt((cc + tau_n) * span)) / (cc + tau_1)
        mid = 6.0 * mu * sigma * c.gamma_a / (math.sqrt(math.pi) * math.sqrt(cc + tau_n)) * math.log(arg)
    else:
        b = c.b_a
        base = c.lambda_a + (1.0 - a) * tau_n
        z = (1.0 - a) * span / base
        mid = (
            4.0 * mu * sigma * c.gamma_a / math.sqrt(math.pi)
            * math.sqrt(span) / base**b
            * hyp2f1_half(b, z)
        )
    return first + mid + last


def asymptote_power(kappa_bar: float, mu: float, sigma: float, a: float, n: int) -> float:
    """Leading-order behaviour of bound_power as n grows."""
    _check_common(kappa_bar, mu, sigma, n)
    if not 0.5 <= a <= 1.0:
        raise DomainError(f"a must lie in [1/2, 1], got {a!r}")
    c = power_constants(a)
    if a == 1.0:
        if n < 2:
            raise DomainError("the a = 1 asymptote needs n >= 2")
        return (kappa_bar + 2.0 * mu * sigma * c.d_a) / math.sqrt(math.pi * math.log(n))
    if a == 2.0 / 3.0:
        return 2.0 * mu * sigma * c.gamma_a / math.sqrt(3.0 * math.pi) * math.log(n) / n ** (1.0 / 6.0)
    if a < 2.0 / 3.0:
        b = c.b_a
        ratio = math.gamma(1.0 - b) / math.gamma(1.5 - b)
        return 2.0 * mu * sigma * c.gamma_a / math.sqrt(1.0 - a) * ratio / n ** (a - 0.5)
    return (kappa_bar + 2.0 * mu * sigma * c.d_a) * math.sqrt((1.0 - a) / math.pi) / n ** ((1.0 - a) / 2.0)


# -- Euclidean random-iterate bounds ---------------------------------------


def bound_euclidean_sq(R: float, mu: float, variance, schedule: StepsizeSchedule, n: int) -> float:
    """(R**2 + mu**2 sum_{k<=n} alpha_k**2 theta_k**2) / tau_n.

    Bounds E||T xhat - xhat||**2 for the random iterate xhat drawn with
    probabilities alpha_k (1 - alpha_k) / tau_n.
    """
    if R < 0:
        raise DomainError("R must be nonnegative")
    if n < 1:
        raise DomainError("n must be >= 1")
    if not isinstance(variance, VarianceSchedule):
        variance = VarianceSchedule.bounded(float(variance))
    tau_n = float(schedule.tau_array(n)[n])
    if tau_n <= 0:
        raise PreconditionError("tau_n must be positive")
    al = schedule.alpha_array(n)[1:]
    th = variance.theta_array(n)[1:]
    return (R * R + mu * mu * math.fsum((al * al * th * th).tolist())) / tau_n


def bound_euclidean(R: float, mu: float, variance, schedule: StepsizeSchedule, n: int) -> float:
    """Square root of ``bound_euclidean_sq``; bounds E||T xhat - xhat||."""
    return math.sqrt(bound_euclidean_sq(R, mu, variance, schedule, n))


def euclidean_fixed_horizon(R: float, mu: float, sigma: float, n0: int) -> float:
    """Closed form for alpha = 1/sqrt(n0 + 1) at horizon n0."""
    if n0 < 1:
        raise DomainError("n0 must be >= 1")
    a1 = 2.0 ** -0.5
    tau1 = a1 * (1.0 - a1)
    return math.sqrt(R * R + (mu * sigma) ** 2) / (math.sqrt(tau1) * n0**0.25)


def euclidean_power(R: float, mu: float, sigma: float, a: float, n: int) -> float:
    """Closed forms for alpha_n = 1/(n+1)**a, 1/2 <= a <= 1."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if not 0.5 <= a <= 1.0:
        raise DomainError(f"a must lie in [1/2, 1], got {a!r}")
    ms2 = (mu * sigma) ** 2
    if a == 1.0:
        return 2.0 * math.sqrt(math.log(2.0)) * math.sqrt(R * R + ms2) / math.sqrt(math.log(n + 1.0))
    a1 = 2.0**-a
    tau1 = a1 * (1.0 - a1)
    if a == 0.5:
        return math.sqrt(R * R + ms2 * math.log(n + 1.0)) / (math.sqrt(tau1) * n**0.25)
    return math.sqrt(R * R + ms2 / (2.0 * a - 1.0)) / (math.sqrt(tau1) * n ** ((1.0 - a) / 2.0))


def high_prob_bound(b_n: float, p: float) -> float:
    """Markov: P(||x_n - T x_n|| >= b_n / p) <= p when E||x_n - T x_n|| <= b_n."""
    if b_n < 0:
        raise DomainError("b_n must be nonnegative")
    if not 0.0 < p < 1.0:
        raise DomainError("p must lie in (0, 1)")
    return b_n / p
