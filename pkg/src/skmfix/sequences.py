"""Stepsize schedules and the scalar sequences derived from them.

All arrays returned here are indexed by the iteration counter: entry ``k`` of
``tau_array(n)`` is tau_k, with tau_0 = 0, and so on.  Index 0 of
``alpha_array`` holds ``nan`` since there is no alpha_0.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

__all__ = [
    "StepsizeSchedule",
    "VarianceSchedule",
    "PowerConstants",
    "tau",
    "sigma_fn",
    "pi_weights",
    "delta_sq",
    "nu",
    "nu_array",
    "power_constants",
    "parse_exponent",
    "linear_recursion",
]

_GAMMA_SCAN_LIMIT = 10**4


def linear_recursion(coef, forcing, y0=0.0):
    """Return y with y[0] = y0 and y[k] = coef[k] * y[k-1] + forcing[k].

    ``coef[0]`` and ``forcing[0]`` are ignored.  The loop is sequential by
    nature; it runs over Python floats, which is faster than numpy scalars.
    """
    c = np.asarray(coef, dtype=float).tolist()
    f = np.asarray(forcing, dtype=float).tolist()
    out = [0.0] * len(c)
    y = float(y0)
    out[0] = y
    for k in range(1, len(c)):
        y = c[k] * y + f[k]
        out[k] = y
    return np.array(out)


class StepsizeSchedule:
    """Averaging stepsizes alpha_n for n >= 1.

    Two families are supported: ``power`` with alpha_n = 1/(n+1)**a for
    a in (0, 1], and ``constant`` with alpha_n = alpha in (0, 1).

    Derived sequences (tau_n, delta_n**2) are cached in arrays that grow on
    demand.  Reads are safe from several threads; growth takes a lock.
    """

    def __init__(self, kind: str, param: float):
        if kind == "power":
            if not (0.0 < param <= 1.0):
                raise DomainError(f"power exponent a must lie in (0, 1], got {param!r}")
        elif kind == "constant":
            if not (0.0 < param < 1.0):
                raise DomainError(f"constant stepsize must lie in (0, 1), got {param!r}")
        else:
            raise DomainError(f"unknown schedule kind {kind!r}")
        self.kind = kind
        self.param = float(param)
        self._lock = threading.Lock()
        self._tau = np.zeros(1)
        self._dsq = np.zeros(1)

    @classmethod
    def power(cls, a: float) -> "StepsizeSchedule":
        return cls("power", a)

    @classmethod
    def constant(cls, alpha: float) -> "StepsizeSchedule":
        return cls("constant", alpha)

    @property
    def a(self) -> Optional[float]:
        return self.param if self.kind == "power" else None

    def __repr__(self):
        name = "a" if self.kind == "power" else "alpha"
        return f"StepsizeSchedule.{self.kind}({name}={self.param!r})"

    def __eq__(self, other):
        return (
            isinstance(other, StepsizeSchedule)
            and self.kind == other.kind
            and self.param == other.param
        )

    def __hash__(self):
        return hash((self.kind, self.param))

    def alpha(self, n):
        """alpha_n for an integer or an integer array ``n >= 1``."""
        n_arr = np.asarray(n)
        if np.any(n_arr < 1):
            raise DomainError("alpha_n is defined for n >= 1")
        if self.kind == "power":
            out = (n_arr + 1.0) ** (-self.param)
        else:
            out = np.full(n_arr.shape, self.param)
        return float(out) if out.ndim == 0 else out

    def alpha_array(self, n: int) -> np.ndarray:
        """Array of length n+1 holding [nan, alpha_1, ..., alpha_n]."""
        out = np.empty(n + 1)
        out[0] = np.nan
        if n:
            out[1:] = self.alpha(np.arange(1, n + 1))
        return out

    def _extend(self, n: int) -> None:
        if n < len(self._tau):
            return
        with self._lock:
            have = len(self._tau) - 1
            if n <= have:
                return
            target = max(n, 2 * have, 64)
            al = self.alpha(np.arange(have + 1, target + 1))
            incr = al * (1.0 - al)
            # extended-precision running sum keeps tau accurate to ~1e-15 relative
            tau_new = self._tau[-1] + np.cumsum(incr.astype(np.longdouble))
            c = np.concatenate(([0.0], (1.0 - al) ** 2))
            f = np.concatenate(([0.0], al**2))
            dsq_new = linear_recursion(c, f, self._dsq[-1])[1:]
            dsq = np.concatenate((self._dsq, dsq_new))
            tau_arr = np.concatenate((self._tau, tau_new.astype(float)))
            # publish delta_sq first: readers gate on len(_tau)
            self._dsq = dsq
            self._tau = tau_arr

    def tau_array(self, n: int) -> np.ndarray:
        self._extend(n)
        return self._tau[: n + 1]

    def delta_sq_array(self, n: int) -> np.ndarray:
        self._extend(n)
        return self._dsq[: n + 1]


class VarianceSchedule:
    """Noise level theta_n, the root of E||U_n||_2**2.

    ``bounded(sigma)`` means theta_n = sigma for every n.  ``sequence(theta)``
    takes a callable n -> theta_n; it is called with integer numpy arrays when
    possible and falls back to elementwise calls otherwise.
    """

    def __init__(self, kind: str, sigma: float = 0.0, theta: Optional[Callable] = None):
        if kind == "bounded":
            if sigma < 0:
                raise DomainError("sigma must be nonnegative")
        elif kind == "sequence":
            if theta is None:
                raise DomainError("sequence variance needs a theta callable")
        else:
            raise DomainError(f"unknown variance kind {kind!r}")
        self.kind = kind
        self.sigma = float(sigma)
        self._theta = theta

    @classmethod
    def bounded(cls, sigma: float) -> "VarianceSchedule":
        return cls("bounded", sigma=sigma)

    @classmethod
    def sequence(cls, theta: Callable) -> "VarianceSchedule":
        return cls("sequence", theta=theta)

    def theta_array(self, n: int) -> np.ndarray:
        """[0, theta_1, ..., theta_n]."""
        if self.kind == "bounded":
            out = np.full(n + 1, self.sigma)
            out[0] = 0.0
            return out
        ks = np.arange(1, n + 1)
        try:
            vals = np.asarray(self._theta(ks), dtype=float)
            if vals.shape != ks.shape:
                raise TypeError
        except (TypeError, ValueError):
            vals = np.array([float(self._theta(int(k))) for k in ks])
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise DomainError("theta_n must be finite and nonnegative")
        return np.concatenate(([0.0], vals))

    def __repr__(self):
        if self.kind == "bounded":
            return f"VarianceSchedule.bounded({self.sigma!r})"
        return f"VarianceSchedule.sequence({self._theta!r})"


def tau(s: StepsizeSchedule, n: int) -> float:
    """tau_n = sum_{k<=n} alpha_k (1 - alpha_k); tau_0 = 0."""
    if n < 0:
        raise DomainError("tau_n needs n >= 0")
    return float(s.tau_array(n)[n])


def sigma_fn(y):
    """min(1, 1/sqrt(pi*y)), with the value 1 at y = 0."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0):
        raise DomainError("sigma(y) needs y >= 0")
    with np.errstate(divide="ignore"):
        out = np.minimum(1.0, 1.0 / np.sqrt(np.pi * y_arr))
    return float(out) if out.ndim == 0 else out


def pi_weights(s: StepsizeSchedule, n: int) -> np.ndarray:
    """Weights pi_k^n = alpha_k prod_{i=k+1}^n (1 - alpha_i) for k = 1..n."""
    if n < 1:
        raise DomainError("pi weights need n >= 1")
    al = s.alpha_array(n)[1:]
    # suffix products of (1 - alpha_i), i > k
    tail = np.ones(n)
    tail[:-1] = np.cumprod((1.0 - al[::-1])[:-1])[::-1]
    return al * tail


def delta_sq(s: StepsizeSchedule, n: int) -> float:
    """delta_n**2 = sum_k (pi_k^n)**2, by the forward recursion."""
    if n < 1:
        raise DomainError("delta_n needs n >= 1")
    return float(s.delta_sq_array(n)[n])


def nu_array(s: StepsizeSchedule, v: VarianceSchedule, n: int) -> np.ndarray:
    """[nu_0, ..., nu_n] with nu_n**2 = sum_k (pi_k^n)**2 theta_k**2."""
    if v.kind == "bounded":
        return v.sigma * np.sqrt(s.delta_sq_array(n))
    al = s.alpha_array(n)
    th = v.theta_array(n)
    c = (1.0 - al) ** 2
    f = (al * th) ** 2
    c[0] = f[0] = 0.0
    return np.sqrt(linear_recursion(c, f))


def nu(s: StepsizeSchedule, v: VarianceSchedule, n: int) -> float:
    if n < 0:
        raise DomainError("nu_n needs n >= 0")
    return float(nu_array(s, v, n)[n])


@dataclass(frozen=True)
class PowerConstants:
    """Closed-form constants attached to alpha_n = 1/(n+1)**a.

    ``b_a`` and ``lambda_a`` are None at a = 1; ``d_a`` is None for
    a <= 2/3 where its formula has no meaning; ``omega`` is set only at a = 1.
    """

    a: float
    b_a: Optional[float]
    lambda_a: Optional[float]
    gamma_a: float
    gamma_argmax: int
    d_a: Optional[float]
    omega: Optional[float]


def _gamma_scan(a: float):
    k = np.arange(2, _GAMMA_SCAN_LIMIT + 1, dtype=float)
    ratio = ((k + 2) / (k + 1)) ** (2 * a) * np.expm1(a * np.log(k + 1)) / np.expm1(
        a * np.log(k + 2)
    )
    i = int(np.argmax(ratio))
    past = np.diff(ratio[i:])
    if np.any(past > 1e-15 * ratio[i]):
        raise AssertionError(f"ratio not monotone past its peak for a={a}")
    return float(ratio[i]), int(k[i])


def power_constants(a: float) -> PowerConstants:
    """Constants b_a, lambda_a, gamma_a, d_a (and omega at a = 1)."""
    if not (0.5 <= a <= 1.0):
        raise DomainError(f"a must lie in [1/2, 1], got {a!r}")
    gamma_a, k_star = _gamma_scan(a)
    if a == 1.0:
        omega = math.sqrt(3.0) / 2.0 * math.exp(17.0 / 72.0)
        d1 = math.sqrt(3.0) * math.exp(1.0 / 9.0) * 32.0 / 27.0
        return PowerConstants(1.0, None, None, gamma_a, k_star, d1, omega)
    s = StepsizeSchedule.power(a)
    b = a / (2.0 * (1.0 - a))
    lam = (3.0 ** (a / 2) - 3.0 ** (-a / 2)) ** (2.0 * (1.0 - a) / a) - (1.0 - a) * tau(s, 2)
    d_a = None
    if a > 2.0 / 3.0:
        d_a = 2.0 * gamma_a / (3.0 * a - 2.0) * (lam + (1.0 - a) * tau(s, 1)) ** (1.0 - b)
    return PowerConstants(a, b, lam, gamma_a, k_star, d_a, None)


def parse_exponent(token) -> float:
    """Parse '2/3', '1', '0.8' into a float; '2/3' yields exactly 2/3 in binary."""
    if isinstance(token, (int, float)):
        return float(token)
    return float(Fraction(str(token).strip()))
