"""Special functions used by the power-stepsize bounds.

``hyp2f1_half(b, z)`` is Gauss' 2F1(b, 1/2; 3/2; z) and ``dawson(x)`` is
D+(x) = exp(-x**2) * int_0^x exp(y**2) dy.
"""

import math

import numpy as np
from scipy import integrate

from .errors import DomainError

__all__ = ["hyp2f1_half", "dawson", "adaptive_quad"]

# series/continued-fraction switch point for dawson
_DAWSON_SWITCH = 4.0


def adaptive_quad(func, lo, hi, rel_tol=1e-9, abs_tol=0.0, limit=500):
    """Adaptive Gauss-Kronrod quadrature of a smooth integrand on [lo, hi].

    Raises RuntimeError when the error estimate misses the requested
    tolerance.
    """
    if hi == lo:
        return 0.0
    val, err = integrate.quad(func, lo, hi, epsabs=abs_tol, epsrel=rel_tol, limit=limit)
    if err > max(abs_tol, rel_tol * abs(val)) * 10:
        raise RuntimeError(f"quadrature error estimate {err:.3g} too large for value {val:.6g}")
    return val


def hyp2f1_half(b: float, z: float) -> float:
    """2F1(b, 1/2; 3/2; z) for b > 0 and 0 <= z < 1.

    Uses 2F1 = (1/2) int_0^1 y**(-1/2) (1 - z y)**(-b) dy; substituting
    y = t**2 gives int_0^1 (1 - z t**2)**(-b) dt, whose integrand is smooth.
    """
    if b <= 0:
        raise DomainError(f"b must be positive, got {b!r}")
    if not (0.0 <= z < 1.0):
        raise DomainError(f"z must lie in [0, 1), got {z!r}")
    if z == 0.0:
        return 1.0

    def integrand(t):
        return math.exp(-b * math.log1p(-z * t * t))

    # the integrand peaks at t = 1; pointing quad at the knee speeds it up
    knee = max(0.0, 1.0 - math.sqrt(1.0 - z))
    if 0.0 < knee < 1.0:
        return adaptive_quad(integrand, 0.0, knee, rel_tol=1e-13) + adaptive_quad(
            integrand, knee, 1.0, rel_tol=1e-13
        )
    return adaptive_quad(integrand, 0.0, 1.0, rel_tol=1e-13)


def _dawson_series(x):
    # exp(-x^2) * sum_k x^(2k+1) / (k! (2k+1)); all terms positive
    x2 = x * x
    term = x
    total = x
    k = 0
    while True:
        k += 1
        term *= x2 / k
        t = term / (2 * k + 1)
        total += t
        if t <= 1e-17 * total:
            break
    return math.exp(-x2) * total


def _dawson_cf(x, tol=1e-16, max_iter=10_000):
    # D(x) = x / (1 + 2x^2 - 4x^2 / (3 + 2x^2 - 8x^2 / (5 + 2x^2 - ...))), modified Lentz
    x2 = x * x
    tiny = 1e-300
    f = 1.0 + 2.0 * x2
    c = f
    d = 0.0
    for k in range(1, max_iter):
        an = -4.0 * k * x2
        bn = 2.0 * k + 1.0 + 2.0 * x2
        d = bn + an * d
        d = 1.0 / (d if d != 0.0 else tiny)
        c = bn + an / c
        if c == 0.0:
            c = tiny
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < tol:
            return x / f
    raise RuntimeError(f"dawson continued fraction did not converge at x={x}")


def dawson(x):
    """Dawson's integral D+(x) for x >= 0 (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("dawson is implemented for x >= 0")
    flat = [
        0.0 if v == 0.0 else (_dawson_series(v) if v <= _DAWSON_SWITCH else _dawson_cf(v))
        for v in arr.ravel().tolist()
    ]
    out = np.array(flat).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out
