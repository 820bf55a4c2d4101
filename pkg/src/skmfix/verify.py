"""Numerical verification suites driven by ``skmfix verify``.

Each suite returns a list of ``Check(name, passed, detail)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import bounds as B
from .mdp import Stabilizer, benchmark_rbar_iteration, coupling_deviation, duff_mdp
from .sequences import StepsizeSchedule, power_constants
from .specfun import dawson, hyp2f1_half

__all__ = ["Check", "SUITES", "run_suite", "stepsize_suite", "specfun_suite", "coupling_suite", "bounds_suite"]

REL_SLACK = 1e-12


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


def exponent_grid(points: int = 21) -> np.ndarray:
    return np.linspace(0.5, 1.0, points)


def xi_increments(a: float, n: int) -> np.ndarray:
    """xi_k - xi_{k-1} for k = 3..n, where xi_k = ((1-alpha_k)/sqrt(alpha_k))**(2(1-a)/a) - (1-a) tau_k.

    Uses xi_k - xi_{k-1} = F(k+1) - F(k) - (1-a) alpha_k (1 - alpha_k) with
    F(x) = (x**(a/2) - x**(-a/2))**(2(1-a)/a), and evaluates F(k+1) - F(k)
    through logarithms to avoid cancellation.
    """
    k = np.arange(3, n + 1, dtype=float)
    c = 2.0 * (1.0 - a) / a

    def logF(x):
        return (1.0 - a) * np.log(x) + c * np.log1p(-(x ** -a))

    dlog = (1.0 - a) * np.log1p(1.0 / k) + c * (np.log1p(-((k + 1) ** -a)) - np.log1p(-(k**-a)))
    dF = np.exp(logF(k)) * np.expm1(dlog)
    al = (k + 1) ** -a
    return dF - (1.0 - a) * al * (1.0 - al)


def _count(bad):
    return int(np.count_nonzero(bad))


def stepsize_suite(fast: bool = False):
    """Sweeps of the stepsize inequalities over a 21-point exponent grid."""
    n = 10**4 if fast else 10**5
    viol = {"delta_sq": 0, "xi_monotone": 0, "alpha_vs_tau": 0, "delta_vs_alpha": 0, "tau_lower": 0}
    for a in exponent_grid():
        a = float(a)
        s = StepsizeSchedule.power(a)
        al = s.alpha_array(n + 1)
        dsq = s.delta_sq_array(n)
        taus = s.tau_array(n)
        ks = np.arange(1, n + 1)
        lo = 0.5 * al[ks]
        viol["delta_sq"] += _count(dsq[ks] < lo * (1 - REL_SLACK))
        viol["delta_sq"] += _count(dsq[ks] > al[ks + 1] * (1 + REL_SLACK))
        viol["delta_sq"] += _count(al[ks + 1] > al[ks])
        k2 = np.arange(2, n + 1)
        lhs = np.sqrt(al[k2]) / (1.0 - al[k2])
        viol["delta_vs_alpha"] += _count(np.sqrt(dsq[k2 - 1]) > np.sqrt(al[k2]) * (1 + REL_SLACK))
        if a < 1.0:
            c = power_constants(a)
            rhs = (c.lambda_a + (1.0 - a) * taus[k2]) ** (-c.b_a)
            viol["alpha_vs_tau"] += _count(lhs > rhs * (1 + REL_SLACK))
            inc = xi_increments(a, n)
            xi_scale = (1.0 - a) * taus[3:]
            viol["xi_monotone"] += _count(inc < -REL_SLACK * xi_scale)
            viol["tau_lower"] += _count(taus[ks] < taus[1] * ks ** (1.0 - a) * (1 - REL_SLACK))
        else:
            c = power_constants(1.0)
            rhs = c.omega * np.exp(-taus[k2] / 2.0)
            viol["alpha_vs_tau"] += _count(lhs > rhs * (1 + REL_SLACK))
            viol["tau_lower"] += _count(taus[ks] < np.log(ks + 1.0) / (4.0 * math.log(2.0)) * (1 - REL_SLACK))
    labels = {
        "delta_sq": "alpha_n/2 <= delta_n^2 <= alpha_{n+1} <= alpha_n",
        "delta_vs_alpha": "delta_{n-1} <= sqrt(alpha_n)",
        "alpha_vs_tau": "sqrt(alpha_n)/(1-alpha_n) <= phi(tau_n)",
        "xi_monotone": "xi_n nondecreasing",
        "tau_lower": "tau_n lower bounds",
    }
    return [Check(labels[k], v == 0, f"{v} violations, n <= {n}, 21 exponents") for k, v in viol.items()]


def hyp2f1_series(b, z, terms: int = 10**4, dps: int = 30):
    """Direct power series of 2F1(b, 1/2; 3/2; z) in extended precision."""
    import mpmath

    with mpmath.workdps(dps):
        b = mpmath.mpf(b)
        z = mpmath.mpf(z)
        term = mpmath.mpf(1)
        total = mpmath.mpf(1)
        eps = mpmath.mpf(10) ** (-dps + 5)
        for k in range(terms):
            # ratio of consecutive terms: (b+k)(1/2+k) / ((3/2+k)(1+k)) z
            term *= (b + k) * (k + mpmath.mpf(1) / 2) / ((k + mpmath.mpf(3) / 2) * (k + 1)) * z
            total += term
            if abs(term) < eps * total:
                break
        return float(total)


def dawson_quad(x, dps: int = 30):
    """exp(-x^2) int_0^x exp(y^2) dy by extended-precision quadrature."""
    import mpmath

    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        return float(mpmath.exp(-x * x) * mpmath.quad(lambda y: mpmath.exp(y * y), [0, x / 2, x]))


def specfun_suite(fast: bool = False, seed: int = 2024):
    rng = np.random.default_rng(seed)
    m = 25 if fast else 100
    bs = rng.uniform(0.5, 10.0, m)
    zs = rng.uniform(0.0, 0.99, m)
    worst_h = max(abs(hyp2f1_half(b, z) / hyp2f1_series(b, z) - 1.0) for b, z in zip(bs, zs))
    xs = rng.uniform(0.0, 20.0, m)
    worst_d = max(abs(dawson(x) / dawson_quad(x) - 1.0) for x in xs)
    zz = np.linspace(0.01, 0.99, 50)
    closed = [1.0 / (2 * math.sqrt(z)) * math.log((1 + math.sqrt(z)) / (1 - math.sqrt(z))) for z in zz]
    worst_b1 = max(abs(hyp2f1_half(1.0, z) / c - 1.0) for z, c in zip(zz, closed))
    big = 2 * 1e6 * dawson(1e6)
    return [
        Check("2F1(b,1/2;3/2;z) vs series", worst_h <= 1e-10, f"max rel err {worst_h:.2e} over {m} points"),
        Check("Dawson vs quadrature", worst_d <= 1e-12, f"max rel err {worst_d:.2e} over {m} points"),
        Check("2F1 at b = 1 vs log form", worst_b1 <= 1e-12, f"max rel err {worst_b1:.2e}"),
        Check("2x D(x) -> 1", abs(big - 1) < 1e-9, f"2x D(x) at 1e6 = {big!r}"),
    ]


def coupling_suite(fast: bool = False):
    m = duff_mdp()
    n = 300 if fast else 1000
    out = []
    for f in (Stabilizer("max"), Stabilizer("mean"), Stabilizer("component", 0, 0)):
        dev, _ = coupling_deviation(m, 1.0, f, None, n, seed=11)
        out.append(Check(f"Q_n - Q_n^rbar = c_n e ({f})", dev <= 1e-9, f"max deviation {dev:.2e}, n = {n}"))
    try:
        tr = benchmark_rbar_iteration(m, 1.0, None, n, seed=11, stride=1, debug=True)
        noise_ok, msg = True, "asserted every step"
    except AssertionError as exc:
        tr = benchmark_rbar_iteration(m, 1.0, None, n, seed=11, stride=1)
        noise_ok, msg = False, str(exc)
    norms = np.abs(tr.q[0]).max(axis=(-2, -1))
    al = StepsizeSchedule.power(1.0).alpha_array(n)
    grow = norms[1:] > norms[:-1] + m.g_max * al[1:] + 1e-12
    out.append(Check("||Q_n^rbar|| growth", not grow.any(), f"{int(grow.sum())} violations"))
    out.append(Check("noise bound g_max + 2||Q^rbar_{n-1}||", noise_ok, msg))
    return out


def bounds_suite(fast: bool = False):
    out = []
    worst = 0.0
    ns = (100, 1000) if fast else (100, 1000, 10000)
    for a in (0.55, 2.0 / 3.0, 0.8, 1.0):
        s = StepsizeSchedule.power(a)
        h, g = B.power_h(a, 1.0)
        p = B.BoundParams(1.0, 1.0, 1.0, s)
        for n in ns:
            r = math.sqrt(s.alpha(n))
            conv = B.bound_convolution(p, h, g, n, nu_prev=r, nu_last=r)
            worst = max(worst, abs(B.bound_power(1.0, 1.0, 1.0, a, n) / conv - 1.0))
    out.append(Check("power closed form vs convolution", worst <= 1e-6, f"max rel diff {worst:.2e}"))
    lim = 2 * math.sqrt(2 * math.pi) * power_constants(0.5).gamma_a
    v = B.bound_power(0.0, 1.0, 1.0, 0.5, 10**6)
    out.append(Check("a = 1/2 limit", abs(v / lim - 1) < 0.05, f"{v:.4f} vs {lim:.4f}"))
    ratio = B.bound_power(1.0, 1.0, 1.0, 0.8, 10**6) / B.asymptote_power(1.0, 1.0, 1.0, 0.8, 10**6)
    out.append(Check("a = 0.8 bound / asymptote", 0.5 <= ratio <= 2.0, f"{ratio:.4f}"))
    fh = B.fixed_horizon_rate(1.0, 1.0, 1.0, 10**6)
    out.append(Check("fixed-horizon rate at 1e6", abs(fh - 0.4) < 1e-12, f"{fh!r}"))
    b = 0.3
    out.append(Check("Markov bound", abs(B.high_prob_bound(b, 0.05) - 6.0) < 1e-12, ""))
    return out


SUITES = {
    # the suite token is part of the command-line interface
    "appendixB": stepsize_suite,
    "specfun": specfun_suite,
    "coupling": coupling_suite,
    "bounds": bounds_suite,
}


def run_suite(name: str, fast: bool = False):
    if name not in SUITES:
        raise KeyError(name)
    t0 = time.perf_counter()
    checks = SUITES[name](fast=fast)
    return checks, time.perf_counter() - t0
