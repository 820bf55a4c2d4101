"""Additive noise models U_n for the stochastic iteration.

Scale convention: the ``scale`` (or theta_n) of a model is the root of the
full-vector second moment, E||U_n||_2**2 = scale**2.  Each coordinate is a
zero-mean, unit-variance draw multiplied by scale / sqrt(d).

``sample_block`` draws several consecutive steps in one call.  Every
distribution consumes the generator in the same element order as repeated
``sample`` calls, so block size never changes a trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .sequences import StepsizeSchedule, VarianceSchedule

__all__ = [
    "NoiseModel",
    "sample",
    "sample_block",
    "variance_at",
    "h3_partial_sums",
    "growth_theta",
    "parse_noise",
]

_DISTRIBUTIONS = ("gaussian", "rademacher", "uniform")
_SQRT3 = math.sqrt(3.0)


def _as_theta_array(fn, ns):
    ns = np.asarray(ns)
    try:
        vals = np.asarray(fn(ns), dtype=float)
        if vals.shape != ns.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array([float(fn(int(k))) for k in ns.ravel()]).reshape(ns.shape)
    return vals


@dataclass(frozen=True)
class NoiseModel:
    """Martingale-difference or vanishing noise in dimension ``dim``.

    kind is one of ``none``, ``iid``, ``scheduled_iid``, ``vanishing``.
    ``theta`` (scheduled_iid) and ``decay`` (vanishing) are callables
    n -> level, vectorized over integer arrays where possible.
    """

    kind: str
    dim: int
    distribution: str = "gaussian"
    scale: float = 0.0
    theta: Optional[Callable] = None
    decay: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("none", "iid", "scheduled_iid", "vanishing"):
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if self.distribution not in _DISTRIBUTIONS:
            raise DomainError(f"unknown distribution {self.distribution!r}")
        if self.kind == "iid" and self.scale < 0:
            raise DomainError("noise scale must be nonnegative")
        if self.kind == "scheduled_iid" and self.theta is None:
            raise DomainError("scheduled_iid needs theta")
        if self.kind == "vanishing" and self.decay is None:
            raise DomainError("vanishing noise needs decay")

    @classmethod
    def none(cls, dim):
        return cls("none", dim)

    @classmethod
    def iid(cls, dim, scale, distribution="gaussian"):
        return cls("iid", dim, distribution, float(scale))

    @classmethod
    def scheduled(cls, dim, theta, distribution="gaussian"):
        return cls("scheduled_iid", dim, distribution, theta=theta)

    @classmethod
    def vanishing(cls, dim, decay, distribution="gaussian"):
        return cls("vanishing", dim, distribution, decay=decay)

    def levels(self, ns) -> np.ndarray:
        """theta_n for an array of step indices."""
        ns = np.asarray(ns)
        if self.kind == "none":
            return np.zeros(ns.shape)
        if self.kind == "iid":
            return np.full(ns.shape, self.scale)
        fn = self.theta if self.kind == "scheduled_iid" else self.decay
        vals = _as_theta_array(fn, ns)
        if np.any(vals < 0):
            raise DomainError("noise level must be nonnegative")
        return vals

    def variance_schedule(self) -> VarianceSchedule:
        if self.kind == "none":
            return VarianceSchedule.bounded(0.0)
        if self.kind == "iid":
            return VarianceSchedule.bounded(self.scale)
        return VarianceSchedule.sequence(self.levels)

    @property
    def is_martingale(self) -> bool:
        return self.kind in ("iid", "scheduled_iid")


def _standard(distribution, rng, shape):
    if distribution == "gaussian":
        return rng.standard_normal(shape)
    if distribution == "rademacher":
        return np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return _SQRT3 * (2.0 * rng.random(shape) - 1.0)


def sample_block(m: NoiseModel, n_start: int, count: int, rng) -> np.ndarray:
    """U_n for n = n_start .. n_start+count-1, shape (count, dim)."""
    if n_start < 1:
        raise DomainError("noise is indexed from n = 1")
    if m.kind == "none":
        return np.zeros((count, m.dim))
    base = _standard(m.distribution, rng, (count, m.dim))
    lev = m.levels(np.arange(n_start, n_start + count)) / math.sqrt(m.dim)
    return base * lev[:, None]


def sample(m: NoiseModel, n: int, rng) -> np.ndarray:
    """One draw of U_n."""
    return sample_block(m, n, 1, rng)[0]


def variance_at(m: NoiseModel, n: int) -> float:
    """E||U_n||_2**2."""
    if n < 1:
        raise DomainError("noise is indexed from n = 1")
    return float(m.levels(np.array([n]))[0] ** 2)


def h3_partial_sums(m: NoiseModel, s: StepsizeSchedule, n: int) -> np.ndarray:
    """Partial sums of alpha_k * theta_k, k = 1..n.

    theta_k majorizes E||U_k||_2 by Jensen, so a bounded sequence here
    certifies the summability condition for vanishing noise.
    """
    ks = np.arange(1, n + 1)
    return np.cumsum(s.alpha(ks) * m.levels(ks))


def growth_theta(s: StepsizeSchedule, zeta: float):
    """theta_n = zeta * tau_{n-1}: the variance growth met by Q-learning noise."""

    def theta(ns):
        ns = np.asarray(ns)
        taus = s.tau_array(int(np.max(ns)))
        return zeta * taus[ns - 1]

    return theta


def parse_noise(spec: str, dim: int) -> NoiseModel:
    """Parse ``none`` or ``<distribution>:<scale>`` (e.g. ``gaussian:1.0``)."""
    spec = spec.strip().lower()
    if spec == "none":
        return NoiseModel.none(dim)
    dist, sep, scale = spec.partition(":")
    if not sep or dist not in _DISTRIBUTIONS:
        raise DomainError(f"noise spec must be 'none' or '<{'|'.join(_DISTRIBUTIONS)}>:<scale>', got {spec!r}")
    try:
        value = float(scale)
    except ValueError:
        raise DomainError(f"bad noise scale {scale!r}") from None
    if value < 0:
        raise DomainError("noise scale must be nonnegative")
    return NoiseModel.iid(dim, value, dist)
