"""Norms and a small library of nonexpansive operators.

Operators act on the last axis of an array, so a batch of points of shape
``(R, d)`` is mapped in one call.  They are pure: evaluation noise is added by
the iteration engine, never inside ``evaluate``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

__all__ = [
    "NormSpec",
    "NonexpansiveOperator",
    "NonexpansiveReport",
    "apply",
    "residual",
    "check_nonexpansive",
    "sgd_quadratic",
    "planar_rotation",
    "box_affine",
    "identity",
    "scaling",
    "random_orthogonal",
]

VIOLATION_SLACK = 1e-9


@dataclass(frozen=True)
class NormSpec:
    """A norm on R^d together with mu such that ||x|| <= mu ||x||_2."""

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("l2", "linf", "l1"):
            raise DomainError(f"unknown norm kind {self.kind!r}")

    @property
    def mu(self) -> float:
        return math.sqrt(self.dim) if self.kind == "l1" else 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "l2":
            out = np.sqrt(np.einsum("...i,...i->...", x, x))
        elif self.kind == "linf":
            out = np.max(np.abs(x), axis=-1)
        else:
            out = np.sum(np.abs(x), axis=-1)
        return float(out) if np.ndim(out) == 0 else out


@dataclass
class NonexpansiveOperator:
    """A map T: R^d -> R^d declared nonexpansive in ``norm``.

    ``fix_projection`` (optional) maps a point to a nearest fixed point in the
    declared norm, which gives dist(x, Fix T).  ``range_bound`` (optional)
    returns sup_x ||T x - x0|| for a given x0 when T has bounded range.
    ``info`` carries factory-specific data such as the matrix of a quadratic.
    """

    dim: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    norm: NormSpec
    name: str = "operator"
    fixed_point: Optional[np.ndarray] = None
    fix_projection: Optional[Callable[[np.ndarray], np.ndarray]] = None
    range_bound: Optional[Callable[[np.ndarray], float]] = None
    info: dict = field(default_factory=dict)

    def __call__(self, x):
        return apply(self, x)

    def dist_to_fix(self, x) -> float:
        if self.fix_projection is not None:
            return self.norm(np.asarray(x, float) - self.fix_projection(x))
        if self.fixed_point is not None:
            # any fixed point gives an upper bound on the distance
            return self.norm(np.asarray(x, float) - self.fixed_point)
        raise DomainError(f"{self.name}: no fixed-point information declared")


@dataclass(frozen=True)
class NonexpansiveReport:
    max_ratio: float
    violations: int
    n_pairs: int


def apply(op: NonexpansiveOperator, x) -> np.ndarray:
    """T x for a point or a batch of points along the last axis."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (op.dim,):
        raise ValueError(f"{op.name}: expected last dimension {op.dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{op.name}: input has non-finite entries")
    out = np.asarray(op.evaluate(x), dtype=float)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"{op.name}: operator returned non-finite values")
    return out


def residual(op: NonexpansiveOperator, x, norm: Optional[NormSpec] = None):
    """||x - T x|| in ``norm`` (the operator's own norm by default)."""
    x = np.asarray(x, dtype=float)
    norm = norm or op.norm
    return norm(x - apply(op, x))


def check_nonexpansive(
    op: NonexpansiveOperator,
    norm: Optional[NormSpec] = None,
    n_pairs: int = 10_000,
    rng_seed: int = 0,
    center=None,
) -> NonexpansiveReport:
    """Sample random pairs and report the largest ||Tx - Ty|| / ||x - y||.

    Pairs are drawn around ``center`` (the declared fixed point if any) at
    log-uniform scales between 1e-2 and 1e2, and half of them as close pairs,
    so both global and local behaviour is probed.
    """
    if n_pairs < 1:
        raise DomainError("n_pairs must be >= 1")
    norm = norm or op.norm
    rng = np.random.default_rng(rng_seed)
    d = op.dim
    if center is None:
        center = op.fixed_point if op.fixed_point is not None else np.zeros(d)
    scales = 10.0 ** rng.uniform(-2, 2, size=(n_pairs, 1))
    x = center + scales * rng.standard_normal((n_pairs, d))
    gap = scales * rng.standard_normal((n_pairs, d))
    close = rng.random(n_pairs) < 0.5
    gap[close] *= 1e-3
    y = x + gap
    num = norm(apply(op, x) - apply(op, y))
    den = norm(x - y)
    ok = den > 0
    ratio = np.where(ok, num / np.where(ok, den, 1.0), 0.0)
    return NonexpansiveReport(
        max_ratio=float(np.max(ratio)),
        violations=int(np.sum(ratio > 1.0 + VIOLATION_SLACK)),
        n_pairs=n_pairs,
    )


def random_orthogonal(d: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def sgd_quadratic(d: int = 10, L: float = 1.0, seed: int = 0, A=None, b=None, eig_range=(0.1, 1.0)):
    """T x = x - (2/L) grad f(x) for f(x) = x'Ax/2 - b'x with 0 <= A <= L I.

    Without ``A`` a random symmetric matrix is built with eigenvalues drawn
    uniformly in ``eig_range`` (as fractions of L) and a random minimizer.
    For a singular ``A`` the fixed-point set is the affine set A x = b; the
    projection onto it uses the pseudo-inverse.
    """
    rng = np.random.default_rng(seed)
    if A is None:
        q = random_orthogonal(d, rng)
        lo, hi = eig_range
        eig = np.sort(rng.uniform(lo, hi, size=d)) * L
        A = (q * eig) @ q.T
        A = 0.5 * (A + A.T)
        x_star = rng.standard_normal(d)
        b = A @ x_star
    else:
        A = np.asarray(A, dtype=float)
        d = A.shape[0]
        eig = np.linalg.eigvalsh(A)
        if eig[0] < -1e-12 or eig[-1] > L * (1 + 1e-12):
            raise DomainError("A must satisfy 0 <= A <= L I")
        b = np.zeros(d) if b is None else np.asarray(b, dtype=float)
    A_pinv = np.linalg.pinv(A, hermitian=True)
    x_star = A_pinv @ b
    if not np.allclose(A @ x_star, b, atol=1e-10):
        raise DomainError("b is not in the range of A: f has no minimizer")
    null_proj = np.eye(d) - A_pinv @ A

    def evaluate(x):
        return x - (2.0 / L) * (x @ A - b)

    def fix_projection(x):
        x = np.asarray(x, float)
        return x_star + (x - x_star) @ null_proj

    def gradient(x):
        return np.asarray(x, float) @ A - b

    return NonexpansiveOperator(
        dim=d,
        evaluate=evaluate,
        norm=NormSpec("l2", d),
        name="sgd-quadratic",
        fixed_point=x_star,
        fix_projection=fix_projection,
        info={"A": A, "b": b, "L": L, "gradient": gradient},
    )


def planar_rotation(angle: float, d: int = 2):
    """Rotate each coordinate pair (x1, x2), (x3, x4), ... by ``angle``.

    An odd trailing coordinate is negated.  The map is an l2 isometry with
    Fix = {0} whenever the angle is not a multiple of 2 pi.
    """
    c, s = math.cos(angle), math.sin(angle)
    m = np.eye(d)
    for i in range(0, d - 1, 2):
        m[i : i + 2, i : i + 2] = [[c, -s], [s, c]]
    if d % 2:
        m[-1, -1] = -1.0
    mt = m.T.copy()
    return NonexpansiveOperator(
        dim=d,
        evaluate=lambda x: x @ mt,
        norm=NormSpec("l2", d),
        name="rotation",
        fixed_point=np.zeros(d),
        fix_projection=lambda x: np.zeros_like(np.asarray(x, float)),
        info={"matrix": m, "angle": angle},
    )


def box_affine(d: int = 10, radius: float = 1.0, seed: int = 0, contraction: float = 0.9):
    """T x = clip(M x + c, -radius, radius) with M = (I + contraction * Q) / 2.

    Q is a random orthogonal matrix, so M is averaged and T has bounded range
    (the box).  T is a contraction, and its unique fixed point is computed
    at construction by Banach iteration.
    """
    rng = np.random.default_rng(seed)
    q = random_orthogonal(d, rng)
    m = 0.5 * (np.eye(d) + contraction * q)
    c = rng.uniform(-radius, radius, size=d)
    mt = m.T.copy()

    def evaluate(x):
        return np.clip(x @ mt + c, -radius, radius)

    x = np.zeros(d)
    rate = 0.5 * (1 + contraction)
    steps = int(math.ceil(math.log(1e-17) / math.log(rate))) + 10
    for _ in range(steps):
        x = evaluate(x)

    def range_bound(x0):
        x0 = np.asarray(x0, float)
        far = np.maximum(np.abs(radius - x0), np.abs(-radius - x0))
        return float(np.sqrt(far @ far))

    return NonexpansiveOperator(
        dim=d,
        evaluate=evaluate,
        norm=NormSpec("l2", d),
        name="box-affine",
        fixed_point=x,
        fix_projection=lambda y: np.broadcast_to(x, np.shape(y)).copy(),
        range_bound=range_bound,
        info={"M": m, "c": c, "radius": radius},
    )


def identity(d: int, norm: str = "l2"):
    return NonexpansiveOperator(
        dim=d,
        evaluate=lambda x: x.copy(),
        norm=NormSpec(norm, d),
        name="identity",
        fixed_point=np.zeros(d),
        fix_projection=lambda x: np.array(x, dtype=float, copy=True),
    )


def scaling(d: int, factor: float, norm: str = "l2"):
    """x -> factor * x; nonexpansive only for |factor| <= 1 (useful to test the checker)."""
    return NonexpansiveOperator(
        dim=d,
        evaluate=lambda x: factor * x,
        norm=NormSpec(norm, d),
        name=f"scaling({factor})",
        fixed_point=np.zeros(d),
    )
