"""The stochastic Krasnoselskii-Mann iteration

    x_n = (1 - alpha_n) x_{n-1} + alpha_n (T x_{n-1} + U_n)

together with the averaged noise Ubar_n = (1 - alpha_n) Ubar_{n-1} + alpha_n U_n,
pathwise residual certificates and random-iterate selection.

Replications are advanced together as a batch of shape (R, d).  Each
replication draws its noise from its own generator, seeded independently,
so a replication's trajectory does not depend on which batch it runs in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, NonFiniteIterateError, PreconditionError
from .noise import NoiseModel, sample_block
from .operators import NonexpansiveOperator, apply
from .sequences import StepsizeSchedule, sigma_fn

__all__ = [
    "Trajectory",
    "BatchRun",
    "run",
    "run_batch",
    "pathwise_certificate",
    "sample_random_iterate",
    "random_iterate_indices",
    "checkpoint_grid",
]

NOISE_BLOCK = 1024
FULL_CURVE_LIMIT = 10**4


def checkpoint_grid(n_steps: int, stride: int) -> np.ndarray:
    """0, stride, 2*stride, ... and always n_steps."""
    if stride < 1:
        raise DomainError("stride must be >= 1")
    grid = np.arange(0, n_steps + 1, stride)
    if grid[-1] != n_steps:
        grid = np.append(grid, n_steps)
    return grid


@dataclass
class BatchRun:
    """Output of ``run_batch``.

    ``residuals[r, k]`` is ||x_k - T x_k|| and ``ubar_norms[r, k]`` is
    ||Ubar_k|| for replication r, both in the operator's norm, k = 0..n.
    Vectors are kept only at ``checkpoint_n``.
    """

    schedule: StepsizeSchedule
    operator: NonexpansiveOperator
    noise: NoiseModel
    x0: np.ndarray
    seeds: Tuple[int, ...]
    final_n: int
    stride: int
    checkpoint_n: np.ndarray
    residuals: np.ndarray
    ubar_norms: np.ndarray
    checkpoint_x: Optional[np.ndarray]
    checkpoint_ubar: Optional[np.ndarray]

    @property
    def replications(self) -> int:
        return len(self.seeds)

    def trajectory(self, r: int) -> "Trajectory":
        if self.checkpoint_x is None:
            raise PreconditionError("batch was run without keeping vectors")
        return Trajectory(
            schedule=self.schedule,
            operator=self.operator,
            noise=self.noise,
            seed=self.seeds[r],
            x0=self.x0,
            final_n=self.final_n,
            stride=self.stride,
            checkpoint_n=self.checkpoint_n,
            checkpoint_x=self.checkpoint_x[r],
            checkpoint_ubar=self.checkpoint_ubar[r],
            residuals=self.residuals[r],
            ubar_norms=self.ubar_norms[r],
        )


@dataclass
class Trajectory:
    """One recorded run.

    Per-step scalars (residual and ||Ubar_k||) are kept for every k; the
    iterate x_k and Ubar_k vectors only at the checkpoints.
    """

    schedule: StepsizeSchedule
    operator: NonexpansiveOperator
    noise: NoiseModel
    seed: int
    x0: np.ndarray
    final_n: int
    stride: int
    checkpoint_n: np.ndarray
    checkpoint_x: np.ndarray
    checkpoint_ubar: np.ndarray
    residuals: np.ndarray
    ubar_norms: np.ndarray

    @property
    def checkpoints(self) -> List[tuple]:
        return [
            (int(n), self.checkpoint_x[i], self.checkpoint_ubar[i], float(self.residuals[n]))
            for i, n in enumerate(self.checkpoint_n)
        ]

    def x(self, n: int) -> np.ndarray:
        return self.checkpoint_x[self._index(n)]

    def ubar(self, n: int) -> np.ndarray:
        return self.checkpoint_ubar[self._index(n)]

    def z(self, n: int) -> np.ndarray:
        """The reduced iterate z_n = x_n - Ubar_n."""
        i = self._index(n)
        return self.checkpoint_x[i] - self.checkpoint_ubar[i]

    def _index(self, n):
        i = int(np.searchsorted(self.checkpoint_n, n))
        if i >= len(self.checkpoint_n) or self.checkpoint_n[i] != n:
            raise PreconditionError(f"step {n} is not a checkpoint (stride {self.stride})")
        return i


def run_batch(
    op: NonexpansiveOperator,
    schedule: StepsizeSchedule,
    noise: NoiseModel,
    x0,
    n_steps: int,
    seeds: Sequence[int],
    stride: int = 1,
    keep_vectors: bool = True,
) -> BatchRun:
    """Run len(seeds) independent replications of the iteration."""
    if n_steps < 1:
        raise DomainError("n_steps must be >= 1")
    if noise.dim != op.dim:
        raise DomainError(f"noise dimension {noise.dim} != operator dimension {op.dim}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (op.dim,) or not np.all(np.isfinite(x0)):
        raise DomainError("x0 must be a finite vector of the operator's dimension")
    seeds = tuple(int(s) for s in seeds)
    n_rep = len(seeds)
    if n_rep < 1:
        raise DomainError("need at least one seed")
    grid = checkpoint_grid(n_steps, stride)
    is_ckpt = np.zeros(n_steps + 1, dtype=bool)
    is_ckpt[grid] = True
    d = op.dim
    norm = op.norm
    evaluate = op.evaluate
    alphas = schedule.alpha_array(n_steps).tolist()
    gens = [np.random.Generator(np.random.PCG64(s)) for s in seeds]

    x = np.tile(x0, (n_rep, 1))
    ubar = np.zeros((n_rep, d))
    tx = apply(op, x)
    residuals = np.empty((n_rep, n_steps + 1))
    ubar_norms = np.empty((n_rep, n_steps + 1))
    residuals[:, 0] = norm(x - tx)
    ubar_norms[:, 0] = 0.0
    if keep_vectors:
        ck_x = np.empty((n_rep, len(grid), d))
        ck_u = np.empty((n_rep, len(grid), d))
        ck_x[:, 0] = x
        ck_u[:, 0] = ubar
    ci = 1
    for start in range(1, n_steps + 1, NOISE_BLOCK):
        count = min(NOISE_BLOCK, n_steps + 1 - start)
        if noise.kind == "none":
            block = None
        else:
            block = np.stack([sample_block(noise, start, count, g) for g in gens], axis=1)
        for j in range(count):
            n = start + j
            a = alphas[n]
            if block is None:
                x = (1.0 - a) * x + a * tx
            else:
                u = block[j]
                x = (1.0 - a) * x + a * (tx + u)
                ubar = (1.0 - a) * ubar + a * u
            tx = evaluate(x)
            res = norm(x - tx)
            if not math.isfinite(float(np.sum(res))):
                bad = int(np.argmax(~np.isfinite(res)))
                raise NonFiniteIterateError(n, float(norm(x[bad])))
            residuals[:, n] = res
            ubar_norms[:, n] = norm(ubar) if block is not None else 0.0
            if is_ckpt[n] and keep_vectors:
                ck_x[:, ci] = x
                ck_u[:, ci] = ubar
                ci += 1
    return BatchRun(
        schedule=schedule,
        operator=op,
        noise=noise,
        x0=x0,
        seeds=seeds,
        final_n=n_steps,
        stride=stride,
        checkpoint_n=grid,
        residuals=residuals,
        ubar_norms=ubar_norms,
        checkpoint_x=ck_x if keep_vectors else None,
        checkpoint_ubar=ck_u if keep_vectors else None,
    )


def run(op, schedule, noise, x0, n_steps: int, stride: int = 1, seed: int = 0) -> Trajectory:
    """One trajectory; deterministic given ``seed``."""
    return run_batch(op, schedule, noise, x0, n_steps, [seed], stride).trajectory(0)


def pathwise_certificate(t, kappa: float, ns=None, replication: int = 0):
    """Bound on ||x_n - T x_n|| from the realized averaged noise.

    bound_n = kappa*sigma(tau_n) + sum_{k=2}^n 2 alpha_k sigma(tau_n - tau_k) ||Ubar_{k-1}||
              + 4 ||Ubar_n||

    ``t`` may be a Trajectory or a BatchRun (then ``replication`` selects the
    row).  Each requested n costs O(n); omitting ``ns`` evaluates the whole
    curve and is limited to runs of at most 10**4 steps.
    """
    if kappa < 0:
        raise DomainError("kappa must be nonnegative")
    u = t.ubar_norms if isinstance(t, Trajectory) else t.ubar_norms[replication]
    if ns is None:
        if t.final_n > FULL_CURVE_LIMIT:
            raise PreconditionError(
                f"full certificate curve is limited to n <= {FULL_CURVE_LIMIT}; pass ns explicitly"
            )
        ns = range(1, t.final_n + 1)
    s = t.schedule
    taus = s.tau_array(t.final_n)
    al = s.alpha_array(t.final_n)
    out = []
    for n in ns:
        n = int(n)
        if not 1 <= n <= t.final_n:
            raise DomainError(f"n={n} outside 1..{t.final_n}")
        k = np.arange(2, n + 1)
        mid = 2.0 * np.sum(al[k] * sigma_fn(taus[n] - taus[k]) * u[k - 1]) if n >= 2 else 0.0
        out.append((n, kappa * sigma_fn(taus[n]) + mid + 4.0 * u[n]))
    return out


def random_iterate_indices(schedule: StepsizeSchedule, n: int, size, rng) -> np.ndarray:
    """Draw k-1 with P(k) = alpha_k (1 - alpha_k) / tau_n, k = 1..n."""
    if n < 1:
        raise DomainError("n must be >= 1")
    al = schedule.alpha_array(n)[1:]
    w = al * (1.0 - al)
    return rng.choice(n, size=size, p=w / w.sum())


def sample_random_iterate(t: Trajectory, n: int, rng):
    """Pick x_{k-1} from x_0..x_{n-1} with probability proportional to alpha_k(1-alpha_k)."""
    if t.stride != 1:
        raise PreconditionError("random iterate needs every x_k: record with stride 1")
    if not 1 <= n <= t.final_n:
        raise DomainError(f"n={n} outside 1..{t.final_n}")
    idx = int(random_iterate_indices(t.schedule, n, None, rng))
    return idx, t.checkpoint_x[idx]
