"""Finite average-reward MDPs, an exact solver, the Bellman map and RVI-Q-learning.

Q-tables are arrays of shape (n_states, n_actions); every function here also
accepts a leading batch axis, so R replications are handled as (R, S, A).

Sampling discipline: replication seed s owns a Philox stream.  The uniform
used for pair (i, u) at step n sits at position ((n-1) S + i) A + u of that
stream, so two runs sharing a seed see the same next-state draws, and a
stream can be opened at any step.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError, MdpFormatError
from .operators import NonexpansiveOperator, NormSpec
from .sequences import StepsizeSchedule

__all__ = [
    "Mdp",
    "Stabilizer",
    "ExactSolution",
    "QTrajectory",
    "duff_mdp",
    "parse_mdp",
    "load_mdp",
    "dump_mdp",
    "parse_stabilizer",
    "solve_exact",
    "bellman_m",
    "bellman_h",
    "bellman_residual",
    "bellman_operator",
    "uniform_block",
    "sample_next_states",
    "run_rvi_q",
    "benchmark_rbar_iteration",
    "coupling_deviation",
    "THEOREM_A_RANGE",
]

PROB_TOL = 1e-9
STREAM_BLOCK = 512
# exponents for which the RVI-Q residual rate is guaranteed
THEOREM_A_RANGE = (0.8, 1.0)


@dataclass(frozen=True, eq=False)
class Mdp:
    """transition[i, u, j] = p(j | i, u) and reward[i, u, j] = g(i, u, j)."""

    transition: np.ndarray
    reward: np.ndarray
    name: str = "mdp"

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=float)
        g = np.asarray(self.reward, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise DomainError("transition must have shape (S, A, S)")
        if g.shape != p.shape:
            raise DomainError("reward must have the same shape as transition")
        problems = []
        if np.any(p < 0) or np.any(p > 1):
            problems.append("transition probabilities must lie in [0, 1]")
        sums = p.sum(axis=2)
        for i, u in zip(*np.nonzero(np.abs(sums - 1.0) > PROB_TOL)):
            problems.append(f"p(.|{i},{u}) sums to {sums[i, u]:.12g}, not 1")
        if not np.all(np.isfinite(g)) or np.any(g < 0):
            problems.append("rewards must be finite and nonnegative")
        if problems:
            raise MdpFormatError(problems)
        p.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", g)
        r = np.einsum("iuj,iuj->iu", p, g)
        r.setflags(write=False)
        object.__setattr__(self, "expected_reward", r)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def g_max(self) -> float:
        return float(self.reward.max())


def duff_mdp() -> Mdp:
    """Two states, two actions; the reward depends on the arrival state only (1 or 10)."""
    p = np.array(
        [
            [[0.3, 0.7], [0.9, 0.1]],
            [[0.7, 0.3], [0.1, 0.9]],
        ]
    )
    g = np.broadcast_to(np.array([1.0, 10.0]), p.shape).copy()
    return Mdp(p, g, name="duff")


# -- text format --------------------------------------------------------------

_HEADER = re.compile(r"^states\s*=\s*(\d+)\s+actions\s*=\s*(\d+)$")


def parse_mdp(text: str, name: str = "mdp") -> Mdp:
    """Parse the plain-text MDP format.

    First non-blank line: ``states=<S> actions=<A>``.  Then lines
    ``p <i> <u> <j> <prob>`` and ``g <i> <u> <j> <reward>`` with 0-based
    indices.  Missing entries are 0.  ``#`` starts a comment.  All problems
    are collected and reported together with line numbers.
    """
    problems = []
    lines = [(k + 1, ln.split("#", 1)[0].strip()) for k, ln in enumerate(text.splitlines())]
    lines = [(k, ln) for k, ln in lines if ln]
    if not lines:
        raise MdpFormatError(["empty MDP description"])
    k0, head = lines[0]
    m = _HEADER.match(head)
    if not m:
        raise MdpFormatError([f"line {k0}: expected 'states=<int> actions=<int>', got {head!r}"])
    S, A = int(m.group(1)), int(m.group(2))
    if S < 1 or A < 1:
        raise MdpFormatError([f"line {k0}: need at least one state and one action"])
    p = np.zeros((S, A, S))
    g = np.zeros((S, A, S))
    seen = {}
    for k, ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 5 or parts[0] not in ("p", "g"):
            problems.append(f"line {k}: expected 'p|g <i> <u> <j> <value>', got {ln!r}")
            continue
        try:
            i, u, j = (int(t) for t in parts[1:4])
            v = float(parts[4])
        except ValueError:
            problems.append(f"line {k}: bad number in {ln!r}")
            continue
        if not (0 <= i < S and 0 <= u < A and 0 <= j < S):
            problems.append(f"line {k}: index out of range in {ln!r}")
            continue
        if not math.isfinite(v):
            problems.append(f"line {k}: non-finite value")
            continue
        key = (parts[0], i, u, j)
        if key in seen:
            problems.append(f"line {k}: duplicate entry (first on line {seen[key]})")
            continue
        seen[key] = k
        if parts[0] == "p":
            if not 0.0 <= v <= 1.0:
                problems.append(f"line {k}: probability {v} outside [0, 1]")
            p[i, u, j] = v
        else:
            if v < 0:
                problems.append(f"line {k}: negative reward {v}")
            g[i, u, j] = v
    sums = p.sum(axis=2)
    for i, u in zip(*np.nonzero(np.abs(sums - 1.0) > PROB_TOL)):
        problems.append(f"(i={i}, u={u}): probabilities sum to {sums[i, u]:.12g}, not 1")
    if problems:
        raise MdpFormatError(problems)
    return Mdp(p, g, name=name)


def load_mdp(path) -> Mdp:
    if str(path) == "duff":
        return duff_mdp()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise MdpFormatError([f"{path}: {exc.strerror or exc}"]) from exc
    try:
        return parse_mdp(text, name=str(path))
    except MdpFormatError as exc:
        raise MdpFormatError([f"{path}: {q}" for q in exc.problems]) from None


def dump_mdp(m: Mdp) -> str:
    """Text form of ``m``; zero entries are omitted."""
    out = [f"states={m.n_states} actions={m.n_actions}"]
    for tag, arr in (("p", m.transition), ("g", m.reward)):
        for i, u, j in zip(*np.nonzero(arr)):
            out.append(f"{tag} {i} {u} {j} {float(arr[i, u, j])!r}")
    return "\n".join(out) + "\n"


# -- stabilizers --------------------------------------------------------------


@dataclass(frozen=True)
class Stabilizer:
    """f with f(Q + c e) = f(Q) + c: ``max``, ``mean`` or ``component`` (i0, u0)."""

    kind: str
    i0: int = 0
    u0: int = 0

    def __post_init__(self):
        if self.kind not in ("max", "mean", "component"):
            raise DomainError(f"unknown stabilizer {self.kind!r}")

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind == "max":
            out = q.max(axis=(-2, -1))
        elif self.kind == "mean":
            out = q.mean(axis=(-2, -1))
        else:
            out = q[..., self.i0, self.u0]
        return float(out) if np.ndim(out) == 0 else out

    def __str__(self):
        return f"component:{self.i0},{self.u0}" if self.kind == "component" else self.kind


def parse_stabilizer(token: str, m: Optional[Mdp] = None) -> Stabilizer:
    token = token.strip().lower()
    if token in ("max", "mean"):
        return Stabilizer(token)
    if token.startswith("component:"):
        try:
            i0, u0 = (int(t) for t in token.split(":", 1)[1].split(","))
        except ValueError:
            raise DomainError(f"expected component:<i>,<u>, got {token!r}") from None
        if m is not None and not (0 <= i0 < m.n_states and 0 <= u0 < m.n_actions):
            raise DomainError(f"component ({i0},{u0}) outside the MDP")
        return Stabilizer("component", i0, u0)
    raise DomainError(f"stabilizer must be max, mean or component:<i>,<u>; got {token!r}")


# -- Bellman map and exact solution -----------------------------------------


def bellman_m(m: Mdp, q) -> np.ndarray:
    """M(Q)(i,u) = sum_j p(j|i,u) (g(i,u,j) + max_u' Q(j,u'))."""
    q = np.asarray(q, dtype=float)
    v = q.max(axis=-1)
    return m.expected_reward + np.einsum("iuj,...j->...iu", m.transition, v)


def bellman_h(m: Mdp, q, r_bar: float) -> np.ndarray:
    """H(Q) = M(Q) - r_bar e."""
    return bellman_m(m, q) - r_bar


def bellman_residual(m: Mdp, q, r_bar: float):
    """||Q - H(Q)||_inf; unchanged when a constant is added to Q."""
    q = np.asarray(q, dtype=float)
    out = np.abs(q - bellman_h(m, q, r_bar)).max(axis=(-2, -1))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class ExactSolution:
    r_bar: float
    h: np.ndarray
    iterations: int
    q_base: np.ndarray

    def q_star(self, f: Stabilizer = Stabilizer("max")) -> np.ndarray:
        """The solution of Q = H(Q) normalized by f(Q*) = r_bar."""
        return self.q_base + (self.r_bar - f(self.q_base))


def solve_exact(m: Mdp, tol: float = 1e-10, max_iter: int = 10**6, damping: float = 0.5) -> ExactSolution:
    """Relative value iteration on state values.

    The damped map V -> (1 - damping) V + damping T V removes periodicity.
    Iteration stops when the span of T V - V falls below ``tol``; r_bar is
    then the midpoint of its range.
    """
    if not 0.0 < damping <= 1.0:
        raise DomainError("damping must lie in (0, 1]")
    v = np.zeros(m.n_states)
    for it in range(1, max_iter + 1):
        tv = bellman_m(m, np.broadcast_to(v[:, None], (m.n_states, m.n_actions))).max(axis=1)
        diff = tv - v
        lo, hi = diff.min(), diff.max()
        if hi - lo < tol:
            r_bar = 0.5 * (lo + hi)
            h = v - v[0]
            q_base = bellman_m(m, np.broadcast_to(h[:, None], (m.n_states, m.n_actions))) - r_bar
            return ExactSolution(float(r_bar), h, it, q_base)
        v = (1.0 - damping) * v + damping * tv
        v -= v[0]
    raise ConvergenceError(
        f"relative value iteration did not converge in {max_iter} iterations "
        f"(span {hi - lo:.3g}); the MDP may not be unichain"
    )


def bellman_operator(m: Mdp, r_bar: Optional[float] = None, solution: Optional[ExactSolution] = None):
    """H as a NonexpansiveOperator on flattened Q-tables with the sup-norm.

    The fixed-point set is the line Q* + c e; the nearest point to Q in the
    sup-norm is Q* + c e with c the midrange of Q - Q*.
    """
    if solution is None:
        solution = solve_exact(m)
    if r_bar is None:
        r_bar = solution.r_bar
    S, A = m.n_states, m.n_actions
    qs = solution.q_star(Stabilizer("max"))
    qflat = qs.ravel()

    def evaluate(x):
        q = x.reshape(x.shape[:-1] + (S, A))
        return bellman_h(m, q, r_bar).reshape(x.shape)

    def fix_projection(x):
        d = np.asarray(x, float) - qflat
        c = 0.5 * (d.max(axis=-1) + d.min(axis=-1))
        return qflat + np.asarray(c)[..., None]

    return NonexpansiveOperator(
        dim=S * A,
        evaluate=evaluate,
        norm=NormSpec("linf", S * A),
        name=f"bellman-h({m.name})",
        fixed_point=qflat,
        fix_projection=fix_projection,
        info={"mdp": m, "r_bar": r_bar},
    )


# -- sampling -----------------------------------------------------------------


def uniform_block(seed: int, n_start: int, count: int, S: int, A: int) -> np.ndarray:
    """Uniforms for steps n_start .. n_start+count-1, shape (count, S, A)."""
    if n_start < 1:
        raise DomainError("steps are numbered from 1")
    bg = np.random.Philox(key=int(seed))
    skip = (n_start - 1) * S * A
    # one Philox counter yields four doubles
    bg.advance(skip // 4)
    gen = np.random.Generator(bg)
    if skip % 4:
        gen.random(skip % 4)
    return gen.random((count, S, A))


class _Stream:
    """Sequential reader of ``uniform_block`` with a reused generator."""

    def __init__(self, seed, S, A):
        self.gen = np.random.Generator(np.random.Philox(key=int(seed)))
        self.shape = (S, A)

    def take(self, count):
        return self.gen.random((count,) + self.shape)


def sample_next_states(m: Mdp, u) -> np.ndarray:
    """Inverse-CDF draws: xi = min{j : u < P(0..j | i, a)}, same shape as u."""
    cum = np.cumsum(m.transition, axis=2)[..., :-1]
    return np.sum(np.asarray(u)[..., None] >= cum, axis=-1)


# -- learning iterations ------------------------------------------------------


@dataclass
class QTrajectory:
    """Checkpointed output of a batch of Q-learning runs.

    Arrays carry a leading replication axis.  ``f_values`` and
    ``residuals`` (||Q_n - H(Q_n)||_inf with the exact r_bar) are recorded at
    ``checkpoint_n``; ``q`` holds the tables there.
    """

    a: float
    seeds: tuple
    checkpoint_n: np.ndarray
    q: np.ndarray
    f_values: np.ndarray
    residuals: np.ndarray
    r_bar: float
    stabilizer: Optional[Stabilizer]
    metadata: dict = field(default_factory=dict)

    @property
    def final_q(self):
        return self.q[:, -1]


def _check_a(a):
    if not 0.5 < a <= 1.0:
        raise DomainError(f"a must lie in (1/2, 1], got {a!r}")


def _prepare(m, a, q0, n, seeds, stride):
    _check_a(a)
    if n < 1:
        raise DomainError("n must be >= 1")
    if stride < 1:
        raise DomainError("stride must be >= 1")
    seeds = tuple(int(s) for s in np.atleast_1d(seeds))
    S, A = m.n_states, m.n_actions
    q0 = np.zeros((S, A)) if q0 is None else np.asarray(q0, dtype=float)
    if q0.shape != (S, A) or not np.all(np.isfinite(q0)):
        raise DomainError(f"q0 must be a finite ({S}, {A}) table")
    grid = np.arange(0, n + 1, stride)
    if grid[-1] != n:
        grid = np.append(grid, n)
    return seeds, q0, grid


def _iterate(m, a, q0, n, seeds, grid, shift, r_bar, debug, record_f):
    S, A = m.n_states, m.n_actions
    R = len(seeds)
    alphas = StepsizeSchedule.power(a).alpha_array(n).tolist()
    ii = np.arange(S)[:, None]
    uu = np.arange(A)[None, :]
    cum = np.cumsum(m.transition, axis=2)[..., :-1]
    g = m.reward
    gbar = m.g_max
    q = np.tile(q0, (R, 1, 1))
    streams = [_Stream(s, S, A) for s in seeds]
    is_ck = np.zeros(n + 1, dtype=bool)
    is_ck[grid] = True
    qs = np.empty((R, len(grid), S, A))
    qs[:, 0] = q
    ci = 1
    for start in range(1, n + 1, STREAM_BLOCK):
        count = min(STREAM_BLOCK, n + 1 - start)
        unif = np.stack([st.take(count) for st in streams], axis=1)  # (count, R, S, A)
        xi_all = np.sum(unif[..., None] >= cum, axis=-1)
        for j in range(count):
            nstep = start + j
            al = alphas[nstep]
            xi = xi_all[j]
            vmax = q.max(axis=-1)  # (R, S)
            target = g[ii, uu, xi] + np.take_along_axis(vmax, xi.reshape(R, -1), axis=1).reshape(R, S, A)
            if debug:
                noise = target - bellman_m(m, q)
                lim = gbar + 2.0 * np.abs(q).max(axis=(-2, -1))
                if np.any(np.abs(noise).max(axis=(-2, -1)) > lim * (1 + 1e-12) + 1e-12):
                    raise AssertionError(f"noise bound violated at step {nstep}")
            target -= shift(q)[:, None, None]
            q = (1.0 - al) * q + al * target
            if is_ck[nstep]:
                qs[:, ci] = q
                ci += 1
    if not np.all(np.isfinite(q)):
        raise FloatingPointError("Q-table became non-finite")
    res = bellman_residual(m, qs, r_bar)
    fv = record_f(qs)
    return qs, np.atleast_2d(fv), np.atleast_2d(res)


def run_rvi_q(
    m: Mdp,
    a: float,
    f: Stabilizer,
    q0=None,
    n: int = 10**4,
    stride: int = 1,
    seed=0,
    r_bar: Optional[float] = None,
    debug: bool = False,
) -> QTrajectory:
    """RVI-Q-learning with alpha_n = 1/(n+1)**a.

    Q_n(i,u) = (1 - alpha_n) Q_{n-1}(i,u)
               + alpha_n [g(i,u,xi) + max_u' Q_{n-1}(xi,u') - f(Q_{n-1})]

    with one independent next state xi ~ p(.|i,u) per pair and step.
    ``seed`` may be one seed or a sequence (one replication each).  The
    residual uses ``r_bar`` (the exact optimal gain by default).  With
    ``debug`` every step asserts ||U_n||_inf <= g_max + 2 ||Q_{n-1}||_inf for
    the noise U_n = target - M(Q_{n-1}).
    """
    seeds, q0, grid = _prepare(m, a, q0, n, seed, stride)
    if r_bar is None:
        r_bar = solve_exact(m).r_bar
    qs, fv, res = _iterate(m, a, q0, n, seeds, grid, f, r_bar, debug, f)
    lo, hi = THEOREM_A_RANGE
    meta = {"outside_theorem_range": not (lo < a <= hi), "stabilizer": str(f)}
    return QTrajectory(a, seeds, grid, qs, fv, res, r_bar, f, meta)


def benchmark_rbar_iteration(
    m: Mdp,
    a: float,
    q0=None,
    n: int = 10**4,
    seed=0,
    stride: int = 1,
    r_bar: Optional[float] = None,
    f: Stabilizer = Stabilizer("max"),
    debug: bool = False,
) -> QTrajectory:
    """The same iteration with the exact r_bar subtracted instead of f(Q).

    Not implementable without knowing r_bar; used to study RVI-Q.  Shares
    the sample stream of ``run_rvi_q`` for equal seeds.  ``f_values``
    records f(Q_n^rbar) for the stabilizer ``f``.
    """
    seeds, q0, grid = _prepare(m, a, q0, n, seed, stride)
    if r_bar is None:
        r_bar = solve_exact(m).r_bar
    qs, fv, res = _iterate(
        m, a, q0, n, seeds, grid, lambda q: np.full(q.shape[0], r_bar), r_bar, debug, f
    )
    lo, hi = THEOREM_A_RANGE
    meta = {"outside_theorem_range": not (lo < a <= hi), "benchmark": True}
    return QTrajectory(a, seeds, grid, qs, fv, res, r_bar, f, meta)


def coupling_deviation(m: Mdp, a: float, f: Stabilizer, q0=None, n: int = 1000, seed: int = 0):
    """Check Q_n - Q_n^rbar = c_n e along shared-stream runs.

    c_n = (1 - alpha_n) c_{n-1} + alpha_n (r_bar - f(Q_{n-1}^rbar)), c_0 = 0.
    Returns (max deviation over steps and pairs, c_n sequence).
    """
    sol = solve_exact(m)
    r_bar = sol.r_bar
    qa = run_rvi_q(m, a, f, q0, n, 1, seed, r_bar)
    qb = benchmark_rbar_iteration(m, a, q0, n, seed, 1, r_bar, f)
    alphas = StepsizeSchedule.power(a).alpha_array(n)
    fb = qb.f_values[0]
    c = np.zeros(n + 1)
    for k in range(1, n + 1):
        c[k] = (1.0 - alphas[k]) * c[k - 1] + alphas[k] * (r_bar - fb[k - 1])
    diff = qa.q[0] - qb.q[0] - c[:, None, None]
    return float(np.abs(diff).max()), c
