"""Seeded Monte Carlo experiments comparing empirical residuals with the bounds.

Replication r of an experiment uses the seed ``split_seed(master_seed, r)``:
numpy's SeedSequence hash of the pair (master_seed, r), reduced to 64 bits.
Replications are run in fixed-size chunks; per-chunk means and squared
deviations are merged in chunk order, so the output does not depend on the
number of worker threads (set with the SKMFIX_THREADS environment variable).
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import bounds as B
from .engine import checkpoint_grid, random_iterate_indices, run_batch
from .errors import BudgetExceededError, DomainError, PreconditionError
from .mdp import THEOREM_A_RANGE, load_mdp, parse_stabilizer, run_rvi_q, solve_exact
from .noise import parse_noise
from .operators import box_affine, identity, planar_rotation, sgd_quadratic
from .sequences import StepsizeSchedule, VarianceSchedule, nu_array, parse_exponent

__all__ = [
    "ExperimentConfig",
    "Summary",
    "BoundReport",
    "split_seed",
    "make_operator",
    "run_experiment",
    "compare_to_bound",
    "emit_csv",
    "read_csv",
    "random_iterate_study",
    "rate_denominator",
    "OPERATORS",
    "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 10**9
CHUNK = 50
OPERATORS = ("sgd-quadratic", "rotation", "box-affine", "identity")
SKM_BOUNDS = ("general", "power", "constant", "fixed_horizon", "asymptote")


def split_seed(master_seed: int, r: int) -> int:
    """64-bit seed of replication r."""
    ss = np.random.SeedSequence([int(master_seed), int(r)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_operator(name: str, dim: int = 10, seed: int = 0):
    if name == "sgd-quadratic":
        return sgd_quadratic(dim, seed=seed)
    if name == "rotation":
        return planar_rotation(math.pi / 3, dim)
    if name == "box-affine":
        return box_affine(dim, seed=seed)
    if name == "identity":
        return identity(dim)
    raise DomainError(f"unknown operator {name!r}; choose from {', '.join(OPERATORS)}")


@dataclass
class ExperimentConfig:
    """One experiment.

    ``a_or_alpha`` is the token as written by the user: for power schedules
    an exponent such as ``2/3``; for constant schedules a number or ``auto``
    (alpha = 1/(6 n**(2/3)) for the horizon n_steps).  Checkpoints are
    multiples of ``stride`` unless ``checkpoints`` lists them explicitly.
    ``kappa_bar`` defaults to the operator's range bound when it has one and
    otherwise to 2 dist(x0, Fix) + mu sum_{k<=n} alpha_k nu_{k-1} at each n.
    """

    scenario: str = "skm"
    operator: str = "sgd-quadratic"
    noise: str = "gaussian:1.0"
    dim: int = 10
    operator_seed: int = 0
    mdp: str = "duff"
    stabilizer: str = "max"
    schedule: str = "power"
    a_or_alpha: str = "2/3"
    n_steps: int = 10**4
    stride: int = 1000
    checkpoints: Optional[Sequence[int]] = None
    replications: int = 100
    master_seed: int = 0
    bounds: Sequence[str] = ()
    kappa_bar: Optional[float] = None
    x0: Optional[Sequence[float]] = None
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.scenario not in ("skm", "rvi_q"):
            raise DomainError(f"unknown scenario {self.scenario!r}")
        if self.schedule not in ("power", "constant"):
            raise DomainError(f"unknown schedule {self.schedule!r}")
        if self.scenario == "rvi_q" and self.schedule != "power":
            raise DomainError("RVI-Q runs use power stepsizes")
        if self.n_steps < 1 or self.replications < 1 or self.stride < 1:
            raise DomainError("n_steps, replications and stride must be >= 1")
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")
        self.a_or_alpha = str(self.a_or_alpha)
        self.bounds = tuple(self.bounds)
        unknown = [b for b in self.bounds if b not in SKM_BOUNDS]
        if unknown:
            raise DomainError(f"unknown bound(s) {unknown}; choose from {', '.join(SKM_BOUNDS)}")
        if self.scenario == "rvi_q" and self.bounds:
            raise DomainError("no explicit bound is available for RVI-Q runs")
        self.step_schedule()

    def step_schedule(self) -> StepsizeSchedule:
        tok = self.a_or_alpha.strip()
        if self.schedule == "constant":
            if tok == "auto":
                return StepsizeSchedule.constant(B.auto_alpha(self.n_steps))
            return StepsizeSchedule.constant(parse_exponent(tok))
        return StepsizeSchedule.power(parse_exponent(tok))

    def checkpoint_ns(self) -> np.ndarray:
        if self.checkpoints is not None:
            ns = np.unique(np.asarray(self.checkpoints, dtype=int))
            if ns.size == 0 or ns[0] < 1 or ns[-1] > self.n_steps:
                raise DomainError("checkpoints must lie in 1..n_steps")
            return ns
        return checkpoint_grid(self.n_steps, self.stride)[1:]


@dataclass
class Summary:
    """Per-checkpoint statistics of an experiment, one row per n."""

    scenario: str
    a_or_alpha: str
    replications: int
    master_seed: int
    n: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    min: np.ndarray
    max: np.ndarray
    bounds: Dict[str, np.ndarray] = field(default_factory=dict)
    stats: Dict[str, np.ndarray] = field(default_factory=dict)
    rescaled: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.n)

    def row(self, n: int) -> dict:
        i = int(np.nonzero(self.n == n)[0][0])
        out = {"n": int(self.n[i]), "mean": self.mean[i], "stderr": self.stderr[i]}
        out.update({f"bound_{k}": v[i] for k, v in self.bounds.items()})
        out.update({f"stat_{k}": v[i] for k, v in self.stats.items()})
        return out


@dataclass(frozen=True)
class BoundReport:
    n_violations: int
    max_ratio: float
    violating_n: tuple


# -- streaming statistics ----------------------------------------------------


def _partial(x):
    """(count, mean, M2, min, max) along axis 0."""
    x = np.asarray(x, dtype=float)
    m = x.mean(axis=0)
    return (x.shape[0], m, ((x - m) ** 2).sum(axis=0), x.min(axis=0), x.max(axis=0))


def _merge(p, q):
    na, ma, sa, loa, hia = p
    nb, mb, sb, lob, hib = q
    n = na + nb
    d = mb - ma
    return (n, ma + d * nb / n, sa + sb + d * d * na * nb / n, np.minimum(loa, lob), np.maximum(hia, hib))


def _reduce(partials):
    acc = partials[0]
    for p in partials[1:]:
        acc = _merge(acc, p)
    return acc


def _threads():
    try:
        return max(1, int(os.environ.get("SKMFIX_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    t = _threads()
    if t == 1 or len(items) == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=t) as ex:
        return list(ex.map(fn, items))


# -- rescaling ---------------------------------------------------------------


def rate_denominator(cfg: ExperimentConfig, ns) -> np.ndarray:
    """Multiplier turning the mean residual into a quantity that should stay bounded."""
    ns = np.asarray(ns, dtype=float)
    s = cfg.step_schedule()
    if cfg.scenario == "rvi_q" or s.kind == "constant":
        return np.sqrt(s.tau_array(int(ns.max()))[ns.astype(int)])
    a = s.a
    with np.errstate(divide="ignore", invalid="ignore"):
        if a == 1.0:
            return np.sqrt(np.log(ns))
        if a == 2.0 / 3.0:
            return ns ** (1.0 / 6.0) / np.log(ns)
        if a < 2.0 / 3.0:
            return ns ** (a - 0.5)
        return ns ** ((1.0 - a) / 2.0)


# -- experiments ---------------------------------------------------------------


def _chunks(R):
    return [range(i, min(i + CHUNK, R)) for i in range(0, R, CHUNK)]


def _skm(cfg: ExperimentConfig, ns):
    op = make_operator(cfg.operator, cfg.dim, cfg.operator_seed)
    nm = parse_noise(cfg.noise, cfg.dim)
    s = cfg.step_schedule()
    x0 = np.ones(cfg.dim) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)

    def work(rs):
        seeds = [split_seed(cfg.master_seed, r) for r in rs]
        br = run_batch(op, s, nm, x0, cfg.n_steps, seeds, stride=cfg.n_steps, keep_vectors=False)
        return _partial(br.residuals[:, ns])

    acc = _reduce(_map(work, _chunks(cfg.replications)))
    bnds = _skm_bounds(cfg, op, nm, s, x0, ns)
    return acc, bnds, {}, {"operator": op.name, "mu": op.norm.mu, "sigma": nm.scale}


def _skm_bounds(cfg, op, nm, s, x0, ns):
    if not cfg.bounds:
        return {}
    mu = op.norm.mu
    sigma = nm.scale if nm.kind == "iid" else 0.0
    if cfg.kappa_bar is not None:
        kb = np.full(len(ns), float(cfg.kappa_bar))
    elif op.range_bound is not None:
        kb = np.full(len(ns), op.range_bound(x0))
    else:
        dist0 = op.dist_to_fix(x0)
        var = VarianceSchedule.bounded(sigma)
        al = s.alpha_array(int(ns.max()))
        nus = nu_array(s, var, int(ns.max()))
        terms = np.concatenate(([0.0, 0.0], al[2:] * nus[1:-1]))
        kb = 2.0 * dist0 + mu * np.cumsum(terms)[ns]
    out = {}
    for name in cfg.bounds:
        if name == "general":
            p = B.BoundParams(0.0, mu, sigma, s)
            nus_all = p.nu(int(ns.max()))
            vals = [B.bound_general(B.BoundParams(k, mu, sigma, s), int(n), nus_all) for k, n in zip(kb, ns)]
        elif name == "power":
            if s.kind != "power":
                raise DomainError("bound 'power' needs a power schedule")
            vals = [B.bound_power(k, mu, sigma, s.a, int(n)) for k, n in zip(kb, ns)]
        elif name == "asymptote":
            if s.kind != "power":
                raise DomainError("bound 'asymptote' needs a power schedule")
            vals = [B.asymptote_power(k, mu, sigma, s.a, int(n)) if n >= 2 else math.nan for k, n in zip(kb, ns)]
        elif name == "constant":
            if s.kind != "constant":
                raise DomainError("bound 'constant' needs a constant schedule")
            vals = [B.bound_constant(k, mu, sigma, s.param, int(n)) for k, n in zip(kb, ns)]
        else:
            # valid only at the horizon for which alpha was tuned
            if s.kind != "constant" or cfg.a_or_alpha.strip() != "auto":
                raise DomainError("bound 'fixed_horizon' needs --alpha auto")
            vals = [
                B.fixed_horizon_rate(k, mu, sigma, int(n)) if n == cfg.n_steps else math.nan
                for k, n in zip(kb, ns)
            ]
        out[name] = np.array(vals, dtype=float)
    return out


def _rvi(cfg: ExperimentConfig, ns):
    m = load_mdp(cfg.mdp)
    f = parse_stabilizer(cfg.stabilizer, m)
    a = cfg.step_schedule().a
    r_bar = solve_exact(m).r_bar

    # record on the coarsest stride that hits every requested checkpoint
    stride = int(np.gcd.reduce(ns)) if len(ns) > 1 else int(ns[0])

    def work(rs):
        seeds = [split_seed(cfg.master_seed, r) for r in rs]
        tr = run_rvi_q(m, a, f, None, cfg.n_steps, stride, seeds, r_bar=r_bar)
        idx = np.searchsorted(tr.checkpoint_n, ns)
        return _partial(tr.residuals[:, idx]), _partial(tr.f_values[:, idx])

    parts = _map(work, _chunks(cfg.replications))
    acc = _reduce([p[0] for p in parts])
    facc = _reduce([p[1] for p in parts])
    lo, hi = THEOREM_A_RANGE
    meta = {"r_bar": r_bar, "stabilizer": str(f), "outside_theorem_range": not (lo < a <= hi)}
    return acc, {}, {"f_mean": facc[1]}, meta


def run_experiment(cfg: ExperimentConfig) -> Summary:
    """Run all replications and aggregate per checkpoint."""
    work = cfg.n_steps * cfg.replications
    if work > cfg.budget:
        est = work * (3e-6 if cfg.scenario == "skm" else 1e-6)
        raise BudgetExceededError(
            f"{cfg.n_steps} steps x {cfg.replications} replications = {work:.3g} step-replications "
            f"exceeds the budget {cfg.budget:.3g} (roughly {est:.3g} s single-threaded)"
        )
    ns = cfg.checkpoint_ns()
    if cfg.scenario == "skm":
        acc, bnds, stats, meta = _skm(cfg, ns)
    else:
        acc, bnds, stats, meta = _rvi(cfg, ns)
    count, mean, m2, lo, hi = acc
    if count > 1:
        stderr = np.sqrt(m2 / (count - 1)) / math.sqrt(count)
    else:
        stderr = np.zeros_like(mean)
    rescaled = mean * rate_denominator(cfg, ns)
    return Summary(
        scenario=cfg.scenario,
        a_or_alpha=cfg.a_or_alpha,
        replications=cfg.replications,
        master_seed=cfg.master_seed,
        n=ns,
        mean=mean,
        stderr=stderr,
        min=lo,
        max=hi,
        bounds=bnds,
        stats=stats,
        rescaled=rescaled,
        metadata=meta,
    )


def compare_to_bound(s: Summary, bound_name: str) -> BoundReport:
    """Violation at n: mean - 3 stderr > bound.  Rows without a bound value are skipped."""
    if bound_name not in s.bounds:
        raise PreconditionError(f"summary has no bound column {bound_name!r}")
    b = s.bounds[bound_name]
    ok = np.isfinite(b)
    viol = ok & (s.mean - 3.0 * s.stderr > b)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ok & (b > 0), s.mean / b, np.nan)
    mr = float(np.nanmax(ratio)) if np.any(np.isfinite(ratio)) else math.nan
    return BoundReport(int(viol.sum()), mr, tuple(int(n) for n in s.n[viol]))


# -- CSV ----------------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _columns(s: Summary) -> List[str]:
    return (
        ["scenario", "a_or_alpha", "n", "replications", "mean_residual", "stderr", "min", "max"]
        + [f"bound_{k}" for k in s.bounds]
        + [f"stat_{k}" for k in s.stats]
        + ["rescaled_residual", "master_seed"]
    )


def emit_csv(s: Summary, path=None) -> str:
    """Write ``s`` in the CSV schema; returns the text.  ``path=None`` writes nothing."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_columns(s))
    resc = s.rescaled if s.rescaled is not None else np.full(len(s.n), np.nan)
    for i in range(len(s.n)):
        w.writerow(
            [s.scenario, s.a_or_alpha, int(s.n[i]), s.replications]
            + [_fmt(v[i]) for v in (s.mean, s.stderr, s.min, s.max)]
            + [_fmt(v[i]) for v in s.bounds.values()]
            + [_fmt(v[i]) for v in s.stats.values()]
            + [_fmt(resc[i]), s.master_seed]
        )
    text = buf.getvalue()
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write CSV to {path}: {exc.strerror}") from exc
    return text


def read_csv(path) -> Summary:
    """Inverse of ``emit_csv`` (run metadata is not stored in the file)."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read CSV from {path}: {exc.strerror}") from exc
    header, body = rows[0], rows[1:]
    col = {name: i for i, name in enumerate(header)}

    def floats(name):
        return np.array([float(r[col[name]]) for r in body])

    first = body[0] if body else None
    return Summary(
        scenario=first[col["scenario"]] if first else "",
        a_or_alpha=first[col["a_or_alpha"]] if first else "",
        replications=int(first[col["replications"]]) if first else 0,
        master_seed=int(first[col["master_seed"]]) if first else 0,
        n=np.array([int(r[col["n"]]) for r in body], dtype=int),
        mean=floats("mean_residual"),
        stderr=floats("stderr"),
        min=floats("min"),
        max=floats("max"),
        bounds={h[6:]: floats(h) for h in header if h.startswith("bound_")},
        stats={h[5:]: floats(h) for h in header if h.startswith("stat_")},
        rescaled=floats("rescaled_residual"),
    )


# -- random iterate --------------------------------------------------------------


def random_iterate_study(
    op, schedule, noise, x0, n: int, replications: int, draws_per_replication: int, master_seed: int = 0
):
    """Squared residuals ||T xhat - xhat||**2 at random iterates.

    Each replication records every residual up to n, then draws
    ``draws_per_replication`` indices k-1 with probability
    alpha_k (1 - alpha_k) / tau_n from its own generator.
    Returns an array of shape (replications, draws_per_replication).
    """
    out = np.empty((replications, draws_per_replication))
    for chunk in _chunks(replications):
        seeds = [split_seed(master_seed, r) for r in chunk]
        br = run_batch(op, schedule, noise, x0, n, seeds, stride=n, keep_vectors=False)
        for j, r in enumerate(chunk):
            rng = np.random.default_rng([master_seed, r, 1])
            idx = random_iterate_indices(schedule, n, draws_per_replication, rng)
            out[r] = br.residuals[j, idx] ** 2
    return out
