"""Acceptance criteria 1-10.

Each test prints one ``PASS``/``FAIL`` line (visible even under capture) and
then asserts.  Run alone with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from skmfix import bounds as B
from skmfix.cli import main as cli_main
from skmfix.engine import pathwise_certificate, run
from skmfix.harness import (
    ExperimentConfig,
    compare_to_bound,
    make_operator,
    random_iterate_study,
    read_csv,
    run_experiment,
)
from skmfix.mdp import Stabilizer, coupling_deviation, duff_mdp, solve_exact
from skmfix.noise import NoiseModel
from skmfix.sequences import StepsizeSchedule, sigma_fn
from skmfix.verify import stepsize_suite, specfun_suite

DUFF_RBAR = 8.875
DUFF_QSTAR = np.array([[53.0, -1.0], [17.0, 71.0]]) / 8.0
POWER_GRID = (0.55, 2.0 / 3.0, 0.8, 1.0)


@pytest.fixture
def report(capsys):
    def _report(k, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
        assert ok, detail

    return _report


def test_criterion_01_duff_exact(report):
    t0 = time.perf_counter()
    sol = solve_exact(duff_mdp())
    q = sol.q_star(Stabilizer("max"))
    secs = time.perf_counter() - t0
    err_r = abs(sol.r_bar - DUFF_RBAR)
    err_q = float(np.abs(q - DUFF_QSTAR).max())
    ok = err_r <= 1e-8 and err_q <= 1e-8 and secs < 1.0
    report(1, ok, f"|rbar - 8.875| = {err_r:.1e}, max |Q* - ref| = {err_q:.1e}, {secs:.2f} s")


def test_criterion_02_rviq_reproduction(report, tmp_path):
    out = tmp_path / "duff.csv"
    t0 = time.perf_counter()
    rc = cli_main(["qlearn", "--mdp", "duff", "--a", "1", "--n", "10000", "--reps", "100", "--out", str(out)])
    secs = time.perf_counter() - t0
    s = read_csv(out)
    f_end = s.row(10000)["stat_f_mean"]
    decade = [s.row(n)["mean"] for n in (100, 1000, 10000)]
    band = s.rescaled[(s.n >= 1000) & (s.n <= 10000)]
    spread = float(band.max() / band.min())
    ok = (
        rc == 0
        and abs(f_end - DUFF_RBAR) <= 0.5
        and decade[0] > decade[1] > decade[2]
        and spread <= 3.0
        and secs < 120
    )
    report(
        2,
        ok,
        f"mean f(Q) = {f_end:.4f}, residual at 1e2/1e3/1e4 = "
        + "/".join(f"{v:.3f}" for v in decade)
        + f", rescaled band ratio {spread:.2f}, {secs:.1f} s",
    )


def test_criterion_03_constant_stepsize_bound(report):
    t0 = time.perf_counter()
    lines, ok = [], True
    for n0 in (100, 1000, 10000):
        cfg = ExperimentConfig(
            operator="sgd-quadratic",
            noise="gaussian:1.0",
            schedule="constant",
            a_or_alpha="auto",
            n_steps=n0,
            checkpoints=[n0],
            replications=200,
            master_seed=3,
            bounds=("fixed_horizon",),
        )
        s = run_experiment(cfg)
        rep = compare_to_bound(s, "fixed_horizon")
        b = s.bounds["fixed_horizon"][-1]
        ok &= rep.n_violations == 0 and rep.max_ratio <= 0.5
        lines.append(f"n0={n0}: {s.mean[-1]:.3f} vs {b:.3f}")
    secs = time.perf_counter() - t0
    ok &= secs < 120
    report(3, ok, "; ".join(lines) + f" ({secs:.1f} s)")


def test_criterion_04_power_bounds(report):
    t0 = time.perf_counter()
    total, worst = 0, 0.0
    for a in ("0.55", "2/3", "0.8", "1"):
        cfg = ExperimentConfig(
            schedule="power",
            a_or_alpha=a,
            n_steps=10**4,
            stride=1000,
            replications=200,
            master_seed=7,
            bounds=("power", "general"),
        )
        rep = compare_to_bound(run_experiment(cfg), "power")
        total += rep.n_violations
        worst = max(worst, rep.max_ratio)
    secs = time.perf_counter() - t0
    report(4, total == 0 and secs < 300, f"{total} violations, max mean/bound {worst:.3f}, {secs:.1f} s")


def test_criterion_05_stepsize_sweeps(report):
    t0 = time.perf_counter()
    checks = stepsize_suite(fast=False)
    secs = time.perf_counter() - t0
    bad = [c.name for c in checks if not c.passed]
    report(5, not bad and secs < 30, f"{len(checks)} families, failing: {bad or 'none'}, {secs:.1f} s")


def test_criterion_06_special_functions(report):
    t0 = time.perf_counter()
    checks = specfun_suite(fast=False)[:3]
    secs = time.perf_counter() - t0
    ok = all(c.passed for c in checks) and secs < 10
    report(6, ok, "; ".join(c.detail for c in checks) + f" ({secs:.1f} s)")


def test_criterion_07_route_consistency(report):
    worst = 0.0
    for a in POWER_GRID:
        h, g = B.power_h(a, 1.0)
        p = B.BoundParams(1.0, 1.0, 1.0, StepsizeSchedule.power(a))
        for n in range(1000, 10001, 1000):
            r = math.sqrt(p.schedule.alpha(n))
            conv = B.bound_convolution(p, h, g, n, nu_prev=r, nu_last=r)
            worst = max(worst, abs(B.bound_power(1.0, 1.0, 1.0, a, n) / conv - 1.0))
    report(7, worst <= 1e-6, f"max relative gap {worst:.2e}")


def test_criterion_08_deterministic_km(report):
    s = StepsizeSchedule.power(1.0)
    n = 10**4
    taus = s.tau_array(n)
    lines, ok = [], True
    for name in ("sgd-quadratic", "rotation", "box-affine"):
        op = make_operator(name, 10, 0)
        x0 = np.full(op.dim, 3.0)
        t = run(op, s, NoiseModel.none(op.dim), x0, n)
        kappa = 2.0 * op.dist_to_fix(x0)
        res = t.residuals[1:]
        cert = kappa * sigma_fn(taus[1:])
        # with zero noise the pathwise certificate reduces to kappa sigma(tau_n)
        spot = np.asarray(pathwise_certificate(t, kappa, ns=[1, 100, n]))[:, 1]
        ok &= bool(np.all(res <= cert * (1 + 1e-12)))
        ok &= bool(np.all(np.diff(t.residuals) <= 1e-12 * t.residuals[0]))
        ok &= bool(np.allclose(spot, cert[[0, 99, n - 1]], rtol=1e-12))
        lines.append(f"{name} max ratio {np.max(res / cert):.3f}")
    report(8, ok, ", ".join(lines))


def test_criterion_09_random_iterate(report):
    n0 = 10**4
    alpha = 1.0 / math.sqrt(n0 + 1)
    s = StepsizeSchedule.constant(alpha)
    op = make_operator("sgd-quadratic", 10, 0)
    x0 = np.ones(op.dim)
    sq = random_iterate_study(op, s, NoiseModel.iid(op.dim, 1.0), x0, n0, 200, 10, master_seed=9)
    mean = sq.mean()
    se = sq.mean(axis=1).std(ddof=1) / math.sqrt(sq.shape[0])
    R = op.dist_to_fix(x0)
    bound = B.bound_euclidean_sq(R, 1.0, 1.0, s, n0)
    closed = B.euclidean_fixed_horizon(R, 1.0, 1.0, n0)
    exact = B.bound_euclidean(R, 1.0, 1.0, s, n0)
    ok = mean - 3 * se <= bound and closed >= exact
    report(
        9,
        ok,
        f"E||Tx-x||^2 = {mean:.4f} (se {se:.4f}) vs {bound:.4f}; closed form {closed:.4f} >= {exact:.4f}",
    )


def test_criterion_10_coupling(report):
    devs = [coupling_deviation(duff_mdp(), 1.0, f, None, 1000, seed=0)[0]
            for f in (Stabilizer("max"), Stabilizer("mean"), Stabilizer("component", 1, 0))]
    report(10, max(devs) <= 1e-9, "max |Q_n - Q_n^rbar - c_n e| = " + ", ".join(f"{d:.1e}" for d in devs))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
