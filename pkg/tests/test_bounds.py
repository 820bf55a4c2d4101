import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skmfix import bounds as B
from skmfix.errors import ConvolutionConditionError, DomainError
from skmfix.sequences import StepsizeSchedule, VarianceSchedule, pi_weights


def general_oracle(kappa, mu, sigma, s, n):
    # direct sums over the weights, independent of the recursions
    taus = [0.0]
    for k in range(1, n + 1):
        a = s.alpha(k)
        taus.append(taus[-1] + a * (1 - a))
    sig = lambda y: 1.0 if y <= 1 / math.pi else 1 / math.sqrt(math.pi * y)
    nu = [0.0] + [sigma * math.sqrt(float(np.sum(pi_weights(s, k) ** 2))) for k in range(1, n + 1)]
    mid = sum(s.alpha(k) * sig(taus[n] - taus[k]) * nu[k - 1] for k in range(2, n + 1))
    return kappa * sig(taus[n]) + 2 * mu * mid + 4 * mu * nu[n]


@pytest.mark.parametrize("sched", [StepsizeSchedule.power(0.6), StepsizeSchedule.power(1.0), StepsizeSchedule.constant(0.1)])
@pytest.mark.parametrize("n", [1, 2, 17, 120])
def test_general_vs_oracle(sched, n):
    p = B.BoundParams(2.5, 1.3, 0.7, sched)
    assert B.bound_general(p, n) == pytest.approx(general_oracle(2.5, 1.3, 0.7, sched, n), rel=1e-12)


def test_general_without_noise():
    s = StepsizeSchedule.power(0.8)
    p = B.BoundParams(3.0, 1.0, 0.0, s)
    tau = float(s.tau_array(50)[50])
    assert B.bound_general(p, 50) == pytest.approx(3.0 / math.sqrt(math.pi * tau))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 1.0), st.integers(1, 3000))
def test_power_closed_form_dominates_general(a, n):
    p = B.BoundParams(1.0, 1.0, 1.0, StepsizeSchedule.power(a))
    assert B.bound_power(1.0, 1.0, 1.0, a, n) >= B.bound_general(p, n) * (1 - 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 0.9), st.integers(1, 3000))
def test_constant_closed_form_dominates_general(alpha, n):
    p = B.BoundParams(1.0, 1.0, 1.0, StepsizeSchedule.constant(alpha))
    assert B.bound_constant(1.0, 1.0, 1.0, alpha, n) >= B.bound_general(p, n) * (1 - 1e-12)


@pytest.mark.parametrize("a", [0.55, 0.6, 2 / 3, 0.75, 0.8, 1.0])
@pytest.mark.parametrize("n", [2, 50, 3000])
def test_power_matches_convolution(a, n):
    h, g = B.power_h(a, 1.0)
    p = B.BoundParams(1.0, 1.0, 1.0, StepsizeSchedule.power(a))
    r = math.sqrt(p.schedule.alpha(n))
    conv = B.bound_convolution(p, h, g, n, nu_prev=r, nu_last=r)
    assert B.bound_power(1.0, 1.0, 1.0, a, n) == pytest.approx(conv, rel=1e-6)


def test_special_exponents_are_continuous():
    # the log and Dawson branches agree with the generic branch next to them
    for a in (2 / 3, 1.0):
        for eps in (-1e-6, 1e-6):
            if a + eps > 1:
                continue
            near = B.bound_power(1.0, 1.0, 1.0, a + eps, 1000)
            assert near == pytest.approx(B.bound_power(1.0, 1.0, 1.0, a, 1000), rel=1e-3)


@pytest.mark.parametrize("a", [0.6, 2 / 3, 0.8, 1.0])
def test_asymptote_ratio_tends_to_one(a):
    gaps = [abs(B.bound_power(1, 1, 1, a, n) / B.asymptote_power(1, 1, 1, a, n) - 1) for n in (10**3, 10**5, 10**7)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_convolution_condition_a_reported():
    p = B.BoundParams(1.0, 1.0, 1.0, StepsizeSchedule.power(0.8))
    with pytest.raises(ConvolutionConditionError) as exc:
        B.bound_convolution(p, lambda x: 1e-6 + 0 * x, 1.5, 100)
    assert exc.value.condition == "a" and exc.value.k == 2


def test_convolution_condition_b_reported():
    p = B.BoundParams(1.0, 1.0, 1.0, StepsizeSchedule.power(0.8))
    h, g = B.power_h(0.8, 1.0)
    with pytest.raises(ConvolutionConditionError) as exc:
        B.bound_convolution(p, h, 1.0, 100)
    assert exc.value.condition == "b"


def test_fixed_horizon_rate_value():
    assert B.fixed_horizon_rate(1.0, 1.0, 1.0, 10**6) == pytest.approx(0.4, rel=1e-14)
    assert B.auto_alpha(1000) == pytest.approx(1 / 600)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10**5))
def test_fixed_horizon_rate_dominates(n0):
    assert B.fixed_horizon_rate(1.0, 1.0, 1.0, n0) >= B.bound_constant(1.0, 1.0, 1.0, B.auto_alpha(n0), n0)


def test_euclidean_constant_formula():
    alpha, n, R = 0.01, 400, 2.0
    s = StepsizeSchedule.constant(alpha)
    expected = (R**2 + 1.5**2 * 0.3**2 * alpha**2 * n) / (n * alpha * (1 - alpha))
    assert B.bound_euclidean_sq(R, 1.5, 0.3, s, n) == pytest.approx(expected, rel=1e-12)
    assert B.bound_euclidean(R, 1.5, 0.3, s, n) == pytest.approx(math.sqrt(expected), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10**5), st.floats(0.0, 10.0), st.floats(0.0, 5.0))
def test_euclidean_closed_form_dominates(n0, R, sigma):
    s = StepsizeSchedule.constant(1 / math.sqrt(n0 + 1))
    assert B.euclidean_fixed_horizon(R, 1.0, sigma, n0) >= B.bound_euclidean(R, 1.0, sigma, s, n0) * (1 - 1e-12)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([0.55, 2 / 3, 0.8, 1.0]), st.integers(2, 3000))
def test_euclidean_power_dominates(a, n):
    s = StepsizeSchedule.power(a)
    assert B.euclidean_power(1.0, 1.0, 1.0, a, n) >= B.bound_euclidean(1.0, 1.0, 1.0, s, n) * (1 - 1e-12)


def test_high_prob_bound():
    assert B.high_prob_bound(0.3, 0.05) == pytest.approx(6.0)
    for p in (0.0, 1.0, -0.5):
        with pytest.raises(DomainError):
            B.high_prob_bound(0.3, p)


def test_kappa_bar_modes():
    s = StepsizeSchedule.power(0.8)
    assert B.kappa_bar("range", r=4.0) == 4.0
    k_inf = B.kappa_bar("fixdist", dist0=1.0, schedule=s, variance=1.0)
    for n in (10, 1000, 10**5):
        assert B.kappa_bar_horizon(1.0, s, 1.0, 1.0, n) <= k_inf
    with pytest.raises(DomainError):
        B.kappa_bar("fixdist", dist0=1.0, schedule=StepsizeSchedule.power(0.6), variance=1.0)
    with pytest.raises(DomainError):
        B.kappa_bar("fixdist", dist0=1.0, schedule=s, variance=VarianceSchedule.sequence(lambda k: 1.0 + 0 * k))


@pytest.mark.parametrize(
    "args",
    [(-1.0, 1.0, 1.0, 0.8, 10), (1.0, 0.5, 1.0, 0.8, 10), (1.0, 1.0, -1.0, 0.8, 10), (1.0, 1.0, 1.0, 0.8, 0), (1.0, 1.0, 1.0, 0.4, 10)],
)
def test_power_domain(args):
    with pytest.raises(DomainError):
        B.bound_power(*args)
