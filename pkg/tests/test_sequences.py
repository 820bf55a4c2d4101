import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skmfix.errors import DomainError
from skmfix.sequences import (
    StepsizeSchedule,
    VarianceSchedule,
    delta_sq,
    linear_recursion,
    nu,
    nu_array,
    parse_exponent,
    pi_weights,
    power_constants,
    sigma_fn,
    tau,
)

exponents = st.floats(0.5, 1.0)
horizons = st.integers(1, 300)


def brute_pi(alphas, n):
    # alphas[k] for k = 1..n, direct products
    return [alphas[k] * math.prod(1 - alphas[i] for i in range(k + 1, n + 1)) for k in range(1, n + 1)]


def test_tau_harmonic_exact():
    s = StepsizeSchedule.power(1.0)
    exact = sum(Fraction(1, k + 1) * Fraction(k, k + 1) for k in range(1, 8))
    assert tau(s, 7) == pytest.approx(float(exact), rel=1e-15)
    assert tau(s, 0) == 0.0


def test_alpha_indexing():
    s = StepsizeSchedule.power(0.5)
    al = s.alpha_array(4)
    assert math.isnan(al[0])
    assert al[3] == pytest.approx(0.5)
    assert s.alpha(3) == pytest.approx(0.5)


def test_constant_schedule():
    s = StepsizeSchedule.constant(0.25)
    assert tau(s, 10) == pytest.approx(10 * 0.25 * 0.75)
    # closed form delta^2 for constant alpha
    n = 30
    q = 0.75**2
    expected = 0.25**2 * (1 - q**n) / (1 - q)
    assert delta_sq(s, n) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
def test_constant_schedule_domain(bad):
    with pytest.raises(DomainError):
        StepsizeSchedule.constant(bad)


@pytest.mark.parametrize("bad", [0.0, -1.0, 1.2])
def test_power_schedule_domain(bad):
    with pytest.raises(DomainError):
        StepsizeSchedule.power(bad)


def test_sigma_fn_values():
    assert sigma_fn(0.0) == 1.0
    assert sigma_fn(1 / math.pi) == pytest.approx(1.0)
    assert sigma_fn(4 / math.pi) == pytest.approx(0.5)
    np.testing.assert_allclose(sigma_fn(np.array([0.1, 100.0])), [1.0, 1 / math.sqrt(100 * math.pi)])
    with pytest.raises(DomainError):
        sigma_fn(-1.0)


@settings(max_examples=40, deadline=None)
@given(exponents, horizons)
def test_pi_weights_match_products(a, n):
    s = StepsizeSchedule.power(a)
    al = s.alpha_array(n)
    np.testing.assert_allclose(pi_weights(s, n), brute_pi(al, n), rtol=1e-12, atol=1e-300)


@settings(max_examples=40, deadline=None)
@given(exponents, horizons)
def test_pi_weights_sum(a, n):
    # sum_k pi_k^n = 1 - prod_i (1 - alpha_i)
    s = StepsizeSchedule.power(a)
    al = s.alpha_array(n)[1:]
    assert pi_weights(s, n).sum() == pytest.approx(1 - np.prod(1 - al), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(exponents, horizons)
def test_delta_sq_is_sum_of_squares(a, n):
    s = StepsizeSchedule.power(a)
    assert delta_sq(s, n) == pytest.approx(float(np.sum(pi_weights(s, n) ** 2)), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(exponents, st.integers(1, 2000))
def test_delta_sq_sandwich(a, n):
    s = StepsizeSchedule.power(a)
    al = s.alpha_array(n + 1)
    d = delta_sq(s, n)
    assert al[n] / 2 * (1 - 1e-12) <= d <= al[n + 1] * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(exponents, st.floats(0.0, 5.0), horizons)
def test_nu_bounded_is_scaled_delta(a, sigma, n):
    s = StepsizeSchedule.power(a)
    v = VarianceSchedule.bounded(sigma)
    assert nu(s, v, n) == pytest.approx(sigma * math.sqrt(delta_sq(s, n)), rel=1e-12, abs=1e-300)


def test_nu_sequence_brute_force():
    s = StepsizeSchedule.power(0.7)
    v = VarianceSchedule.sequence(lambda k: 1.0 + 0.5 * np.sin(np.asarray(k, float)))
    n = 60
    al = s.alpha_array(n)
    w = brute_pi(al, n)
    th = [1.0 + 0.5 * math.sin(k) for k in range(1, n + 1)]
    expected = math.sqrt(sum((wk * tk) ** 2 for wk, tk in zip(w, th)))
    assert nu_array(s, v, n)[n] == pytest.approx(expected, rel=1e-12)


def test_linear_recursion_loop():
    rng = np.random.default_rng(0)
    c, f = rng.random(50), rng.random(50)
    # index 0 carries y0; coef[0] and forcing[0] are ignored
    y, ref = 0.3, [0.3]
    for ci, fi in zip(c[1:], f[1:]):
        y = ci * y + fi
        ref.append(y)
    np.testing.assert_allclose(linear_recursion(c, f, 0.3), ref, rtol=1e-13)


@settings(max_examples=30, deadline=None)
@given(exponents)
def test_alpha_nonincreasing_tau_increasing(a):
    s = StepsizeSchedule.power(a)
    al = s.alpha_array(500)[1:]
    assert np.all(np.diff(al) <= 0)
    assert np.all(np.diff(s.tau_array(500)) > 0)


def test_power_constants_closed_values():
    c1 = power_constants(1.0)
    assert c1.d_a == pytest.approx(math.sqrt(3) * math.exp(1 / 9) * 32 / 27, rel=1e-15)
    assert c1.omega == pytest.approx(math.sqrt(3) / 2 * math.exp(17 / 72), rel=1e-15)
    assert c1.b_a is None and c1.lambda_a is None
    c8 = power_constants(0.8)
    assert c8.b_a == pytest.approx(2.0)
    assert c8.d_a is not None
    assert power_constants(0.6).d_a is None
    assert power_constants(2 / 3).d_a is None


@settings(max_examples=20, deadline=None)
@given(exponents)
def test_gamma_dominates_ratio(a):
    # alpha_k (1 - alpha_k) <= gamma alpha_{k+1} (1 - alpha_{k+1}) for all k >= 2
    g = power_constants(a).gamma_a
    al = StepsizeSchedule.power(a).alpha_array(5001)
    w = al * (1 - al)
    assert g >= 1.0
    assert np.all(w[2:-1] <= g * w[3:] * (1 + 1e-12))


def test_power_constants_domain():
    with pytest.raises(DomainError):
        power_constants(0.4)


def test_parse_exponent():
    assert parse_exponent("2/3") == 2 / 3
    assert parse_exponent(" 1 ") == 1.0
    assert parse_exponent("0.8") == 0.8
    assert parse_exponent(0.55) == 0.55
