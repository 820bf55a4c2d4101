import numpy as np
import pytest

from skmfix.errors import DomainError
from skmfix.noise import NoiseModel, h3_partial_sums, parse_noise, sample, sample_block, variance_at
from skmfix.sequences import StepsizeSchedule


@pytest.mark.parametrize("dist", ["gaussian", "rademacher", "uniform"])
def test_second_moment_matches_scale(dist):
    m = NoiseModel.iid(5, 2.0, dist)
    u = sample_block(m, 1, 40000, np.random.default_rng(0))
    assert u.shape == (40000, 5)
    sq = np.sum(u**2, axis=1)
    assert sq.mean() == pytest.approx(4.0, rel=0.03)
    assert np.abs(u.mean(axis=0)).max() < 0.05


def test_block_equals_sequential():
    m = NoiseModel.iid(3, 1.0)
    a = sample_block(m, 1, 10, np.random.default_rng(5))
    rng = np.random.default_rng(5)
    b = np.vstack([sample(m, n, rng) for n in range(1, 11)])
    np.testing.assert_array_equal(a, b)


def test_none_is_zero():
    m = NoiseModel.none(4)
    assert not np.any(sample_block(m, 1, 5, np.random.default_rng(0)))
    assert variance_at(m, 3) == 0.0


def test_vanishing_levels():
    m = NoiseModel.vanishing(2, lambda n: 1.0 / np.asarray(n, float))
    np.testing.assert_allclose(m.levels([1, 2, 4]), [1.0, 0.5, 0.25])
    with pytest.raises(DomainError):
        sample_block(m, 0, 3, np.random.default_rng(0))


def test_h3_partial_sums_bounded_noise():
    s = StepsizeSchedule.power(0.8)
    sums = h3_partial_sums(NoiseModel.iid(2, 1.0), s, 500)
    assert np.all(np.diff(sums) >= 0)


def test_parse_noise():
    assert parse_noise("none", 3).kind == "none"
    m = parse_noise("gaussian:0.5", 3)
    assert m.scale == 0.5 and m.distribution == "gaussian"
    for bad in ("cauchy:1", "gaussian:-1", "gaussian"):
        with pytest.raises(DomainError):
            parse_noise(bad, 3)
