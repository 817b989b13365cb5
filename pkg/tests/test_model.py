import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from misspecopt.errors import DataError, DomainError
from misspecopt.model import GaussianScaledMeanFamily, make_family

LOG2PI = math.log(2 * math.pi)


@pytest.mark.parametrize(
    "dim,theta,z,expected",
    [
        (1, 0.0, [0.0], -0.5 * LOG2PI),
        (2, 1.0, [1.0, 2.0], -LOG2PI),
        (1, 3.0, [4.0], -0.5 - 0.5 * LOG2PI),
    ],
)
def test_log_density(dim, theta, z, expected):
    fam = GaussianScaledMeanFamily(dim)
    assert float(fam.log_density([theta], np.array([z]))[0]) == pytest.approx(expected, abs=1e-12)


def test_log_density_rejects_nan():
    with pytest.raises(DomainError):
        GaussianScaledMeanFamily(1).log_density([0.0], np.array([[np.nan]]))


@pytest.mark.parametrize("dim,z,expected", [(1, [3.0], 0.0), (1, [4.0], 1.0), (2, [4.0, 7.0], 3.0)])
def test_score(dim, z, expected):
    fam = GaussianScaledMeanFamily(dim)
    assert fam.score([3.0], np.array([z]))[0, 0] == pytest.approx(expected, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(theta=st.floats(-5, 5), z1=st.floats(-10, 10), z2=st.floats(-10, 10))
def test_score_is_derivative_of_log_density(theta, z1, z2):
    fam = GaussianScaledMeanFamily(2)
    z = np.array([[z1, z2]])
    h = 1e-5
    fd = (fam.log_density([theta + h], z) - fam.log_density([theta - h], z)) / (2 * h)
    assert fam.score([theta], z)[0, 0] == pytest.approx(float(fd[0]), rel=1e-6, abs=1e-6)


@pytest.mark.parametrize("dim,expected", [(1, 1.0), (2, 5.0), (3, 14.0)])
def test_fisher_information(dim, expected):
    fam = GaussianScaledMeanFamily(dim)
    assert fam.fisher_information([3.0])[0, 0] == pytest.approx(expected)
    # generic quadrature path agrees with the closed form
    from misspecopt.model import ParametricFamily

    assert ParametricFamily.fisher_information(fam, [3.0])[0, 0] == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize(
    "dim,data,expected",
    [(1, [[2.0], [4.0]], 3.0), (2, [[1.0, 2.0], [3.0, 6.0]], 2.0), (1, [[5.0]], 5.0)],
)
def test_mle_closed_form(dim, data, expected):
    fam = GaussianScaledMeanFamily(dim)
    assert fam.mle_fit(np.array(data))[0] == pytest.approx(expected, abs=1e-12)


def test_mle_matches_grid_maximization():
    fam = GaussianScaledMeanFamily(2)
    data = np.array([[1.0, 2.0], [3.0, 6.0]])
    grid = np.linspace(0, 4, 40001)
    ll = [fam.log_density([g], data).sum() for g in grid]
    assert grid[int(np.argmax(ll))] == pytest.approx(2.0, abs=1e-4)


def test_numeric_mle_agrees_with_closed_form(rng):
    fam = GaussianScaledMeanFamily(3)
    data = fam.sample([1.7], 50, rng)
    assert fam.mle_numeric(data)[0] == pytest.approx(fam.mle_fit(data)[0], abs=1e-8)


def test_mle_rejects_bad_data():
    fam = GaussianScaledMeanFamily(1)
    with pytest.raises(DataError):
        fam.mle_fit(np.array([[np.nan], [np.inf]]))
    with pytest.raises(DataError):
        fam.mle_fit(np.empty((0, 1)))


def test_sample_moments_and_determinism():
    fam = GaussianScaledMeanFamily(1)
    x = fam.sample([3.0], 100_000, np.random.default_rng(7))[:, 0]
    assert abs(x.mean() - 3.0) < 3 / math.sqrt(1e5)
    se_var = math.sqrt(2.0 / 1e5)
    assert abs(x.var(ddof=1) - 1.0) < 3 * se_var
    y = fam.sample([3.0], 100_000, np.random.default_rng(7))[:, 0]
    assert np.array_equal(x, y)


def test_point_distribution_closed_forms():
    pt = GaussianScaledMeanFamily(2).at([3.0])
    assert pt.marginal_mean(1) == 6.0
    assert pt.marginal_ppf(0, 0.5) == pytest.approx(3.0)
    # E[(x - z)^+] at x = mean is phi(0)
    assert pt.partial_expectation(1, 6.0) == pytest.approx(1 / math.sqrt(2 * math.pi))


def test_make_family():
    assert make_family({"kind": "gaussian_scaled_mean"}, 3).data_dim == 3
    with pytest.raises(ValueError):
        make_family({"kind": "poisson"}, 1)
