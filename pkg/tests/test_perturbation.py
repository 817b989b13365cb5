import math

import numpy as np
import pytest
from scipy import stats

from misspecopt.errors import CoverageError, DivergenceError
from misspecopt.model import GaussianScaledMeanFamily
from misspecopt.perturbation import (
    Regime,
    RegimeConfig,
    TiltedDistribution,
    center_direction,
    log_likelihood_ratio,
    make_direction,
    regime_t,
    smooth_g,
    tilt_weight,
)


def test_center_direction_examples(fam1, fam2):
    from misspecopt.perturbation import RawDirection

    class Sq(RawDirection):
        name = "sq"

        def __call__(self, z):
            return z[:, 0] ** 2

    u = center_direction(Sq(), fam1, [0.0])
    assert u.offset == pytest.approx(1.0, abs=1e-12)
    lin = make_direction({"name": "linear", "gamma": [1.0]}, fam1, [3.0])
    assert lin.offset == pytest.approx(0.0, abs=1e-12)
    assert lin(np.array([[4.5]]))[0] == pytest.approx(1.5)
    prod = make_direction("prod_sq", fam2, [3.0])
    assert prod.offset == pytest.approx(370.0, rel=1e-12)


def test_second_moments(fam2):
    assert make_direction("hermite2", fam2, [3.0]).second_moment == pytest.approx(4.0)
    assert make_direction("prod_centered_sq", fam2, [3.0]).second_moment == pytest.approx(9 / 4 - 1 / 4)


@pytest.mark.parametrize("kind", ["exponential", "relu_linear", "smooth_g"])
def test_zero_tilt_is_base(fam1, kind):
    u = make_direction("hermite2", fam1, [3.0])
    q = TiltedDistribution(fam1, [3.0], u, 0.0, kind)
    assert q.C == 1.0
    z = np.linspace(0, 6, 7)[:, None]
    assert np.allclose(q.density(z), stats.norm.pdf(z[:, 0], 3.0))
    assert q.marginal_ppf(0, 0.25) == pytest.approx(3.0 + stats.norm.ppf(0.25), abs=1e-12)


def test_exponential_mean_shift(fam1):
    u = make_direction({"name": "linear", "gamma": [1.0]}, fam1, [3.0])
    q = TiltedDistribution(fam1, [3.0], u, 0.2, "exponential")
    assert q.C == pytest.approx(math.exp(0.02), abs=1e-10)
    assert q.density(np.array([[3.2]]))[0] == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-10)
    assert q.marginal_mean(0) == pytest.approx(3.2, abs=1e-4)


def test_relu_bounded_direction_constant_is_one(fam1):
    # smooth_g(z) is bounded by 1, so t sup|u| < 1 keeps the positive part inactive
    from misspecopt.perturbation import RawDirection

    class Bounded(RawDirection):
        name = "bounded"

        def __call__(self, z):
            return np.tanh(z[:, 0] - 3.0)

    u = center_direction(Bounded(), fam1, [3.0])
    q = TiltedDistribution(fam1, [3.0], u, 0.5, "relu_linear")
    assert q.C == pytest.approx(1.0, abs=1e-10)


def test_relu_density_vanishes(fam1):
    u = make_direction({"name": "linear", "gamma": [1.0]}, fam1, [0.0])
    q = TiltedDistribution(fam1, [0.0], u, 0.5, "relu_linear")
    assert q.density(np.array([[-3.0]]))[0] == 0.0
    llr = log_likelihood_ratio(q, np.array([[-3.0], [0.0]]))
    assert llr.zero_density and llr.value == -np.inf


def test_exponential_divergence_detected(fam2):
    u = make_direction("prod_sq", fam2, [3.0])
    with pytest.raises(DivergenceError):
        TiltedDistribution(fam2, [3.0], u, 0.03, "exponential")


def test_exponential_quadratic_divergence_past_half(fam1):
    u = make_direction("hermite2", fam1, [0.0])
    TiltedDistribution(fam1, [0.0], u, 0.2, "exponential")
    with pytest.raises(DivergenceError):
        TiltedDistribution(fam1, [0.0], u, 0.6, "exponential")


def test_coverage_error_on_narrow_grid(fam1):
    u = make_direction({"name": "linear", "gamma": [1.0]}, fam1, [0.0])
    q = TiltedDistribution(fam1, [0.0], u, 0.1, "exponential", width=2.0)
    with pytest.raises(CoverageError):
        q.sample(10, np.random.default_rng(0))


def test_smooth_g_properties():
    x = np.linspace(-3, 3, 20001)
    g = smooth_g(x)
    assert np.allclose(g[np.abs(x) <= 0.5], x[np.abs(x) <= 0.5])
    assert np.all(np.abs(g) <= 1.0)
    assert np.all(np.diff(g) >= -1e-15)
    assert np.allclose(g[x >= 1.5], 1.0) and np.allclose(g[x <= -1.5], -1.0)
    assert np.all(tilt_weight("smooth_g", x) >= 0)


def test_tilted_sampling_mean(fam1):
    rng = np.random.default_rng(3)
    u = make_direction({"name": "linear", "gamma": [1.0]}, fam1, [3.0])
    for t, mean in [(0.0, 3.0), (0.2, 3.2)]:
        x = TiltedDistribution(fam1, [3.0], u, t, "exponential").sample(100_000, rng)[:, 0]
        assert abs(x.mean() - mean) < 3 * x.std() / math.sqrt(x.size)


def test_resolution_refinement_moves_moments_little(fam2):
    u = make_direction("prod_centered_sq", fam2, [3.0])
    qs = [TiltedDistribution(fam2, [3.0], u, 0.1, "relu_linear", resolution=r) for r in (256, 512)]
    for j in range(2):
        m = [q.marginal_mean(j) for q in qs]
        assert abs(m[0] - m[1]) < 1e-3
        s = [q.expect(lambda z: z[:, j] ** 2) for q in qs]
        assert abs(s[0] - s[1]) < 1e-3


def test_tilted_cdf_ppf_roundtrip(fam1):
    u = make_direction("hermite2", fam1, [3.0])
    q = TiltedDistribution(fam1, [3.0], u, 0.1, "exponential")
    for p in (0.05, 1 / 6, 0.5, 0.9):
        assert q.marginal_cdf(0, q.marginal_ppf(0, p)) == pytest.approx(p, abs=1e-12)


@pytest.mark.parametrize(
    "n,alpha,t,regime",
    [(100, 0.5, 0.1, Regime.BALANCED), (100, 2.0, 1e-4, Regime.MILD), (1024, 0.1, 1024**-0.1, Regime.SEVERE)],
)
def test_regime_t(n, alpha, t, regime):
    got_t, got_r = regime_t(RegimeConfig(alpha, n))
    assert got_t == pytest.approx(t, rel=1e-12)
    assert got_r is regime


def test_regime_t_1024():
    assert RegimeConfig(0.1, 1024).t == pytest.approx(0.5, rel=1e-12)


def test_llr_zero_tilt(fam1, rng):
    u = make_direction("hermite2", fam1, [3.0])
    q = TiltedDistribution(fam1, [3.0], u, 0.0)
    assert log_likelihood_ratio(q, rng.normal(size=(5, 1))).value == 0.0
