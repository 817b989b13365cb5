import numpy as np
import pytest
from scipy import integrate, stats

from misspecopt.quadrature import expect, hermite_rule, normal_product_rule, panel_rule, tensor_rule


@pytest.mark.parametrize("k,moment", [(0, 1.0), (1, 2.0), (2, 5.0), (4, 2.0**4 + 6 * 4 + 3)])
def test_hermite_moments(k, moment):
    x, w = hermite_rule(2.0, 1.0, 32)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert w @ x**k == pytest.approx(moment, rel=1e-12)


def test_panel_rule_integrates_kinked_function_to_high_accuracy():
    # E|z - 0.3| under N(0, 1), oracle by adaptive quadrature split at the kink
    f = lambda z: abs(z - 0.3) * stats.norm.pdf(z)
    oracle = integrate.quad(f, -np.inf, 0.3, epsabs=1e-14)[0] + integrate.quad(f, 0.3, np.inf, epsabs=1e-14)[0]
    x, w = panel_rule(0.0, 1.0, [0.3])
    assert w @ np.abs(x - 0.3) == pytest.approx(oracle, abs=1e-10)


def test_hermite_alone_is_inaccurate_on_kinks():
    x, w = hermite_rule(0.0, 1.0, 64)
    px, pw = panel_rule(0.0, 1.0, [0.3])
    assert abs(w @ np.abs(x - 0.3) - pw @ np.abs(px - 0.3)) > 1e-8


def test_tensor_rule_product_weights():
    nodes, weights = tensor_rule([hermite_rule(0.0, 1.0, 8), hermite_rule(1.0, 2.0, 8)])
    assert nodes.shape == (64, 2)
    assert weights.sum() == pytest.approx(1.0)
    assert expect(lambda z: z[:, 0] * z[:, 1], nodes, weights) == pytest.approx(0.0, abs=1e-12)
    assert expect(lambda z: z[:, 1] ** 2, nodes, weights) == pytest.approx(5.0, rel=1e-12)


def test_normal_product_rule_mixes_axes():
    nodes, weights = normal_product_rule([3.0, 6.0], [1.0, 1.0], [[2.0], None])
    assert weights.sum() == pytest.approx(1.0, abs=1e-12)
    got = weights @ np.maximum(2.0 - nodes[:, 0], 0.0)
    r = -1.0
    assert got == pytest.approx(r * stats.norm.cdf(r) + stats.norm.pdf(r), abs=1e-10)
