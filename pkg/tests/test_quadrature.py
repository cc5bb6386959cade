import numpy as np
import pytest
from scipy.stats import norm

from groupmte.quadrature import gauss_hermite_rule, truncated_moment, truncated_moments
from groupmte.copula import quadrant_probability
from groupmte.simulation import stream


def test_gauss_hermite_rule_integrates_polynomials():
    rule = gauss_hermite_rule(8)
    nodes = np.array(rule.nodes)
    weights = np.array(rule.weights)
    assert abs(weights.sum() - np.sqrt(np.pi)) < 1e-12
    # int x^2 exp(-x^2) dx = sqrt(pi) / 2
    assert abs((weights * nodes ** 2).sum() - np.sqrt(np.pi) / 2.0) < 1e-12
    with pytest.raises(ValueError):
        gauss_hermite_rule(0)


def test_zeroth_moment_equals_quadrant_probability():
    rng = stream(21, 0)
    for _ in range(25):
        p0, p1 = rng.uniform(0.05, 0.95, size=2)
        rho = rng.uniform(-0.85, 0.85)
        for d in (0, 1):
            for dp in (0, 1):
                i0 = truncated_moment(0, d, dp, p0, p1, rho)
                assert abs(i0 - quadrant_probability(d, dp, p0, p1, rho)) < 2e-6


def test_moments_additivity_over_quadrants():
    # Summing any moment over the four quadrants gives the untruncated
    # bivariate normal moment: 1, 0, 0, rho.
    rng = stream(21, 1)
    for _ in range(25):
        p0, p1 = rng.uniform(0.05, 0.95, size=2)
        rho = rng.uniform(-0.85, 0.85)
        total = sum(truncated_moments(d, dp, p0, p1, rho)
                    for d in (0, 1) for dp in (0, 1))
        assert abs(total[0] - 1.0) < 2e-6
        assert abs(total[1]) < 2e-6
        assert abs(total[2]) < 2e-6
        assert abs(total[3] - rho) < 2e-6


def test_independent_case_factorizes():
    # At rho = 0 the quadrant integral factorizes into univariate pieces:
    # I^1 over d = 1 is -phi(a) (lower-tail mean mass) times p1-side mass.
    p0, p1 = 0.35, 0.6
    a = norm.ppf(p0)
    m = truncated_moments(1, 1, p0, p1, 0.0)
    assert abs(m[0] - p0 * p1) < 1e-10
    assert abs(m[1] - (-norm.pdf(a)) * p1) < 1e-10
    assert abs(m[3] - norm.pdf(a) * norm.pdf(norm.ppf(p1))) < 1e-10


def test_vectorized_matches_scalar():
    p0 = np.array([0.2, 0.5, 0.8])
    p1 = np.array([0.6, 0.3, 0.5])
    vec = truncated_moments(1, 0, p0, p1, 0.25)
    assert vec.shape == (4, 3)
    for k in range(3):
        scalar = truncated_moments(1, 0, float(p0[k]), float(p1[k]), 0.25)
        assert np.allclose(vec[:, k], scalar, atol=1e-12)


def test_monte_carlo_agreement():
    # Direct MC oracle at a handful of tuples (the large-scale version runs
    # in the acceptance suite).
    rng = stream(21, 2)
    n = 400_000
    x = rng.standard_normal((n, 2))
    for _ in range(4):
        p0, p1 = rng.uniform(0.15, 0.85, size=2)
        rho = rng.uniform(-0.7, 0.7)
        t0 = x[:, 0]
        t1 = rho * x[:, 0] + np.sqrt(1.0 - rho * rho) * x[:, 1]
        inq = (t0 <= norm.ppf(p0)) & (t1 > norm.ppf(p1))
        m = truncated_moments(1, 0, p0, p1, rho)
        for j, g in enumerate((np.ones(n), t0, t1, t0 * t1)):
            draws = g * inq
            se = draws.std() / np.sqrt(n)
            assert abs(m[j] - draws.mean()) < 4.0 * se + 1e-12


def test_input_validation():
    with pytest.raises(ValueError):
        truncated_moments(1, 1, 0.0, 0.5, 0.2)
    with pytest.raises(ValueError):
        truncated_moments(1, 1, 0.5, 0.5, 1.0)
    with pytest.raises(ValueError):
        truncated_moments(2, 1, 0.5, 0.5, 0.2)
    with pytest.raises(ValueError):
        truncated_moment(4, 1, 1, 0.5, 0.5, 0.2)
