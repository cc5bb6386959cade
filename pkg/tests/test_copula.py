import warnings

import numpy as np
import pytest
from scipy.stats import multivariate_normal, norm

from groupmte.copula import (BoundaryWarning, CopulaSpec, bvn_cdf, copula,
                             copula_density, fit_rho, quadrant_probability,
                             std_normal_cdf, std_normal_pdf, std_normal_quantile)
from groupmte.errors import DegenerateError
from groupmte.simulation import stream


def test_normal_primitives():
    x = np.array([-2.0, 0.0, 1.3])
    assert np.allclose(std_normal_cdf(x), norm.cdf(x), atol=1e-14)
    assert np.allclose(std_normal_pdf(x), norm.pdf(x), atol=1e-14)
    u = np.array([0.01, 0.5, 0.99])
    assert np.allclose(std_normal_quantile(u), norm.ppf(u), atol=1e-12)
    with pytest.raises(ValueError):
        std_normal_quantile(0.0)


def test_bvn_cdf_arcsine_identity():
    # Phi2(0, 0, rho) = 1/4 + arcsin(rho) / (2 pi), exact.
    for rho in (-0.9, -0.3, 0.0, 0.2, 0.75):
        exact = 0.25 + np.arcsin(rho) / (2.0 * np.pi)
        assert abs(bvn_cdf(0.0, 0.0, rho) - exact) < 1e-9


def test_bvn_cdf_against_scipy():
    rng = stream(5, 90)
    for _ in range(25):
        a, b = rng.normal(size=2) * 1.5
        rho = rng.uniform(-0.95, 0.95)
        ref = multivariate_normal(mean=[0.0, 0.0],
                                  cov=[[1.0, rho], [rho, 1.0]]).cdf([a, b])
        assert abs(bvn_cdf(a, b, rho) - ref) < 1e-6


def test_bvn_cdf_marginal_limits():
    assert abs(bvn_cdf(8.5, 0.7, 0.4) - norm.cdf(0.7)) < 1e-9
    assert bvn_cdf(-9.0, 0.0, 0.4) < 1e-9


def test_copula_frechet_bounds_and_two_increasing():
    grid = np.linspace(0.05, 0.95, 20)
    for rho in (-0.8, -0.3, 0.0, 0.3, 0.8):
        c = np.array([[copula(u, v, rho) for v in grid] for u in grid])
        upper = np.minimum.outer(grid, grid)
        lower = np.maximum(np.add.outer(grid, grid) - 1.0, 0.0)
        assert np.all(c <= upper + 1e-9)
        assert np.all(c >= lower - 1e-9)
        # 2-increasing: every rectangle has nonnegative C-measure.
        rect = c[1:, 1:] - c[:-1, 1:] - c[1:, :-1] + c[:-1, :-1]
        assert rect.min() > -1e-9


def test_copula_density_matches_finite_difference():
    eps = 1e-4
    for rho in (-0.5, 0.2, 0.7):
        for u, v in ((0.3, 0.6), (0.5, 0.5), (0.8, 0.2)):
            fd = (copula(u + eps, v + eps, rho) - copula(u - eps, v + eps, rho)
                  - copula(u + eps, v - eps, rho) + copula(u - eps, v - eps, rho)) \
                / (4.0 * eps * eps)
            assert abs(copula_density(u, v, rho) - fd) < 5e-4


def test_copula_rejects_boundary_arguments():
    with pytest.raises(ValueError):
        copula(0.0, 0.5, 0.2)
    with pytest.raises(ValueError):
        copula_density(0.5, 1.0, 0.2)


def test_quadrant_probabilities_sum_to_one():
    rng = stream(5, 91)
    for _ in range(40):
        p0, p1 = rng.uniform(0.02, 0.98, size=2)
        rho = rng.uniform(-0.9, 0.9)
        total = sum(quadrant_probability(d, dp, p0, p1, rho)
                    for d in (0, 1) for dp in (0, 1))
        assert abs(total - 1.0) < 1e-12
        for d in (0, 1):
            for dp in (0, 1):
                assert quadrant_probability(d, dp, p0, p1, rho) > -1e-12


def test_copula_spec_validation():
    spec = CopulaSpec(rho=0.3)
    assert abs(spec.cdf(0.5, 0.5) - copula(0.5, 0.5, 0.3)) < 1e-14
    assert abs(spec.quadrant(1, 1, 0.4, 0.6) - copula(0.4, 0.6, 0.3)) < 1e-14
    with pytest.raises(ValueError):
        CopulaSpec(rho=0.999, eps_bound=0.9)


def _cells_from_rho(rho, n, seed):
    rng = stream(seed, 92)
    prop = rng.uniform(0.2, 0.8, size=(n, 2))
    a = norm.ppf(prop)
    chol = np.linalg.cholesky([[1.0, rho], [rho, 1.0]])
    v = rng.standard_normal((n, 2)) @ chol.T
    d = (v <= a).astype(int)
    return d, prop


def test_fit_rho_recovers_known_correlation():
    for rho in (-0.4, 0.0, 0.35):
        d, prop = _cells_from_rho(rho, 60000, 17)
        est = fit_rho(d, prop)
        assert abs(est.rho - rho) < 0.02


def test_fit_rho_boundary_warning():
    d, prop = _cells_from_rho(0.9, 5000, 3)
    with pytest.warns(BoundaryWarning):
        est = fit_rho(d, prop, eps_bound=0.5)
    assert est.rho == 0.5


def test_fit_rho_rejects_bad_inputs():
    with pytest.raises(DegenerateError):
        fit_rho(np.empty((0, 2), dtype=int), np.empty((0, 2)))
    with pytest.raises(ValueError):
        fit_rho(np.array([[1, 0]]), np.array([[0.0, 0.5]]))
