import numpy as np
import pytest
from scipy.stats import norm

from groupmte.errors import DegenerateError, SeparationError
from groupmte.model import GroupRecord, Layout, make_dataset
from groupmte.probit import (build_multi_index_basis, fit_probit, newton_probit,
                             predict_propensity, probit_objective)
from groupmte.simulation import DgpConfig, simulate_dataset, stream


def test_basis_term_count_and_order():
    basis = build_multi_index_basis(2, 2)
    # binomial(2 + 2, 2) = 6 terms, intercept first, graded by total degree.
    assert len(basis.terms) == 6
    assert basis.terms[0] == (0, 0)
    degrees = [sum(t) for t in basis.terms]
    assert degrees == sorted(degrees)


def test_basis_design_evaluation():
    basis = build_multi_index_basis(2, 2)
    w = np.array([[2.0, 3.0]])
    row = basis.design(w)[0]
    expected = {(0, 0): 1.0, (1, 0): 2.0, (0, 1): 3.0,
                (2, 0): 4.0, (1, 1): 6.0, (0, 2): 9.0}
    for term, value in zip(basis.terms, row):
        assert value == expected[term]


def test_basis_validation():
    with pytest.raises(ValueError):
        build_multi_index_basis(0, 1)
    with pytest.raises(ValueError):
        build_multi_index_basis(2, 0)
    assert build_multi_index_basis(2, 0, allow_intercept_only=True).terms == ((0, 0),)


def test_gradient_matches_finite_differences():
    rng = stream(31, 0)
    n = 300
    design = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    theta_true = np.array([0.2, 0.8, -0.5])
    d = (rng.uniform(size=n) < norm.cdf(design @ theta_true)).astype(float)
    theta = np.array([0.1, 0.3, -0.2])
    _, grad, hess = probit_objective(theta, d, design)
    eps = 1e-6
    for k in range(3):
        bump = np.zeros(3)
        bump[k] = eps
        up, _, _ = probit_objective(theta + bump, d, design)
        dn, _, _ = probit_objective(theta - bump, d, design)
        fd = (up - dn) / (2.0 * eps)
        assert abs(grad[k] - fd) <= 1e-6 * max(1.0, abs(fd))
        up_g = probit_objective(theta + bump, d, design)[1]
        dn_g = probit_objective(theta - bump, d, design)[1]
        assert np.allclose(hess[:, k], (up_g - dn_g) / (2.0 * eps),
                           rtol=1e-4, atol=1e-3)


def test_newton_recovers_coefficients():
    rng = stream(31, 1)
    n = 60000
    design = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    theta_true = np.array([0.3, 1.0, -0.6])
    d = (rng.uniform(size=n) < norm.cdf(design @ theta_true)).astype(float)
    theta, converged, grad_norm = newton_probit(d, design)
    assert converged
    assert grad_norm <= 1e-8
    assert np.max(np.abs(theta - theta_true)) < 0.05


def test_fit_probit_on_simulated_data():
    data = simulate_dataset(DgpConfig(G=20000, seed=6))
    model = fit_probit(data, 0, 1)
    # True index for unit 0 is z0 + 0.5 z1 on the stacked regressor (z0, z1).
    assert model.converged
    assert np.allclose(model.theta, [0.0, 1.0, 0.5], atol=0.05)
    p = predict_propensity(model, data.w_flat())
    assert p.shape == (20000,)
    assert np.all((p > 0.0) & (p < 1.0))
    single = predict_propensity(model, data.w_flat()[0])
    assert isinstance(single, float)
    assert abs(single - p[0]) < 1e-14


def test_fit_probit_degenerate_treatment():
    groups = [GroupRecord(group_id=g, y=(0.0, 0.0), d=(1, g % 2),
                          w=((float(g),), (-float(g),)), x_dim=0)
              for g in range(40)]
    data = make_dataset(groups, Layout(z_dim=1))
    with pytest.raises(DegenerateError):
        fit_probit(data, 0, 1)


def test_separation_raises():
    # Perfectly separated response escalates coefficients past the guard.
    rng = stream(31, 2)
    n = 400
    z = rng.standard_normal(n)
    groups = [GroupRecord(group_id=g, y=(0.0, 0.0), d=(int(z[g] > 0), 1 - int(z[g] > 0)),
                          w=((z[g],), (-z[g],)), x_dim=0) for g in range(n)]
    data = make_dataset(groups, Layout(z_dim=1))
    with pytest.raises(SeparationError):
        fit_probit(data, 0, 1)


def test_predict_propensity_clamps():
    basis = build_multi_index_basis(1, 1)
    from groupmte.probit import ProbitModel
    model = ProbitModel(basis=basis, theta=(0.0, 30.0), converged=True,
                        final_gradient_norm=0.0)
    p = predict_propensity(model, np.array([[5.0], [-5.0]]))
    assert p[0] == 1.0 - 1e-8
    assert p[1] == 1e-8
