import numpy as np
import pytest

from groupmte.errors import EmptyWindowError, SingularWindowError
from groupmte.locpoly import (CROSS_INDEX, cubic_basis_2d, kernel_function,
                              local_cubic_2d, local_cubic_2d_with_se,
                              local_poly_1d, weighted_lsq)
from groupmte.simulation import stream


def test_kernels():
    u = np.array([-1.5, -0.5, 0.0, 0.5, 1.5])
    epa = kernel_function("epanechnikov")(u)
    assert epa[0] == 0.0 and epa[4] == 0.0
    assert abs(epa[2] - 0.75) < 1e-15
    uni = kernel_function("uniform")(u)
    assert uni.tolist() == [0.0, 0.5, 0.5, 0.5, 0.0]
    gau = kernel_function("gaussian")(np.array([0.0]))
    assert abs(gau[0] - 1.0 / np.sqrt(2 * np.pi)) < 1e-15
    with pytest.raises(ValueError):
        kernel_function("box")


def test_cubic_basis_order():
    b = cubic_basis_2d(np.array([2.0]), np.array([3.0]))[0]
    assert b.tolist() == [1.0, 2.0, 3.0, 4.0, 6.0, 9.0, 8.0, 12.0, 18.0, 27.0]
    assert b[CROSS_INDEX] == 6.0


def test_local_poly_1d_exact_on_quadratic():
    rng = stream(41, 0)
    x = rng.uniform(-1.0, 1.0, 500)
    y = 2.0 + 3.0 * x - 1.5 * x * x
    coefs = local_poly_1d(x, y, 0.2, 0.5, degree=2)
    # Difference-power coefficients at target t: f(t), f'(t), f''(t)/2.
    assert abs(coefs[0] - (2.0 + 3.0 * 0.2 - 1.5 * 0.04)) < 1e-10
    assert abs(coefs[1] - (3.0 - 3.0 * 0.2)) < 1e-10
    assert abs(coefs[2] + 1.5) < 1e-10


def test_local_poly_1d_empty_window():
    with pytest.raises(EmptyWindowError):
        local_poly_1d(np.array([0.0, 0.1]), np.array([1.0, 1.0]), 5.0, 0.2)


def test_local_cubic_2d_exact_cross_derivatives():
    rng = stream(41, 1)
    pts = rng.uniform(0.0, 1.0, size=(800, 2))
    target = (0.45, 0.55)
    cases = [
        (pts[:, 0] * pts[:, 1], 1.0),                 # d2/dxdy (xy) = 1
        (pts[:, 0] ** 2 + pts[:, 1] ** 3, 0.0),       # separable -> 0
        (pts[:, 0] ** 2 * pts[:, 1], 2.0 * target[0]),
    ]
    for resp, truth in cases:
        coefs, wsum = local_cubic_2d(pts, resp, target, 0.3)
        assert abs(coefs[CROSS_INDEX] - truth) < 1e-8
        assert wsum > 0.0


def test_local_cubic_level_exact_in_span():
    rng = stream(41, 2)
    pts = rng.uniform(0.0, 1.0, size=(600, 2))
    resp = 1.0 + pts[:, 0] - 2.0 * pts[:, 1] + 0.5 * pts[:, 0] * pts[:, 1]
    coefs, _ = local_cubic_2d(pts, resp, (0.5, 0.5), 0.4)
    expected = 1.0 + 0.5 - 1.0 + 0.5 * 0.25
    assert abs(coefs[0] - expected) < 1e-10


def test_local_cubic_singular_window():
    pts = np.tile([[0.5, 0.5]], (30, 1))  # no spread: rank-deficient design
    with pytest.raises(SingularWindowError):
        local_cubic_2d(pts, np.ones(30), (0.5, 0.5), 0.2)


def test_local_cubic_empty_window():
    pts = np.tile([[0.1, 0.1]], (30, 1))
    with pytest.raises(EmptyWindowError):
        local_cubic_2d(pts, np.ones(30), (0.9, 0.9), 0.05)


def test_weighted_lsq_zero_weights():
    with pytest.raises(EmptyWindowError):
        weighted_lsq(np.ones((3, 1)), np.ones(3), np.zeros(3))


def test_with_se_matches_plain_fit_and_reports_uncertainty():
    rng = stream(41, 3)
    pts = rng.uniform(0.0, 1.0, size=(3000, 2))
    truth = pts[:, 0] * pts[:, 1]
    resp = truth + 0.1 * rng.standard_normal(3000)
    coefs, se, ess = local_cubic_2d_with_se(pts, resp, (0.5, 0.5), 0.35)
    plain, _ = local_cubic_2d(pts, resp, (0.5, 0.5), 0.35)
    assert np.allclose(coefs, plain, atol=1e-12)
    assert np.all(se >= 0.0)
    assert 0.0 < ess <= 3000.0
    # The cross-derivative estimate should sit within ~4 SEs of the truth.
    assert abs(coefs[CROSS_INDEX] - 1.0) < 4.0 * se[CROSS_INDEX]


def test_with_se_noiseless_gives_zero_se():
    rng = stream(41, 4)
    pts = rng.uniform(0.0, 1.0, size=(500, 2))
    resp = 2.0 + pts[:, 0] + pts[:, 1]
    _, se, _ = local_cubic_2d_with_se(pts, resp, (0.5, 0.5), 0.4)
    assert np.max(se) < 1e-8
