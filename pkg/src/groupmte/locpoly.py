"""Shared local polynomial regression helpers (univariate and bivariate).

The bivariate cubic fit uses the fixed 10-term basis
[1, u0, u1, u0^2, u0*u1, u1^2, u0^3, u0^2*u1, u0*u1^2, u1^3] in differences
u = point - target, so the coefficient at index 4 estimates the cross-partial
derivative directly.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyWindowError, SingularWindowError

CROSS_INDEX = 4


def kernel_function(name):
    """Univariate kernel by name: 'epanechnikov', 'uniform', or 'gaussian'."""
    if name == "epanechnikov":
        return lambda u: 0.75 * np.clip(1.0 - u * u, 0.0, None) * (np.abs(u) <= 1.0)
    if name == "uniform":
        return lambda u: 0.5 * (np.abs(u) <= 1.0)
    if name == "gaussian":
        return lambda u: np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)
    raise ValueError(f"unknown kernel {name!r}")


def cubic_basis_2d(u0, u1):
    """Bivariate cubic basis columns at difference coordinates (u0, u1)."""
    return np.column_stack([
        np.ones_like(u0), u0, u1,
        u0 * u0, u0 * u1, u1 * u1,
        u0 ** 3, u0 * u0 * u1, u0 * u1 * u1, u1 ** 3,
    ])


def weighted_lsq(design, responses, weights):
    """Weighted least squares; raises on empty or rank-deficient windows."""
    if float(weights.sum()) <= 0.0:
        raise EmptyWindowError("no observations carry kernel weight at the target")
    sw = np.sqrt(weights)
    a = design * sw[:, None]
    b = responses * sw
    coefs, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < design.shape[1]:
        raise SingularWindowError(
            f"local design rank {rank} below column count {design.shape[1]}"
        )
    return coefs


def local_poly_1d(x, y, target, h, degree=2, kernel="epanechnikov"):
    """Univariate local polynomial fit; returns the coefficient vector in
    difference powers, so coefs[k] estimates f^(k)(target) / k!."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = kernel_function(kernel)
    u = x - target
    weights = k(u / h)
    active = weights > 0.0
    if not active.any():
        raise EmptyWindowError("no observations carry kernel weight at the target")
    u, y, weights = u[active], y[active], weights[active]
    design = np.column_stack([u ** j for j in range(degree + 1)])
    return weighted_lsq(design, y, weights)


def _window_2d(points, responses, target, h, kernel):
    points = np.asarray(points, dtype=float)
    responses = np.asarray(responses, dtype=float)
    k = kernel_function(kernel)
    u0 = points[:, 0] - target[0]
    u1 = points[:, 1] - target[1]
    weights = k(u0 / h) * k(u1 / h)
    active = weights > 0.0
    if not active.any():
        raise EmptyWindowError("no observations carry kernel weight at the target")
    design = cubic_basis_2d(u0[active], u1[active])
    return design, responses[active], weights[active]


def local_cubic_2d(points, responses, target, h, kernel="epanechnikov"):
    """Bivariate local cubic fit at a target point with a product kernel.

    Returns (coefficient vector, kernel weight sum).  The cross-partial
    estimate is coefs[CROSS_INDEX].
    """
    design, resp, weights = _window_2d(points, responses, target, h, kernel)
    coefs = weighted_lsq(design, resp, weights)
    return coefs, float(weights.sum())


def local_cubic_2d_with_se(points, responses, target, h, kernel="epanechnikov"):
    """Bivariate local cubic fit plus sandwich standard errors.

    Returns (coefs, se, ess): se is the per-coefficient standard error from
    the heteroskedasticity-robust sandwich (X'WX)^-1 X'W^2X sigma^2
    (X'WX)^-1, and ess the kernel effective sample size (sum w)^2 / sum w^2.
    """
    design, resp, weights = _window_2d(points, responses, target, h, kernel)
    coefs = weighted_lsq(design, resp, weights)
    resid = resp - design @ coefs
    wsum = float(weights.sum())
    ess = wsum * wsum / float((weights * weights).sum())
    dof = max(ess - design.shape[1], 1.0)
    sigma2 = float((weights * resid * resid).sum()) / wsum * ess / dof
    a = design.T @ (design * weights[:, None])
    b = design.T @ (design * (weights * weights)[:, None]) * sigma2
    try:
        a_inv = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        raise SingularWindowError("local design is singular at the target")
    cov = a_inv @ b @ a_inv
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return coefs, se, ess
