"""Semiparametric cross-derivative pipeline.

Stage 1 estimates propensity scores by an additive cubic B-spline series
(optionally l1-penalized) with trimming into (0, 1).  Stage 2 estimates the
copula cross-derivative b4 by a bivariate local cubic regression of
D0 * D1 on the fitted propensity pair.  Stage 3 residualizes covariates by
a partially linear fit, runs the same local cubic on signed arm residuals
for c4, and returns the ratio c4 / b4 as the MTR estimate, together with a
plug-in asymptotic variance built from kernel-moment matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .errors import (DegenerateError, EmptyWindowError, RankDeficientError,
                     SingularWindowError, ZeroDenominatorError)
from .locpoly import (CROSS_INDEX, kernel_function, local_cubic_2d)

_B4_GUARD = 1e-3
_SPLINE_DEGREE = 3


# ---------------------------------------------------------------------------
# Series propensity estimation


@dataclass(frozen=True)
class SplineBasis:
    """Cubic B-spline basis for one continuous column: kappa functions on
    a clamped knot vector with interior knots at equispaced quantiles.  The
    first function is dropped at design time (partition of unity makes it
    collinear with the intercept)."""

    knots: np.ndarray
    kappa: int

    def design(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.knots[0], self.knots[-1])
        mat = BSpline.design_matrix(x, self.knots, _SPLINE_DEGREE,
                                    extrapolate=False).toarray()
        return mat[:, 1:]


def _make_spline_basis(x, kappa):
    if kappa < 4:
        raise ValueError("cubic spline series requires kappa >= 4")
    x = np.asarray(x, dtype=float)
    if len(np.unique(x)) < kappa:
        raise DegenerateError("continuous column has fewer distinct values than kappa")
    n_interior = kappa - (_SPLINE_DEGREE + 1)
    lo, hi = float(x.min()), float(x.max())
    if n_interior > 0:
        qs = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
        interior = np.quantile(x, qs)
    else:
        interior = np.array([])
    knots = np.concatenate([[lo] * (_SPLINE_DEGREE + 1), interior,
                            [hi] * (_SPLINE_DEGREE + 1)])
    return SplineBasis(knots=knots, kappa=kappa)


@dataclass(frozen=True)
class SeriesModel:
    """Fitted additive series propensity model.

    bases: SplineBasis per continuous column; cts_cols / disc_cols index
    into the group regressor matrix; coefs stacks [intercept, spline
    blocks..., discrete block]; trim_delta bounds trimmed predictions.
    """

    bases: tuple
    cts_cols: tuple
    disc_cols: tuple
    coefs: np.ndarray
    trim_delta: float
    penalty: str = "none"
    lam: float = 0.0

    @property
    def theta_discrete(self):
        n_disc = len(self.disc_cols)
        return self.coefs[-n_disc:] if n_disc else np.array([])

    def _design(self, w):
        w = np.atleast_2d(np.asarray(w, dtype=float))
        cols = [np.ones((w.shape[0], 1))]
        for basis, j in zip(self.bases, self.cts_cols):
            cols.append(basis.design(w[:, j]))
        for j in self.disc_cols:
            cols.append(w[:, j:j + 1])
        return np.hstack(cols)

    def predict_raw(self, w):
        return self._design(w) @ self.coefs

    def predict(self, w):
        """Trimmed propensity predictions, always inside (0, 1)."""
        return trim_propensity(self.predict_raw(w), self.trim_delta)


def trim_propensity(p_tilde, delta):
    """Project out-of-range series predictions back into (0, 1):
    values above 1 map to 1 - delta, values below 0 map to delta."""
    if not (0.0 < delta < 0.5):
        raise ValueError("delta must lie in (0, 0.5)")
    p = np.asarray(p_tilde, dtype=float)
    out = p + (1.0 - delta - p) * (p > 1.0) + (delta - p) * (p < 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def _coordinate_descent_l1(design, response, lam, col_norms, n_sweeps=200,
                           tol=1e-8):
    """Cyclic coordinate descent for the column-weighted lasso.

    Objective: (1/G) ||d - X theta||^2 + 2 lam / K * sum_j ||p_j||_G |theta_j|
    with the intercept (column 0) unpenalized.
    """
    G, K = design.shape
    theta = np.zeros(K)
    theta[0] = response.mean()
    resid = response - design @ theta
    sq = (design * design).sum(axis=0) / G
    weight = lam * col_norms / K
    for _ in range(n_sweeps):
        max_move = 0.0
        for j in range(K):
            if sq[j] <= 0.0:
                continue
            rho_j = design[:, j] @ resid / G + sq[j] * theta[j]
            if j == 0:
                new = rho_j / sq[j]
            else:
                new = np.sign(rho_j) * max(abs(rho_j) - weight[j], 0.0) / sq[j]
            if new != theta[j]:
                resid += design[:, j] * (theta[j] - new)
                max_move = max(max_move, abs(new - theta[j]))
                theta[j] = new
        if max_move < tol:
            break
    return theta


def fit_series_propensity(dataset, unit, kappa, penalty="none", lam=None,
                          trim_delta=0.001, cv_folds=5, seed=0):
    """Series least squares of D on the stacked spline/discrete basis.

    penalty "none" solves unpenalized least squares and raises if the
    design is singular.  penalty "l1" runs cyclic coordinate descent with
    the column-normalized penalty; lam=None selects lam by 5-fold
    cross-validation over a 50-point log grid.
    """
    w = dataset.w_flat()
    d = dataset.d[:, unit].astype(float)
    w_dim = w.shape[1]
    per_unit = dataset.layout.w_dim
    disc = sorted({j for j in dataset.layout.discrete}
                  | {j + per_unit for j in dataset.layout.discrete})
    cts = tuple(j for j in range(w_dim) if j not in disc)
    bases = tuple(_make_spline_basis(w[:, j], kappa) for j in cts)

    cols = [np.ones((w.shape[0], 1))]
    for basis, j in zip(bases, cts):
        cols.append(basis.design(w[:, j]))
    for j in disc:
        cols.append(w[:, j:j + 1])
    design = np.hstack(cols)

    if penalty == "none":
        coefs, _, rank, _ = np.linalg.lstsq(design, d, rcond=None)
        if rank < design.shape[1]:
            raise RankDeficientError(
                "singular series design; use the l1 penalty or reduce kappa")
        return SeriesModel(bases=bases, cts_cols=cts, disc_cols=tuple(disc),
                           coefs=coefs, trim_delta=trim_delta)
    if penalty != "l1":
        raise ValueError(f"unknown penalty {penalty!r}")

    G, K = design.shape
    col_norms = np.sqrt((design * design).mean(axis=0))
    if lam is None:
        # lambda_max zeroes every penalized coefficient of the centered fit.
        resid0 = d - d.mean()
        with np.errstate(divide="ignore"):
            ratios = np.abs(design[:, 1:].T @ resid0 / G) * K / np.where(
                col_norms[1:] > 0, col_norms[1:], np.inf)
        lam_max = float(ratios.max())
        grid = np.geomspace(lam_max, lam_max * 1e-4, 50)
        rng = np.random.default_rng(seed)
        order = rng.permutation(G)
        folds = np.array_split(order, cv_folds)
        cv_err = np.zeros(len(grid))
        for fold in folds:
            mask = np.ones(G, dtype=bool)
            mask[fold] = False
            for k, lam_k in enumerate(grid):
                theta = _coordinate_descent_l1(design[mask], d[mask], lam_k,
                                               col_norms, n_sweeps=50)
                pred = design[fold] @ theta
                cv_err[k] += float(((d[fold] - pred) ** 2).sum())
        lam = float(grid[int(np.argmin(cv_err))])
    coefs = _coordinate_descent_l1(design, d, lam, col_norms)
    return SeriesModel(bases=bases, cts_cols=cts, disc_cols=tuple(disc),
                       coefs=coefs, trim_delta=trim_delta, penalty="l1",
                       lam=float(lam))


# ---------------------------------------------------------------------------
# Local cubic cross-derivative layer


@dataclass(frozen=True)
class LocalFit:
    """One bivariate local cubic fit.

    coefs follows the basis order [1, u0, u1, u0^2, u0 u1, u1^2, u0^3,
    u0^2 u1, u0 u1^2, u1^3]; the entry at index 4 estimates the
    cross-partial derivative.  ess is the kernel weight sum.
    """

    target: tuple
    h: float
    kernel: str
    coefs: np.ndarray
    ess: float

    @property
    def cross_derivative(self):
        return float(self.coefs[CROSS_INDEX])

    @property
    def mean(self):
        return float(self.coefs[0])


def local_cubic_cross_derivative(points, responses, target, h,
                                 kernel="epanechnikov"):
    """LocalFit of the 10-term bivariate cubic at one target point."""
    coefs, wsum = local_cubic_2d(points, responses, tuple(target), h, kernel)
    return LocalFit(target=(float(target[0]), float(target[1])), h=float(h),
                    kernel=kernel, coefs=coefs, ess=wsum)


def estimate_copula_density_semiparam(dataset, propensities, grid, h,
                                      kernel="epanechnikov"):
    """Copula density estimates b4 on a grid of (p0, p1) points.

    Returns (values, flags): values[i] is the cross-derivative of
    E[D0 D1 | P] at grid[i] (NaN on failure) and flags[i] is None or the
    failure message for that point.
    """
    responses = (dataset.d[:, 0] * dataset.d[:, 1]).astype(float)
    points = np.asarray(propensities, dtype=float)
    values = np.full(len(grid), np.nan)
    flags = [None] * len(grid)
    for i, target in enumerate(grid):
        try:
            fit = local_cubic_cross_derivative(points, responses, target, h, kernel)
            values[i] = fit.cross_derivative
        except (EmptyWindowError, SingularWindowError) as exc:
            flags[i] = str(exc)
    return values, flags


# ---------------------------------------------------------------------------
# Partially linear covariate adjustment


def _nw_smooth(points, values, h, kernel):
    """Nadaraya-Watson fitted values of each column of `values` on the
    propensity pair, evaluated in-sample."""
    k = kernel_function(kernel)
    out = np.empty_like(values, dtype=float)
    for g in range(points.shape[0]):
        weights = k((points[:, 0] - points[g, 0]) / h) \
            * k((points[:, 1] - points[g, 1]) / h)
        total = weights.sum()
        if total <= 0.0:
            raise EmptyWindowError("no kernel weight at a sample point")
        out[g] = weights @ values / total
    return out


def fit_partial_linear_beta(dataset, propensities, unit, kernel_bandwidth,
                            kernel="epanechnikov", arm=None):
    """Covariate coefficients of the partially linear outcome equation.

    Residualizes X and Y on the propensity pair by product-kernel
    Nadaraya-Watson and regresses the Y residual on the X residual.  With
    arm=(d, dprime), only groups in that joint treatment cell enter.
    """
    if dataset.layout.x_dim < 1:
        raise ValueError("partially linear fit requires covariates")
    points = np.asarray(propensities, dtype=float)
    x = dataset.x(unit)
    y = dataset.y[:, unit]
    if arm is not None:
        keep = (dataset.d[:, 0] == arm[0]) & (dataset.d[:, 1] == arm[1])
        points, x, y = points[keep], x[keep], y[keep]
    x_tilde = x - _nw_smooth(points, x, kernel_bandwidth, kernel)
    y_tilde = y - _nw_smooth(points, y, kernel_bandwidth, kernel)
    gram = x_tilde.T @ x_tilde
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise RankDeficientError("residualized covariates are rank deficient")
    return np.linalg.solve(gram, x_tilde.T @ y_tilde)


# ---------------------------------------------------------------------------
# MTR ratio estimator


def _arm_sign(d, dprime):
    return 1.0 if d == dprime else -1.0


def semiparam_mtr(dataset, propensities, beta_by_arm, unit, d, dprime,
                  target, h1, h2, kernel="epanechnikov", x=None):
    """Ratio MTR estimate c4 / b4 at one propensity target.

    The arm (d, dprime) fixes (D_0, D_1), i.e. the axes follow unit labels
    just like the propensity pair (P_0, P_1).  The signed response is
    Y 1{D_0=d, D_1=dprime} with factor +1 when d = dprime and -1 otherwise;
    b4 is fitted at bandwidth h1 on D_0 D_1, c4 at h2 on the residuals
    after removing the covariate term.  With covariates, pass x to add the
    x' beta level back.
    """
    points = np.asarray(propensities, dtype=float)
    sign = _arm_sign(d, dprime)
    in_arm = ((dataset.d[:, 0] == d) & (dataset.d[:, 1] == dprime)).astype(float)
    signed_y = dataset.y[:, unit] * in_arm * sign

    beta = None
    if beta_by_arm and beta_by_arm.get((d, dprime)) is not None:
        beta = np.asarray(beta_by_arm[(d, dprime)], dtype=float)
    if beta is not None and beta.size:
        resid = signed_y - (dataset.x(unit) @ beta) * sign
    else:
        resid = signed_y

    b_fit = local_cubic_cross_derivative(
        points, (dataset.d[:, 0] * dataset.d[:, 1]).astype(float),
        target, h1, kernel)
    b4 = b_fit.cross_derivative
    if abs(b4) < _B4_GUARD:
        raise ZeroDenominatorError(
            f"copula cross-derivative too close to zero (b4 = {b4:.3e})")
    c_fit = local_cubic_cross_derivative(points, resid, target, h2, kernel)
    value = c_fit.cross_derivative / b4
    if x is not None:
        if beta is None or not beta.size:
            raise ValueError("x supplied but no covariate coefficients for this arm")
        value += float(np.dot(np.asarray(x, dtype=float), beta))
    return value


# ---------------------------------------------------------------------------
# Plug-in asymptotic variance


_BASIS_EXPONENTS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2),
                    (3, 0), (2, 1), (1, 2), (0, 3))


def _kernel_1d_moments(kernel, max_power):
    """1-D moments int u^n K(u) du and int u^n K(u)^2 du for n <= max_power."""
    k = kernel_function(kernel)
    if kernel == "gaussian":
        lo, hi = -8.0, 8.0
        order = 96
    else:
        lo, hi = -1.0, 1.0
        order = 24
    nodes, weights = np.polynomial.legendre.leggauss(order)
    u = 0.5 * (hi + lo) + 0.5 * (hi - lo) * nodes
    wq = 0.5 * (hi - lo) * weights
    kv = k(u)
    mom_k = np.array([(wq * u ** n * kv).sum() for n in range(max_power + 1)])
    mom_k2 = np.array([(wq * u ** n * kv * kv).sum() for n in range(max_power + 1)])
    return mom_k, mom_k2


def kernel_moment_matrices(kernel="epanechnikov"):
    """10x10 kernel-moment matrices (M, Gamma) for the bivariate cubic
    basis under a product kernel: M[j, k] is the integral of
    basis_j(u) basis_k(u) K(u0) K(u1); Gamma uses K^2."""
    mom_k, mom_k2 = _kernel_1d_moments(kernel, 6)
    n = len(_BASIS_EXPONENTS)
    m = np.empty((n, n))
    gamma = np.empty((n, n))
    for j, (a_j, b_j) in enumerate(_BASIS_EXPONENTS):
        for k_, (a_k, b_k) in enumerate(_BASIS_EXPONENTS):
            m[j, k_] = mom_k[a_j + a_k] * mom_k[b_j + b_k]
            gamma[j, k_] = mom_k2[a_j + a_k] * mom_k2[b_j + b_k]
    return m, gamma


def asymptotic_variance(kernel, h2, G, b4_hat, sigma2_hat, density_hat):
    """Plug-in variance of the ratio MTR estimator at one target:
    sigma^2 / (b4^2 f) * (M^-1 Gamma M^-1)[4, 4] / (G h2^6)."""
    if min(h2, G, sigma2_hat, density_hat) <= 0 or b4_hat == 0:
        raise ValueError("asymptotic variance inputs must be positive")
    m, gamma = kernel_moment_matrices(kernel)
    try:
        m_inv = np.linalg.inv(m)
    except np.linalg.LinAlgError:
        raise DegenerateError("kernel moment matrix M is singular")
    sandwich = float((m_inv @ gamma @ m_inv)[CROSS_INDEX, CROSS_INDEX])
    return sigma2_hat / (b4_hat * b4_hat * density_hat) * sandwich / (G * h2 ** 6)


# ---------------------------------------------------------------------------
# Bandwidth selection


def select_bandwidth(points, responses, grid_of_h, folds=5,
                     kernel="epanechnikov", h1=None, seed=0, max_eval=200):
    """K-fold cross-validated bandwidth for the local cubic mean.

    Minimizes held-out squared error of the fitted level b0; ties break
    toward the larger bandwidth.  With h1 given, the result is capped at
    0.9 * h1 (second-stage bandwidth ordering).  At most max_eval held-out
    points per fold are scored, chosen deterministically from seed.
    """
    points = np.asarray(points, dtype=float)
    responses = np.asarray(responses, dtype=float)
    n = points.shape[0]
    if n < folds * 10:
        raise ValueError("too few observations for cross-validation")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    fold_ids = np.array_split(order, folds)
    candidates = sorted(float(h) for h in grid_of_h)
    errors = np.zeros(len(candidates))
    counts = np.zeros(len(candidates))
    for fold in fold_ids:
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        train_pts, train_resp = points[mask], responses[mask]
        eval_idx = fold if len(fold) <= max_eval else fold[:max_eval]
        for k, h in enumerate(candidates):
            for g in eval_idx:
                try:
                    coefs, _ = local_cubic_2d(train_pts, train_resp,
                                              (points[g, 0], points[g, 1]), h, kernel)
                except (EmptyWindowError, SingularWindowError):
                    continue
                errors[k] += (responses[g] - coefs[0]) ** 2
                counts[k] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_err = np.where(counts > 0, errors / counts, np.inf)
    best = -np.inf
    best_err = np.inf
    for h, err in zip(candidates, mean_err):
        if err < best_err or (err == best_err and h > best):
            best, best_err = h, err
    if h1 is not None:
        return min(best, 0.9 * float(h1))
    return best
