"""Third parametric stage: least squares for the marginal treatment
response coefficients, and evaluation of MTR / MCSE / MCDE surfaces.

For unit i and arm (d, d'), the response Y_i 1{D_i = d, D_-i = d'} is
regressed on the constructed row [I^0, I^1, I^2, I^3, x * I^0], where the
I^j are truncated bivariate normal moments over the arm's quadrant
evaluated at the fitted propensity pair, and I^0 is the quadrant
probability.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ConditionNumberWarning, RankDeficientError
from .quadrature import truncated_moments

_COND_WARN = 1e10
ARMS = ((1, 1), (1, 0), (0, 1), (0, 0))


@dataclass(frozen=True)
class MtrCoefficients:
    unit: int
    arm: tuple
    alpha: tuple
    beta: tuple = ()


def build_regressor_row(d, dprime, p0, p1, rho, x=None, rule_order=48):
    """Single regressor row at one propensity pair; p0 is the own axis."""
    moments = truncated_moments(d, dprime, p0, p1, rho, rule_order)
    row = list(np.atleast_1d(moments.squeeze()))
    if x is not None:
        row.extend(np.asarray(x, dtype=float) * row[0])
    return np.array(row)


def build_design(d, dprime, p_own, p_peer, rho, x=None, rule_order=48):
    """Stacked regressor rows for a whole sample; shape (G, 4 + x_dim)."""
    moments = truncated_moments(d, dprime, p_own, p_peer, rho, rule_order)
    design = moments.T
    if x is not None and np.asarray(x).shape[1] > 0:
        design = np.hstack([design, np.asarray(x, dtype=float) * design[:, :1]])
    return design


def _solve_ols(design, response):
    coefs, _, rank, sv = np.linalg.lstsq(design, response, rcond=None)
    if rank < design.shape[1]:
        raise RankDeficientError(
            f"design rank {rank} below column count {design.shape[1]}"
        )
    cond = sv[0] / sv[-1]
    if cond > _COND_WARN:
        warnings.warn(f"design condition number {cond:.3g} exceeds {_COND_WARN:.0e}",
                      ConditionNumberWarning)
    return coefs


def fit_all_arms(dataset, propensities, rho, pool_units=False,
                 rule_order=16, clip=6.0):
    """Stage-3 fits for every unit and arm with shared moment evaluations.

    The two units' quadrants are mirror images: unit 1's arm (d, d') uses
    the unit-0 orientation quadrant (d', d) with the own/peer moment
    columns swapped.  Computing each quadrant once halves the work.
    """
    from .quadrature import truncated_moments

    x_dim = dataset.layout.x_dim
    p0 = propensities[:, 0]
    p1 = propensities[:, 1]
    moments = {arm: truncated_moments(arm[0], arm[1], p0, p1, rho, rule_order, clip=clip).T
               for arm in ARMS}
    swap = [0, 2, 1, 3]

    def unit_design(unit, d, dprime):
        if unit == 0:
            base = moments[(d, dprime)]
        else:
            base = moments[(dprime, d)][:, swap]
        if x_dim:
            return np.hstack([base, dataset.x(unit) * base[:, :1]])
        return base

    coeffs = {}
    for d, dprime in ARMS:
        if pool_units:
            designs, responses = [], []
            for i in (0, 1):
                designs.append(unit_design(i, d, dprime))
                in_arm = (dataset.d[:, i] == d) & (dataset.d[:, 1 - i] == dprime)
                responses.append(dataset.y[:, i] * in_arm)
            fitted = _solve_ols(np.vstack(designs), np.concatenate(responses))
            for i in (0, 1):
                coeffs[(i, d, dprime)] = MtrCoefficients(
                    unit=i, arm=(d, dprime), alpha=tuple(fitted[:4]), beta=tuple(fitted[4:]))
        else:
            for i in (0, 1):
                design = unit_design(i, d, dprime)
                in_arm = (dataset.d[:, i] == d) & (dataset.d[:, 1 - i] == dprime)
                fitted = _solve_ols(design, dataset.y[:, i] * in_arm)
                coeffs[(i, d, dprime)] = MtrCoefficients(
                    unit=i, arm=(d, dprime), alpha=tuple(fitted[:4]), beta=tuple(fitted[4:]))
    return coeffs


def fit_mtr_coefficients(dataset, unit, d, dprime, propensities, rho,
                         pool_units=False, rule_order=48):
    """OLS fit of the MTR coefficients for one unit and one arm.

    propensities is a (G, 2) array of fitted pairs ordered by unit index.
    With pool_units, both units' rows are stacked (shared coefficients).
    """
    x_dim = dataset.layout.x_dim
    units = (0, 1) if pool_units else (unit,)
    designs, responses = [], []
    for i in units:
        own = propensities[:, i]
        peer = propensities[:, 1 - i]
        x = dataset.x(i) if x_dim else None
        designs.append(build_design(d, dprime, own, peer, rho, x, rule_order))
        in_arm = (dataset.d[:, i] == d) & (dataset.d[:, 1 - i] == dprime)
        responses.append(dataset.y[:, i] * in_arm)
    design = np.vstack(designs)
    response = np.concatenate(responses)
    if design.shape[0] < design.shape[1]:
        raise RankDeficientError("fewer rows than regressors in the MTR stage")
    coefs = _solve_ols(design, response)
    return MtrCoefficients(unit=unit, arm=(d, dprime),
                           alpha=tuple(coefs[:4]), beta=tuple(coefs[4:]))


def evaluate_mtr(coeffs, x, v0, v1):
    """MTR value x'beta + a0 + a1 q(v0) + a2 q(v1) + a3 q(v0) q(v1), with
    q the standard normal quantile; v0 is the own latent coordinate."""
    v0 = float(v0)
    v1 = float(v1)
    if not (0.0 < v0 < 1.0 and 0.0 < v1 < 1.0):
        raise ValueError("evaluate_mtr requires interior latent coordinates")
    a0, a1, a2, a3 = coeffs.alpha
    q0 = float(ndtri(v0))
    q1 = float(ndtri(v1))
    val = a0 + a1 * q0 + a2 * q1 + a3 * q0 * q1
    if len(coeffs.beta):
        if x is None:
            raise ValueError("coefficients include covariates but x is missing")
        val += float(np.dot(np.asarray(x, dtype=float), coeffs.beta))
    return val


def _arm_coeffs(all_coeffs, unit, d, dprime):
    key = (unit, d, dprime)
    if key not in all_coeffs:
        raise KeyError(f"missing fitted arm {key}")
    return all_coeffs[key]


def mcse_parametric(all_coeffs, unit, d, point):
    """MCSE(d) = m(d, 1) - m(d, 0) at the evaluation point."""
    hi = evaluate_mtr(_arm_coeffs(all_coeffs, unit, d, 1), point.x, point.p0, point.p1)
    lo = evaluate_mtr(_arm_coeffs(all_coeffs, unit, d, 0), point.x, point.p0, point.p1)
    return hi - lo


def mcde_parametric(all_coeffs, unit, d, point):
    """MCDE(d) = m(1, d) - m(0, d) at the evaluation point."""
    hi = evaluate_mtr(_arm_coeffs(all_coeffs, unit, 1, d), point.x, point.p0, point.p1)
    lo = evaluate_mtr(_arm_coeffs(all_coeffs, unit, 0, d), point.x, point.p0, point.p1)
    return hi - lo
