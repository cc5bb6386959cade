"""Local average effect ratio formulas, full-support aggregation, and
complier-effect aggregation.

The ratio layer is pure: it consumes conditional moments

    mu_own^(d)(p0, p1)  = E[Y_i 1{D_i = d}    | P_i = p0, P_-i = p1],
    mu_peer^(d)(p0, p1) = E[Y_i 1{D_-i = d}   | P_i = p0, P_-i = p1],
    C(p0, p1)           = E[D_i D_-i          | P_i = p0, P_-i = p1],

whether they come from kernel regression on data or in closed form from a
fitted parametric model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroDenominatorError
from .quadrature import truncated_moments

_DENOM_GUARD = 1e-10


@dataclass(frozen=True)
class PointMoments:
    """Conditional moments at one propensity pair.

    mu_own / mu_peer are pairs indexed by d in {0, 1}; provenance records
    whether values were kernel-estimated or model-implied.
    """

    p0: float
    p1: float
    mu_own: tuple
    mu_peer: tuple
    C: float
    provenance: str = "model-implied"

    def __post_init__(self):
        if not (0.0 <= self.C <= 1.0):
            raise ValueError("C must lie in [0, 1]")


def model_implied_moments(coeffs, unit, copula_spec, p0, p1, rule_order=48):
    """Closed-form PointMoments from fitted MTR coefficients and a copula.

    mu_own^(d) sums the arm regressions (d, d') over the peer arm d', each
    equal to alpha . (I^0..I^3) on the arm's quadrant; mu_peer^(d') sums
    over the own arm d.
    """
    vals = {}
    for d in (0, 1):
        for dp in (0, 1):
            m = truncated_moments(d, dp, p0, p1, copula_spec.rho, rule_order)
            alpha = np.asarray(coeffs[(unit, d, dp)].alpha)
            vals[(d, dp)] = float(alpha @ np.asarray(m).ravel())
    mu_own = (vals[(0, 1)] + vals[(0, 0)], vals[(1, 1)] + vals[(1, 0)])
    mu_peer = (vals[(1, 0)] + vals[(0, 0)], vals[(1, 1)] + vals[(0, 1)])
    return PointMoments(p0=float(p0), p1=float(p1), mu_own=mu_own, mu_peer=mu_peer,
                        C=float(copula_spec.cdf(p0, p1)))


def _guard(denom, what):
    if abs(denom) < _DENOM_GUARD:
        raise ZeroDenominatorError(f"{what}: no subpopulation mass shifted (denominator {denom:.2e})")
    return denom


def lacse_fixed_own(d, low, high):
    """Local average spillover effect from peer-axis variation.

    low and high share p0 with high.p1 > low.p1.  For d = 1 the weight is
    the copula increment; for d = 0 it is the complementary increment.
    """
    if not np.isclose(low.p0, high.p0) or high.p1 <= low.p1:
        raise ValueError("requires common p0 and increasing p1")
    dC = high.C - low.C
    if d == 1:
        return (high.mu_own[1] - low.mu_own[1]) / _guard(dC, "LACSE(1)")
    denom = (high.p1 - low.p1) - dC
    return (high.mu_own[0] - low.mu_own[0]) / _guard(denom, "LACSE(0)")


def lacde_fixed_peer(d, low, high):
    """Local average direct effect from own-axis variation (p0' > p0)."""
    if not np.isclose(low.p1, high.p1) or high.p0 <= low.p0:
        raise ValueError("requires common p1 and increasing p0")
    dC = high.C - low.C
    if d == 1:
        return (high.mu_peer[1] - low.mu_peer[1]) / _guard(dC, "LACDE(1)")
    denom = (high.p0 - low.p0) - dC
    return (high.mu_peer[0] - low.mu_peer[0]) / _guard(denom, "LACDE(0)")


def _rectangle(moments):
    """Order four vertex moments as (ll, lh, hl, hh) and check rectangularity."""
    if len(moments) != 4:
        raise ValueError("rectangle formulas need four vertex moments")
    p0s = sorted(set(round(m.p0, 12) for m in moments))
    p1s = sorted(set(round(m.p1, 12) for m in moments))
    if len(p0s) != 2 or len(p1s) != 2:
        raise ValueError("vertices do not form a rectangle in propensity space")
    grid = {(round(m.p0, 12), round(m.p1, 12)): m for m in moments}
    try:
        return (grid[(p0s[0], p1s[0])], grid[(p0s[0], p1s[1])],
                grid[(p0s[1], p1s[0])], grid[(p0s[1], p1s[1])])
    except KeyError:
        raise ValueError("vertices do not form a rectangle in propensity space")


def _rectangle_ratio(d, moments, attr, label):
    ll, lh, hl, hh = _rectangle(moments)
    num = (getattr(hh, attr)[d] - getattr(hl, attr)[d]) \
        - (getattr(lh, attr)[d] - getattr(ll, attr)[d])
    denom = (hh.C - hl.C) - (lh.C - ll.C)
    sign = 1.0 if d == 1 else -1.0
    return sign * num / _guard(denom, label)


def lacse_rectangle(d, moments):
    """Rectangle double-difference LACSE; sign factor sgn(2d - 1)."""
    return _rectangle_ratio(d, moments, "mu_own", f"rectangle LACSE({d})")


def lacde_rectangle(d, moments):
    """Rectangle double-difference LACDE; sign factor sgn(2d - 1)."""
    return _rectangle_ratio(d, moments, "mu_peer", f"rectangle LACDE({d})")


def _density_callable(copula_like):
    if callable(copula_like):
        return copula_like
    return copula_like.density


def _tensor_grid(order, lo, hi):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return mid + half * nodes, half * weights


def acse_acde(surface, copula, quadrature_order=48, boundary_clip=1e-4):
    """Full-population average of an effect surface weighted by the copula
    density, by tensor quadrature over the clipped unit square."""
    from .model import EvalPoint

    density = _density_callable(copula)
    x0, w0 = _tensor_grid(quadrature_order, boundary_clip, 1.0 - boundary_clip)
    x1, w1 = _tensor_grid(quadrature_order, boundary_clip, 1.0 - boundary_clip)
    total = 0.0
    for a, wa in zip(x0, w0):
        for b, wb in zip(x1, w1):
            total += wa * wb * surface(EvalPoint(a, b)) * density(a, b)
    return total


def complier_effects(mcse_surface, mcde_surface, copula, p_bound_own,
                     p_bound_peer, quadrature_order=48, boundary_clip=1e-4):
    """Local average spillover and direct effects for instrument compliers.

    The spillover strip conditions on the peer's latent below p_bound_peer;
    the direct strip on the own latent below p_bound_own.  Returns
    (spillover, direct, (spillover strip mass, direct strip mass)).
    """
    from .model import EvalPoint

    if not (0.0 < p_bound_own < 1.0 and 0.0 < p_bound_peer < 1.0):
        raise ValueError("strip bounds must be interior")
    density = _density_callable(copula)

    def strip(surface, axis, bound):
        full_lo, full_hi = boundary_clip, 1.0 - boundary_clip
        xb, wb = _tensor_grid(quadrature_order, boundary_clip, bound)
        xf, wf = _tensor_grid(quadrature_order, full_lo, full_hi)
        num = mass = 0.0
        for b, wgt_b in zip(xb, wb):
            for f, wgt_f in zip(xf, wf):
                v0, v1 = (f, b) if axis == 1 else (b, f)
                w = wgt_b * wgt_f * density(v0, v1)
                mass += w
                num += w * surface(EvalPoint(v0, v1))
        if mass < _DENOM_GUARD:
            raise ZeroDenominatorError("complier strip has zero mass")
        return num / mass, mass

    spill, spill_mass = strip(mcse_surface, 1, p_bound_peer)
    direct, direct_mass = strip(mcde_surface, 0, p_bound_own)
    return spill, direct, (spill_mass, direct_mass)
