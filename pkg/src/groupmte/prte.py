"""Policy-relevant treatment effects for three policy classes.

Each policy shifts propensity scores; the outcome change is a sum, over
five mover/stayer regions per group, of MCSE/MCDE surfaces integrated
against the latent copula density.  Region probabilities over propensity
pairs use the empirical distribution of fitted pairs.

Exchanging the order of the empirical average and the latent integral
turns every term into a rectangle integral of (surface x density), so the
computation precomputes two-dimensional prefix integrals on a fine grid
and charges each sampled pair four bilinear lookups per term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import InfeasiblePolicyError, NoMoversError
from .probit import predict_propensity

_MOVER_GUARD = 1e-10
_CLIP = 1e-4


@dataclass(frozen=True)
class PolicySpec:
    """kind in {"absolute_shift", "proportional_shift", "instrument_shift"};
    eps is the shift size; j indexes the shifted instrument column of the
    group-level regressor vector (instrument_shift only)."""

    kind: str
    eps: float
    j: int = None

    def __post_init__(self):
        if self.kind not in ("absolute_shift", "proportional_shift", "instrument_shift"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "proportional_shift" and not (0.0 < self.eps < 1.0):
            raise InfeasiblePolicyError("proportional shift requires 0 < eps < 1")
        if self.kind == "instrument_shift" and self.j is None:
            raise ValueError("instrument_shift requires a column index j")


@dataclass(frozen=True)
class PrteResult:
    delta_ey: float
    delta_p: float
    prte: float
    strata: tuple = None  # monotonicity strata shares (instrument_shift only)


def counterfactual_propensity(probit, w, j, eps):
    """Propensity after shifting column j of the group regressor by eps."""
    w = np.asarray(w, dtype=float)
    shifted = w.copy()
    axis = 0 if w.ndim == 1 else 1
    if not (0 <= j < w.shape[axis]):
        raise ValueError(f"column {j} out of range")
    if w.ndim == 1:
        shifted[j] += eps
    else:
        shifted[:, j] += eps
    return predict_propensity(probit, shifted)


def surfaces_from_fit(fit, unit=0):
    """Vectorized MCSE/MCDE surface callables keyed by (kind, fixed arm).

    Effect surfaces are differences of two arm regressions, hence linear in
    [1, q(p0), q(p1), q(p0) q(p1)]; evaluating that form directly supports
    array arguments, unlike the scalar accessors on the fit object.
    """
    from scipy.special import ndtri

    def linear_form(alpha_hi, alpha_lo):
        diff = np.asarray(alpha_hi) - np.asarray(alpha_lo)

        def fn(p0, p1, diff=diff):
            q0 = ndtri(p0)
            q1 = ndtri(p1)
            return diff[0] + diff[1] * q0 + diff[2] * q1 + diff[3] * q0 * q1
        return fn

    c = fit.coeffs
    return {
        ("MCSE", 0): linear_form(c[(unit, 0, 1)].alpha, c[(unit, 0, 0)].alpha),
        ("MCSE", 1): linear_form(c[(unit, 1, 1)].alpha, c[(unit, 1, 0)].alpha),
        ("MCDE", 0): linear_form(c[(unit, 1, 0)].alpha, c[(unit, 0, 0)].alpha),
        ("MCDE", 1): linear_form(c[(unit, 1, 1)].alpha, c[(unit, 0, 1)].alpha),
    }


class _PrefixIntegral:
    """Prefix integral I(x, y) = int_0^x int_0^y f on a uniform grid with
    bilinear interpolation for off-grid corners."""

    def __init__(self, values, axis_pts):
        self.axis = axis_pts
        dx = axis_pts[1] - axis_pts[0]
        inner = cumulative_trapezoid(
            cumulative_trapezoid(values, dx=dx, axis=0, initial=0.0),
            dx=dx, axis=1, initial=0.0)
        self.grid = inner
        self.lo = axis_pts[0]
        self.hi = axis_pts[-1]
        self.dx = dx

    def _at(self, x, y):
        x = np.clip(x, self.lo, self.hi)
        y = np.clip(y, self.lo, self.hi)
        fx = (x - self.lo) / self.dx
        fy = (y - self.lo) / self.dx
        ix = np.clip(fx.astype(int), 0, len(self.axis) - 2)
        iy = np.clip(fy.astype(int), 0, len(self.axis) - 2)
        tx = fx - ix
        ty = fy - iy
        g = self.grid
        return ((1 - tx) * (1 - ty) * g[ix, iy] + tx * (1 - ty) * g[ix + 1, iy]
                + (1 - tx) * ty * g[ix, iy + 1] + tx * ty * g[ix + 1, iy + 1])

    def rectangle(self, x1, x2, y1, y2):
        """int over [x1, x2] x [y1, y2]; zero when a side is degenerate."""
        return (self._at(x2, y2) - self._at(x1, y2)
                - self._at(x2, y1) + self._at(x1, y1))


def _grid_values(fn, axis_pts):
    """Evaluate fn on the tensor grid, vectorized when supported."""
    g0, g1 = np.meshgrid(axis_pts, axis_pts, indexing="ij")
    try:
        vals = np.asarray(fn(g0, g1), dtype=float)
        if vals.shape == g0.shape:
            return vals
    except Exception:
        pass
    out = np.empty(g0.shape)
    for i, a in enumerate(axis_pts):
        for j, b in enumerate(axis_pts):
            out[i, j] = fn(a, b)
    return out


def _build_prefixes(surfaces, density, grid_size):
    axis = np.linspace(_CLIP, 1.0 - _CLIP, grid_size)
    dens = _grid_values(density, axis)
    pref = {}
    for key in (("MCDE", 0), ("MCDE", 1), ("MCSE", 0), ("MCSE", 1)):
        pref[key] = _PrefixIntegral(_grid_values(surfaces[key], axis) * dens, axis)
    pref["mass"] = _PrefixIntegral(dens, axis)
    return pref


def prte(policy, surfaces, copula, propensity_sample, probits=None, w=None,
         grid_size=257):
    """PRTE = delta_ey / delta_p for one policy.

    surfaces maps (kind, d) to callables f(p0, p1); copula supplies the
    latent density (CopulaSpec or callable); propensity_sample is the
    (N, 2) array of fitted (own, peer) pairs under the status quo.  For
    instrument_shift, probits (pair of fitted models in the sample's unit
    order) and the group regressor matrix w are required.
    """
    sample = np.asarray(propensity_sample, dtype=float)
    if sample.ndim != 2 or sample.shape[1] != 2:
        raise ValueError("propensity_sample must be (N, 2)")
    a = sample[:, 0]
    b = sample[:, 1]
    if policy.kind == "absolute_shift":
        a_new, b_new = a + policy.eps, b + policy.eps
        for arr in (a_new, b_new):
            if np.any(arr < 0.0) or np.any(arr > 1.0):
                raise InfeasiblePolicyError("shifted propensities leave [0, 1]")
    elif policy.kind == "proportional_shift":
        a_new = a + policy.eps * (1.0 - a)
        b_new = b + policy.eps * (1.0 - b)
    else:
        if probits is None or w is None:
            raise ValueError("instrument_shift requires probits and the regressor matrix w")
        a_new = np.asarray(counterfactual_propensity(probits[0], w, policy.j, policy.eps))
        b_new = np.asarray(counterfactual_propensity(probits[1], w, policy.j, policy.eps))

    density = copula.density if hasattr(copula, "density") else copula
    pref = _build_prefixes(surfaces, density, grid_size)

    su = np.where(a_new >= a, 1.0, -1.0)
    sp = np.where(b_new >= b, 1.0, -1.0)
    a_lo, a_hi = np.minimum(a, a_new), np.maximum(a, a_new)
    b_lo, b_hi = np.minimum(b, b_new), np.maximum(b, b_new)
    zeros = np.zeros_like(a)
    ones = np.ones_like(a)

    # Five signed terms per group; the joint-mover direct-effect arm is
    # MCDE(1) when both members shift the same way and MCDE(0) otherwise.
    rects = {
        "own_cross_peer_low": (a_lo, a_hi, b_hi, ones),
        "own_high_peer_cross": (a_hi, ones, b_lo, b_hi),
        "own_cross_peer_high": (a_lo, a_hi, zeros, b_lo),
        "own_low_peer_cross": (zeros, a_lo, b_lo, b_hi),
        "joint": (a_lo, a_hi, b_lo, b_hi),
    }
    vals = {name: {} for name in rects}
    for name, (x1, x2, y1, y2) in rects.items():
        for key in (("MCDE", 0), ("MCDE", 1), ("MCSE", 0), ("MCSE", 1), "mass"):
            vals[name][key] = pref[key].rectangle(x1, x2, y1, y2)

    same_dir = su == sp
    joint_de = np.where(same_dir, vals["joint"][("MCDE", 1)], vals["joint"][("MCDE", 0)])
    per_group_ey = (
        su * vals["own_cross_peer_low"][("MCDE", 0)]
        + sp * vals["own_high_peer_cross"][("MCSE", 0)]
        + su * vals["own_cross_peer_high"][("MCDE", 1)]
        + sp * vals["own_low_peer_cross"][("MCSE", 1)]
        + su * joint_de + sp * vals["joint"][("MCSE", 0)]
    )
    per_group_p = sum(vals[name]["mass"] for name in rects)
    delta_ey = float(per_group_ey.mean())
    delta_p = float(per_group_p.mean())
    if delta_p <= _MOVER_GUARD:
        raise NoMoversError("policy moves no unit's treatment probability")
    strata = None
    if policy.kind == "instrument_shift":
        up0 = a_new >= a
        up1 = b_new >= b
        strata = (float(np.mean(up0 & up1)), float(np.mean(up0 & ~up1)),
                  float(np.mean(~up0 & up1)), float(np.mean(~up0 & ~up1)))
    return PrteResult(delta_ey=delta_ey, delta_p=delta_p,
                      prte=delta_ey / delta_p, strata=strata)
