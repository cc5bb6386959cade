"""Gauss-Hermite machinery and truncated bivariate normal moment integrals.

The third parametric stage needs the integrals

    I^j_{dd'}(p0, p1, rho) = int int_Q g_j(t0, t1) phi_rho(t0, t1) dt0 dt1,

with g_0 = 1, g_1 = t0, g_2 = t1, g_3 = t0 t1, taken over the treatment
quadrant Q selected by (d, d'): the own axis is truncated at a = Phi^{-1}(p0)
(below when d = 1, above when d = 0) and the peer axis at b = Phi^{-1}(p1).

An indicator inside a raw Hermite rule ruins accuracy, so the truncation
boundary is mapped into the integration limits (clipped at +/-8 standard
deviations) and a tensor Gauss-Legendre rule is applied on the resulting
rectangle.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtri

_CLIP = 8.0


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a quadrature rule; Hermite rules use the
    physicists' convention (weights sum to sqrt(pi))."""

    nodes: tuple
    weights: tuple
    order: int


def gauss_hermite_rule(n):
    """Physicists' Gauss-Hermite rule of order n, 1 <= n <= 256.

    Integrates x^k exp(-x^2) exactly for k <= 2n - 1.
    """
    if not (1 <= n <= 256):
        raise ValueError("gauss_hermite_rule order must lie in [1, 256]")
    nodes, weights = np.polynomial.hermite.hermgauss(n)
    return QuadratureRule(nodes=tuple(nodes), weights=tuple(weights), order=n)


@lru_cache(maxsize=32)
def _leggauss(n):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights


def _limits(d, a):
    """Integration limits on one axis: below the threshold when treated."""
    if d == 1:
        return -_CLIP, min(a, _CLIP)
    if d == 0:
        return max(a, -_CLIP), _CLIP
    raise ValueError("treatment indicators must be 0 or 1")


def truncated_moment(j, d, dprime, p0, p1, rho, rule_order=48):
    """Single truncated moment I^j over the (d, dprime) quadrant."""
    if j not in (0, 1, 2, 3):
        raise ValueError("moment index j must be in {0, 1, 2, 3}")
    moments = truncated_moments(d, dprime, p0, p1, rho, rule_order)
    return float(moments[j])


def truncated_moments(d, dprime, p0, p1, rho, rule_order=48, clip=_CLIP):
    """All four moments I^0..I^3 over one quadrant; vectorized over (p0, p1).

    p0 and p1 may be scalars or equal-length arrays; returns an array of
    shape (4,) + broadcast shape.
    """
    rho = float(rho)
    if abs(rho) >= 1.0:
        raise ValueError("truncated_moments requires |rho| < 1")
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if np.any(p0 <= 0.0) or np.any(p0 >= 1.0) or np.any(p1 <= 0.0) or np.any(p1 >= 1.0):
        raise ValueError("propensities must be interior")
    a = ndtri(p0)
    b = ndtri(p1)
    if d == 1:
        lo0, hi0 = np.full_like(a, -clip), np.minimum(a, clip)
    elif d == 0:
        lo0, hi0 = np.maximum(a, -clip), np.full_like(a, clip)
    else:
        raise ValueError("treatment indicators must be 0 or 1")
    if dprime == 1:
        lo1, hi1 = np.full_like(b, -clip), np.minimum(b, clip)
    elif dprime == 0:
        lo1, hi1 = np.maximum(b, -clip), np.full_like(b, clip)
    else:
        raise ValueError("treatment indicators must be 0 or 1")

    nodes, weights = _leggauss(rule_order)
    # Map the reference nodes onto each axis interval; shapes (..., n).
    mid0 = 0.5 * (lo0 + hi0)
    half0 = 0.5 * (hi0 - lo0)
    mid1 = 0.5 * (lo1 + hi1)
    half1 = 0.5 * (hi1 - lo1)
    t0 = mid0[..., None] + half0[..., None] * nodes
    t1 = mid1[..., None] + half1[..., None] * nodes

    s2 = 1.0 - rho * rho
    # phi_rho on the tensor grid, shape (..., n, n)
    x0 = t0[..., :, None]
    x1 = t1[..., None, :]
    dens = np.exp(-0.5 * (x0 * x0 - 2.0 * rho * x0 * x1 + x1 * x1) / s2)
    dens /= 2.0 * np.pi * np.sqrt(s2)

    w2 = weights[:, None] * weights[None, :]
    scale = (half0 * half1)[..., None, None]
    base = dens * w2 * scale
    i0 = base.sum(axis=(-2, -1))
    i1 = (base * x0).sum(axis=(-2, -1))
    i2 = (base * x1).sum(axis=(-2, -1))
    i3 = (base * x0 * x1).sum(axis=(-2, -1))
    return np.stack([i0, i1, i2, i3])
