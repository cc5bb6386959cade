"""Normal primitives, bivariate normal CDF, the Gaussian copula, and the
correlation MLE used as the second estimation stage.

The copula between the two latent selection terms is Gaussian with a single
correlation parameter rho restricted to a compact interval [-eps, eps].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import BoundaryWarning, DegenerateError

_LOG_CLIP = 1e-10


def std_normal_cdf(x):
    """Standard normal CDF, accurate to ~1e-15."""
    return ndtr(x)


def std_normal_pdf(x):
    return np.exp(-0.5 * np.asarray(x, dtype=float) ** 2) / np.sqrt(2.0 * np.pi)


def std_normal_quantile(u):
    """Inverse standard normal CDF; rejects arguments outside (0, 1)."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise ValueError("std_normal_quantile requires arguments in (0, 1)")
    return ndtri(u)


def _bvn_density(a, b, r):
    """Standard bivariate normal density at (a, b) with correlation r."""
    s2 = 1.0 - r * r
    q = (a * a - 2.0 * r * a * b + b * b) / s2
    return np.exp(-0.5 * q) / (2.0 * np.pi * np.sqrt(s2))


def bvn_cdf(a, b, rho):
    """P(T0 <= a, T1 <= b) for a standard bivariate normal pair.

    Uses the identity Phi_rho(a, b) = Phi(a) Phi(b) + int_0^rho phi2(a, b; r) dr
    with panelled Gauss-Legendre quadrature on r.  Absolute error is below
    1e-7 for |rho| <= 0.999.

    Accepts scalars or broadcastable arrays in (a, b); rho must be scalar.
    """
    rho = float(rho)
    if abs(rho) >= 1.0:
        raise ValueError("bvn_cdf requires |rho| < 1")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    base = ndtr(a) * ndtr(b)
    if rho == 0.0:
        out = base
    else:
        # More panels as |rho| -> 1, where the integrand steepens.
        n_panels = 1 + int(8.0 * abs(rho))
        nodes, weights = np.polynomial.legendre.leggauss(24)
        edges = np.linspace(0.0, rho, n_panels + 1)
        acc = np.zeros(np.broadcast(a, b).shape)
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (lo + hi)
            half = 0.5 * (hi - lo)
            r = mid + half * nodes
            vals = _bvn_density(a[..., None], b[..., None], r)
            acc = acc + half * (vals * weights).sum(axis=-1)
        out = base + acc
    out = np.clip(out, 0.0, 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def copula(v0, v1, rho):
    """Gaussian copula C(v0, v1) = Phi_rho(Phi^{-1} v0, Phi^{-1} v1)."""
    _check_interior(v0, v1)
    return bvn_cdf(std_normal_quantile(v0), std_normal_quantile(v1), rho)


def copula_density(v0, v1, rho):
    """Gaussian copula density c(v0, v1); strictly positive on the interior."""
    _check_interior(v0, v1)
    rho = float(rho)
    if abs(rho) >= 1.0:
        raise ValueError("copula_density requires |rho| < 1")
    a = std_normal_quantile(v0)
    b = std_normal_quantile(v1)
    s2 = 1.0 - rho * rho
    # phi2(a, b; rho) / (phi(a) phi(b))
    expo = -(rho * rho * (a * a + b * b) - 2.0 * rho * a * b) / (2.0 * s2)
    out = np.exp(expo) / np.sqrt(s2)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _check_interior(v0, v1):
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    if np.any(v0 <= 0.0) or np.any(v0 >= 1.0) or np.any(v1 <= 0.0) or np.any(v1 >= 1.0):
        raise ValueError("copula arguments must lie strictly inside (0, 1)")


def quadrant_probability(d, dprime, p0, p1, rho):
    """Probability of the joint treatment cell (d, dprime) given propensities.

    (1,1) -> C; (1,0) -> p0 - C; (0,1) -> p1 - C; (0,0) -> 1 - p0 - p1 + C.
    The four values sum to one.
    """
    _check_interior(p0, p1)
    c = copula(p0, p1, rho)
    if d == 1 and dprime == 1:
        return c
    if d == 1 and dprime == 0:
        return p0 - c
    if d == 0 and dprime == 1:
        return p1 - c
    if d == 0 and dprime == 0:
        return 1.0 - p0 - p1 + c
    raise ValueError("treatment indicators must be 0 or 1")


@dataclass(frozen=True)
class CopulaSpec:
    """Fitted Gaussian copula: correlation and the bound it was searched over."""

    rho: float
    eps_bound: float = 0.99

    def __post_init__(self):
        if not (0.0 < self.eps_bound < 1.0):
            raise ValueError("eps_bound must lie in (0, 1)")
        if abs(self.rho) > self.eps_bound:
            raise ValueError("|rho| must not exceed eps_bound")

    def cdf(self, v0, v1):
        return copula(v0, v1, self.rho)

    def density(self, v0, v1):
        return copula_density(v0, v1, self.rho)

    def quadrant(self, d, dprime, p0, p1):
        return quadrant_probability(d, dprime, p0, p1, self.rho)


def _bvn_fast(a, b, rho):
    """Lighter bvn evaluator for the inner likelihood loop: single-panel
    16-node Gauss-Legendre on r (two panels past |rho| = 0.5).  Accuracy is
    a few 1e-7 at worst, well inside the likelihood's tolerance."""
    if rho == 0.0:
        return ndtr(a) * ndtr(b)
    nodes, weights = np.polynomial.legendre.leggauss(16)
    panels = 1 if abs(rho) <= 0.5 else 2
    edges = np.linspace(0.0, rho, panels + 1)
    acc = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        r = mid + half * nodes
        acc = acc + half * (_bvn_density(a[:, None], b[:, None], r) * weights).sum(axis=1)
    return ndtr(a) * ndtr(b) + acc


def _cell_loglik(rho, a, b, p0, p1, cell11, cell10, cell01, cell00):
    c = _bvn_fast(a, b, rho)
    probs = np.where(cell11, c,
                     np.where(cell10, p0 - c,
                              np.where(cell01, p1 - c, 1.0 - p0 - p1 + c)))
    return float(np.sum(np.log(np.clip(probs, _LOG_CLIP, None))))


def fit_rho(treatment_pairs, propensity_pairs, eps_bound=0.99):
    """Second-stage MLE of the copula correlation.

    Maximizes the four-cell multinomial log-likelihood over rho in
    [-eps_bound, eps_bound] by golden-section search, stopping when the
    bracketing interval is shorter than 1e-7.  Emits a BoundaryWarning when
    the maximizer sits within 1e-4 of either endpoint.
    """
    d = np.asarray(treatment_pairs, dtype=int)
    p = np.asarray(propensity_pairs, dtype=float)
    if d.shape[0] != p.shape[0] or d.shape[0] < 1:
        raise DegenerateError("treatment and propensity sequences must align and be nonempty")
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("propensities must be interior")
    p0 = p[:, 0]
    p1 = p[:, 1]
    a = ndtri(p0)
    b = ndtri(p1)
    cell11 = (d[:, 0] == 1) & (d[:, 1] == 1)
    cell10 = (d[:, 0] == 1) & (d[:, 1] == 0)
    cell01 = (d[:, 0] == 0) & (d[:, 1] == 1)
    cell00 = (d[:, 0] == 0) & (d[:, 1] == 0)

    def nll(r):
        return -_cell_loglik(r, a, b, p0, p1, cell11, cell10, cell01, cell00)

    lo, hi = -eps_bound, eps_bound
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = nll(x1), nll(x2)
    while hi - lo > 1e-7:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = nll(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = nll(x2)
    rho_hat = 0.5 * (lo + hi)
    if eps_bound - abs(rho_hat) < 1e-4:
        rho_hat = np.sign(rho_hat) * eps_bound
        warnings.warn(
            f"rho estimate {rho_hat:.6f} is at the boundary of [-{eps_bound}, {eps_bound}]",
            BoundaryWarning,
        )
    return CopulaSpec(rho=float(rho_hat), eps_bound=eps_bound)
