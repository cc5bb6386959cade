"""First parametric stage: polynomial-index probit propensity model.

Each unit's treatment is regressed on a polynomial basis of the group-level
regressor vector W_g (both units' instruments and covariates concatenated),
fitted by Newton-Raphson maximum likelihood with step-halving.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateError, SeparationError

_PROB_CLIP = 1e-10
_PRED_CLIP = 1e-8
_COEF_GUARD = 50.0
_GRAD_TOL = 1e-8
_MAX_ITER = 200


@dataclass(frozen=True)
class MultiIndexBasis:
    """Multi-index polynomial basis: all exponent tuples with total degree
    <= K1 over ell inputs, in graded lexicographic order."""

    ell: int
    K1: int
    terms: tuple

    def design(self, w):
        """Evaluate every basis term at rows of w; returns (n, n_terms)."""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        cols = []
        for term in self.terms:
            col = np.ones(w.shape[0])
            for jdx, k in enumerate(term):
                if k:
                    col = col * w[:, jdx] ** k
            cols.append(col)
        return np.column_stack(cols)


def build_multi_index_basis(ell, K1, allow_intercept_only=False):
    """All exponent tuples with total degree <= K1, graded lex ordered.

    Term count equals binomial(ell + K1, K1); the first term is the
    intercept (all-zero tuple).
    """
    if ell < 1:
        raise ValueError("basis requires at least one input")
    if K1 < 1 and not allow_intercept_only:
        raise ValueError("K1 = 0 yields an intercept-only model; pass allow_intercept_only to permit it")
    if K1 < 0:
        raise ValueError("K1 must be nonnegative")
    terms = [t for t in product(range(K1 + 1), repeat=ell) if sum(t) <= K1]
    terms.sort(key=lambda t: (sum(t), tuple(-k for k in t)))
    return MultiIndexBasis(ell=ell, K1=K1, terms=tuple(terms))


@dataclass(frozen=True)
class ProbitModel:
    basis: MultiIndexBasis
    theta: tuple
    converged: bool
    final_gradient_norm: float


def probit_objective(theta, d, design):
    """Probit log-likelihood with exact analytic gradient and Hessian.

    d is the 0/1 response vector and design the basis-expanded regressor
    matrix.  Probabilities are clipped at 1e-10 inside the logs.
    """
    theta = np.asarray(theta, dtype=float)
    d = np.asarray(d, dtype=float)
    eta = design @ theta
    p = ndtr(eta)
    pc = np.clip(p, _PROB_CLIP, 1.0 - _PROB_CLIP)
    loglik = float(np.sum(d * np.log(pc) + (1.0 - d) * np.log(1.0 - pc)))

    phi = np.exp(-0.5 * eta * eta) / np.sqrt(2.0 * np.pi)
    r1 = phi / pc
    r0 = phi / (1.0 - pc)
    score = d * r1 - (1.0 - d) * r0
    gradient = design.T @ score
    curv = d * (-eta * r1 - r1 * r1) + (1.0 - d) * (eta * r0 - r0 * r0)
    hessian = design.T @ (design * curv[:, None])
    return loglik, gradient, hessian


def fit_probit(dataset, unit, K1):
    """Fit the polynomial probit for one unit's treatment by Newton MLE.

    The index is a degree-K1 polynomial in the group regressor vector
    (both units' w concatenated).  Raises DegenerateError when the unit's
    treatment is constant and SeparationError when any coefficient escapes
    past 50 in magnitude.
    """
    d = dataset.d[:, unit].astype(float)
    if d.min() == d.max():
        raise DegenerateError(f"treatment of unit {unit} is constant; probit is degenerate")
    w = dataset.w_flat()
    basis = build_multi_index_basis(w.shape[1], K1)
    theta, converged, grad_norm = newton_probit(d, basis.design(w))
    return ProbitModel(basis=basis, theta=tuple(theta), converged=converged,
                       final_gradient_norm=grad_norm)


def newton_probit(d, design):
    """Newton-Raphson probit MLE on an explicit design matrix.

    Returns (theta, converged, final gradient sup-norm).
    """
    d = np.asarray(d, dtype=float)
    theta = np.zeros(design.shape[1])
    loglik, gradient, hessian = probit_objective(theta, d, design)
    converged = False
    for _ in range(_MAX_ITER):
        grad_norm = float(np.max(np.abs(gradient)))
        if grad_norm <= _GRAD_TOL:
            converged = True
            break
        try:
            step = np.linalg.solve(hessian, -gradient)
        except np.linalg.LinAlgError:
            step = gradient  # fall back to a gradient ascent step
        # Step-halving line search: accept the first step that improves.
        scale = 1.0
        for _ in range(30):
            cand = theta + scale * step
            cand_ll, cand_g, cand_h = probit_objective(cand, d, design)
            if cand_ll >= loglik:
                theta, loglik, gradient, hessian = cand, cand_ll, cand_g, cand_h
                break
            scale *= 0.5
        else:
            break
        if np.max(np.abs(theta)) > _COEF_GUARD:
            raise SeparationError(
                f"probit coefficient exceeded {_COEF_GUARD}; data are likely separated"
            )
    grad_norm = float(np.max(np.abs(gradient)))
    converged = grad_norm <= _GRAD_TOL
    return theta, converged, grad_norm


def predict_propensity(model, w):
    """Propensity Phi(basis(w) . theta), clamped to [1e-8, 1 - 1e-8].

    Accepts a single regressor vector or a matrix of rows.
    """
    w = np.asarray(w, dtype=float)
    single = w.ndim == 1
    design = model.basis.design(w)
    p = ndtr(design @ np.asarray(model.theta))
    p = np.clip(p, _PRED_CLIP, 1.0 - _PRED_CLIP)
    if single:
        return float(p[0])
    return p
