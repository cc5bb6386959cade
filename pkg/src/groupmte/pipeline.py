"""Three-stage parametric estimation pipeline.

Stage 1 fits a polynomial probit per unit and predicts propensity pairs.
Stage 2 fits the Gaussian copula correlation by scalar MLE.
Stage 3 runs the quadrature-regressor least squares per unit and arm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .copula import fit_rho
from .model import EffectSurface, EvalPoint
from .mtr import fit_all_arms, mcde_parametric, mcse_parametric, evaluate_mtr
from .probit import fit_probit, predict_propensity


@dataclass(frozen=True)
class PipelineConfig:
    """Tuning parameters of the parametric pipeline."""

    K1: int = 1
    eps_bound: float = 0.99
    rule_order: int = 16
    clip: float = 6.0
    pool_units: bool = False


@dataclass(frozen=True)
class ParametricFit:
    """All fitted objects of the three-stage pipeline."""

    config: PipelineConfig
    probits: tuple
    propensities: np.ndarray = field(repr=False)
    copula: object
    coeffs: dict = field(repr=False)

    @property
    def rho(self):
        return self.copula.rho

    def mtr(self, unit, d, dprime, p0, p1, x=None):
        return evaluate_mtr(self.coeffs[(unit, d, dprime)], x, p0, p1)

    def mcse(self, unit, d, p0, p1, x=None):
        return mcse_parametric(self.coeffs, unit, d, EvalPoint(p0, p1, x))

    def mcde(self, unit, d, p0, p1, x=None):
        return mcde_parametric(self.coeffs, unit, d, EvalPoint(p0, p1, x))

    def surface(self, kind, unit, d):
        """Grid-evaluable MCSE or MCDE surface for one unit and fixed arm."""
        if kind == "MCSE":
            fn = lambda pt: mcse_parametric(self.coeffs, unit, d, pt)
        elif kind == "MCDE":
            fn = lambda pt: mcde_parametric(self.coeffs, unit, d, pt)
        else:
            raise ValueError(f"unknown surface kind {kind!r}")
        return EffectSurface(kind=kind, fixed_arm=d, unit=unit, evaluator=fn)


def fit_parametric_pipeline(dataset, config=None):
    """Run all three stages on a validated dataset."""
    if config is None:
        config = PipelineConfig()
    w = dataset.w_flat()
    probits = tuple(fit_probit(dataset, unit, config.K1) for unit in (0, 1))
    propensities = np.column_stack([predict_propensity(m, w) for m in probits])
    copula = fit_rho(dataset.d, propensities, config.eps_bound)
    coeffs = fit_all_arms(dataset, propensities, copula.rho,
                          pool_units=config.pool_units,
                          rule_order=config.rule_order, clip=config.clip)
    return ParametricFit(config=config, probits=probits, propensities=propensities,
                         copula=copula, coeffs=coeffs)
