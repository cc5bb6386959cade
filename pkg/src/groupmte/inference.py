"""Group bootstrap for the parametric pipeline and the coverage runner.

The bootstrap resamples whole groups with replacement and reruns every
stage (probit, copula correlation, MTR least squares) on each replicate;
confidence intervals are percentile intervals of the replicate draws.
The coverage experiment wraps simulation + pipeline + bootstrap across
independent replications and tabulates how often the intervals cover the
known data-generating values.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .copula import BoundaryWarning
from .errors import GroupMteError
from .model import Dataset, EvalPoint
from .pipeline import PipelineConfig, fit_parametric_pipeline
from .simulation import DgpConfig, simulate_dataset, true_effect

_FAIL_FLAG_FRACTION = 0.02

EVAL_POINTS = ((0.3, 0.7), (0.4, 0.6), (0.5, 0.5), (0.6, 0.4), (0.7, 0.3))


@dataclass(frozen=True)
class Target:
    """One bootstrap target: the copula correlation (kind "rho") or an
    effect surface value (kind "MCSE"/"MCDE") for fixed arm d at a point."""

    kind: str
    d: int = None
    point: EvalPoint = None
    unit: int = 0

    def __post_init__(self):
        if self.kind not in ("rho", "MCSE", "MCDE"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.kind != "rho" and (self.d not in (0, 1) or self.point is None):
            raise ValueError("effect targets need a fixed arm and an evaluation point")

    def label(self):
        if self.kind == "rho":
            return "rho"
        return f"{self.kind}({self.d})@({self.point.p0:g},{self.point.p1:g})"


def default_targets():
    """The coverage-table targets: five evaluation points for MCSE and MCDE
    at both fixed arms, plus the copula correlation."""
    targets = []
    for kind in ("MCSE", "MCDE"):
        for d in (1, 0):
            for p0, p1 in EVAL_POINTS:
                targets.append(Target(kind=kind, d=d, point=EvalPoint(p0, p1)))
    targets.append(Target(kind="rho"))
    return tuple(targets)


def evaluate_targets(fit, targets):
    out = np.empty(len(targets))
    for k, t in enumerate(targets):
        if t.kind == "rho":
            out[k] = fit.rho
        elif t.kind == "MCSE":
            out[k] = fit.mcse(t.unit, t.d, t.point.p0, t.point.p1, t.point.x)
        else:
            out[k] = fit.mcde(t.unit, t.d, t.point.p0, t.point.p1, t.point.x)
    return out


def _resample(dataset, rng):
    """Group-level bootstrap resample.  Built directly (not re-validated)
    because resampling duplicates group ids by design."""
    idx = rng.integers(0, dataset.n_groups, dataset.n_groups)
    return Dataset(groups=tuple(dataset.groups[i] for i in idx),
                   layout=dataset.layout,
                   y=dataset.y[idx], d=dataset.d[idx], w=dataset.w[idx])


@dataclass(frozen=True)
class BootstrapResult:
    """Point estimates, replicate draws, and percentile intervals.

    cis maps a level to (lower, upper) arrays aligned with targets.  The
    point estimate may fall outside a percentile interval; lower <= upper
    always holds.  flagged is set when more than 2% of replicates failed.
    """

    targets: tuple
    point: np.ndarray
    draws: np.ndarray = field(repr=False)
    cis: dict
    n_failed: int
    B: int

    @property
    def flagged(self):
        return self.n_failed > _FAIL_FLAG_FRACTION * self.B

    def ci(self, level):
        return self.cis[level]


def _fit_or_none(dataset, config):
    """Pipeline fit treating separation, degeneracy, and a boundary rho
    as replicate failures."""
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            fit = fit_parametric_pipeline(dataset, config)
        if any(issubclass(w.category, BoundaryWarning) for w in caught):
            return None
        return fit
    except GroupMteError:
        return None


def bootstrap(dataset, pipeline_config, targets, B=200, levels=(0.90, 0.95),
              seed=0, threads=1):
    """Nonparametric group bootstrap of the full parametric pipeline.

    Resamples G whole groups with replacement B times, reruns all stages,
    and returns percentile intervals (linear order-statistic interpolation,
    numpy quantile default) at each level.  Replicates where any stage
    errors are dropped and counted.  Replicate b uses the RNG stream
    (seed, 2, b), disjoint from the simulation streams by construction.
    """
    from .simulation import stream

    if B < 50:
        raise ValueError("bootstrap requires B >= 50")
    targets = tuple(targets)
    point_fit = fit_parametric_pipeline(dataset, pipeline_config)
    point = evaluate_targets(point_fit, targets)

    def one(b):
        rng = stream(seed, 2, b)
        fit = _fit_or_none(_resample(dataset, rng), pipeline_config)
        return None if fit is None else evaluate_targets(fit, targets)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(B)))
    else:
        results = [one(b) for b in range(B)]
    kept = [r for r in results if r is not None]
    n_failed = B - len(kept)
    draws = np.array(kept) if kept else np.empty((0, len(targets)))
    cis = {}
    for level in levels:
        alpha = (1.0 - level) / 2.0
        lower = np.quantile(draws, alpha, axis=0)
        upper = np.quantile(draws, 1.0 - alpha, axis=0)
        cis[level] = (lower, upper)
    return BootstrapResult(targets=targets, point=point, draws=draws,
                           cis=cis, n_failed=n_failed, B=B)


@dataclass(frozen=True)
class CoverageResult:
    """Per-target coverage fractions with binomial standard errors."""

    targets: tuple
    coverage: np.ndarray
    se: np.ndarray
    truths: np.ndarray
    n_effective: np.ndarray
    R: int
    G: int
    B: int
    level: float
    n_failed_replications: int

    def row(self, k):
        return {"target": self.targets[k].label(),
                "truth": float(self.truths[k]),
                "coverage": float(self.coverage[k]),
                "se": float(self.se[k]),
                "n": int(self.n_effective[k])}


def coverage_experiment(R, G, B, seed=0, dgp_config=None, pipeline_config=None,
                        targets=None, level=0.95, threads=1):
    """Monte Carlo coverage of bootstrap percentile intervals.

    Each replication r simulates a fresh dataset (DGP seed derived from
    (seed, r)), fits the pipeline, bootstraps the targets, and records
    whether each interval covers the data-generating value.  Failed
    replications are counted and excluded from the denominators.

    The default pipeline pools the two units' outcome regressions
    (``pool_units=True``): the benchmark DGP is symmetric across units,
    and pooling stabilises the quadrature-regressor design near the
    corners of the evaluation grid, where unpooled fits are heavy-tailed
    enough to undercover at G of a few thousand.
    """
    if R < 50:
        raise ValueError("coverage experiment requires R >= 50")
    dgp_config = dgp_config if dgp_config is not None else DgpConfig()
    if pipeline_config is None:
        pipeline_config = PipelineConfig(pool_units=True)
    targets = tuple(targets) if targets is not None else default_targets()
    truths = np.array([
        dgp_config.rho if t.kind == "rho"
        else true_effect(t.kind, t.d, t.point.p0, t.point.p1, dgp_config)
        for t in targets])

    def one(r):
        ss = np.random.SeedSequence(seed, spawn_key=(r,))
        dgp_seed, boot_seed = (int(s) for s in ss.generate_state(2))
        cfg = replace(dgp_config, G=G, seed=dgp_seed)
        data = simulate_dataset(cfg)
        try:
            res = bootstrap(data, pipeline_config, targets, B=B,
                            levels=(level,), seed=boot_seed)
        except GroupMteError:
            return None
        lower, upper = res.cis[level]
        return (truths >= lower) & (truths <= upper)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(R)))
    else:
        rows = [one(r) for r in range(R)]
    kept = [row for row in rows if row is not None]
    n_failed = R - len(kept)
    hits = np.array(kept, dtype=float) if kept else np.zeros((0, len(targets)))
    n_eff = np.full(len(targets), len(kept))
    coverage = hits.mean(axis=0) if len(kept) else np.full(len(targets), np.nan)
    se = np.sqrt(np.clip(coverage * (1.0 - coverage), 0.0, None)
                 / np.maximum(n_eff, 1))
    return CoverageResult(targets=targets, coverage=coverage, se=se,
                          truths=truths, n_effective=n_eff, R=R, G=G, B=B,
                          level=level, n_failed_replications=n_failed)
