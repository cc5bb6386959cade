"""Descriptive diagnostics for the model's two testable implications.

Nesting inequalities: signed cross-partial derivatives of joint
outcome/treatment cell probabilities with respect to the propensity pair
must be nonnegative (positive sign for concordant arms, negative for
discordant arms).  Index sufficiency: conditional moments must depend on
instruments only through the propensity pair, so within a propensity cell
the moment cannot shift with an instrument coordinate.

Both reports flag magnitudes against heuristic two-standard-error bands;
no formal test statistics are computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindowError, InsufficientOverlapError, SingularWindowError
from .locpoly import CROSS_INDEX, local_cubic_2d_with_se

ARMS = ((1, 1), (1, 0), (0, 1), (0, 0))


@dataclass(frozen=True)
class DiagnosticReport:
    """One diagnostic check: per-point statistics with violation flags.

    points is the list of evaluated locations (grid points or cell
    descriptors), statistic/se/flags align with it, and summary holds the
    violation fraction and worst magnitude.
    """

    check: str
    points: tuple
    statistic: np.ndarray
    se: np.ndarray
    flags: np.ndarray
    summary: dict

    def __post_init__(self):
        frac = self.summary.get("violation_fraction")
        if frac is not None and not (0.0 <= frac <= 1.0):
            raise ValueError("violation fraction must lie in [0, 1]")


def _interval_indicator(values, interval):
    """Indicator of a Borel interval (lo, hi); None means the full line and
    an empty interval (lo >= hi) yields all zeros."""
    if interval is None:
        return np.ones_like(values, dtype=float)
    lo, hi = interval
    return ((values >= lo) & (values <= hi)).astype(float)


def _summarize(stats, flags):
    valid = np.isfinite(stats)
    n_valid = int(valid.sum())
    frac = float(flags[valid].mean()) if n_valid else 0.0
    worst = float(np.nanmin(stats)) if n_valid else np.nan
    return {"violation_fraction": frac, "worst_statistic": worst,
            "n_points": int(len(stats)), "n_valid": n_valid}


def nesting_inequality_report(dataset, propensities, outcome_sets, grid, h,
                              kernel="epanechnikov"):
    """Signed cross-derivative diagnostics on a propensity grid.

    outcome_sets is a pair of intervals (A1, A2) for units 0 and 1 (None
    means the whole line).  For each arm (d, d') and grid point, the
    statistic is sign(d, d') times the local-cubic cross-derivative of
    1{Y0 in A1, Y1 in A2, D0 = d, D1 = d'}, which the model requires to be
    nonnegative; it is flagged when it falls below minus twice its
    plug-in standard error.  Points where the local fit fails carry NaN.
    """
    points = np.asarray(propensities, dtype=float)
    a1, a2 = outcome_sets
    base = _interval_indicator(dataset.y[:, 0], a1) \
        * _interval_indicator(dataset.y[:, 1], a2)
    eval_points, stats, ses = [], [], []
    for d, dprime in ARMS:
        sign = 1.0 if d == dprime else -1.0
        response = base * ((dataset.d[:, 0] == d) & (dataset.d[:, 1] == dprime))
        for target in grid:
            eval_points.append(((d, dprime), (float(target[0]), float(target[1]))))
            try:
                coefs, se, _ = local_cubic_2d_with_se(points, response,
                                                      tuple(target), h, kernel)
                stats.append(sign * coefs[CROSS_INDEX])
                ses.append(se[CROSS_INDEX])
            except (EmptyWindowError, SingularWindowError):
                stats.append(np.nan)
                ses.append(np.nan)
    stats = np.array(stats)
    ses = np.array(ses)
    with np.errstate(invalid="ignore"):
        flags = stats < -2.0 * ses
    return DiagnosticReport(check="nesting-inequalities",
                            points=tuple(eval_points), statistic=stats,
                            se=ses, flags=flags,
                            summary=_summarize(stats, flags))


def index_sufficiency_report(dataset, propensities, cell_width,
                             outcome_sets=(None, None), arm=(1, 1),
                             instrument_col=0, min_per_side=20):
    """Within-cell instrument-split differences of conditional moments.

    Groups are binned into square cells of the fitted propensity pair.  In
    each cell with at least min_per_side groups on both sides of the
    cell-median value of the designated instrument coordinate, the report
    records the between-split difference of the moment
    E[1{Y0 in A1, Y1 in A2, D0 = d, D1 = d'}], standardized by its pooled
    standard error; |statistic| > 2 is flagged.
    """
    if not (0.0 < cell_width < 1.0):
        raise ValueError("cell_width must lie in (0, 1)")
    points = np.asarray(propensities, dtype=float)
    a1, a2 = outcome_sets
    moment = _interval_indicator(dataset.y[:, 0], a1) \
        * _interval_indicator(dataset.y[:, 1], a2) \
        * ((dataset.d[:, 0] == arm[0]) & (dataset.d[:, 1] == arm[1]))
    instrument = dataset.w_flat()[:, instrument_col]

    cells_idx = np.floor(points / cell_width).astype(int)
    cell_points, stats = [], []
    for cell in sorted({(int(a), int(b)) for a, b in cells_idx}):
        in_cell = (cells_idx[:, 0] == cell[0]) & (cells_idx[:, 1] == cell[1])
        z = instrument[in_cell]
        m = moment[in_cell]
        median = np.median(z)
        hi, lo = m[z > median], m[z <= median]
        if len(hi) < min_per_side or len(lo) < min_per_side:
            continue
        pooled_var = hi.var(ddof=1) / len(hi) + lo.var(ddof=1) / len(lo)
        if pooled_var <= 0.0:
            stat = 0.0
        else:
            stat = float((hi.mean() - lo.mean()) / np.sqrt(pooled_var))
        cell_points.append(cell)
        stats.append(stat)
    if not cell_points:
        raise InsufficientOverlapError(
            "no propensity cell has enough groups on both instrument sides")
    stats = np.array(stats)
    flags = np.abs(stats) > 2.0
    summary = {"violation_fraction": float(flags.mean()),
               "worst_statistic": float(stats[np.argmax(np.abs(stats))]),
               "n_points": len(stats), "n_valid": len(stats)}
    return DiagnosticReport(check="index-sufficiency", points=tuple(cell_points),
                            statistic=stats, se=np.ones_like(stats),
                            flags=flags, summary=summary)
