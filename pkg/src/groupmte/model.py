"""Data model for grouped observations, evaluation points, and effect surfaces.

A group holds two units indexed i in {0, 1}.  Each unit carries an outcome,
a binary treatment, and a vector ``w`` laid out as instruments followed by
covariates (``x_dim`` trailing entries are covariates; ``x_dim`` may be 0).
All containers are immutable after construction and safe to share across
parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Layout:
    """Column layout shared by every group in a dataset.

    z_dim / x_dim are per-unit counts; ``discrete`` flags columns of the
    per-unit w vector (0-based) that should be treated as discrete by the
    series propensity stage.
    """

    z_dim: int
    x_dim: int = 0
    discrete: frozenset = field(default_factory=frozenset)

    @property
    def w_dim(self) -> int:
        return self.z_dim + self.x_dim


@dataclass(frozen=True)
class GroupRecord:
    """Observables for one two-member group."""

    group_id: int
    y: tuple  # (y0, y1)
    d: tuple  # (d0, d1), each in {0, 1}
    w: tuple  # (w0, w1), equal-length float vectors
    x_dim: int = 0


@dataclass(frozen=True)
class Dataset:
    """A validated collection of groups with a shared column layout.

    Internally the groups are mirrored into dense arrays for vectorized
    estimation: ``y``/``d`` are (G, 2) and ``w`` is (G, 2, w_dim).
    """

    groups: tuple
    layout: Layout
    y: np.ndarray = field(repr=False, default=None)
    d: np.ndarray = field(repr=False, default=None)
    w: np.ndarray = field(repr=False, default=None)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def group_ids(self) -> np.ndarray:
        return np.array([g.group_id for g in self.groups])

    def w_flat(self) -> np.ndarray:
        """Group-level regressor matrix: both units' w vectors concatenated, (G, 2*w_dim)."""
        return self.w.reshape(self.n_groups, -1)

    def x(self, unit: int) -> np.ndarray:
        """Covariate block of unit ``unit``, (G, x_dim)."""
        if self.layout.x_dim == 0:
            return np.empty((self.n_groups, 0))
        return self.w[:, unit, self.layout.z_dim:]


@dataclass(frozen=True)
class EvalPoint:
    """Interior point of the latent-propensity square, with optional covariates.

    ``p0`` refers to the evaluated unit's own latent coordinate and ``p1``
    to the peer's.
    """

    p0: float
    p1: float
    x: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (0.0 < self.p0 < 1.0 and 0.0 < self.p1 < 1.0):
            raise ValueError(f"EvalPoint must be interior, got ({self.p0}, {self.p1})")


@dataclass(frozen=True)
class EffectSurface:
    """A grid-evaluable effect function with metadata.

    kind is one of {"MCSE", "MCDE", "MTR", "naive-MTE"}; ``fixed_arm`` is the
    held-fixed treatment (a pair (d, d') for MTR surfaces).
    """

    kind: str
    fixed_arm: object
    unit: int
    evaluator: Callable[[EvalPoint], float]

    def __call__(self, point: EvalPoint) -> float:
        return float(self.evaluator(point))


def make_dataset(groups: Sequence[GroupRecord], layout: Layout) -> Dataset:
    """Assemble and validate a Dataset from group records."""
    return validate_dataset(Dataset(groups=tuple(groups), layout=layout))


def validate_dataset(raw: Dataset) -> Dataset:
    """Check every group invariant and build the dense array mirror.

    Treatments are canonicalized to integer {0, 1}.  The first offending
    group id and the violated invariant are reported on failure.  Idempotent:
    validating an already-valid dataset returns an equivalent dataset.
    """
    if len(raw.groups) < 1:
        raise DataError("dataset must contain at least one group")
    layout = raw.layout
    w_dim = layout.w_dim

    seen = set()
    clean = []
    for g in raw.groups:
        if g.group_id in seen:
            raise DataError(f"duplicate group_id, group {g.group_id}")
        seen.add(g.group_id)

        d = []
        for di in g.d:
            df = float(di)
            if df not in (0.0, 1.0):
                raise DataError(f"non-binary treatment, group {g.group_id}")
            d.append(int(df))

        for k, yi in enumerate(g.y):
            if not np.isfinite(yi):
                raise DataError(f"non-finite outcome y{k}, group {g.group_id}")

        w0 = np.asarray(g.w[0], dtype=float)
        w1 = np.asarray(g.w[1], dtype=float)
        if w0.shape != (w_dim,) or w1.shape != (w_dim,):
            raise DataError(f"ragged layout, group {g.group_id}")
        if g.x_dim != layout.x_dim:
            raise DataError(f"ragged layout, group {g.group_id}")
        if not (np.all(np.isfinite(w0)) and np.all(np.isfinite(w1))):
            raise DataError(f"non-finite w entry, group {g.group_id}")

        clean.append(GroupRecord(group_id=g.group_id,
                                 y=(float(g.y[0]), float(g.y[1])),
                                 d=(d[0], d[1]),
                                 w=(tuple(w0), tuple(w1)),
                                 x_dim=layout.x_dim))

    y = np.array([[g.y[0], g.y[1]] for g in clean])
    d = np.array([[g.d[0], g.d[1]] for g in clean], dtype=np.int64)
    w = np.array([[g.w[0], g.w[1]] for g in clean])
    return Dataset(groups=tuple(clean), layout=layout, y=y, d=d, w=w)
