"""Seedable Monte Carlo data generator, closed-form effect oracle, and the
naive one-dimensional MTE comparator.

The default generating process draws, per group, bivariate normal instruments
Z and latent selection terms V-tilde, plus an independent uniform U.  Each
unit's treatment crosses a linear threshold in both instruments, and observed
outcomes follow the switching equation over four potential-outcome arms
indexed by (own treatment, peer treatment).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr, ndtri

from .model import Dataset, GroupRecord, Layout, make_dataset, EffectSurface, EvalPoint

_ARMS = ((1, 1), (1, 0), (0, 1), (0, 0))


def stream(seed, *key):
    """Counter-based RNG stream; disjoint spawn keys give independent streams.

    Thread count never affects draws: every consumer derives its own stream
    from (seed, key) and draws a fixed sequence.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class DgpConfig:
    """Parameters of the simulated generating process.

    threshold: per-unit coefficients on (1, z0, z1) for the selection index.
    intercepts: potential-outcome intercepts for arms (1,1), (1,0), (0,1), (0,0).
    Peer loading enters only the own-treated arms; the interaction term and
    own loading enter every arm.
    """

    G: int = 1000
    seed: int = 0
    sigma_z: tuple = ((1.0, 0.1), (0.1, 1.0))
    sigma_v: tuple = ((1.0, 0.2), (0.2, 1.0))
    threshold: tuple = ((0.0, 1.0, 0.5), (0.0, -0.5, 1.0))
    intercepts: tuple = (1.0, 3.0, 3.0, 2.0)
    own_loading: float = 2.0
    peer_loading: float = 1.0
    interaction: float = -1.0
    u_scale: float = 0.5

    def __post_init__(self):
        for name in ("sigma_z", "sigma_v"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (2, 2) or not np.allclose(m, m.T):
                raise ValueError(f"{name} must be a symmetric 2x2 matrix")
            if np.min(np.linalg.eigvalsh(m)) <= 0.0:
                raise ValueError(f"{name} must be positive definite")
        if len(self.intercepts) != 4:
            raise ValueError("intercepts must list four arm values")

    @property
    def rho(self):
        """Latent correlation implied by sigma_v (unit marginal variances)."""
        sv = np.asarray(self.sigma_v, dtype=float)
        return float(sv[0, 1] / np.sqrt(sv[0, 0] * sv[1, 1]))

    def sutva(self):
        """Spillover-free variant: independent latents, own-instrument-only
        thresholds, no peer loading or interaction, constant direct effect 2."""
        return replace(
            self,
            sigma_z=((1.0, 0.0), (0.0, 1.0)),
            sigma_v=((1.0, 0.0), (0.0, 1.0)),
            threshold=((0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
            intercepts=(3.0, 3.0, 1.0, 1.0),
            peer_loading=0.0,
            interaction=0.0,
        )


def _potential_outcome(config, d, dprime, u, v_own, v_peer):
    """Potential outcome of one unit in arm (d, dprime) from latent draws."""
    intercept = config.intercepts[_ARMS.index((d, dprime))]
    y = intercept + config.u_scale * u + config.own_loading * v_own
    if d == 1:
        y = y + config.peer_loading * v_peer
    y = y + config.interaction * v_own * v_peer
    return y


def simulate_dataset(config, keep_latents=False):
    """Draw G i.i.d. groups from the configured process.

    Deterministic given the seed.  With keep_latents, also returns the raw
    draws (z, v_tilde, u) for oracle checks.
    """
    rng = stream(config.seed, 0)
    sz = np.asarray(config.sigma_z, dtype=float)
    sv = np.asarray(config.sigma_v, dtype=float)
    z = rng.multivariate_normal(np.zeros(2), sz, size=config.G, method="cholesky")
    v = rng.multivariate_normal(np.zeros(2), sv, size=config.G, method="cholesky")
    u = rng.uniform(0.0, 1.0, size=config.G)

    thr = np.asarray(config.threshold, dtype=float)
    ones = np.ones(config.G)
    basis = np.column_stack([ones, z[:, 0], z[:, 1]])
    d0 = (v[:, 0] <= basis @ thr[0]).astype(int)
    d1 = (v[:, 1] <= basis @ thr[1]).astype(int)

    y = np.empty((config.G, 2))
    for i, (v_own, v_peer, d_own, d_peer) in enumerate(
        ((v[:, 0], v[:, 1], d0, d1), (v[:, 1], v[:, 0], d1, d0))
    ):
        y11 = _potential_outcome(config, 1, 1, u, v_own, v_peer)
        y10 = _potential_outcome(config, 1, 0, u, v_own, v_peer)
        y01 = _potential_outcome(config, 0, 1, u, v_own, v_peer)
        y00 = _potential_outcome(config, 0, 0, u, v_own, v_peer)
        y[:, i] = (y11 * d_peer + y10 * (1 - d_peer)) * d_own \
            + (y01 * d_peer + y00 * (1 - d_peer)) * (1 - d_own)

    layout = Layout(z_dim=1, x_dim=0)
    groups = [
        GroupRecord(group_id=g, y=(y[g, 0], y[g, 1]), d=(int(d0[g]), int(d1[g])),
                    w=((z[g, 0],), (z[g, 1],)), x_dim=0)
        for g in range(config.G)
    ]
    dataset = make_dataset(groups, layout)
    if keep_latents:
        return dataset, {"z": z, "v": v, "u": u}
    return dataset


def true_mtr(config, d, dprime, p0, p1):
    """Closed-form MTR surface implied by the config.

    Latents are normalized to uniform, so V-tilde = sigma * Phi^{-1}(v) on
    each axis; the uniform draw contributes u_scale / 2.
    """
    sv = np.asarray(config.sigma_v, dtype=float)
    s_own = np.sqrt(sv[0, 0])
    s_peer = np.sqrt(sv[1, 1])
    t_own = s_own * ndtri(p0)
    t_peer = s_peer * ndtri(p1)
    intercept = config.intercepts[_ARMS.index((d, dprime))]
    val = intercept + config.u_scale * 0.5 + config.own_loading * t_own
    if d == 1:
        val = val + config.peer_loading * t_peer
    val = val + config.interaction * t_own * t_peer
    return val


def true_effect(kind, arm, p0, p1, config=None):
    """Oracle effect value at (p0, p1): kind in {"MCSE", "MCDE", "MTR"}.

    For MTR, arm is the pair (d, dprime); otherwise the held-fixed d.
    All values are recomputed from the config, not hard-coded.
    """
    if config is None:
        config = DgpConfig()
    if kind == "MTR":
        d, dprime = arm
        return true_mtr(config, d, dprime, p0, p1)
    if kind == "MCSE":
        return true_mtr(config, arm, 1, p0, p1) - true_mtr(config, arm, 0, p0, p1)
    if kind == "MCDE":
        return true_mtr(config, 1, arm, p0, p1) - true_mtr(config, 0, arm, p0, p1)
    raise ValueError(f"unknown effect kind {kind!r}")


def naive_mte(dataset, bandwidth=0.15, unit=0):
    """One-dimensional local-IV comparator that ignores spillovers.

    Fits a probit of D_i on the unit's own instruments only, then estimates
    d/dp E[Y D | P = p] + d/dp E[Y (1 - D) | P = p] (together, the derivative
    of E[Y | P = p]) by local quadratic regression.  Causally interpretable
    only when no spillovers are present.
    """
    from .locpoly import local_poly_1d
    from .probit import newton_probit

    z = dataset.w[:, unit, : dataset.layout.z_dim]
    d = dataset.d[:, unit].astype(float)
    if d.min() == d.max():
        raise ValueError(f"treatment of unit {unit} is constant")
    design = np.column_stack([np.ones(len(d)), z])
    theta, _, _ = newton_probit(d, design)
    p_hat = np.clip(ndtr(design @ theta), 1e-8, 1.0 - 1e-8)
    y = dataset.y[:, unit]

    def evaluator(point):
        # Local quadratic fits are linear in the response, so the two
        # derivative terms of the LIV estimand sum to one fit on Y itself.
        coefs = local_poly_1d(p_hat, y, point.p0, bandwidth, degree=2)
        return coefs[1]

    return EffectSurface(kind="naive-MTE", fixed_arm=None, unit=unit, evaluator=evaluator)
