"""Stochastic oracle for the quadrature-based operating characteristics.

Simulation model: the stage-k z-statistic is Z_k ~ N(theta * sqrt(I_k), 1)
with independent stages.  Random numbers come from the counter-based Philox
(4x64) generator so sweep points get provably non-overlapping substreams;
normal variates are produced by inverse-CDF transform of uniforms through the
same quantile routine audited in :mod:`fasttrack.numerics`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from numpy.random import Generator, Philox

from . import cef as cef_mod
from . import power as power_mod
from .combination import CombinationDesign
from .numerics import std_normal_quantile
from .power import FastTrackDesign

Design = Union[FastTrackDesign, CombinationDesign]


@dataclass(frozen=True)
class SimConfig:
    n_reps: int
    seed: int
    theta: float

    def __post_init__(self):
        if self.n_reps < 1:
            raise ValueError("n_reps must be positive")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass(frozen=True)
class SimReport:
    """Estimated operating characteristics with binomial standard errors."""

    p_cond_reg_hat: float
    p_cond_reg_se: float
    p_reject_hat: float
    p_reject_se: float
    mean_i2_hat: float
    max_i2_observed: float
    n_reps: int


def _binom_se(p_hat: float, n: int) -> float:
    return math.sqrt(p_hat * (1.0 - p_hat) / n)


def _stream(seed: int, substream: int = 0) -> Generator:
    # Philox keys are 128-bit; (seed, substream) pairs map to disjoint keys.
    return Generator(Philox(key=(seed & (2**64 - 1)) + (substream << 64)))


def _normal(gen: Generator, mean, n: int) -> np.ndarray:
    u = gen.random(n)
    # Guard against u == 0 from the half-open unit interval.
    np.clip(u, 1e-300, None, out=u)
    return std_normal_quantile(u) + mean


def simulate(design: Design, cfg: SimConfig, substream: int = 0) -> SimReport:
    """Run the design's full two-stage decision logic rep-by-rep (vectorized).

    Deterministic given (design, cfg, substream).
    """
    gen = _stream(cfg.seed, substream)
    params = design.params
    n = cfg.n_reps
    z_f = design.branch_boundary

    z1 = _normal(gen, cfg.theta * math.sqrt(params.i1), n)
    upper = z1 >= z_f

    i2 = np.zeros(n)
    reject = np.zeros(n, dtype=bool)

    if isinstance(design, FastTrackDesign):
        active = upper
        if np.any(active):
            rule = design.rule
            i2_act = power_mod.stage2_info(z1[active], params.i1, rule)
            a_act = cef_mod.eval_cef(rule.cef, z1[active])
            z2 = _normal(gen, cfg.theta * np.sqrt(i2_act), int(active.sum()))
            reject[active] = z2 >= std_normal_quantile(1.0 - a_act)
            i2[active] = i2_act
    else:
        rule = power_mod.AdaptiveConditionalPower(
            i2_min=design.i2_min, cef=design.cef, beta=params.beta
        )
        if np.any(upper):
            i2_up = power_mod.stage2_info(z1[upper], params.i1, rule)
            a_up = cef_mod.eval_cef(design.cef, z1[upper])
            z2_up = _normal(gen, cfg.theta * np.sqrt(i2_up), int(upper.sum()))
            reject[upper] = z2_up >= std_normal_quantile(1.0 - a_up)
            i2[upper] = i2_up
        lower = ~upper
        if np.any(lower):
            a_lo = cef_mod.eval_cef(design.cef, z1[lower])
            z2_lo = _normal(
                gen,
                cfg.theta * math.sqrt(design.i2_const),
                int(lower.sum()),
            )
            reject[lower] = z2_lo >= std_normal_quantile(1.0 - a_lo)
            i2[lower] = design.i2_const

    p_cond = float(upper.mean())
    p_rej = float(reject.mean())
    used = i2[i2 > 0]
    return SimReport(
        p_cond_reg_hat=p_cond,
        p_cond_reg_se=_binom_se(p_cond, n),
        p_reject_hat=p_rej,
        p_reject_se=_binom_se(p_rej, n),
        mean_i2_hat=float(used.mean()) if used.size else 0.0,
        max_i2_observed=float(i2.max()) if i2.size else 0.0,
        n_reps=n,
    )


def sweep(designs: Sequence[Design], cfg: SimConfig) -> list[SimReport]:
    """One report per design, each on its own Philox substream (indexed by
    position), merged in grid order."""
    if not designs:
        raise ValueError("sweep requires a non-empty design grid")
    return [simulate(d, cfg, substream=i) for i, d in enumerate(designs)]
