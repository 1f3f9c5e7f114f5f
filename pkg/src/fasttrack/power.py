"""Stage-two information rules, overall power integrals and the minimum
second-stage information solver for the fast-track procedure.

The overall power of a design with conditional error function A, first-stage
information I1 and continuation region Z1 >= z_lower is

    integral over z1 >= z_lower of
        [1 - Phi(Phi^{-1}(1 - A(z1)) - sqrt(I2(z1)) * delta)]
        * phi(z1 - sqrt(I1) * delta)  dz1

where I2(z1) is the stage-two information rule.  The non-adaptive (separate
studies) design is the special case A == alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import cef as cef_mod
from .design import DesignParams, boundary_z, cond_registration_power
from .numerics import (
    DEFAULT_QUAD,
    DEFAULT_ROOT,
    BracketError,
    QuadratureSettings,
    RootSettings,
    find_root,
    integrate,
    solve_monotone,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    tail_upper_limit,
)


class InfeasiblePowerError(ValueError):
    """The power target exceeds the probability of continuing to stage two."""


@dataclass(frozen=True)
class AdaptiveConditionalPower:
    """Stage-two information sized for conditional power 1-beta at the
    observed first-stage estimate, floored at ``i2_min``."""

    i2_min: float
    cef: cef_mod.CalibratedCef
    beta: float

    def __post_init__(self):
        if self.i2_min < 0:
            raise ValueError(f"need i2_min >= 0, got {self.i2_min}")


@dataclass(frozen=True)
class ConstantInfo:
    """Fixed stage-two information, no adaptation."""

    i2_const: float

    def __post_init__(self):
        if not self.i2_const > 0:
            raise ValueError(f"need i2_const > 0, got {self.i2_const}")


StageTwoRule = Union[AdaptiveConditionalPower, ConstantInfo]


@dataclass(frozen=True)
class EvaluationResult:
    """Operating characteristics of a fully specified fast-track design."""

    overall_power: float
    p_cond_reg: float
    i2_min: float
    i2_max: float
    i2_mean: float
    total_mean: float
    total_max: float


def _adaptive_formula(z1, i1: float, rule: AdaptiveConditionalPower):
    """I1 * (z_beta + Phi^{-1}(1 - A(z1)))^2 / z1^2, vectorized."""
    z = np.asarray(z1, dtype=float)
    a = cef_mod.eval_cef(rule.cef, z)
    numer = std_normal_quantile(1.0 - rule.beta) + std_normal_quantile(1.0 - a)
    return i1 * numer**2 / z**2


def stage2_info(z1, i1: float, rule: StageTwoRule):
    """Information used for the second stage given the first-stage z-value."""
    if isinstance(rule, ConstantInfo):
        if np.isscalar(z1):
            return rule.i2_const
        return np.full(np.shape(z1), rule.i2_const)
    if np.any(np.asarray(z1) <= 0):
        raise ValueError("adaptive stage-two sizing requires z1 > 0")
    out = np.maximum(rule.i2_min, _adaptive_formula(z1, i1, rule))
    return float(out) if np.isscalar(z1) else out


def _floor_kink(i1: float, rule: AdaptiveConditionalPower, z_lower: float,
                z_upper: float, root: RootSettings) -> float | None:
    """Abscissa where the conditional-power formula crosses the floor.

    The formula is non-increasing in z1 (A is non-decreasing), so there is at
    most one crossing on [z_lower, z_upper].
    """
    if rule.i2_min <= 0:
        return None
    g = lambda z: _adaptive_formula(float(z), i1, rule) - rule.i2_min
    try:
        return find_root(g, z_lower, z_upper, root)
    except BracketError:
        return None


def overall_power(
    i1: float,
    rule: StageTwoRule,
    delta: float,
    z_lower: float,
    quad: QuadratureSettings = DEFAULT_QUAD,
    root: RootSettings = DEFAULT_ROOT,
) -> float:
    """Probability of continuing past ``z_lower`` and rejecting at stage two."""
    mean = delta * math.sqrt(i1)
    z_hi = tail_upper_limit(mean, quad)
    if z_lower >= z_hi:
        return 0.0

    if isinstance(rule, ConstantInfo):
        raise TypeError(
            "overall_power with ConstantInfo needs a conditional error "
            "function; wrap it in AdaptiveConditionalPower or use "
            "combination.branch_metrics"
        )

    cef = rule.cef
    splits = [p for p in (cef_mod.cap_kink(cef),) if math.isfinite(p)]
    kink = _floor_kink(i1, rule, max(z_lower, 1e-12), z_hi, root)
    if kink is not None:
        splits.append(kink)

    def integrand(z):
        a = cef_mod.eval_cef(cef, z)
        i2 = np.maximum(rule.i2_min, _adaptive_formula(z, i1, rule))
        cond = 1.0 - std_normal_cdf(
            std_normal_quantile(1.0 - a) - np.sqrt(i2) * delta
        )
        return cond * std_normal_pdf(z - mean)

    return integrate(integrand, z_lower, z_hi, quad, split_points=splits)


def nonadaptive_rule(
    i2_min: float, alpha: float, beta: float
) -> AdaptiveConditionalPower:
    """The separate-studies design expressed as a constant-CEF adaptive rule."""
    cef = cef_mod.CalibratedCef(
        spec=cef_mod.ConstantCef(level=alpha), level_used=alpha
    )
    return AdaptiveConditionalPower(i2_min=i2_min, cef=cef, beta=beta)


def solve_i2_min(
    i1: float,
    delta: float,
    cef: cef_mod.CalibratedCef,
    beta: float,
    target: float,
    z_lower: float,
    quad: QuadratureSettings = DEFAULT_QUAD,
    root: RootSettings = DEFAULT_ROOT,
) -> float:
    """Smallest floor I2min with overall power equal to ``target``.

    Returns 0 when the unconstrained design already meets the target; raises
    :class:`InfeasiblePowerError` when the target exceeds the continuation
    probability, which caps the achievable power.
    """
    ceiling = 1.0 - std_normal_cdf(z_lower - delta * math.sqrt(i1))
    if target >= ceiling:
        raise InfeasiblePowerError(
            f"target {target} is not below the continuation probability "
            f"{ceiling}; no floor can reach it"
        )

    def power_at(i2_min: float) -> float:
        rule = AdaptiveConditionalPower(i2_min=i2_min, cef=cef, beta=beta)
        return overall_power(i1, rule, delta, z_lower, quad, root)

    x, _ = solve_monotone(power_at, target, 0.0, root)
    return x


def max_stage2_info(i1: float, rule: AdaptiveConditionalPower, z_lower: float) -> float:
    """Largest possible stage-two information, attained at z1 = z_lower or
    at the floor."""
    return max(rule.i2_min, float(_adaptive_formula(z_lower, i1, rule)))


def mean_stage2_info(
    i1: float,
    rule: StageTwoRule,
    delta: float,
    z_lower: float,
    conditional: bool = True,
    quad: QuadratureSettings = DEFAULT_QUAD,
    root: RootSettings = DEFAULT_ROOT,
) -> float:
    """Expected stage-two information over the continuation region.

    With ``conditional=True`` the expectation is taken given continuation
    (Z1 >= z_lower); otherwise trials stopped at stage one contribute zero
    information.
    """
    if isinstance(rule, ConstantInfo):
        value = rule.i2_const
        if conditional:
            return value
        p_cont = 1.0 - std_normal_cdf(z_lower - delta * math.sqrt(i1))
        return value * p_cont

    mean = delta * math.sqrt(i1)
    z_hi = tail_upper_limit(mean, quad)
    splits = [p for p in (cef_mod.cap_kink(rule.cef),) if math.isfinite(p)]
    kink = _floor_kink(i1, rule, max(z_lower, 1e-12), z_hi, root)
    if kink is not None:
        splits.append(kink)

    def integrand(z):
        i2 = np.maximum(rule.i2_min, _adaptive_formula(z, i1, rule))
        return i2 * std_normal_pdf(z - mean)

    raw = integrate(integrand, z_lower, z_hi, quad, split_points=splits)
    if not conditional:
        return raw
    p_cont = 1.0 - std_normal_cdf(z_lower - mean)
    return raw / p_cont


@dataclass(frozen=True)
class FastTrackDesign:
    """A required-conditional-registration design (continue only if Z1 >= z_f),
    bundled for simulation and evaluation."""

    params: DesignParams
    rule: AdaptiveConditionalPower

    @property
    def branch_boundary(self) -> float:
        return boundary_z(
            self.params.i1, self.params.delta_rel, self.params.alpha_c
        )


def build_fasttrack(
    params: DesignParams,
    family: str,
    binding: bool = True,
    quad: QuadratureSettings = DEFAULT_QUAD,
    root: RootSettings = DEFAULT_ROOT,
) -> FastTrackDesign:
    """Calibrate the family CEF and solve the floor for overall power 1-beta.

    ``binding=True`` credits the futility stop at z_f in the level condition
    (the CEF is zero below z_f); ``binding=False`` calibrates the CEF over the
    whole real line, which is conservative when the stop is executed anyway.
    The 'constant' family is the separate-studies design testing stage two at
    level alpha.
    """
    z_f = boundary_z(params.i1, params.delta_rel, params.alpha_c)
    if family == "constant":
        cef = cef_mod.CalibratedCef(
            spec=cef_mod.ConstantCef(level=params.alpha), level_used=params.alpha
        )
    elif family in ("inverse_normal", "fisher"):
        z0 = z_f if binding else -math.inf
        spec = (
            cef_mod.InverseNormalCef(z0=z0)
            if family == "inverse_normal"
            else cef_mod.FisherProductCef(z0=z0)
        )
        cef = cef_mod.calibrate(spec, params.alpha, z0, quad, root)
    else:
        raise ValueError(
            f"family {family!r} is not available for the fast-track mode"
        )
    i2_min = solve_i2_min(
        params.i1, params.delta, cef, params.beta, 1.0 - params.beta, z_f,
        quad, root,
    )
    rule = AdaptiveConditionalPower(i2_min=i2_min, cef=cef, beta=params.beta)
    return FastTrackDesign(params=params, rule=rule)


def evaluate_design(
    params: DesignParams,
    rule: StageTwoRule,
    quad: QuadratureSettings = DEFAULT_QUAD,
    root: RootSettings = DEFAULT_ROOT,
) -> EvaluationResult:
    """Bundle the operating characteristics of a fast-track design."""
    z_f = boundary_z(params.i1, params.delta_rel, params.alpha_c)
    p_cond = cond_registration_power(params)
    if isinstance(rule, ConstantInfo):
        i2_lo = i2_hi = i2_mean = rule.i2_const
        power = math.nan  # no rejection rule attached to a bare constant stage
    else:
        power = overall_power(params.i1, rule, params.delta, z_f, quad, root)
        i2_hi = max_stage2_info(params.i1, rule, z_f)
        i2_lo = rule.i2_min
        # Futility-stopped trials contribute zero second-stage information,
        # which is what makes the non-adaptive mean sit just above its
        # minimum (149 vs 148 per group in the worked example).
        i2_mean = mean_stage2_info(
            params.i1, rule, params.delta, z_f, False, quad, root
        )
    return EvaluationResult(
        overall_power=power,
        p_cond_reg=p_cond,
        i2_min=i2_lo,
        i2_max=i2_hi,
        i2_mean=i2_mean,
        total_mean=params.i1 + i2_mean,
        total_max=params.i1 + i2_hi,
    )
