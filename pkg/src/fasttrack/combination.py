"""Data-driven combination of conditional and permanent registration.

When the pilot meets the conditional-registration boundary (Z1 >= z_f) the
design proceeds as an adaptive fast-track with a conditional-power sized
second stage; otherwise the application is waived and the second stage runs
with a fixed information I2_const.  Both branches target a conditional success
probability of 1-beta under the a priori assumed effect, and one overall
conditional error function keeps the type I error rate at alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cef as cef_mod
from . import power as power_mod
from .design import DesignParams, boundary_z, cond_registration_power, derive
from .numerics import (
    DEFAULT_QUAD,
    DEFAULT_ROOT,
    QuadratureSettings,
    RootSettings,
    find_root,
    integrate,
    solve_monotone,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
)

FAMILIES = ("constant", "inverse_normal", "fisher", "z_combination")


@dataclass(frozen=True)
class CombinationDesign:
    """A fully built apply-or-waive design."""

    params: DesignParams
    family: str
    cef: cef_mod.CalibratedCef
    i2_const: float
    i2_min: float
    branch_boundary: float  # z_f


@dataclass(frozen=True)
class BranchMetrics:
    """Per-branch and overall operating characteristics."""

    p_upper: float
    p_success_given_upper: float
    p_success_given_lower: float
    overall_power: float
    e_i2_both: float
    max_i2_both: float


def naive_inflation(alpha: float, alpha_c: float) -> float:
    """Overall type I error rate of naively restarting at level alpha after a
    failed (binding) conditional-registration attempt."""
    z_f = std_normal_quantile(1.0 - alpha_c)
    return (1.0 + std_normal_cdf(z_f)) * alpha


def lower_branch_success(
    i2c: float,
    cef: cef_mod.CalibratedCef,
    i1: float,
    delta: float,
    z_split: float,
    quad: QuadratureSettings = DEFAULT_QUAD,
    z_combination_base: bool = False,
) -> float:
    """P_delta(Z2 >= Phi^{-1}(1 - A(Z1)) | Z1 < z_split) at stage-two
    information ``i2c``.

    For the z-combination family the lower branch tests with the fixed-size
    combined z-test at the base level, whose conditional error function itself
    depends on ``i2c``; pass ``z_combination_base=True`` to evaluate it without
    a calibrated alpha_prime.
    """
    mean = delta * math.sqrt(i1)
    lo = mean - quad.tail_halfwidth
    if z_split <= lo:
        # Essentially no mass below the boundary; the branch is vacuous.
        return 1.0

    if z_combination_base:
        base = cef.spec.base_level if isinstance(cef.spec, cef_mod.ZCombinationCef) else None
        if base is None:
            raise TypeError("z_combination_base requires a ZCombinationCef spec")

        def a_of(z):
            return np.minimum(cef_mod.atilde_z(z, base, i1, i2c), 0.5)
        splits = []
    else:
        a_of = lambda z: cef_mod.eval_cef(cef, z)
        splits = [p for p in (cef_mod.cap_kink(cef),) if math.isfinite(p)]

    def integrand(z):
        a = a_of(z)
        cond = 1.0 - std_normal_cdf(
            std_normal_quantile(1.0 - a) - math.sqrt(i2c) * delta
        )
        return cond * std_normal_pdf(z - mean)

    raw = integrate(integrand, lo, z_split, quad, split_points=splits)
    p_lower = std_normal_cdf(z_split - mean)
    return raw / p_lower


def solve_i2_const(
    i1: float,
    delta: float,
    cef: cef_mod.CalibratedCef,
    beta: float,
    z_split: float,
    quad: QuadratureSettings = DEFAULT_QUAD,
    root: RootSettings = DEFAULT_ROOT,
    z_combination_base: bool = False,
) -> float:
    """Fixed stage-two information giving conditional success 1-beta on the
    waive branch.  The conditional success probability is increasing in the
    information, so a monotone solve applies."""
    target = 1.0 - beta

    def success(i2c: float) -> float:
        if i2c <= 0:
            return 0.0
        return lower_branch_success(
            i2c, cef, i1, delta, z_split, quad, z_combination_base
        )

    x, _ = solve_monotone(success, target, 0.0, root)
    return x


def build_combination(
    params: DesignParams,
    family: str,
    quad: QuadratureSettings = DEFAULT_QUAD,
    root: RootSettings = DEFAULT_ROOT,
) -> CombinationDesign:
    """Build an apply-or-waive design for one conditional error family.

    Construction order: for the z-combination family the lower-branch
    information is solved first from the fixed-size combined test at level
    alpha, then alpha_prime is calibrated so the level condition holds with
    equality, then the upper-branch floor; for the other families the CEF is
    calibrated with a non-binding lower bound first, then the two branch
    informations.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    z_f = boundary_z(params.i1, params.delta_rel, params.alpha_c)
    delta = params.delta

    if family == "z_combination":
        # The lower branch only depends on the base-level combined test, so
        # I2_const is determined before alpha_prime exists.
        probe = cef_mod.CalibratedCef(
            spec=cef_mod.ZCombinationCef(
                i1=params.i1, i2_const=1.0, z_split=z_f, base_level=params.alpha
            )
        )

        def success(i2c: float) -> float:
            if i2c <= 0:
                return 0.0
            return lower_branch_success(
                i2c, probe, params.i1, delta, z_f, quad, z_combination_base=True
            )

        i2_const, _ = solve_monotone(success, 1.0 - params.beta, 0.0, root)
        spec = cef_mod.ZCombinationCef(
            i1=params.i1, i2_const=i2_const, z_split=z_f, base_level=params.alpha
        )
        cef = cef_mod.calibrate(spec, params.alpha, -math.inf, quad, root)
    else:
        if family == "constant":
            spec = cef_mod.ConstantCef(level=params.alpha)
        elif family == "inverse_normal":
            spec = cef_mod.InverseNormalCef(z0=-math.inf)
        else:
            spec = cef_mod.FisherProductCef(z0=-math.inf)
        cef = cef_mod.calibrate(spec, params.alpha, -math.inf, quad, root)
        i2_const = solve_i2_const(
            params.i1, delta, cef, params.beta, z_f, quad, root
        )

    p_upper = cond_registration_power(params)
    target = (1.0 - params.beta) * p_upper
    i2_min = power_mod.solve_i2_min(
        params.i1, delta, cef, params.beta, target, z_f, quad, root
    )
    return CombinationDesign(
        params=params,
        family=family,
        cef=cef,
        i2_const=i2_const,
        i2_min=i2_min,
        branch_boundary=z_f,
    )


def branch_metrics(
    design: CombinationDesign,
    quad: QuadratureSettings = DEFAULT_QUAD,
    root: RootSettings = DEFAULT_ROOT,
) -> BranchMetrics:
    """Success probabilities and information statistics over both branches."""
    params = design.params
    delta = params.delta
    z_f = design.branch_boundary
    p_upper = cond_registration_power(params)

    rule = power_mod.AdaptiveConditionalPower(
        i2_min=design.i2_min, cef=design.cef, beta=params.beta
    )
    upper_joint = power_mod.overall_power(
        params.i1, rule, delta, z_f, quad, root
    )
    p_succ_upper = upper_joint / p_upper
    p_succ_lower = lower_branch_success(
        design.i2_const, design.cef, params.i1, delta, z_f, quad
    )
    overall = upper_joint + (1.0 - p_upper) * p_succ_lower

    e_upper = power_mod.mean_stage2_info(
        params.i1, rule, delta, z_f, conditional=False, quad=quad, root=root
    )
    e_both = e_upper + (1.0 - p_upper) * design.i2_const
    max_both = max(
        power_mod.max_stage2_info(params.i1, rule, z_f), design.i2_const
    )
    return BranchMetrics(
        p_upper=p_upper,
        p_success_given_upper=p_succ_upper,
        p_success_given_lower=p_succ_lower,
        overall_power=overall,
        e_i2_both=e_both,
        max_i2_both=max_both,
    )


def gambling_threshold(
    params: DesignParams,
    family: str,
    quad: QuadratureSettings = DEFAULT_QUAD,
    root: RootSettings = DEFAULT_ROOT,
    scan_step: float = 0.01,
    refine_tol: float = 5e-4,
) -> float:
    """Largest relative pilot information t_xi(I1) for which the upper-branch
    stage-two information is constant (the conditional-power formula never
    exceeds the solved floor).

    The excess of the formula maximum over the floor is scanned on a t-grid
    and the bracketed sign change refined by bisection.  Returns 0 when the
    branch is never constant.
    """
    base = derive(params)
    i_delta = base.i_delta

    def excess(t_xi: float) -> float:
        p = DesignParams(
            alpha=params.alpha,
            alpha_c=params.alpha_c,
            beta=params.beta,
            delta_rel=params.delta_rel,
            xi=params.xi,
            i1=t_xi * i_delta,
        )
        d = build_combination(p, family, quad, root)
        rule = power_mod.AdaptiveConditionalPower(
            i2_min=d.i2_min, cef=d.cef, beta=p.beta
        )
        formula_max = power_mod._adaptive_formula(
            d.branch_boundary, p.i1, rule
        )
        return float(formula_max) - d.i2_min

    t_max = base.i1_max / i_delta
    lo = scan_step
    if excess(lo) > 0:
        return 0.0
    t = lo
    while t < t_max:
        t_next = min(t + scan_step, t_max)
        if excess(t_next) > 0:
            return find_root(
                excess,
                t,
                t_next,
                RootSettings(x_tol=refine_tol, f_tol=root.f_tol,
                             max_iter=root.max_iter,
                             bracket_growth=root.bracket_growth),
            )
        t = t_next
    return 0.0
