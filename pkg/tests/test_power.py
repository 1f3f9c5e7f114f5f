"""Unit tests for stage-two information rules, the overall power integral
and the minimum-information solver."""

import math

import numpy as np
import pytest
from scipy.integrate import quad as scipy_quad
from scipy.special import ndtr, ndtri

from conftest import EVAL_BASE, i_delta_of, params_at
from fasttrack.cef import CalibratedCef, ConstantCef, eval_cef
from fasttrack.design import DesignParams, boundary_z, cond_registration_power, derive
from fasttrack.power import (
    AdaptiveConditionalPower,
    ConstantInfo,
    InfeasiblePowerError,
    build_fasttrack,
    evaluate_design,
    max_stage2_info,
    mean_stage2_info,
    nonadaptive_rule,
    overall_power,
    solve_i2_min,
    stage2_info,
)

ALPHA, BETA = 0.025, 0.2


class TestStage2Info:
    def test_conditional_power_formula(self):
        # At the pilot estimate theta_hat = 1.2 the non-adaptive reassessment
        # is eta_f^2 / 1.2^2 regardless of the floor being inactive.
        i1 = 1.18
        rule = nonadaptive_rule(0.0, ALPHA, BETA)
        z1 = 1.2 * math.sqrt(i1)
        eta_f = ndtri(0.8) + ndtri(0.975)
        assert stage2_info(z1, i1, rule) == pytest.approx(
            eta_f**2 / 1.2**2, rel=1e-10
        )

    def test_floor_activation(self):
        rule = nonadaptive_rule(5.0, ALPHA, BETA)
        assert stage2_info(100.0, 1.0, rule) == 5.0
        assert stage2_info(0.1, 1.0, rule) > 5.0

    def test_vanishes_for_large_estimates(self):
        rule = nonadaptive_rule(0.0, ALPHA, BETA)
        assert stage2_info(100.0, 1.0, rule) < 1e-3

    def test_rejects_nonpositive_z(self):
        rule = nonadaptive_rule(0.0, ALPHA, BETA)
        with pytest.raises(ValueError):
            stage2_info(0.0, 1.0, rule)
        with pytest.raises(ValueError):
            stage2_info(np.array([1.0, -0.5]), 1.0, rule)

    def test_constant_rule_passthrough(self):
        rule = ConstantInfo(i2_const=2.5)
        assert stage2_info(1.3, 1.0, rule) == 2.5
        out = stage2_info(np.array([0.5, 3.0]), 1.0, rule)
        assert np.all(out == 2.5)

    def test_rule_validation(self):
        with pytest.raises(ValueError):
            AdaptiveConditionalPower(
                i2_min=-1.0,
                cef=CalibratedCef(spec=ConstantCef(level=ALPHA), level_used=ALPHA),
                beta=BETA,
            )
        with pytest.raises(ValueError):
            ConstantInfo(i2_const=0.0)


class TestOverallPower:
    def test_matches_direct_quadrature_for_flat_level(self):
        # Independent oracle: scipy quadrature of the power integrand for the
        # non-adaptive design.
        p = params_at(EVAL_BASE, 0.6)
        z_f = boundary_z(p.i1, p.delta_rel, p.alpha_c)
        rule = nonadaptive_rule(1.7, ALPHA, BETA)
        got = overall_power(p.i1, rule, p.delta, z_f)

        q_alpha = ndtri(1.0 - ALPHA)
        eta = ndtri(1.0 - BETA) + q_alpha

        def integrand(z):
            i2 = max(1.7, p.i1 * eta**2 / z**2)
            cond = 1.0 - ndtr(q_alpha - math.sqrt(i2) * p.delta)
            mean = p.delta * math.sqrt(p.i1)
            return cond * math.exp(-0.5 * (z - mean) ** 2) / math.sqrt(2 * math.pi)

        want, _ = scipy_quad(integrand, z_f, 20.0, limit=400, epsabs=1e-12)
        assert got == pytest.approx(want, abs=1e-8)

    def test_capped_by_continuation_probability(self):
        p = params_at(EVAL_BASE, 0.6)
        z_f = boundary_z(p.i1, p.delta_rel, p.alpha_c)
        rule = nonadaptive_rule(50.0, ALPHA, BETA)
        assert overall_power(p.i1, rule, p.delta, z_f) < cond_registration_power(p)

    def test_monotone_in_floor(self):
        p = params_at(EVAL_BASE, 0.6)
        z_f = boundary_z(p.i1, p.delta_rel, p.alpha_c)
        powers = [
            overall_power(p.i1, nonadaptive_rule(x, ALPHA, BETA), p.delta, z_f)
            for x in (0.0, 0.5, 1.0, 2.0, 4.0)
        ]
        assert all(b >= a - 1e-12 for a, b in zip(powers, powers[1:]))

    def test_constant_rule_has_no_rejection_rule(self):
        with pytest.raises(TypeError):
            overall_power(1.0, ConstantInfo(i2_const=1.0), 2.0, 1.0)


class TestSolveFloor:
    def test_reference_floors(self):
        p = params_at(EVAL_BASE, 0.6)
        i_delta = i_delta_of(EVAL_BASE)
        expected = {
            "constant": 1.4062,
            "inverse_normal": 0.3316,
            "fisher": 0.2851,
        }
        for family, t_want in expected.items():
            design = build_fasttrack(p, family)
            assert design.rule.i2_min / i_delta == pytest.approx(t_want, abs=1e-3)

    def test_zero_floor_when_target_already_met(self):
        p = params_at(EVAL_BASE, 0.6)
        z_f = boundary_z(p.i1, p.delta_rel, p.alpha_c)
        cef = nonadaptive_rule(0.0, ALPHA, BETA).cef
        assert solve_i2_min(p.i1, p.delta, cef, BETA, 0.1, z_f) == 0.0

    def test_infeasible_target(self):
        p = params_at(EVAL_BASE, 0.6)
        z_f = boundary_z(p.i1, p.delta_rel, p.alpha_c)
        cef = nonadaptive_rule(0.0, ALPHA, BETA).cef
        ceiling = cond_registration_power(p)
        with pytest.raises(InfeasiblePowerError):
            solve_i2_min(p.i1, p.delta, cef, BETA, ceiling + 1e-6, z_f)

    def test_floor_diverges_near_pilot_lower_bound(self):
        # Approaching the smallest admissible pilot information from above,
        # the solved floor blows up (the power target approaches the
        # continuation probability ceiling).
        d0 = derive(DesignParams(i1=1.0, **EVAL_BASE))
        factors = (1.01, 1.001, 1.0001)
        floors = []
        for f in factors:
            p = DesignParams(**{**EVAL_BASE, "i1": d0.i1_min * f})
            design = build_fasttrack(p, "constant")
            floors.append(design.rule.i2_min / d0.i_delta)
        assert floors[0] < floors[1] < floors[2]
        assert floors[2] > 3.0
        with pytest.raises(InfeasiblePowerError):
            build_fasttrack(
                DesignParams(**{**EVAL_BASE, "i1": d0.i1_min * 0.999}), "constant"
            )


class TestMaxInfo:
    def test_attained_at_boundary_or_floor(self):
        p = params_at(EVAL_BASE, 0.6)
        design = build_fasttrack(p, "fisher")
        z_f = design.branch_boundary
        z = np.linspace(z_f + 1e-9, z_f + 12.0, 2000)
        curve = stage2_info(z, p.i1, design.rule)
        assert max_stage2_info(p.i1, design.rule, z_f) >= np.max(curve) - 1e-12

    def test_piecewise_linear_region(self):
        # On the window where the boundary formula dominates the floor, the
        # maximum information is linear in the pilot information.
        for family in ("inverse_normal", "fisher"):
            ts = np.linspace(0.46, 0.54, 5)
            ms = []
            for t in ts:
                p = params_at(EVAL_BASE, float(t))
                design = build_fasttrack(p, family)
                ms.append(max_stage2_info(p.i1, design.rule, design.branch_boundary))
            second = np.diff(ms, n=2)
            assert np.max(np.abs(second)) < 1e-8

    def test_constant_region_for_large_pilots(self):
        # Once the boundary sits in the 0.5-cap region the maximum no longer
        # depends on the pilot information.
        for family in ("inverse_normal", "fisher"):
            vals = []
            for t in (1.5, 1.7, 1.9):
                p = params_at(EVAL_BASE, t)
                design = build_fasttrack(p, family)
                vals.append(
                    max_stage2_info(p.i1, design.rule, design.branch_boundary)
                )
            assert max(vals) - min(vals) < 1e-9


class TestMeanInfo:
    def test_conditioning_variants(self):
        p = params_at(EVAL_BASE, 0.6)
        design = build_fasttrack(p, "inverse_normal")
        z_f = design.branch_boundary
        cond = mean_stage2_info(p.i1, design.rule, p.delta, z_f, conditional=True)
        uncond = mean_stage2_info(p.i1, design.rule, p.delta, z_f, conditional=False)
        p_cont = cond_registration_power(p)
        assert uncond == pytest.approx(cond * p_cont, abs=1e-9)

    def test_constant_rule_means(self):
        p = params_at(EVAL_BASE, 0.6)
        z_f = boundary_z(p.i1, p.delta_rel, p.alpha_c)
        rule = ConstantInfo(i2_const=2.0)
        assert mean_stage2_info(p.i1, rule, p.delta, z_f, conditional=True) == 2.0
        uncond = mean_stage2_info(p.i1, rule, p.delta, z_f, conditional=False)
        assert uncond == pytest.approx(2.0 * cond_registration_power(p), abs=1e-12)


class TestEvaluateDesign:
    def test_power_hits_target(self):
        p = params_at(EVAL_BASE, 0.6)
        for family in ("constant", "inverse_normal", "fisher"):
            design = build_fasttrack(p, family)
            res = evaluate_design(p, design.rule)
            assert res.overall_power == pytest.approx(0.8, abs=1e-6)
            assert res.i2_min <= res.i2_max + 1e-12
            assert res.total_mean == pytest.approx(p.i1 + res.i2_mean, abs=1e-12)
            assert res.total_max == pytest.approx(p.i1 + res.i2_max, abs=1e-12)

    def test_nonbinding_mode(self):
        # Calibrating over the whole real line is conservative, so both
        # families need a larger floor than in the binding mode to reach the
        # same power target.
        p = params_at(EVAL_BASE, 0.6)
        i_delta = i_delta_of(EVAL_BASE)
        expected = {"inverse_normal": 0.3706, "fisher": 0.3239}
        for family, t_want in expected.items():
            design = build_fasttrack(p, family, binding=False)
            assert design.rule.i2_min / i_delta == pytest.approx(t_want, abs=1e-3)
            res = evaluate_design(p, design.rule)
            assert res.overall_power == pytest.approx(0.8, abs=1e-6)

    def test_constant_info_is_degenerate(self):
        p = params_at(EVAL_BASE, 0.6)
        res = evaluate_design(p, ConstantInfo(i2_const=2.0))
        assert res.i2_min == res.i2_max == 2.0
        assert math.isnan(res.overall_power)

    def test_unknown_family(self):
        p = params_at(EVAL_BASE, 0.6)
        with pytest.raises(ValueError):
            build_fasttrack(p, "z_combination")
