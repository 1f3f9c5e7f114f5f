"""Unit tests for the apply-or-waive combination strategy."""

import math

import pytest

from conftest import COMBO_BASE, SIGMA, i_delta_of, params_at
from fasttrack.cef import FisherProductCef, InverseNormalCef, calibrate
from fasttrack.combination import (
    FAMILIES,
    branch_metrics,
    build_combination,
    gambling_threshold,
    lower_branch_success,
    naive_inflation,
    solve_i2_const,
)
from fasttrack.design import ExampleCost, boundary_z, cond_registration_power, derive
from fasttrack.numerics import std_normal_cdf, std_normal_quantile

ALPHA = 0.025

# Per-group sample sizes of the worked example, one row per family:
# (n2_const, n2_min, n2_max, E(n2)).  The build reproduces each cell within
# one participant.
WORKED_EXAMPLE_ROWS = {
    "constant": (137, 130, 215, 139),
    "inverse_normal": (137, 14, 137, 68),
    "fisher": (137, 12, 141, 70),
    "z_combination": (124, 22, 124, 70),
}


@pytest.fixture(scope="module")
def combo_designs():
    p = params_at(COMBO_BASE, 0.5)
    return {family: build_combination(p, family) for family in FAMILIES}


class TestNaiveInflation:
    def test_reference_values(self):
        assert naive_inflation(0.025, 0.15) == pytest.approx(0.04625, abs=5e-5)
        assert naive_inflation(0.025, 0.05) == pytest.approx(0.04875, abs=5e-5)
        # As the conditional level approaches 0.5 the inflation tends to
        # 1.5 * alpha.
        assert naive_inflation(0.025, 0.5 - 1e-9) == pytest.approx(
            0.0375, abs=1e-6
        )


class TestWaiveBranchSizing:
    def test_flat_level_gives_fixed_design_information(self):
        # With a flat conditional error function the waive branch is an
        # ordinary fixed design at level alpha, so its information is exactly
        # the fixed-design information for the assumed effect.
        p = params_at(COMBO_BASE, 0.5)
        z_f = boundary_z(p.i1, p.delta_rel, p.alpha_c)
        design = build_combination(p, "constant")
        i_fixed = (
            std_normal_quantile(1.0 - ALPHA) + std_normal_quantile(1.0 - p.beta)
        ) ** 2 / p.delta**2
        assert design.i2_const == pytest.approx(i_fixed, abs=1e-7)
        # And the generic solver agrees.
        solved = solve_i2_const(p.i1, p.delta, design.cef, p.beta, z_f)
        assert solved == pytest.approx(i_fixed, abs=1e-7)

    def test_adaptive_families_need_less_than_fixed(self, combo_designs):
        i_fixed = combo_designs["constant"].i2_const
        for family in ("inverse_normal", "fisher", "z_combination"):
            assert combo_designs[family].i2_const < i_fixed

    def test_fixed_information_crossing_abscissas(self):
        # The pilot size at which the waive-branch information falls to the
        # single-study information I_delta.
        from fasttrack.numerics import find_root

        i_delta = i_delta_of(COMBO_BASE)

        def excess(t, family):
            p = params_at(COMBO_BASE, float(t))
            return build_combination(p, family).i2_const / i_delta - 1.0

        assert find_root(lambda t: excess(t, "inverse_normal"), 0.3, 0.7) == (
            pytest.approx(0.4944, abs=1e-3)
        )
        assert find_root(lambda t: excess(t, "z_combination"), 0.2, 0.5) == (
            pytest.approx(0.3252, abs=1e-3)
        )


class TestBranchMetrics:
    def test_overall_power_mixes_branches(self, combo_designs):
        for family, design in combo_designs.items():
            m = branch_metrics(design)
            mixed = (
                m.p_upper * m.p_success_given_upper
                + (1.0 - m.p_upper) * m.p_success_given_lower
            )
            assert m.overall_power == pytest.approx(mixed, abs=1e-9)
            assert m.overall_power == pytest.approx(0.8, abs=1e-6)
            assert m.p_success_given_lower == pytest.approx(0.8, abs=1e-6)

    def test_conditional_registration_probability(self, combo_designs):
        p = params_at(COMBO_BASE, 0.5)
        m = branch_metrics(combo_designs["constant"])
        assert m.p_upper == pytest.approx(cond_registration_power(p), abs=1e-12)
        assert m.p_upper == pytest.approx(0.6540, abs=5e-4)

    def test_worked_example_sample_sizes(self, combo_designs):
        cost = ExampleCost(sigma=SIGMA)
        for family, expected in WORKED_EXAMPLE_ROWS.items():
            design = combo_designs[family]
            m = branch_metrics(design)
            got = (
                cost.group_size_of(design.i2_const),
                cost.group_size_of(design.i2_min),
                cost.group_size_of(m.max_i2_both),
                cost.group_size_of(m.e_i2_both),
            )
            for g, e in zip(got, expected):
                assert abs(g - e) <= 1, (family, got, expected)


class TestGamblingThresholds:
    def test_reference_values(self):
        p = params_at(COMBO_BASE, 0.5)
        expected = {
            "constant": 0.137,
            "inverse_normal": 0.0813,
            "fisher": 0.0854,
            "z_combination": 0.1128,
        }
        for family, want in expected.items():
            assert gambling_threshold(p, family) == pytest.approx(want, abs=2e-3)


class TestMonotonicity:
    def test_lower_branch_success_increasing_in_information(self):
        # More second-stage information can only help on the waive branch.
        for t in (0.3, 0.5):
            p = params_at(COMBO_BASE, t)
            z_f = boundary_z(p.i1, p.delta_rel, p.alpha_c)
            for spec in (
                InverseNormalCef(z0=-math.inf),
                FisherProductCef(z0=-math.inf),
            ):
                cef = calibrate(spec, ALPHA, -math.inf)
                vals = [
                    lower_branch_success(x, cef, p.i1, p.delta, z_f)
                    for x in (0.25, 0.5, 1.0, 2.0, 4.0)
                ]
                assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_z_combination_base_branch_increasing(self):
        p = params_at(COMBO_BASE, 0.5)
        design = build_combination(p, "z_combination")
        z_f = design.branch_boundary
        vals = [
            lower_branch_success(
                x, design.cef, p.i1, p.delta, z_f, z_combination_base=True
            )
            for x in (0.25, 0.5, 1.0, 2.0, 4.0)
        ]
        assert all(b > a for a, b in zip(vals, vals[1:]))


class TestCrossFamilyComparisons:
    @staticmethod
    def _metrics(family, t):
        p = params_at(COMBO_BASE, t)
        i_delta = i_delta_of(COMBO_BASE)
        m = branch_metrics(build_combination(p, family))
        return m.e_i2_both / i_delta, m.max_i2_both / i_delta

    def test_mean_information_comparisons(self):
        # Expected second-stage information: non-adaptive exceeds the inverse
        # normal for pilots above ~0.14, Fisher above ~0.075, and the raised
        # combined z-test everywhere.
        for t in (0.08, 0.15, 0.3, 0.5, 0.7):
            na_mean, _ = self._metrics("constant", t)
            iv_mean, _ = self._metrics("inverse_normal", t)
            fi_mean, _ = self._metrics("fisher", t)
            az_mean, _ = self._metrics("z_combination", t)
            assert na_mean > fi_mean
            assert az_mean <= na_mean + 1e-9
            if t >= 0.15:
                assert na_mean > iv_mean
        na_mean, _ = self._metrics("constant", 0.1)
        iv_mean, _ = self._metrics("inverse_normal", 0.1)
        assert iv_mean > na_mean  # below the crossover the order flips

    def test_max_information_comparisons(self):
        for t in (0.3, 0.5, 0.7):
            _, na_max = self._metrics("constant", t)
            _, iv_max = self._metrics("inverse_normal", t)
            _, fi_max = self._metrics("fisher", t)
            _, az_max = self._metrics("z_combination", t)
            assert az_max < na_max
            assert fi_max < na_max
            assert iv_max < na_max
        # Below the respective crossovers the non-adaptive maximum is smaller.
        _, na_max = self._metrics("constant", 0.1)
        _, az_max = self._metrics("z_combination", 0.1)
        assert az_max > na_max


class TestValidation:
    def test_unknown_family(self):
        p = params_at(COMBO_BASE, 0.5)
        with pytest.raises(ValueError):
            build_combination(p, "bonferroni")

    def test_level_condition_holds_for_built_designs(self, combo_designs):
        from fasttrack.cef import level_integral

        for design in combo_designs.values():
            assert level_integral(design.cef, -math.inf) == pytest.approx(
                ALPHA, abs=1e-8
            )
