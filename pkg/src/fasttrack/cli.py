"""Command-line interface: scenario ingestion, figure-data CSV emission,
table reproduction and Monte Carlo runs.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace

from . import combination as comb_mod
from . import montecarlo as mc_mod
from . import power as power_mod
from .design import ExampleCost, cond_registration_power, derive
from .numerics import BracketError, ConvergenceError
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

INFEASIBLE = "infeasible"

CURVE_KINDS = (
    "alpha_rel",
    "i1_min_trel",
    "i1_min_txi",
    "i2_min",
    "i2_mean",
    "i2_max",
    "total_mean",
    "total_max",
    "i2_const",
    "combo_panel",
)

_FASTTRACK_FAMILIES = ("constant", "inverse_normal", "fisher")


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return f"{x:.10g}"


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def cmd_derive(scenario: Scenario, rounding: str, out=None) -> int:
    out = sys.stdout if out is None else out
    params = scenario.design_params()
    d = derive(params)
    print(f"alpha        = {_fmt(params.alpha)}", file=out)
    print(f"alpha_c      = {_fmt(params.alpha_c)}", file=out)
    print(f"beta         = {_fmt(params.beta)}", file=out)
    print(f"delta_rel    = {_fmt(params.delta_rel)}", file=out)
    print(f"xi           = {_fmt(params.xi)}", file=out)
    print(f"delta        = {_fmt(d.delta)}", file=out)
    print(f"i1           = {_fmt(params.i1)}", file=out)
    print(f"eta_f        = {_fmt(d.eta_f)}", file=out)
    print(f"i_rel        = {_fmt(d.i_rel)}", file=out)
    print(f"i_delta      = {_fmt(d.i_delta)}", file=out)
    print(f"z_f          = {_fmt(d.z_f)}", file=out)
    print(f"alpha_rel    = {_fmt(d.alpha_rel)}", file=out)
    print(f"alpha_f      = {_fmt(d.alpha_f)}", file=out)
    print(f"i1_min       = {_fmt(d.i1_min)}", file=out)
    print(f"i1_max       = {_fmt(d.i1_max)}", file=out)
    print(f"xi_min       = {_fmt(d.xi_min)}", file=out)
    print(f"t_rel_i1     = {_fmt(d.t_rel_i1)}", file=out)
    print(f"t_xi_i1      = {_fmt(d.t_xi_i1)}", file=out)
    print(
        f"p_cond_reg   = {_fmt(cond_registration_power(params))}",
        file=out,
    )
    if scenario.sigma is not None:
        cost = ExampleCost(sigma=scenario.sigma)
        size = cost.group_size_of if rounding == "ceil" else cost.group_size_nearest
        print(f"n1           = {size(params.i1)}", file=out)
        print(f"n_rel        = {size(d.i_rel)}", file=out)
        print(f"n_delta      = {size(d.i_delta)}", file=out)
        print(f"n1_max       = {size(d.i1_max)}", file=out)
        if math.isfinite(d.i1_min):
            print(f"n1_min       = {size(d.i1_min)}", file=out)
    if params.xi < d.xi_min:
        print(
            "warning: xi below xi_min — fast-track with required conditional "
            "registration infeasible",
            file=out,
        )
    return EXIT_OK


def _grid(lo: float, hi: float, step: float) -> list[float]:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [lo + k * step for k in range(n + 1)]


def _fasttrack_stat(scenario: Scenario, kind: str, t_xi: float, family: str,
                    cache: dict):
    """One statistic at one grid abscissa; returns INFEASIBLE below the
    feasibility bound."""
    params = scenario.design_params(
        i1=t_xi * cache["i_delta"]
    )
    try:
        design = power_mod.build_fasttrack(
            params, family, binding=scenario.mode == "fasttrack_binding"
        )
    except power_mod.InfeasiblePowerError:
        return INFEASIBLE
    res = power_mod.evaluate_design(params, design.rule)
    i_delta = cache["i_delta"]
    return {
        "i2_min": res.i2_min / i_delta,
        "i2_mean": res.i2_mean / i_delta,
        "i2_max": res.i2_max / i_delta,
        "total_mean": res.total_mean / i_delta,
        "total_max": res.total_max / i_delta,
    }[kind]


def cmd_curve(kind: str, scenario: Scenario, grid_step: float, out_path: str) -> int:
    base = derive(scenario.design_params())
    i_delta = base.i_delta
    cache = {"i_delta": i_delta}

    if kind == "alpha_rel":
        abscissas = _grid(grid_step, 1.0, grid_step)
        header = ["t_rel_i1", "alpha_rel"]
        rows = []
        for t in abscissas:
            p = scenario.design_params(i1=t * base.i_rel)
            rows.append([t, derive(p).alpha_rel])
        _write_csv(out_path, header, rows)
        return EXIT_OK

    if kind in ("i1_min_trel", "i1_min_txi"):
        xis = _grid(1.0 + grid_step, 3.0, grid_step)
        rel = kind == "i1_min_trel"
        header = ["xi", "t_i1_min", "t_i1_max"]
        rows = []
        for xi in xis:
            p = replace(scenario.design_params(), xi=xi)
            d = derive(p)
            scale = d.i_rel if rel else d.i_delta
            rows.append([xi, d.i1_min / scale, d.i1_max / scale])
        _write_csv(out_path, header, rows)
        return EXIT_OK

    if kind in ("i2_min", "i2_mean", "i2_max", "total_mean", "total_max"):
        if scenario.mode == "combination":
            raise ScenarioError(f"kind {kind!r} requires a fasttrack mode")
        t_hi = base.i1_max / i_delta
        abscissas = _grid(grid_step, t_hi, grid_step)
        header = ["t_xi_i1"] + [f"t_xi_{kind}_{f}" for f in _FASTTRACK_FAMILIES]
        rows = []
        for t in abscissas:
            row = [t]
            for family in _FASTTRACK_FAMILIES:
                row.append(_fasttrack_stat(scenario, kind, t, family, cache))
            rows.append(row)
        _write_csv(out_path, header, rows)
        return EXIT_OK

    if kind == "i2_const":
        if scenario.mode != "combination":
            raise ScenarioError("kind 'i2_const' requires mode = combination")
        t_hi = base.i1_max / i_delta
        abscissas = _grid(grid_step, t_hi, grid_step)
        header = ["t_xi_i1"] + [
            f"t_xi_i2_const_{f}" for f in comb_mod.FAMILIES
        ]
        rows = []
        for t in abscissas:
            row = [t]
            for family in comb_mod.FAMILIES:
                p = scenario.design_params(i1=t * i_delta)
                design = comb_mod.build_combination(p, family)
                row.append(design.i2_const / i_delta)
            rows.append(row)
        _write_csv(out_path, header, rows)
        return EXIT_OK

    if kind == "combo_panel":
        if scenario.mode != "combination":
            raise ScenarioError("kind 'combo_panel' requires mode = combination")
        t_hi = base.i1_max / i_delta
        abscissas = _grid(grid_step, t_hi, grid_step)
        header = [
            "t_xi_i1",
            "t_xi_i2_const",
            "t_xi_i2_min",
            "t_xi_i2_max",
            "p_cond_reg",
        ]
        rows = []
        for t in abscissas:
            p = scenario.design_params(i1=t * i_delta)
            design = comb_mod.build_combination(p, scenario.family)
            rule = power_mod.AdaptiveConditionalPower(
                i2_min=design.i2_min, cef=design.cef, beta=p.beta
            )
            i2_max = power_mod.max_stage2_info(p.i1, rule, design.branch_boundary)
            rows.append(
                [
                    t,
                    design.i2_const / i_delta,
                    design.i2_min / i_delta,
                    i2_max / i_delta,
                    cond_registration_power(p),
                ]
            )
        _write_csv(out_path, header, rows)
        return EXIT_OK

    raise ScenarioError(f"unknown curve kind {kind!r}")


TABLE1_SCENARIO = Scenario(
    alpha=0.025,
    alpha_c=0.15,
    beta=0.2,
    delta_rel=1.4,
    xi=1.25,
    sigma=5.17,
    t_xi_i1=0.5,
    family="z_combination",
    mode="combination",
)


def cmd_table1(out_path: str, rounding: str = "ceil") -> int:
    """Per-group sample sizes of the worked combination example, one row per
    conditional error family, with +n1 totals."""
    scenario = TABLE1_SCENARIO
    params = scenario.design_params()
    cost = ExampleCost(sigma=scenario.sigma)
    size = cost.group_size_of if rounding == "ceil" else cost.group_size_nearest
    d = derive(params)
    n1 = size(params.i1)
    header = [
        "family",
        "n2_const", "n2_const_total",
        "n2_min", "n2_min_total",
        "n2_max", "n2_max_total",
        "e_n2", "e_n2_total",
    ]
    rows = []
    for family in comb_mod.FAMILIES:
        design = comb_mod.build_combination(params, family)
        metrics = comb_mod.branch_metrics(design)
        cells = [
            size(design.i2_const),
            size(design.i2_min),
            # Maximum over both branches: the waive branch can dominate when
            # its fixed information exceeds the adaptive branch maximum.
            size(metrics.max_i2_both),
            size(metrics.e_i2_both),
        ]
        row: list = [family]
        for c in cells:
            row.extend([c, c + n1])
        rows.append(row)
    _write_csv(out_path, header, rows)
    return EXIT_OK


def _build_design(scenario: Scenario):
    params = scenario.design_params()
    if scenario.mode == "combination":
        return comb_mod.build_combination(params, scenario.family)
    return power_mod.build_fasttrack(
        params,
        scenario.family,
        binding=scenario.mode == "fasttrack_binding",
    )


def cmd_simulate(
    scenario: Scenario, n_reps: int, seed: int, out_path: str, out=None
) -> int:
    out = sys.stdout if out is None else out
    design = _build_design(scenario)
    delta = scenario.design_params().delta
    header = [
        "theta",
        "p_cond_reg_hat", "p_cond_reg_se",
        "p_reject_hat", "p_reject_se",
        "mean_i2_hat", "max_i2_observed",
        "n_reps",
    ]
    rows = []
    for substream, theta in enumerate((0.0, delta)):
        cfg = mc_mod.SimConfig(n_reps=n_reps, seed=seed, theta=theta)
        rep = mc_mod.simulate(design, cfg, substream=substream)
        rows.append(
            [
                theta,
                rep.p_cond_reg_hat, rep.p_cond_reg_se,
                rep.p_reject_hat, rep.p_reject_se,
                rep.mean_i2_hat, rep.max_i2_observed,
                rep.n_reps,
            ]
        )
        print(
            f"theta={_fmt(theta)}: p_cond_reg={_fmt(rep.p_cond_reg_hat)} "
            f"(se {_fmt(rep.p_cond_reg_se)}), "
            f"p_reject={_fmt(rep.p_reject_hat)} (se {_fmt(rep.p_reject_se)})",
            file=out,
        )
    _write_csv(out_path, header, rows)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fasttrack",
        description="Design and evaluate two-stage fast-track registration studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_derive = sub.add_parser("derive", help="print derived design quantities")
    p_derive.add_argument("--scenario", required=True)
    p_derive.add_argument("--round", choices=("ceil", "nearest"), default="ceil")

    p_curve = sub.add_parser("curve", help="emit figure data as CSV")
    p_curve.add_argument("--scenario", required=True)
    p_curve.add_argument("--kind", required=True, choices=CURVE_KINDS)
    p_curve.add_argument("--out", required=True)
    p_curve.add_argument("--grid-step", type=float, default=0.002)

    p_table = sub.add_parser("table1", help="reproduce the worked example table")
    p_table.add_argument("--out", required=True)
    p_table.add_argument("--round", choices=("ceil", "nearest"), default="ceil")

    p_sim = sub.add_parser("simulate", help="Monte Carlo check of a scenario")
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--reps", type=int, default=100_000)
    p_sim.add_argument("--seed", type=int, default=20260823)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "derive":
            scenario = load_scenario(args.scenario)
            return cmd_derive(scenario, args.round)
        if args.command == "curve":
            scenario = load_scenario(args.scenario)
            if args.grid_step <= 0:
                raise ScenarioError("--grid-step must be positive")
            return cmd_curve(args.kind, scenario, args.grid_step, args.out)
        if args.command == "table1":
            return cmd_table1(args.out, args.round)
        if args.command == "simulate":
            scenario = load_scenario(args.scenario)
            if args.reps < 1:
                raise ScenarioError("--reps must be positive")
            return cmd_simulate(scenario, args.reps, args.seed, args.out)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConvergenceError, BracketError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
