"""``sicampaign solve|sweep|validate|baseline <config>``."""
from __future__ import annotations

import argparse
import logging
import sys

from .scenario import ScenarioError, load_scenario, run_baseline, run_scenario, run_sweep, run_validation
from .strategies import InfeasibleBudget

log = logging.getLogger("sicampaign")


def _solve(scenario):
    summary = run_scenario(scenario)
    log.info("J = %.6f (strategy %s)", summary["J"], summary.get("strategy"))
    if summary.get("converged") is False:
        log.error("solver did not converge (kkt residual %.3g); diagnostics written", summary["kkt_residual"])
        return 3
    return 0


def _sweep(scenario):
    result = run_sweep(scenario)
    failed = [r for r in result.rows if r.error]
    for r in result.rows:
        log.info("%s=%g  J_opt=%.6f  +%.2f%% vs static  +%.2f%% vs bang-bang %s",
                 result.parameter, r.value, r.J_opt, r.improvement_vs_static, r.improvement_vs_bang, r.error)
    return 3 if failed else 0


def _validate(scenario):
    report = run_validation(scenario)
    log.info("sup-norm deviation %.4f over %d runs", report["sup_norm_deviation"], report["n_runs"])
    return 0


def _baseline(scenario):
    for row in run_baseline(scenario):
        log.info("%-9s J=%.6f spend=%.3g", row["strategy"], row["J"], row["spend"])
    return 0


COMMANDS = {"solve": _solve, "sweep": _sweep, "validate": _validate, "baseline": _baseline}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sicampaign", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", help="scenario YAML file")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    try:
        scenario = load_scenario(args.config)
        return COMMANDS[args.command](scenario)
    except ScenarioError as exc:
        log.error("invalid scenario: %s", exc)
        return 2
    except InfeasibleBudget as exc:
        log.error("infeasible budget: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
