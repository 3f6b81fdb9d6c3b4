"""Scenario files and the experiment drivers behind the command line.

A scenario is a YAML mapping; every key is optional and defaults reproduce the
reference setup (PL3 network, three groups, 51 grid points)::

    network: PL3              # ER | PL2 | PL3 | {kind: poisson|power_law, ...}
    groups: 3
    n_points: 51
    model: {profile: constant, beta: 0.12, beta_max: 0.24, alpha: 0.5, i0: 0.01,
            T: 1.0, u_max: 0.12, v_max: 0.5, b_hat: 1.0, c_hat: 1.0, d: 0.5, B: null}
    strategy: optimal         # optimal | static | bang_bang | none
    solver: {tol_grad: 1e-6, tol_con: 1e-8, max_outer: 30, max_inner: 3000, n_starts: 3, seed: 0}
    sweep: {parameter: B, values: [...], normalized: false}
    validation: {n_nodes: 10000, n_runs: 20, dt: null, controls: none}
    output_dir: results
    seed: 0
    workers: 1
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .degree_model import DegreeDistribution, distribution_from_spec
from .dynamics import (
    ControlSchedule,
    ModelParams,
    Network,
    SpreadingProfile,
    budget_spend,
    export_schedule_csv,
    export_trajectory_csv,
    integrate_heun,
    objective,
    time_grid,
)
from .io import atomic_csv, atomic_json
from .netsim import ensemble, export_ensemble_csv
from .strategies import InfeasibleBudget, bang_bang_strategy, no_control, static_strategy
from .transcription_optimizer import (
    SolverOptions,
    export_allocation_csv,
    resource_allocation_rates,
    solve,
    transcribe,
)

OUTPUT_ROOT_ENV = "SICAMPAIGN_OUTPUT_ROOT"
STRATEGIES = ("optimal", "static", "bang_bang", "none")
SWEEP_PARAMETERS = ("B", "d", "beta", "b_hat_2", "i0")
_MODEL_KEYS = {"profile", "beta", "beta_max", "alpha", "i0", "T", "u_max", "v_max", "b_hat", "c_hat", "d", "B"}
_TOP_KEYS = {"network", "groups", "n_points", "model", "strategy", "solver", "sweep", "validation",
             "output_dir", "seed", "workers"}


class ScenarioError(ValueError):
    """The scenario file is malformed or inconsistent."""


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]
    normalized: bool = False


@dataclass(frozen=True)
class ValidationSpec:
    n_nodes: int = 10_000
    n_runs: int = 20
    dt: float | None = None
    controls: str = "none"


@dataclass(frozen=True)
class Scenario:
    network_spec: Any = "PL3"
    groups: int = 3
    n_points: int = 51
    params: ModelParams = field(default_factory=ModelParams)
    strategy: str = "optimal"
    solver: SolverOptions = field(default_factory=SolverOptions)
    sweep: SweepSpec | None = None
    validation: ValidationSpec = field(default_factory=ValidationSpec)
    output_dir: Path = Path("results")
    seed: int = 0
    workers: int = 1

    def distribution(self) -> DegreeDistribution:
        return distribution_from_spec(self.network_spec)

    def network(self) -> Network:
        return Network.build(self.distribution(), self.groups)

    def grid(self) -> np.ndarray:
        return time_grid(self.params.T, self.n_points)

    def output_path(self) -> Path:
        root = os.environ.get(OUTPUT_ROOT_ENV)
        return Path(root) / self.output_dir if root else self.output_dir


def _params_from(model: Mapping) -> ModelParams:
    unknown = set(model) - _MODEL_KEYS
    if unknown:
        raise ScenarioError(f"unknown model keys: {sorted(unknown)}")
    kw = dict(model)
    profile = SpreadingProfile(
        kind=kw.pop("profile", "constant"),
        beta=float(kw.pop("beta", 0.12)),
        beta_max=float(kw.pop("beta_max", 0.24)),
    )
    return ModelParams(profile=profile, **kw)


def parse_scenario(data: Mapping | None, base_dir: Path | None = None) -> Scenario:
    """Validate a scenario mapping. Raises :class:`ScenarioError` on any problem."""
    data = dict(data or {})
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        params = _params_from(data.get("model") or {})
        solver = SolverOptions(**(data.get("solver") or {}))
        sweep = None
        if data.get("sweep"):
            s = dict(data["sweep"])
            if s.get("parameter") not in SWEEP_PARAMETERS:
                raise ScenarioError(f"sweep parameter must be one of {SWEEP_PARAMETERS}, got {s.get('parameter')!r}")
            values = tuple(float(x) for x in s.get("values") or ())
            if not values:
                raise ScenarioError("sweep needs at least one value")
            sweep = SweepSpec(s["parameter"], values, bool(s.get("normalized", False)))
        validation = ValidationSpec(**(data.get("validation") or {}))
        if validation.controls not in ("none", "static", "bang_bang"):
            raise ScenarioError(f"validation controls must be none, static or bang_bang, got {validation.controls!r}")
        strategy = data.get("strategy", "optimal")
        if strategy not in STRATEGIES:
            raise ScenarioError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
        out = Path(data.get("output_dir", "results"))
        if base_dir is not None and not out.is_absolute():
            out = base_dir / out
        scenario = Scenario(
            network_spec=data.get("network", "PL3"),
            groups=int(data.get("groups", 3)),
            n_points=int(data.get("n_points", 51)),
            params=params,
            strategy=strategy,
            solver=solver,
            sweep=sweep,
            validation=validation,
            output_dir=out,
            seed=int(data.get("seed", 0)),
            workers=int(data.get("workers", 1)),
        )
        # builds and checks the network, partition and cost-weight lengths
        net = scenario.network()
        params.cost_weights(net.M)
        scenario.grid()
    except ScenarioError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ScenarioError(str(exc)) from exc
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    if data is not None and not isinstance(data, Mapping):
        raise ScenarioError("scenario file must contain a mapping")
    return parse_scenario(data, base_dir=None)


# -- drivers --------------------------------------------------------------


def _baseline(strategy: str, params: ModelParams, net: Network, grid):
    if strategy == "none":
        return no_control(net.M, grid), {}
    if strategy == "static":
        schedule, kappa = static_strategy(params, net, grid)
        return schedule, {"kappa": kappa}
    schedule, tau = bang_bang_strategy(params, net, grid)
    return schedule, {"tau": tau}


def _write_solution(out: Path, params, net, schedule, extra: dict) -> dict:
    traj = integrate_heun(params, schedule, net)
    J = objective(traj, net.dist)
    spend = budget_spend(traj, schedule, params, net)
    alloc = resource_allocation_rates(schedule, traj, params, net)
    export_schedule_csv(out / "schedule.csv", schedule)
    export_trajectory_csv(out / "trajectory.csv", traj, net)
    export_allocation_csv(out / "allocation.csv", alloc)
    summary = {
        "J": J,
        "spend": spend,
        "budget": params.B,
        "spend_residual": (spend - params.B) / max(params.B, 1e-12),
        "group_shares": alloc.group_shares,
        "direct_totals": alloc.direct_total,
        "wom_totals": alloc.wom_total,
        "wom_share": alloc.wom_share,
        "boundaries": list(net.partition.boundaries),
        **extra,
    }
    atomic_json(out / "summary.json", summary)
    return summary


def run_scenario(scenario: Scenario) -> dict:
    """Solve (or evaluate a baseline for) one scenario and write its artifacts.

    Returns the summary dictionary. Raises :class:`InfeasibleBudget` for an
    unreachable budget; a non-converged solve still writes its diagnostics and
    reports ``converged: false``.
    """
    net = scenario.network()
    params = scenario.params
    grid = scenario.grid()
    out = scenario.output_path()
    if scenario.strategy == "none":
        traj = integrate_heun(params, no_control(net.M, grid), net)
        export_trajectory_csv(out / "trajectory.csv", traj, net)
        return {"J": objective(traj, net.dist), "strategy": "none"}
    if scenario.strategy in ("static", "bang_bang"):
        schedule, extra = _baseline(scenario.strategy, params, net, grid)
        return _write_solution(out, params, net, schedule, {"strategy": scenario.strategy, **extra})
    t0 = time.perf_counter()
    sol = solve(transcribe(params, net, grid), scenario.solver)
    extra = {
        "strategy": "optimal",
        "multiplier": sol.multiplier,
        "iterations": sol.iterations,
        "kkt_residual": sol.kkt_residual,
        "converged": sol.converged,
        "start": sol.start,
        "elapsed_s": time.perf_counter() - t0,
    }
    return _write_solution(out, params, net, sol.schedule, extra)


def run_baseline(scenario: Scenario) -> list[dict]:
    """Evaluate the none/static/bang-bang baselines and write ``baselines.csv``."""
    net = scenario.network()
    params = scenario.params
    grid = scenario.grid()
    out = scenario.output_path()
    rows = []
    for strategy in ("none", "static", "bang_bang"):
        schedule, extra = _baseline(strategy, params, net, grid)
        traj = integrate_heun(params, schedule, net)
        rows.append({
            "strategy": strategy,
            "J": objective(traj, net.dist),
            "spend": budget_spend(traj, schedule, params, net),
            "kappa": extra.get("kappa", float("nan")),
            "tau": extra.get("tau", float("nan")),
        })
        export_schedule_csv(out / f"schedule_{strategy}.csv", schedule)
    header = ["strategy", "J", "spend", "kappa", "tau"]
    atomic_csv(out / "baselines.csv", header, ([r[h] for h in header] for r in rows))
    return rows


def swept_params(params: ModelParams, parameter: str, value: float, M: int, normalized: bool = False) -> ModelParams:
    """Copy of ``params`` with one swept quantity replaced."""
    if parameter == "B":
        B = value * params.u_max**2 * params.T if normalized else value
        return params.with_(B=B)
    if parameter == "d":
        return params.with_(d=value)
    if parameter == "beta":
        return params.with_(profile=SpreadingProfile("constant", beta=value, beta_max=params.profile.beta_max))
    if parameter == "i0":
        return params.with_(i0=value)
    if parameter == "b_hat_2":
        if M < 2:
            raise ValueError("b_hat_2 sweep needs at least two groups")
        w = np.ones(M)
        w[1] = value
        return params.with_(b_hat=tuple(w), c_hat=tuple(w))
    raise ValueError(f"unknown sweep parameter {parameter!r}")


@dataclass
class SweepRow:
    value: float
    J_opt: float = float("nan")
    J_static: float = float("nan")
    J_bang: float = float("nan")
    J_none: float = float("nan")
    improvement_vs_static: float = float("nan")
    improvement_vs_bang: float = float("nan")
    residual_opt: float = float("nan")
    residual_static: float = float("nan")
    residual_bang: float = float("nan")
    converged: bool = False
    kkt_residual: float = float("nan")
    iterations: int = 0
    error: str = ""


@dataclass
class SweepResult:
    parameter: str
    rows: list[SweepRow]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def sweep_point(params: ModelParams, net: Network, grid, opts: SolverOptions) -> SweepRow:
    row = SweepRow(value=float("nan"))
    B = max(params.B, 1e-12)
    js = {}
    for strategy in ("none", "static", "bang_bang"):
        schedule, _ = _baseline(strategy, params, net, grid)
        traj = integrate_heun(params, schedule, net)
        js[strategy] = objective(traj, net.dist)
        if strategy != "none":
            res = (budget_spend(traj, schedule, params, net) - params.B) / B
            setattr(row, "residual_static" if strategy == "static" else "residual_bang", res)
    sol = solve(transcribe(params, net, grid), opts)
    row.J_none, row.J_static, row.J_bang, row.J_opt = js["none"], js["static"], js["bang_bang"], sol.J
    row.improvement_vs_static = 100.0 * (sol.J - row.J_static) / row.J_static
    row.improvement_vs_bang = 100.0 * (sol.J - row.J_bang) / row.J_bang
    row.residual_opt = (sol.spend - params.B) / B
    row.converged = sol.converged
    row.kkt_residual = sol.kkt_residual
    row.iterations = sol.iterations
    return row


def run_sweep(scenario: Scenario) -> SweepResult:
    """One row per sweep value; a failing point records its error and the sweep continues."""
    if scenario.sweep is None:
        raise ScenarioError("scenario has no sweep section")
    spec = scenario.sweep
    net = scenario.network()
    grid = scenario.grid()

    def point(value):
        try:
            p = swept_params(scenario.params, spec.parameter, value, net.M, spec.normalized)
            g = time_grid(p.T, scenario.n_points)
            row = sweep_point(p, net, g, scenario.solver)
        except (InfeasibleBudget, ValueError, FloatingPointError) as exc:
            row = SweepRow(value=value, error=f"{type(exc).__name__}: {exc}")
        row.value = value
        return row

    if scenario.workers > 1:
        with ThreadPoolExecutor(scenario.workers) as pool:
            rows = list(pool.map(point, spec.values))
    else:
        rows = [point(v) for v in spec.values]
    result = SweepResult(spec.parameter, rows)
    header = ["parameter"] + [f.name for f in fields(SweepRow)]
    atomic_csv(
        scenario.output_path() / "sweep.csv",
        header,
        ([spec.parameter] + [asdict(r)[h] for h in header[1:]] for r in rows),
    )
    return result


def run_validation(scenario: Scenario) -> dict:
    """Monte Carlo ensemble against the mean-field trajectory; writes ``validation.csv``.

    The simulation step defaults to a tenth of the grid spacing.
    """
    spec = scenario.validation
    net = scenario.network()
    params = scenario.params
    grid = scenario.grid()
    if spec.controls == "none":
        schedule = no_control(net.M, grid)
    else:
        schedule, _ = _baseline(spec.controls, params, net, grid)
    traj = integrate_heun(params, schedule, net)
    dt = spec.dt if spec.dt is not None else (grid[1] - grid[0]) / 10
    ens = ensemble(net.dist, spec.n_nodes, params, schedule, spec.n_runs, scenario.seed, dt=dt,
                   partition=net.partition, workers=scenario.workers)
    mf = np.interp(ens.t, grid, traj.total)
    sup = float(np.max(np.abs(ens.mean - mf)))
    out = scenario.output_path()
    export_ensemble_csv(out / "validation.csv", ens, (grid, traj.total))
    report = {"sup_norm_deviation": sup, "final_mean_i": float(ens.mean[-1]), "final_std_i": float(ens.std[-1]),
              "final_meanfield_i": float(traj.total[-1]), "n_runs": spec.n_runs, "n_nodes": spec.n_nodes, "dt": dt}
    atomic_json(out / "validation.json", report)
    return report
