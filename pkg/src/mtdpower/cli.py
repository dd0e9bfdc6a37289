"""Command-line front end: analyze, optimize, simulate, oracle, sweep."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import opt_params as op
from . import opt_structs as os_
from .epidemics import InfectionState, clean_equilibrium_check, simulate_switched
from .errors import ConvergenceError, InfeasibleError, InvalidParameter, MTDError
from .markov import GeneratorConstants, Scheduler
from .model import Verdict, check_static_threshold
from .scenario import Scenario, dumps, load_scenario
from .sweep import (cost_surface, default_axis, pi1_params_grid, pi1_structs_grid,
                    write_grid_csv, write_surface_csv)

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4
DEFAULT_TOLERANCE = 0.05


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(dumps(obj))


def _scenario(args) -> Scenario:
    if not args.scenario:
        raise InvalidParameter("--scenario is required for this command")
    return load_scenario(args.scenario)


def _param_problem(sc: Scenario, configs, need_cost: bool):
    cost = sc.cost_function()
    if need_cost and (cost is None or sc.pi1 is None):
        raise InvalidParameter("cost and pi1 are both required")
    if cost is not None and sc.pi1 is None:
        raise InvalidParameter("pi1: required when a cost is given")
    if sc.mode == "params":
        return op.ParamOptProblem.from_configs(configs, delta=sc.delta, pi1=sc.pi1, cost=cost, shape=sc.shape)
    return os_.StructOptProblem.from_configs(configs, constants=sc.generator_constants(), pi1=sc.pi1, cost=cost)


# -- analyze ------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    sc = _scenario(args)
    rows = []
    for c in sc.build_configs():
        rows.append({"id": c.id, "beta": c.beta, "gamma": c.gamma, "lambda1": c.lambda1,
                     "margin": c.margin, "verdict": check_static_threshold(c).value})
    print(f"{'id':>4} {'beta':>10} {'gamma':>10} {'lambda1':>12} {'margin':>12}  verdict")
    for r in rows:
        print(f"{r['id']:>4} {r['beta']:>10.6g} {r['gamma']:>10.6g} {r['lambda1']:>12.6f} "
              f"{r['margin']:>12.6f}  {r['verdict']}")
    if args.out:
        _write_json(_out_dir(args) / "analysis.json", {"configurations": rows})
    if not any(r["verdict"] == Verdict.CONVERGES.value for r in rows):
        print("error: no configuration satisfies the threshold, so no switching mix can converge",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


# -- optimize -----------------------------------------------------------------------

def optimize(sc: Scenario, seed: int | None = None) -> tuple[dict, Scheduler]:
    """Run the optimizer selected by the scenario; returns (result record, scheduler)."""
    configs = sc.build_configs()
    p = _param_problem(sc, configs, need_cost=False)
    sim = sc.simulation
    seed = sim.seed if seed is None else seed
    with_cost = p.cost is not None
    if sc.mode == "params":
        if with_cost:
            res = op.min_cost_shaped(p) if sc.shape != "none" else op.min_cost(p)
        else:
            res = op.max_pi1(p)
        sched = Scheduler.fixed_mix(res.ids, res.mix.fractions, resolution=sim.resolution, seed=seed)
    else:
        res = os_.min_cost_struct(p) if with_cost else os_.max_pi1_struct(p)
        ids, q = res.generator()
        sched = Scheduler.markov(q, ids, seed=seed)
    record = {"mode": sc.mode, "objective": "min_cost" if with_cost else "max_pi1"}
    record.update(res.to_dict(p))
    return record, sched


def cmd_optimize(args) -> int:
    sc = _scenario(args)
    record, sched = optimize(sc, args.seed)
    out = _out_dir(args)
    _write_json(out / "result.json", record)
    _write_json(out / "schedule.json", sched.to_dict())
    sys.stdout.write(dumps(record))
    return EXIT_OK


# -- simulate -----------------------------------------------------------------------

def simulate(sc: Scenario, sched: Scheduler, seed: int | None = None, keep_states: bool = False):
    """Run the switched dynamics for the scenario; returns (trajectory, summary)."""
    sim = sc.simulation
    if sim.horizon == 0:
        raise InvalidParameter("simulation.horizon is zero: the trajectory is empty and "
                               "the convergence verdict is indeterminate")
    configs = sc.build_configs()
    bare = [c.id for c in configs if c.structure is None]
    if bare:
        raise InvalidParameter(
            f"configurations {bare} give only lambda1; simulation needs a graph. Replace "
            "'structure': {'lambda1': ...} with a generator recipe such as "
            "{'generator': 'complete', 'params': {'n': 20}} or an edge_list file")
    n = configs[0].structure.node_count
    seed = sim.seed if seed is None else seed
    traj = simulate_switched(configs, sched, InfectionState.uniform(n, sim.initial_infection),
                             dt=sim.dt, horizon=sim.horizon, seed=seed,
                             record_every=sim.record_every, keep_states=keep_states)
    window = sim.window if sim.window is not None else min(50.0, sim.horizon)
    target = sched.target()
    measured = {cid: traj.occupancy.get(cid, 0.0) for cid in sorted(set(target) | set(traj.occupancy))}
    err = max(abs(measured[c] - target.get(c, 0.0)) for c in measured)
    summary = {
        "horizon": sim.horizon,
        "seed": seed,
        "final_sup_norm": traj.final.sup_norm(),
        "eps": sim.eps,
        "window": window,
        "converged": clean_equilibrium_check(traj, sim.eps, window),
        "occupancy": {str(c): v for c, v in measured.items()},
        "target": {str(c): target.get(c, 0.0) for c in measured},
        "max_occupancy_error": err,
        "switches": max(len(traj.segments) - 1, 0),
    }
    return traj, summary


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    if not args.schedule:
        raise InvalidParameter("--schedule is required (a schedule.json written by 'optimize')")
    try:
        sched = Scheduler.from_dict(json.loads(Path(args.schedule).read_text()))
    except FileNotFoundError:
        raise InvalidParameter(f"schedule file not found: {args.schedule}") from None
    except (json.JSONDecodeError, KeyError) as exc:
        raise InvalidParameter(f"{args.schedule}: malformed schedule ({exc})") from None
    traj, summary = simulate(sc, sched, args.seed, keep_states=args.nodes)
    out = _out_dir(args)
    traj.to_csv(out / "trajectory.csv", include_nodes=args.nodes)
    _write_json(out / "summary.json", summary)
    sys.stdout.write(dumps(summary))
    return EXIT_OK


# -- oracle -------------------------------------------------------------------------

def compare_with_oracle(sc: Scenario, grid_step: float | None = None) -> dict:
    configs = sc.build_configs()
    p = _param_problem(sc, configs, need_cost=True)
    if sc.mode == "params":
        closed = op.min_cost_shaped(p) if sc.shape != "none" else op.min_cost(p)
        grid = op.oracle_min_cost(p, grid_step or 1e-3)
    else:
        closed = os_.min_cost_struct(p)
        grid = os_.oracle_min_cost_struct(p, grid_step or 1e-2)
    return {
        "mode": sc.mode,
        "ids": list(p.ids),
        "closed_form": {"cost": closed.cost, "mix": list(closed.mix.fractions), "active_ids": list(closed.active_ids)},
        "oracle": {"cost": grid.cost, "mix": list(grid.mix.fractions), "active_ids": list(grid.active_ids)},
        "difference": abs(closed.cost - grid.cost),
    }


def cmd_oracle(args) -> int:
    sc = _scenario(args)
    report = compare_with_oracle(sc, args.grid_step)
    report["tolerance"] = args.tolerance
    report["agree"] = report["difference"] <= args.tolerance
    if args.out:
        _write_json(_out_dir(args) / "oracle.json", report)
    sys.stdout.write(dumps(report))
    if not report["agree"]:
        print(f"error: closed form and oracle differ by {report['difference']:.6g} "
              f"(tolerance {args.tolerance})", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


# -- sweep --------------------------------------------------------------------------

def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario) if args.scenario else None
    out = _out_dir(args)
    axis = default_axis(args.points)
    if args.grid == "pi1-params":
        delta = sc.delta if sc else GeneratorConstants().delta
        grid = pi1_params_grid(axis, axis, delta)
        write_grid_csv(out / "pi1_params.csv", axis, axis, grid, "pi1_star")
    elif args.grid == "pi1-structs":
        constants = sc.generator_constants() if sc else GeneratorConstants()
        grid = pi1_structs_grid(axis, axis, constants)
        write_grid_csv(out / "pi1_structs.csv", axis, axis, grid, "pi1_star")
    else:
        if sc is None or sc.mode != "params":
            raise InvalidParameter("cost-surface needs a params-mode --scenario with cost and pi1")
        p = _param_problem(sc, sc.build_configs(), need_cost=True)
        write_surface_csv(out / "cost_surface.csv", cost_surface(p, args.grid_step or 0.01))
    return EXIT_OK


# -- entry point --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mtdpower", description="MTD switching schedules from epidemic thresholds.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, out_default=None):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--scenario", help="scenario JSON file")
        s.add_argument("--out", default=out_default, help="output directory")
        s.add_argument("--seed", type=int, default=None, help="override simulation.seed")
        s.add_argument("--grid-step", type=float, default=None, help="oracle / surface grid step")
        s.set_defaults(func=func)
        return s

    add("analyze", cmd_analyze, "per-configuration lambda1, margin and threshold verdict")
    add("optimize", cmd_optimize, "optimal mix and a schedule file", out_default=".")
    s = add("simulate", cmd_simulate, "run the switched dynamics under a schedule", out_default=".")
    s.add_argument("--schedule", help="schedule JSON written by 'optimize'")
    s.add_argument("--nodes", action="store_true", help="include per-node columns in the CSV")
    s = add("oracle", cmd_oracle, "compare the closed-form optimizer with the grid search")
    s.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    s = add("sweep", cmd_sweep, "write plot grids as CSV", out_default=".")
    s.add_argument("--grid", choices=("pi1-params", "pi1-structs", "cost-surface"), required=True)
    s.add_argument("--points", type=int, default=10, help="grid points per axis over [0.1, 1]")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if exc.bound is not None:
            print(f"max_pi1: {exc.bound:.17g}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidParameter, MTDError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
