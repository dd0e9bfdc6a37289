"""Acceptance checks, one test per criterion; each prints a single PASS/FAIL line."""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from mtdpower.cli import optimize, simulate
from mtdpower.epidemics import InfectionState, clean_equilibrium_check, integrate_static
from mtdpower.markov import GeneratorConstants, Scheduler, build_generator, stationary_distribution
from mtdpower.model import Configuration, CostFunction
from mtdpower.opt_params import ParamOptProblem, max_pi1, min_cost, min_cost_shaped, oracle_min_cost
from mtdpower.opt_structs import (StructOptProblem, feasible_subsets, max_pi1_struct, min_cost_struct,
                                  oracle_min_cost_struct)
from mtdpower.scenario import parse_scenario
from mtdpower.spectral import complete_graph, path_graph
from mtdpower.sweep import default_axis, pi1_params_grid

from conftest import four_configs

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
DELTA = 1e-5
K = GeneratorConstants(0.8, 1.5, 2.4, DELTA, 1)
SQRT = CostFunction.sqrt_shifted(10.0, 0.5)
SQUARE = CostFunction.quadratic_shifted(100.0, 0.1)


@pytest.fixture
def report(request, capsys):
    def emit(ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {request.node.name}: {detail}")
        assert ok, detail
    return emit


def best_time(fn, repeats=20):
    fn()
    best = np.inf
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def reference_problem(**kw):
    return ParamOptProblem.from_configs(four_configs(), delta=DELTA, **kw)


def test_criterion_01_max_occupancy_reference(report):
    pi1 = max_pi1(reference_problem()).mix.fractions[0]
    elapsed = best_time(lambda: max_pi1(reference_problem()))
    err = abs(pi1 - 2 / 3)
    report(err <= 1e-4 and elapsed < 1e-3,
           f"pi1*={pi1:.9f}, |pi1*-2/3|={err:.3g} (tol 1e-4), runtime {elapsed * 1e3:.3f} ms")


def test_criterion_02_concave_reference(report):
    res = min_cost(reference_problem(pi1=0.6, cost=SQRT))
    elapsed = best_time(lambda: min_cost(reference_problem(pi1=0.6, cost=SQRT)))
    induced = res.mix.fractions[1:]
    ok = (abs(res.cost - 6.5696) <= 0.01 and set(res.active_ids) == {2, 4}
          and np.allclose(induced, (0.2, 0.0, 0.2), atol=0.005) and elapsed < 1e-3)
    report(ok, f"cost={res.cost:.6f}, active={res.active_ids}, mix={np.round(induced, 6).tolist()}, "
               f"runtime {elapsed * 1e3:.3f} ms")


def test_criterion_03_convex_reference(report):
    res = min_cost(reference_problem(pi1=0.6, cost=SQUARE))
    induced = res.mix.fractions[1:]
    ok = (set(res.active_ids) == {3, 4} and np.allclose(induced, (0.0, 0.3, 0.1), atol=0.005)
          and 14.5 <= res.cost <= 14.9)
    report(ok, f"cost={res.cost:.6f}, active={res.active_ids}, mix={np.round(induced, 6).tolist()}")


def _random_margins(rng, n):
    mu1 = -rng.uniform(0.05, 1.0)
    rest = np.sort(rng.uniform(0.02, 1.0, n - 1))
    return (mu1, *rest)


def _random_pi1(rng, mus, lo=0.05, hi=0.98):
    bound = (mus[-1] - DELTA) / (mus[-1] - mus[0])
    return rng.uniform(lo, hi) * bound


def test_criterion_04_shaped_path_equivalence(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    cases = [(reference_problem(pi1=0.6, cost=SQRT, shape="concave"), "concave"),
             (reference_problem(pi1=0.6, cost=SQUARE, shape="convex"), "convex")]
    for k in range(100):
        mus = _random_margins(rng, int(rng.integers(3, 7)))
        if k % 2 == 0:
            cost, shape = CostFunction.quadratic_shifted(rng.uniform(1, 200), rng.uniform(0.0, 0.5)), "convex"
        else:
            cost, shape = CostFunction.sqrt_shifted(rng.uniform(1, 20), rng.uniform(1.0, 2.0)), "concave"
        cases.append((ParamOptProblem(mus, DELTA, _random_pi1(rng, mus), cost, shape), shape))
    for p, shape in cases:
        worst = max(worst, abs(min_cost_shaped(p, shape).cost - min_cost(p).cost))
    report(worst < 1e-10, f"{len(cases)} instances, max |shaped - general| = {worst:.3g}")


def test_criterion_05_parameter_oracle(report):
    rng = np.random.default_rng(7)
    step = 1e-3
    worst_excess, below = -np.inf, 0.0
    start = time.perf_counter()
    for k in range(100):
        n = (3, 4, 5)[k % 3]
        mus = _random_margins(rng, n)
        f = (SQUARE, CostFunction.sqrt_shifted(10.0, 1.0), CostFunction.affine(5.0, 2.0))[k % 3]
        p = ParamOptProblem(mus, DELTA, _random_pi1(rng, mus, 0.2, 0.98), f)
        closed = min_cost(p).cost
        grid = oracle_min_cost(p, step).cost
        vals = [f(m) for m in p.mu[1:]]
        allowance = step * (max(vals) - min(vals)) + 1e-9
        worst_excess = max(worst_excess, (grid - closed) - allowance)
        below = max(below, closed - grid)
    elapsed = time.perf_counter() - start
    ok = worst_excess <= 0 and below <= 1e-9 and elapsed < 60
    report(ok, f"100 instances, worst (oracle - closed - allowance) = {worst_excess:.3g}, "
               f"closed above oracle by at most {below:.3g}, {elapsed:.1f} s")


def test_criterion_06_two_state_structure_bound(report):
    rng = np.random.default_rng(11)
    worst_closed, worst_stat = 0.0, 0.0
    for _ in range(100):
        mu1 = -rng.uniform(1e-6, 1.0)
        mun = rng.uniform(2 * DELTA, 1.0)
        res = max_pi1_struct(StructOptProblem((mu1, mun), constants=K))
        closed = (mun - DELTA) / (mun - 6 * mu1 + 5 * DELTA)
        stat = stationary_distribution(build_generator([mu1, mun], K)).fractions[0]
        worst_closed = max(worst_closed, abs(res.mix.fractions[0] - closed))
        worst_stat = max(worst_stat, abs(stat - closed))
    report(worst_closed <= 1e-10 and worst_stat <= 1e-10,
           f"max |optimizer - closed form| = {worst_closed:.3g}, max |stationary - closed form| = {worst_stat:.3g}")


def test_criterion_07_structure_worked_instance(report):
    p = StructOptProblem((-0.3, 0.1, 0.3), constants=K, pi1=1 / 15, cost=SQUARE)
    subsets = {frozenset(s) for s in feasible_subsets(p)}
    res = min_cost_struct(p)
    grid = oracle_min_cost_struct(p, 1e-2)
    mix = res.mix.fractions[1:]
    ok = (subsets == {frozenset({3}), frozenset({2, 3})} and set(res.subset) == {2, 3}
          and abs(res.cost - 6.70) <= 0.01 and np.allclose(mix, (0.7083, 0.2250), atol=1e-3)
          and abs(grid.cost - res.cost) <= 0.05)
    report(ok, f"K={sorted(sorted(s) for s in subsets)}, S*={res.subset}, cost={res.cost:.5f}, "
               f"mix={np.round(mix, 5).tolist()}, oracle={grid.cost:.5f}")


# Homogeneous K20 equilibria from scipy.optimize.brentq on the scalar fixed-point map.
K20_EQUILIBRIA = {0.10: 0.45195271523414887, 0.15: 0.19647475317260601, 0.40: 0.0}


def test_criterion_08_dynamics(report):
    notes = []
    cfg = Configuration(1, 0.1, 0.3, path_graph(5))
    clean = integrate_static(cfg, InfectionState.uniform(5, 0.0), horizon=10.0).final.probabilities
    clean_ok = bool(np.all(clean == 0.0))
    notes.append(f"clean fixed point exact={clean_ok}")

    cfg = Configuration(1, 0.2, 0.3, path_graph(6))
    init = InfectionState(np.linspace(0.1, 0.9, 6))
    exact = integrate_static(cfg, init, dt=0.1 / 64, horizon=2.0).final.probabilities
    errs = [np.abs(integrate_static(cfg, init, dt=h, horizon=2.0).final.probabilities - exact).max()
            for h in (0.1, 0.05)]
    ratio = errs[0] / errs[1]
    notes.append(f"RK4 halving ratio={ratio:.2f}")

    k20 = complete_graph(20)
    worst = 0.0
    for beta, eq in K20_EQUILIBRIA.items():
        traj = integrate_static(Configuration(1, beta, 0.01, k20), InfectionState.uniform(20, 0.5),
                                dt=0.05, horizon=800.0, record_every=1000)
        worst = max(worst, np.abs(traj.final.probabilities - eq).max())
    notes.append(f"K20 max |i - fixed point|={worst:.2e}")
    report(clean_ok and ratio >= 12 and worst <= 1e-3, ", ".join(notes))


def test_criterion_09_end_to_end(report):
    start = time.perf_counter()
    sc = parse_scenario(json.loads((SCENARIOS / "k20_end_to_end.json").read_text()))
    assert sc.simulation.horizon == 1e3
    record, sched = optimize(sc)
    traj, summary = simulate(sc, sched)
    violating = Scheduler.fixed_mix(sched.ids, (1.0, 0.0), seed=sched.seed)
    control_traj, control = simulate(sc, violating)
    elapsed = time.perf_counter() - start
    ok = (summary["converged"] and summary["final_sup_norm"] < 1e-4 and summary["max_occupancy_error"] <= 0.02
          and not control["converged"] and elapsed < 30)
    report(ok, f"mix={np.round(record['mix'], 4).tolist()}, final sup-norm={summary['final_sup_norm']:.3g}, "
               f"occupancy error={summary['max_occupancy_error']:.4f}, control sup-norm="
               f"{control['final_sup_norm']:.4f} (converged={control['converged']}), {elapsed:.1f} s")


def test_criterion_10_sweep_monotone(report):
    axis = default_axis(19)
    grid = pi1_params_grid(axis, axis, DELTA)
    steps = np.diff(grid, axis=1)
    report(bool(np.all(steps >= 0)), f"{grid.shape[0]}x{grid.shape[1]} grid, min step along mu_N = {steps.min():.3g}")
