"""Optimal switching when MTD changes the attack-defense structure.

The switching law is a Markov process whose sojourn means ``x_r = 1/-q_rr``
are bounded by the generator conditions: the violating configuration may be
held at most ``xbar_1`` on average, each induced configuration ``k`` at least
``xbar_k(m')`` where ``m'`` is the number of induced configurations in use.
Occupancies follow as ``pi_r = x_r / sum(x)``.

As in :mod:`mtdpower.opt_params`, positions refer to the sorted margins.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InfeasibleError, InvalidParameter
from .markov import GeneratorConstants, GeneratorMatrix, uniform_generator, validate_constants
from .model import Configuration, CostFunction, ScheduleMix

BOUND_TOL = 1e-12
MAX_ORACLE_POINTS = 50_000_000


@dataclass(frozen=True)
class StructOptProblem:
    margins: tuple[float, ...]
    constants: GeneratorConstants = GeneratorConstants()
    pi1: float | None = None
    cost: CostFunction | None = None
    ids: tuple[int, ...] | None = None

    def __post_init__(self):
        mu = tuple(float(m) for m in self.margins)
        n = len(mu)
        if n < 2:
            raise InvalidParameter("need the violating configuration and at least one induced one")
        ids = tuple(range(1, n + 1)) if self.ids is None else tuple(int(i) for i in self.ids)
        if len(ids) != n or len(set(ids)) != n:
            raise InvalidParameter("ids must be unique and match the margins")
        violating = [k for k, m in enumerate(mu) if m <= 0]
        if len(violating) != 1:
            raise InvalidParameter(f"exactly one violating configuration is required, found {len(violating)}")
        if self.constants.j != 1:
            raise InvalidParameter("the optimizers handle a single violating configuration (j=1)")
        # Subset sizes 1..n-1 give 2..n switching states.
        for states in range(2, n + 1):
            validate_constants(self.constants, states)
        v = violating[0]
        tail = sorted((k for k in range(n) if k != v), key=lambda k: (mu[k], ids[k]))
        object.__setattr__(self, "margins", mu)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "_order", (v, *tail))
        if min(mu[k] for k in tail) <= self.constants.delta:
            raise InvalidParameter("every induced margin must exceed delta")
        if self.pi1 is not None:
            if not (0.0 <= self.pi1 < 1.0):
                raise InvalidParameter("pi1 must lie in [0, 1)")
            bound = self.pi1_bound()
            if self.pi1 > bound + BOUND_TOL:
                raise InfeasibleError(
                    f"infeasible occupancy: pi1={self.pi1} exceeds the maximum {bound:.12g}", bound=bound)

    @classmethod
    def from_configs(cls, configs: Sequence[Configuration], **kw) -> "StructOptProblem":
        pairs = {(c.beta, c.gamma) for c in configs}
        if len(pairs) != 1:
            raise InvalidParameter("structure switching requires shared (beta, gamma)")
        return cls(tuple(c.margin for c in configs), ids=tuple(c.id for c in configs), **kw)

    @property
    def mu(self) -> np.ndarray:
        return np.array([self.margins[k] for k in self._order])

    @property
    def n(self) -> int:
        return len(self.margins)

    @property
    def delta(self) -> float:
        return self.constants.delta

    def id_at(self, position: int) -> int:
        return self.ids[self._order[position - 1]]

    def xbar1(self) -> float:
        k = self.constants
        return (k.b - 1.0) / (2.0 * k.b * (-self.mu[0] + k.delta))

    def xbar(self, position: int, size: int) -> float:
        k = self.constants
        mu = self.mu[position - 1]
        if mu <= k.delta:
            raise InvalidParameter(f"margin at position {position} must exceed delta")
        return ((k.c + size - 1) / size - k.a) / (2.0 * k.a * (mu - k.delta))

    def pi1_bound(self) -> float:
        x1 = self.xbar1()
        return x1 / (x1 + self.xbar(self.n, 1))

    def to_input_order(self, sorted_vals) -> tuple[float, ...]:
        out = [0.0] * self.n
        for pos, k in enumerate(self._order):
            out[k] = float(sorted_vals[pos])
        return tuple(out)

    def psi(self, fractions_input_order) -> float:
        f = self._require_cost()
        return float(sum(p * f(m) for p, m in zip(fractions_input_order, self.margins)))

    def _require_cost(self) -> CostFunction:
        if self.cost is None:
            raise InvalidParameter("a cost function is required")
        return self.cost

    def _require_pi1(self) -> float:
        if self.pi1 is None:
            raise InvalidParameter("a required occupancy pi1 is needed")
        return self.pi1


@dataclass(frozen=True)
class StructOptResult:
    mix: ScheduleMix
    ids: tuple[int, ...]
    sojourn_means: tuple[float, ...]
    subset: tuple[int, ...]
    cost: float | None = None
    slack: float | None = None
    violating_id: int | None = None

    @property
    def active_ids(self) -> tuple[int, ...]:
        return tuple(i for i, p in zip(self.ids, self.mix.fractions) if p > 0 and i != self.violating_id)

    def fraction(self, config_id: int) -> float:
        return self.mix.fractions[self.ids.index(config_id)]

    def generator(self) -> tuple[tuple[int, ...], GeneratorMatrix]:
        """Switching generator over the deployed states with ``-q_rr = 1/x_r``."""
        keep = [k for k, x in enumerate(self.sojourn_means) if x > 0]
        return tuple(self.ids[k] for k in keep), uniform_generator([1.0 / self.sojourn_means[k] for k in keep])

    def to_dict(self, problem: StructOptProblem | None = None) -> dict:
        d = {
            "ids": list(self.ids),
            "mix": list(self.mix.fractions),
            "delta": self.mix.delta,
            "violating_id": self.violating_id,
            "active_ids": list(self.active_ids),
            "subset": list(self.subset),
            "sojourn_means": list(self.sojourn_means),
            "slack": self.slack,
            "cost": self.cost,
        }
        if problem is not None:
            d["margins"] = list(problem.margins)
        return d


def _result(p: StructOptProblem, x_sorted, subset_positions, with_cost: bool, slack=None) -> StructOptResult:
    x = np.asarray(x_sorted, dtype=float)
    x_in = p.to_input_order(x)
    mix = ScheduleMix(tuple(v / x.sum() for v in x_in), p.delta)
    cost = p.psi(mix.fractions) if with_cost else None
    subset = tuple(p.id_at(k) for k in subset_positions)
    slack = None if slack is None else float(slack)
    return StructOptResult(mix, p.ids, x_in, subset, cost, slack, violating_id=p.id_at(1))


def xbar_bounds(p: StructOptProblem, subset: Sequence[int]) -> tuple[float, list[float]]:
    """Sojourn-mean bounds for deploying the induced positions in ``subset``."""
    subset = list(subset)
    if not subset or any(not (2 <= k <= p.n) for k in subset) or len(set(subset)) != len(subset):
        raise InvalidParameter(f"subset must be non-empty distinct positions in 2..{p.n}")
    return p.xbar1(), [p.xbar(k, len(subset)) for k in subset]


def max_pi1_struct(p: StructOptProblem) -> StructOptResult:
    """Largest time share of the violating structure; uses the strongest induced one only."""
    x = np.zeros(p.n)
    x[0] = p.xbar1()
    x[-1] = p.xbar(p.n, 1)
    with_cost = p.cost is not None
    return _result(p, x, (p.n,), with_cost)


def subset_bound(p: StructOptProblem, subset: Sequence[int]) -> float:
    x1, xs = xbar_bounds(p, subset)
    return x1 / (x1 + sum(xs))


def feasible_subsets(p: StructOptProblem) -> list[tuple[int, ...]]:
    """Every subset of induced positions able to host the required ``pi1``.

    Ordered by size, then lexicographically.
    """
    pi1 = p._require_pi1()
    out = []
    for size in range(1, p.n):
        for subset in itertools.combinations(range(2, p.n + 1), size):
            if pi1 <= subset_bound(p, subset) + BOUND_TOL:
                out.append(subset)
    if not out:
        raise InfeasibleError(f"no induced subset can host pi1={pi1}", bound=p.pi1_bound())
    return out


def slack_budget(p: StructOptProblem, subset: Sequence[int]) -> float:
    x1, xs = xbar_bounds(p, subset)
    return (1.0 - p.pi1) / p.pi1 * x1 - sum(xs)


def subset_cost_G(p: StructOptProblem, subset: Sequence[int]) -> float:
    """Average induced cost with the slack given to the cheapest member."""
    g = p._require_cost()
    subset = sorted(subset, key=lambda k: p.mu[k - 1])
    _, xs = xbar_bounds(p, subset)
    delta = slack_budget(p, subset)
    gs = [g(p.mu[k - 1]) for k in subset]
    return (sum(x * gk for x, gk in zip(xs, gs)) + gs[0] * delta) / (sum(xs) + delta)


def min_cost_struct(p: StructOptProblem) -> StructOptResult:
    """Cheapest switching law keeping the violating structure for ``pi1`` of the time."""
    p._require_cost()
    pi1 = p._require_pi1()
    if pi1 <= 0:
        raise InvalidParameter("min-cost deployment needs pi1 > 0")
    best = None
    for subset in feasible_subsets(p):
        val = subset_cost_G(p, subset)
        if best is None or val < best[0] - 1e-12 * max(1.0, abs(best[0])):
            best = (val, subset)
    subset = sorted(best[1], key=lambda k: p.mu[k - 1])
    x1, xs = xbar_bounds(p, subset)
    delta = slack_budget(p, subset)
    x = np.zeros(p.n)
    x[0] = x1
    for k, xk in zip(subset, xs):
        x[k - 1] = xk
    x[subset[0] - 1] += max(delta, 0.0)
    return _result(p, x, tuple(best[1]), True, slack=delta)


def oracle_min_cost_struct(p: StructOptProblem, grid_step: float = 1e-2) -> StructOptResult:
    """Grid search over sojourn means for every feasible subset.

    For subset ``S`` it scans ``x_k = xbar_k + i*grid_step`` with
    ``sum(x) <= (1 - pi1)/pi1 * xbar_1`` and evaluates the mix cost
    directly; ``x_1`` is then fixed by the required occupancy.
    """
    g = p._require_cost()
    pi1 = p._require_pi1()
    if p.n > 5:
        raise InvalidParameter("structure oracle supports at most 5 configurations")
    if not grid_step > 0:
        raise InvalidParameter("grid_step must be positive")
    subsets = feasible_subsets(p)
    budget = (1.0 - pi1) / pi1 * p.xbar1()
    g1 = g(p.mu[0])
    best = (math.inf, None, None)
    for subset in subsets:
        _, xs = xbar_bounds(p, subset)
        room = budget - sum(xs)
        steps = int(math.floor(room / grid_step + 1e-9))
        if math.comb(steps + len(subset), len(subset)) > MAX_ORACLE_POINTS:
            raise InvalidParameter("structure oracle grid too large; increase grid_step")
        axes = np.meshgrid(*[np.arange(steps + 1)] * len(subset), indexing="ij")
        idx = np.stack([a.ravel() for a in axes], axis=1)
        idx = idx[idx.sum(axis=1) <= steps]
        x = np.asarray(xs) + grid_step * idx
        gs = np.array([g(p.mu[k - 1]) for k in subset])
        cost = pi1 * g1 + (1.0 - pi1) * (x @ gs) / x.sum(axis=1)
        j = int(np.argmin(cost))
        if cost[j] < best[0]:
            best = (float(cost[j]), subset, x[j])
    _, subset, xk = best
    full = np.zeros(p.n)
    for k, v in zip(subset, xk):
        full[k - 1] = v
    full[0] = pi1 / (1.0 - pi1) * xk.sum()
    return _result(p, full, subset, True, slack=budget - xk.sum())
