"""Optimal switching when MTD changes the parameters (beta, gamma) on a fixed graph.

Positions refer to the sorted order ``mu_1 < 0 < mu_2 <= ... <= mu_N``
(1-based); ``ids`` map positions back to the caller's configuration labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InfeasibleError, InvalidParameter
from .model import DEFAULT_DELTA, Configuration, CostFunction, ScheduleMix

BOUND_TOL = 1e-12
SHAPES = ("convex", "concave", "none")


@dataclass(frozen=True)
class ParamOptProblem:
    margins: tuple[float, ...]
    delta: float = DEFAULT_DELTA
    pi1: float | None = None
    cost: CostFunction | None = None
    shape: str = "none"
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
            raise InvalidParameter(
                f"exactly one violating configuration is required, found {len(violating)}; "
                "use the structures optimizer's generator for several violators")
        if self.delta < 0:
            raise InvalidParameter("delta must be non-negative")
        if self.shape not in SHAPES:
            raise InvalidParameter(f"shape must be one of {SHAPES}")
        v = violating[0]
        tail = sorted((k for k in range(n) if k != v), key=lambda k: (mu[k], ids[k]))
        order = (v, *tail)
        object.__setattr__(self, "margins", mu)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "_order", order)
        if self.delta > self.mu[-1]:
            raise InvalidParameter(f"delta={self.delta} exceeds the largest margin {self.mu[-1]}")
        if self.pi1 is not None:
            if not (0.0 < self.pi1 <= 1.0):
                raise InvalidParameter("pi1 must lie in (0, 1]")
            bound = self.pi1_bound()
            if self.pi1 > bound + BOUND_TOL:
                raise InfeasibleError(
                    f"infeasible occupancy: pi1={self.pi1} exceeds the maximum {bound:.12g}", bound=bound)

    @classmethod
    def from_configs(cls, configs: Sequence[Configuration], **kw) -> "ParamOptProblem":
        lams = [c.lambda1 for c in configs]
        if max(lams) - min(lams) > 1e-9 * max(1.0, max(lams)):
            raise InvalidParameter("parameter switching requires one shared structure (lambda1 differs)")
        return cls(tuple(c.margin for c in configs), ids=tuple(c.id for c in configs), **kw)

    @property
    def mu(self) -> np.ndarray:
        """Margins in sorted position order."""
        return np.array([self.margins[k] for k in self._order])

    @property
    def n(self) -> int:
        return len(self.margins)

    def id_at(self, position: int) -> int:
        return self.ids[self._order[position - 1]]

    def pi1_bound(self) -> float:
        mu = self.mu
        return (mu[-1] - self.delta) / (mu[-1] - mu[0])

    def to_input_order(self, sorted_fracs) -> tuple[float, ...]:
        out = [0.0] * self.n
        for pos, k in enumerate(self._order):
            out[k] = float(sorted_fracs[pos])
        return tuple(out)

    def phi(self, fractions_input_order) -> float:
        """Total cost of a mix given in input order."""
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
class ParamOptResult:
    mix: ScheduleMix
    ids: tuple[int, ...]
    cost: float | None = None
    k_star: int | None = None
    pair: tuple[int, int] | None = None
    violating_id: int | None = None

    @property
    def active_ids(self) -> tuple[int, ...]:
        """Induced configurations that are actually deployed (pi > 0)."""
        return tuple(i for i, p in zip(self.ids, self.mix.fractions) if p > 0 and i != self.violating_id)

    def fraction(self, config_id: int) -> float:
        return self.mix.fractions[self.ids.index(config_id)]

    def to_dict(self, problem: ParamOptProblem | None = None) -> dict:
        d = {
            "ids": list(self.ids),
            "mix": list(self.mix.fractions),
            "delta": self.mix.delta,
            "violating_id": self.violating_id,
            "active_ids": list(self.active_ids),
            "cost": self.cost,
            "k_star": self.k_star,
            "pair": list(self.pair) if self.pair else None,
        }
        if problem is not None:
            d["margins"] = list(problem.margins)
        return d


def _result(p: ParamOptProblem, sorted_fracs, cost=None, k_star=None, pair=None) -> ParamOptResult:
    fr = np.clip(np.asarray(sorted_fracs, dtype=float), 0.0, None)
    fr = fr / fr.sum()
    mix = ScheduleMix(p.to_input_order(fr), p.delta)
    if cost is not None:
        cost = p.phi(mix.fractions)
    return ParamOptResult(mix, p.ids, cost, k_star, pair, violating_id=p.id_at(1))


def max_pi1(p: ParamOptProblem) -> ParamOptResult:
    """Largest time share of the violating configuration, ignoring cost.

    Only the strongest induced configuration is used.
    """
    mu = p.mu
    lo, hi = mu[0], mu[-1]
    if hi < p.delta:
        raise InvalidParameter("largest margin must be at least delta")
    fr = np.zeros(p.n)
    fr[0] = (hi - p.delta) / (hi - lo)
    fr[-1] = (p.delta - lo) / (hi - lo)
    cost = 0.0 if p.cost is not None else None
    return _result(p, fr, cost=cost)


def k_star(p: ParamOptProblem) -> int:
    """Position of the weakest induced configuration that alone offsets pi1."""
    pi1 = p._require_pi1()
    mu = p.mu
    thresh = -pi1 * mu[0] / (1.0 - pi1) if pi1 < 1 else math.inf
    for pos in range(2, p.n + 1):
        if mu[pos - 1] > thresh:
            return pos
    raise InfeasibleError(f"no induced configuration exceeds the threshold {thresh:.6g}", bound=p.pi1_bound())


def _needed_mean(p: ParamOptProblem) -> float:
    # Average margin the induced configurations must reach.
    return (p.delta - p.pi1 * p.mu[0]) / (1.0 - p.pi1)


def _deployment(p: ParamOptProblem, l: int, m: int) -> tuple[float, float]:
    mu, d, pi1 = p.mu, p.delta, p.pi1
    ml, mm, m1 = mu[l - 1], mu[m - 1], mu[0]
    span = mm - ml
    return (((mm - d) + pi1 * (m1 - mm)) / span,
            (-(ml - d) + pi1 * (ml - m1)) / span)


def pair_cost_F(p: ParamOptProblem, l: int, m: int) -> float:
    """Cost of meeting the constraint with equality using positions ``l < m``."""
    if not (2 <= l < m <= p.n):
        raise InvalidParameter(f"need 2 <= l < m <= {p.n}, got l={l}, m={m}")
    f = p._require_cost()
    pi1 = p._require_pi1()
    mu, d = p.mu, p.delta
    ml, mm = mu[l - 1], mu[m - 1]
    if mm == ml:
        raise InvalidParameter("pair cost undefined for equal margins")
    fl, fm = f(ml), f(mm)
    return (pi1 * f(mu[0])
            + (fm - fl) / (mm - ml) * (d - pi1 * mu[0])
            + (mm * fl - ml * fm) / (mm - ml) * (1.0 - pi1))


def _pair_result(p, kst, l, m):
    fr = np.zeros(p.n)
    fr[0] = p.pi1
    fr[l - 1], fr[m - 1] = _deployment(p, l, m)
    res = _result(p, fr, cost=True, k_star=kst, pair=(p.id_at(l), p.id_at(m)))
    return res


def _single_result(p, kst, pos):
    fr = np.zeros(p.n)
    fr[0] = p.pi1
    fr[pos - 1] = 1.0 - p.pi1
    return _result(p, fr, cost=True, k_star=kst, pair=(p.id_at(pos), p.id_at(pos)))


def _first_feasible(p: ParamOptProblem) -> int:
    # The delta-tightened version of k*: smallest position able to carry the
    # whole induced share alone. Differs from k* only inside a delta-wide band.
    need = _needed_mean(p)
    for pos in range(2, p.n + 1):
        if p.mu[pos - 1] >= need - BOUND_TOL:
            return pos
    raise InfeasibleError("no induced configuration can meet the constraint", bound=p.pi1_bound())


def min_cost(p: ParamOptProblem) -> ParamOptResult:
    """Cheapest mix meeting ``sum(pi * mu) >= delta`` with fixed ``pi1``.

    Exhaustive O(N^2) search over pairs straddling ``k*``.
    """
    p._require_cost()
    p._require_pi1()
    kst = k_star(p)
    cut = max(kst, _first_feasible(p))
    if cut == 2:
        return _single_result(p, kst, 2)
    best = None
    for l in range(2, cut):
        for m in range(cut, p.n + 1):
            if p.mu[m - 1] == p.mu[l - 1]:
                continue
            val = pair_cost_F(p, l, m)
            if best is None or val < best[0]:
                best = (val, l, m)
    return _pair_result(p, kst, best[1], best[2])


def _divided_slopes(f: CostFunction, mus: np.ndarray) -> np.ndarray:
    vals = np.array([f(m) for m in mus])
    return np.diff(vals) / np.diff(mus)


def validate_shape(f: CostFunction, mus: Sequence[float], shape: str) -> None:
    """Check the sign of second divided differences of ``f`` over ``mus``."""
    mus = np.unique(np.asarray(mus, dtype=float))
    if mus.size < 3 or shape == "none":
        return
    slopes = _divided_slopes(f, mus)
    jumps = np.diff(slopes)
    tol = 1e-9 * max(1.0, float(np.abs(slopes).max()))
    if shape == "convex" and np.any(jumps < -tol):
        raise InvalidParameter("shape mismatch: cost is not convex over the margins")
    if shape == "concave" and np.any(jumps > tol):
        raise InvalidParameter("shape mismatch: cost is not concave over the margins")


def min_cost_shaped(p: ParamOptProblem, shape: str | None = None) -> ParamOptResult:
    """Closed-form pair choice for convex (adjacent pair) or concave (extreme pair) costs."""
    shape = shape or p.shape
    if shape not in ("convex", "concave"):
        raise InvalidParameter("min_cost_shaped needs a convex or concave shape hint")
    f = p._require_cost()
    p._require_pi1()
    validate_shape(f, p.mu[1:], shape)
    kst = k_star(p)
    cut = max(kst, _first_feasible(p))
    if cut == 2:
        return _single_result(p, kst, 2)
    if shape == "convex":
        l, m = cut - 1, cut
        while l > 2 and p.mu[l - 1] == p.mu[m - 1]:
            l -= 1
    else:
        l, m = 2, p.n
    return _pair_result(p, kst, l, m)


# -- grid oracle ------------------------------------------------------------------

MAX_ORACLE_POINTS = 400_000_000


def _triangle(size: int):
    """All (b, c) with b + c <= size, ordered by b + c, plus prefix counts."""
    b, c = np.meshgrid(np.arange(size + 1), np.arange(size + 1), indexing="ij")
    keep = (b + c) <= size
    b, c = b[keep], c[keep]
    order = np.argsort(b + c, kind="stable")
    b, c = b[order], c[order]
    s = np.arange(size + 1)
    counts = (s + 1) * (s + 2) // 2
    return b.astype(np.int32), c.astype(np.int32), counts


def _compositions(total: int, parts: int):
    if parts == 0:
        yield ()
        return
    for k in range(total + 1):
        for rest in _compositions(total - k, parts - 1):
            yield (k, *rest)


def oracle_min_cost(p: ParamOptProblem, grid_step: float = 1e-3, slack: float = 0.0) -> ParamOptResult:
    """Brute-force scan of the simplex of induced shares.

    Shares are multiples of ``h = (1 - pi1)/M`` with ``M = round((1 - pi1)/grid_step)``
    so every grid point meets the sum constraint exactly; points meeting
    ``sum(pi*mu) >= delta - slack`` are kept and the cheapest returned.
    """
    f = p._require_cost()
    pi1 = p._require_pi1()
    if p.n > 6:
        raise InvalidParameter("grid oracle supports at most 6 configurations")
    if not (0 < grid_step <= 1e-2):
        raise InvalidParameter("grid_step must lie in (0, 1e-2]")
    mu = p.mu
    rest = 1.0 - pi1
    parts = p.n - 1
    M = max(1, round(rest / grid_step))
    if math.comb(M + parts - 1, parts - 1) > MAX_ORACLE_POINTS:
        raise InvalidParameter("grid too fine for this many configurations")
    h = rest / M
    fv = np.array([f(m) for m in mu[1:]])
    need = p.delta - pi1 * mu[0] - slack - BOUND_TOL
    base = pi1 * f(mu[0])
    best = (math.inf, None)

    def consider(cost, marg, build):
        nonlocal best
        ok = marg >= need
        if not np.any(ok):
            return
        idx = np.flatnonzero(ok)
        j = idx[np.argmin(cost[idx])]
        if cost[j] < best[0]:
            best = (float(cost[j]), build(j))

    if parts == 1:
        consider(np.array([base + rest * fv[0]]), np.array([rest * mu[1]]), lambda j: [M])
    elif parts == 2:
        a = np.arange(M + 1)
        cost = base + h * (a * fv[0] + (M - a) * fv[1])
        marg = h * (a * mu[1] + (M - a) * mu[2])
        consider(cost, marg, lambda j: [a[j], M - a[j]])
    else:
        tb, tc, counts = _triangle(M)
        fl, ml = fv[-3:], mu[-3:]
        # last three shares: (b, c, R - b - c); linear pieces precomputed once
        tri_cost = tb * (fl[0] - fl[2]) + tc * (fl[1] - fl[2])
        tri_marg = tb * (ml[0] - ml[2]) + tc * (ml[1] - ml[2])
        for lead in _compositions(M, parts - 3):
            R = M - sum(lead)
            if R < 0:
                continue
            n_pts = counts[R]
            lead_cost = sum(k * fv[i] for i, k in enumerate(lead)) + R * fl[2]
            lead_marg = sum(k * mu[1 + i] for i, k in enumerate(lead)) + R * ml[2]
            cost = base + h * (lead_cost + tri_cost[:n_pts])
            marg = h * (lead_marg + tri_marg[:n_pts])
            consider(cost, marg, lambda j, lead=lead, R=R: [*lead, tb[j], tc[j], R - tb[j] - tc[j]])

    if best[1] is None:
        raise InfeasibleError("empty feasible set at this grid resolution", bound=p.pi1_bound())
    fr = np.concatenate([[pi1], h * np.asarray(best[1], dtype=float)])
    return _result(p, fr, cost=True)
