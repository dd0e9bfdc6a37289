"""Switching laws: generator construction, stationary laws and sojourn sampling."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, InvalidParameter
from .model import DEFAULT_DELTA, ScheduleMix

ROW_TOL = 1e-12


@dataclass(frozen=True)
class GeneratorConstants:
    """Constants ``a < 1 < b < c`` bounding the Lyapunov matrices, plus delta and
    the number ``j`` of leading configurations that violate the threshold."""

    a: float = 0.8
    b: float = 1.5
    c: float = 2.4
    delta: float = DEFAULT_DELTA
    j: int = 1

    def satisfying_denominator(self, n_configs: int) -> float:
        n, j = n_configs, self.j
        return (j * self.c + n - 1 - j) / (n - 1) - self.a

    def violating_denominator(self, n_configs: int) -> float:
        n, j = n_configs, self.j
        return self.b - self.c * (j - 1) / (n - 1) - (n - j) / (n - 1)


def validate_constants(k: GeneratorConstants, n_configs: int) -> None:
    """Raise :class:`InvalidParameter` naming every violated inequality."""
    if n_configs < 2:
        raise InvalidParameter("need at least two configurations")
    problems = []
    if not k.a > 0:
        problems.append("a must be > 0")
    if not k.a < 1:
        problems.append("a must be < 1")
    if not k.b > 1:
        problems.append("b must be > 1")
    if not k.c > k.b:
        problems.append("c must be > b")
    if not k.delta > 0:
        problems.append("delta must be > 0")
    if not (1 <= k.j < n_configs):
        problems.append(f"j must satisfy 1 <= j < {n_configs}")
    else:
        if not k.satisfying_denominator(n_configs) > 0:
            problems.append("(i)-denominator <= 0")
        if not k.violating_denominator(n_configs) > 0:
            problems.append("(ii)-denominator <= 0")
    if problems:
        raise InvalidParameter("; ".join(problems))


@dataclass(frozen=True)
class GeneratorMatrix:
    rates: np.ndarray

    def __post_init__(self):
        q = np.array(self.rates, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
            raise InvalidParameter("generator must be a square matrix")
        off = q - np.diag(np.diag(q))
        if np.any(off < 0):
            raise InvalidParameter("off-diagonal rates must be non-negative")
        scale = max(1.0, float(np.abs(q).max()))
        if np.any(np.abs(q.sum(axis=1)) > ROW_TOL * scale * q.shape[0]):
            raise InvalidParameter("generator rows must sum to zero")
        q.setflags(write=False)
        object.__setattr__(self, "rates", q)

    @property
    def size(self) -> int:
        return self.rates.shape[0]

    def exit_rates(self) -> np.ndarray:
        return -np.diag(self.rates)

    def has_uniform_rows(self) -> bool:
        n = self.size
        if n < 2:
            return True
        for r in range(n):
            row = np.delete(self.rates[r], r)
            if np.ptp(row) > ROW_TOL * max(1.0, abs(row).max()):
                return False
        return True

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for row in self.rates:
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> "GeneratorMatrix":
        with open(path, newline="") as fh:
            return cls(np.array([[float(x) for x in row] for row in csv.reader(fh) if row]))


def uniform_generator(exit_rates: Sequence[float]) -> GeneratorMatrix:
    """Generator whose off-diagonal rates are ``exit_rate / (N - 1)`` per row."""
    d = np.asarray(exit_rates, dtype=float)
    n = d.size
    if n < 2:
        raise InvalidParameter("need at least two states")
    if np.any(d <= 0):
        raise InvalidParameter("exit rates must be positive")
    q = np.repeat((d / (n - 1))[:, None], n, axis=1)
    np.fill_diagonal(q, -d)
    return GeneratorMatrix(q)


def build_generator(margins: Sequence[float], k: GeneratorConstants) -> GeneratorMatrix:
    """Switching generator at the convergence bounds with equality.

    The first ``k.j`` margins must be non-positive (violating) and the rest
    positive. Violating states are left at least as fast as
    ``2b(delta - mu)/den_ii``; satisfying ones at most as fast as
    ``2a(mu - delta)/den_i``; off-diagonal rates are uniform per row.
    """
    mu = np.asarray(margins, dtype=float)
    n = mu.size
    validate_constants(k, n)
    viol, sat = mu[:k.j], mu[k.j:]
    if np.any(viol > 0):
        raise InvalidParameter(f"the first {k.j} margins must be violating (<= 0)")
    if np.any(sat <= 0):
        raise InvalidParameter(f"margins after the first {k.j} must be positive")
    if np.any(sat - k.delta <= 0):
        raise InvalidParameter("every satisfying margin must exceed delta")
    if np.any(-viol + k.delta <= 0):
        raise InvalidParameter("every violating margin must satisfy -mu + delta > 0")
    rates = np.empty(n)
    rates[:k.j] = 2 * k.b * (-viol + k.delta) / k.violating_denominator(n)
    rates[k.j:] = 2 * k.a * (sat - k.delta) / k.satisfying_denominator(n)
    return uniform_generator(rates)


def _irreducible(q: np.ndarray) -> bool:
    adj = (q - np.diag(np.diag(q))) > 0
    n_comp, _ = connected_components(adj, directed=True, connection="strong")
    return n_comp == 1


def stationary_distribution(Q: GeneratorMatrix, delta: float = DEFAULT_DELTA) -> ScheduleMix:
    """Solve ``pi Q = 0`` with ``sum(pi) = 1``.

    For generators with uniform off-diagonal rows the answer is also
    ``x_r / sum(x)`` with ``x_r = 1 / -q_rr``; both routes are computed and
    must agree.
    """
    q = Q.rates
    n = q.shape[0]
    if n == 1:
        return ScheduleMix((1.0,), delta)
    if not _irreducible(q):
        raise InvalidParameter("generator is reducible; stationary distribution not unique")
    lhs = np.vstack([q.T, np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if np.linalg.norm(pi @ q) > 1e-10 * max(1.0, np.abs(q).max()):
        raise ConvergenceError("stationary solve left a large residual", last_iterate=pi)
    if Q.has_uniform_rows():
        x = 1.0 / Q.exit_rates()
        closed = x / x.sum()
        if np.max(np.abs(closed - pi)) > 1e-10:
            raise ConvergenceError("linear solve disagrees with the sojourn-mean closed form", last_iterate=pi)
        pi = closed
    pi = np.clip(pi, 0.0, None)
    return ScheduleMix(tuple(pi / pi.sum()), delta)


# -- schedulers -----------------------------------------------------------------

@dataclass(frozen=True)
class Scheduler:
    """Source of ``(config_id, sojourn)`` pairs.

    ``fixed_mix``: sojourns in ``r`` are
    exponential with mean ``resolution * pi_r`` and the next configuration is
    drawn uniformly among the other active ones (starting from the first
    id). ``markov_generator`` samples the jump chain of ``generator``.
    """

    mode: str
    ids: tuple[int, ...]
    fractions: tuple[float, ...] | None = None
    resolution: float = 1.0
    generator: GeneratorMatrix | None = None
    seed: int = 0
    initial: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
        if len(set(self.ids)) != len(self.ids):
            raise InvalidParameter("scheduler ids must be unique")
        if self.mode == "fixed_mix":
            if self.fractions is None or len(self.fractions) != len(self.ids):
                raise InvalidParameter("fixed_mix needs one fraction per id")
            mix = ScheduleMix(self.fractions)
            object.__setattr__(self, "fractions", mix.fractions)
            if not self.resolution > 0:
                raise InvalidParameter("resolution must be positive")
        elif self.mode == "markov_generator":
            if self.generator is None or self.generator.size != len(self.ids):
                raise InvalidParameter("markov_generator needs a generator sized to ids")
        else:
            raise InvalidParameter(f"unknown scheduler mode '{self.mode}'")
        if self.initial is not None:
            if self.initial not in self.ids:
                raise InvalidParameter(f"initial id {self.initial} is not scheduled")
            if self.mode == "fixed_mix" and self.fractions[self.ids.index(self.initial)] == 0:
                raise InvalidParameter(f"initial id {self.initial} has zero probability")

    @classmethod
    def fixed_mix(cls, ids, fractions, resolution: float = 1.0, seed: int = 0, initial=None) -> "Scheduler":
        return cls("fixed_mix", tuple(ids), tuple(fractions), resolution=resolution, seed=seed, initial=initial)

    @classmethod
    def markov(cls, generator: GeneratorMatrix, ids=None, seed: int = 0, initial=None) -> "Scheduler":
        ids = tuple(ids) if ids is not None else tuple(range(1, generator.size + 1))
        return cls("markov_generator", ids, generator=generator, seed=seed, initial=initial)

    def reseeded(self, seed: int) -> "Scheduler":
        return replace(self, seed=int(seed))

    def target(self) -> dict:
        if self.mode == "fixed_mix":
            return dict(zip(self.ids, self.fractions))
        return dict(zip(self.ids, stationary_distribution(self.generator).fractions))

    def to_dict(self) -> dict:
        d = {"mode": self.mode, "ids": list(self.ids), "seed": self.seed}
        if self.initial is not None:
            d["initial"] = self.initial
        if self.mode == "fixed_mix":
            d["fractions"] = list(self.fractions)
            d["resolution"] = self.resolution
        else:
            d["generator"] = [list(map(float, row)) for row in self.generator.rates]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scheduler":
        known = {"mode", "ids", "seed", "initial", "fractions", "resolution", "generator"}
        extra = set(d) - known
        if extra:
            raise InvalidParameter(f"unknown scheduler fields: {sorted(extra)}")
        if d.get("mode") == "markov_generator":
            return cls.markov(GeneratorMatrix(np.array(d["generator"], dtype=float)), d["ids"],
                              seed=d.get("seed", 0), initial=d.get("initial"))
        return cls.fixed_mix(d["ids"], d["fractions"], d.get("resolution", 1.0),
                             seed=d.get("seed", 0), initial=d.get("initial"))


def sample_schedule(s: Scheduler, horizon: float) -> list[tuple[int, float]]:
    """Draw sojourns until ``horizon``; the last one is truncated to fit."""
    if not horizon > 0:
        raise InvalidParameter("horizon must be positive")
    rng = np.random.default_rng(s.seed)
    if s.mode == "fixed_mix":
        active = [k for k, p in enumerate(s.fractions) if p > 0]
        means = np.array(s.fractions) * s.resolution
        state = s.ids.index(s.initial) if s.initial is not None else active[0]
        if len(active) == 1:
            return [(s.ids[state], float(horizon))]
    else:
        q = s.generator.rates
        exit_rates = -np.diag(q)
        state = s.ids.index(s.initial) if s.initial is not None else 0

    out = []
    used = 0.0
    while used < horizon:
        if s.mode == "fixed_mix":
            d = rng.exponential(means[state])
            others = [k for k in active if k != state]
            nxt = others[rng.integers(len(others))]
        else:
            if exit_rates[state] <= 0:
                d, nxt = np.inf, state
            else:
                d = rng.exponential(1.0 / exit_rates[state])
                probs = np.clip(q[state], 0.0, None)
                probs[state] = 0.0
                nxt = rng.choice(len(probs), p=probs / probs.sum())
        d = min(float(d), horizon - used)
        if d > 0:
            out.append((s.ids[state], d))
        used += d
        state = nxt
    return out


def empirical_occupancy(schedule) -> dict:
    tot = {}
    for cid, d in schedule:
        tot[cid] = tot.get(cid, 0.0) + d
    total = sum(tot.values())
    return {cid: v / total for cid, v in sorted(tot.items())}


def schedule_to_csv(schedule, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["config_id", "start", "duration"])
        start = 0.0
        for cid, d in schedule:
            w.writerow([cid, repr(start), repr(float(d))])
            start += d
