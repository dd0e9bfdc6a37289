"""Configurations, margins, threshold checks and cost functions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidParameter
from .spectral import AttackDefenseStructure

DEFAULT_DELTA = 1e-5
SUM_TOL = 1e-12


class Verdict(str, enum.Enum):
    CONVERGES = "converges"
    MAY_NOT_CONVERGE = "may_not_converge"


@dataclass(frozen=True)
class Configuration:
    """A posture ``(G or lambda1, beta, gamma)``.

    ``source`` is either an :class:`AttackDefenseStructure` or a bare
    spectral radius; only the former can be simulated.
    """

    id: int
    beta: float
    gamma: float
    source: AttackDefenseStructure | float

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise InvalidParameter(f"config {self.id}: beta must lie in (0, 1], got {self.beta}")
        if not (0.0 < self.gamma <= 1.0):
            raise InvalidParameter(f"config {self.id}: gamma must lie in (0, 1], got {self.gamma}")
        if isinstance(self.source, AttackDefenseStructure):
            return
        if isinstance(self.source, bool) or not isinstance(self.source, (int, float)):
            raise InvalidParameter(f"config {self.id}: lambda1 source must be a structure or a number")
        if not (self.source >= 0 and math.isfinite(self.source)):
            raise InvalidParameter(f"config {self.id}: lambda1 must be finite and non-negative")

    @property
    def structure(self) -> AttackDefenseStructure | None:
        return self.source if isinstance(self.source, AttackDefenseStructure) else None

    @property
    def lambda1(self) -> float:
        if isinstance(self.source, AttackDefenseStructure):
            return self.source.lambda1
        return float(self.source)

    @property
    def margin(self) -> float:
        return self.beta - self.gamma * self.lambda1


def margin(config: Configuration) -> float:
    """``beta - gamma * lambda1``; positive means the infection dies out."""
    return config.margin


def check_static_threshold(config: Configuration) -> Verdict:
    # mu == 0 is grouped with the unsafe side on purpose.
    return Verdict.CONVERGES if config.margin > 0 else Verdict.MAY_NOT_CONVERGE


@dataclass(frozen=True)
class ScheduleMix:
    """Long-run occupancy fractions over configurations plus the tolerance delta."""

    fractions: tuple[float, ...]
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        fr = tuple(float(x) for x in self.fractions)
        if not fr:
            raise InvalidParameter("a mix needs at least one fraction")
        if any(not (-SUM_TOL <= x <= 1 + SUM_TOL) for x in fr):
            raise InvalidParameter(f"fractions must lie in [0, 1]: {fr}")
        if abs(sum(fr) - 1.0) > SUM_TOL * max(1, len(fr)):
            raise InvalidParameter(f"fractions must sum to 1, got {sum(fr)!r}")
        if self.delta < 0:
            raise InvalidParameter("delta must be non-negative")
        object.__setattr__(self, "fractions", tuple(min(max(x, 0.0), 1.0) for x in fr))

    def __len__(self):
        return len(self.fractions)

    def as_array(self) -> np.ndarray:
        return np.array(self.fractions)


def averaged_margin(margins: Sequence[float], fractions: Sequence[float]) -> float:
    return float(np.dot(np.asarray(fractions, dtype=float), np.asarray(margins, dtype=float)))


def check_averaged_threshold(configs: Sequence[Configuration], mix: ScheduleMix) -> Verdict:
    """Threshold for parameter switching over a single fixed structure.

    The switched system converges when the occupancy-weighted ratio
    ``sum(pi*beta) / sum(pi*gamma)`` exceeds ``lambda1``, which is the same
    as a positive occupancy-weighted margin.
    """
    if len(configs) != len(mix):
        raise InvalidParameter(f"{len(configs)} configurations but {len(mix)} fractions")
    lams = [c.lambda1 for c in configs]
    if max(lams) - min(lams) > 1e-9 * max(1.0, max(lams)):
        raise InvalidParameter("averaged threshold applies only to fixed structure (lambda1 differs)")
    avg = averaged_margin([c.margin for c in configs], mix.fractions)
    return Verdict.CONVERGES if avg > 0 else Verdict.MAY_NOT_CONVERGE


# -- cost functions -------------------------------------------------------------

COST_KINDS = ("affine", "quadratic_shifted", "sqrt_shifted", "table")
_MONOTONE_GRID = np.linspace(1e-6, 10.0, 2001)


@dataclass(frozen=True)
class CostFunction:
    """Cost of holding a configuration with margin ``mu``.

    * ``affine(slope, intercept)``: ``slope*mu + intercept``
    * ``quadratic_shifted(scale, shift)``: ``scale*(mu+shift)**2``
    * ``sqrt_shifted(scale, shift)``: ``scale*sqrt(mu+shift)``
    * ``table(points)``: linear interpolation through sorted ``(mu, cost)`` pairs
    """

    kind: str
    params: tuple[float, ...] = ()
    points: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise InvalidParameter(f"unknown cost kind '{self.kind}'")
        if self.kind == "table":
            pts = tuple((float(m), float(c)) for m, c in self.points)
            if len(pts) < 2:
                raise InvalidParameter("table cost needs at least two points")
            if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
                raise InvalidParameter("table cost points must be sorted by strictly increasing mu")
            object.__setattr__(self, "points", pts)
            # Interpolation is continuous, so the value at 0 bounds the positive side.
            grid = np.array(([0.0] if pts[0][0] <= 0 < pts[-1][0] else []) + [m for m, _ in pts if m > 0])
        else:
            if len(self.params) != 2:
                raise InvalidParameter(f"{self.kind} cost takes exactly two parameters")
            object.__setattr__(self, "params", tuple(float(p) for p in self.params))
            grid = _MONOTONE_GRID
            if self.kind == "sqrt_shifted":
                grid = grid[grid + self.params[1] >= 0]
        if grid.size > 1:
            vals = np.array([self(m) for m in grid])
            if np.any(np.diff(vals) < -1e-12 * max(1.0, float(np.abs(vals).max()))):
                raise InvalidParameter(f"{self.kind} cost must be non-decreasing for mu > 0")

    @classmethod
    def affine(cls, slope: float, intercept: float) -> "CostFunction":
        return cls("affine", (slope, intercept))

    @classmethod
    def quadratic_shifted(cls, scale: float, shift: float) -> "CostFunction":
        return cls("quadratic_shifted", (scale, shift))

    @classmethod
    def sqrt_shifted(cls, scale: float, shift: float) -> "CostFunction":
        return cls("sqrt_shifted", (scale, shift))

    @classmethod
    def table(cls, points) -> "CostFunction":
        return cls("table", (), tuple(points))

    def __call__(self, mu: float) -> float:
        mu = float(mu)
        if self.kind == "affine":
            s, t = self.params
            return s * mu + t
        if self.kind == "quadratic_shifted":
            s, t = self.params
            return s * (mu + t) ** 2
        if self.kind == "sqrt_shifted":
            s, t = self.params
            if mu + t < 0:
                raise DomainError(f"sqrt_shifted cost undefined at mu={mu} (mu + shift < 0)")
            return s * math.sqrt(mu + t)
        lo, hi = self.points[0][0], self.points[-1][0]
        if not (lo <= mu <= hi):
            raise DomainError(f"mu={mu} outside cost table range [{lo}, {hi}]")
        xs, ys = zip(*self.points)
        return float(np.interp(mu, xs, ys))

    def scaled(self, factor: float) -> "CostFunction":
        if self.kind == "affine":
            return CostFunction.affine(self.params[0] * factor, self.params[1] * factor)
        if self.kind == "table":
            return CostFunction.table((m, c * factor) for m, c in self.points)
        return CostFunction(self.kind, (self.params[0] * factor, self.params[1]))

    def to_dict(self) -> dict:
        if self.kind == "table":
            return {"kind": "table", "points": [list(p) for p in self.points]}
        names = {"affine": ("slope", "intercept")}.get(self.kind, ("scale", "shift"))
        return {"kind": self.kind, **dict(zip(names, self.params))}


def eval_cost(f: CostFunction, mu: float) -> float:
    return f(mu)
