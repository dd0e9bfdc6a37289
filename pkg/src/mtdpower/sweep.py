"""Parameter grids for plotting (data only, nothing is rendered)."""

from __future__ import annotations

import csv
from typing import Sequence

import numpy as np

from .errors import InvalidParameter
from .markov import GeneratorConstants
from .model import DEFAULT_DELTA
from .opt_params import ParamOptProblem, max_pi1
from .opt_structs import StructOptProblem, max_pi1_struct


def default_axis(points: int = 10) -> np.ndarray:
    return np.linspace(0.1, 1.0, points)


def pi1_params_grid(neg_mu1: Sequence[float], mu_n: Sequence[float], delta: float = DEFAULT_DELTA) -> np.ndarray:
    """``max_pi1`` for a violator ``-neg_mu1[r]`` against a single induced ``mu_n[c]``."""
    out = np.empty((len(neg_mu1), len(mu_n)))
    for r, a in enumerate(neg_mu1):
        for c, b in enumerate(mu_n):
            p = ParamOptProblem((-float(a), float(b)), delta=delta)
            out[r, c] = max_pi1(p).mix.fractions[0]
    return out


def pi1_structs_grid(neg_mu1: Sequence[float], mu_n: Sequence[float],
                     constants: GeneratorConstants = GeneratorConstants()) -> np.ndarray:
    out = np.empty((len(neg_mu1), len(mu_n)))
    for r, a in enumerate(neg_mu1):
        for c, b in enumerate(mu_n):
            p = StructOptProblem((-float(a), float(b)), constants=constants)
            out[r, c] = max_pi1_struct(p).mix.fractions[0]
    return out


def cost_surface(p: ParamOptProblem, step: float = 0.01) -> list[tuple[float, float, float, bool]]:
    """Mix cost over the shares of the two weakest induced configurations.

    Needs four configurations. The strongest one takes the remainder
    ``1 - pi1 - pi2 - pi3``; points where that is negative are skipped and
    the returned flag marks whether the averaged margin reaches ``delta``.
    """
    if p.n != 4:
        raise InvalidParameter("cost surface needs exactly four configurations")
    pi1 = p._require_pi1()
    p._require_cost()
    rest = 1.0 - pi1
    steps = int(round(rest / step))
    mu = p.mu
    rows = []
    for a in range(steps + 1):
        for b in range(steps + 1 - a):
            s2, s3 = a * rest / steps, b * rest / steps
            s4 = max(rest - s2 - s3, 0.0)
            sorted_fr = (pi1, s2, s3, s4)
            phi = p.phi(p.to_input_order(sorted_fr))
            ok = float(np.dot(sorted_fr, mu)) >= p.delta - 1e-12
            rows.append((s2, s3, phi, ok))
    return rows


def write_grid_csv(path, neg_mu1, mu_n, values, value_name: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["neg_mu1", "mu_n", value_name])
        for r, a in enumerate(neg_mu1):
            for c, b in enumerate(mu_n):
                w.writerow([format(float(a), ".17g"), format(float(b), ".17g"), format(float(values[r, c]), ".17g")])


def write_surface_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pi2", "pi3", "cost", "feasible"])
        for s2, s3, phi, ok in rows:
            w.writerow([format(s2, ".17g"), format(s3, ".17g"), format(phi, ".17g"), int(ok)])
