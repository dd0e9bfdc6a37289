"""Mean-field infection dynamics on a graph, with configuration switching.

Each node ``v`` carries an infection probability ``i_v``. A secure node is
infected at rate ``xi_v = 1 - prod_{u -> v} (1 - gamma * i_u)`` and an
infected node is cured at rate ``beta``:

    di_v/dt = xi_v * (1 - i_v) - beta * i_v

Integration is classical RK4 with a fixed step that is realigned at every
switch so no step straddles a change of configuration.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidParameter, StabilityError
from .model import Configuration
from .spectral import AttackDefenseStructure

DEFAULT_DT = 0.01
STABILITY_FACTOR = 0.1
DENSE_LIMIT = 256


@dataclass(frozen=True)
class InfectionState:
    probabilities: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise InvalidParameter("infection state must be a non-empty vector")
        if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
            raise InvalidParameter("infection probabilities must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def uniform(cls, n: int, level: float) -> "InfectionState":
        return cls(np.full(n, float(level)))

    def __len__(self):
        return self.probabilities.size

    @property
    def secure(self) -> np.ndarray:
        return 1.0 - self.probabilities

    def sup_norm(self) -> float:
        return float(self.probabilities.max())


@dataclass(frozen=True)
class Trajectory:
    """Sampled run of the dynamics.

    ``times``/``config_ids``/``sup_norm``/``mean_infection`` are parallel
    arrays; ``states`` holds full snapshots only when requested.
    ``segments`` lists the ``(config_id, start, duration)`` sojourns actually
    integrated and ``occupancy`` the time fraction per configuration id.
    """

    times: np.ndarray
    config_ids: np.ndarray
    sup_norm: np.ndarray
    mean_infection: np.ndarray
    final: InfectionState
    occupancy: dict
    segments: tuple = ()
    states: np.ndarray | None = None

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0]) if self.times.size else 0.0

    def to_csv(self, path, include_nodes: bool = False) -> None:
        if include_nodes and self.states is None:
            raise InvalidParameter("trajectory was recorded without per-node states")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["t", "config_id", "sup_norm", "mean_infection"]
            if include_nodes:
                header += [f"i_{v}" for v in range(1, self.states.shape[1] + 1)]
            w.writerow(header)
            for k in range(self.times.size):
                row = [repr(float(self.times[k])), int(self.config_ids[k]),
                       repr(float(self.sup_norm[k])), repr(float(self.mean_infection[k]))]
                if include_nodes:
                    row += [repr(float(x)) for x in self.states[k]]
                w.writerow(row)


def _pressure(adj: sp.csr_matrix, i: np.ndarray, gamma: float) -> np.ndarray:
    # prod(1 - gamma*i_u) over attackers, evaluated as exp(sum(log(...))).
    with np.errstate(divide="ignore"):
        logs = np.log1p(-gamma * i)
    return -np.expm1(adj @ logs)


def infection_pressure(state: InfectionState, structure: AttackDefenseStructure, gamma: float) -> np.ndarray:
    """Per-node probability that a secure node becomes infected."""
    if len(state) != structure.node_count:
        raise InvalidParameter(f"state has {len(state)} entries but structure has {structure.node_count} nodes")
    if not (0.0 < gamma <= 1.0):
        raise InvalidParameter("gamma must lie in (0, 1]")
    return np.clip(_pressure(structure.adjacency(), state.probabilities, gamma), 0.0, 1.0)


def stability_limit(config: Configuration) -> float:
    s = config.structure
    if s is None:
        raise InvalidParameter(f"config {config.id}: simulation requires explicit structure (got bare lambda1)")
    rate = max(config.beta, config.gamma * s.max_degree())
    return STABILITY_FACTOR / rate


def default_dt(configs: Iterable[Configuration]) -> float:
    return min([DEFAULT_DT] + [stability_limit(c) for c in configs])


class _Rhs:
    def __init__(self, config: Configuration, check_linear_bound: bool):
        adj = config.structure.adjacency()
        # Dense products are much cheaper than sparse ones on small graphs.
        self.adj = adj.toarray() if adj.shape[0] <= DENSE_LIMIT else adj
        self.beta = config.beta
        self.gamma = config.gamma
        self.check = check_linear_bound

    def __call__(self, i: np.ndarray) -> np.ndarray:
        xi = _pressure(self.adj, i, self.gamma)
        if self.check:
            bound = self.gamma * (self.adj @ i)
            if np.any(xi > bound + 1e-12):
                raise AssertionError("infection pressure exceeded its linear upper bound")
        return xi * (1.0 - i) - self.beta * i


class _Recorder:
    def __init__(self, every: int, keep_states: bool):
        self.every = max(1, int(every))
        self.keep = keep_states
        self.t, self.ids, self.sup, self.mean, self.states = [], [], [], [], []

    def add(self, t, cid, i):
        self.t.append(t)
        self.ids.append(cid)
        self.sup.append(float(i.max()))
        self.mean.append(float(i.mean()))
        if self.keep:
            self.states.append(i.copy())

    def build(self, final, occupancy, segments) -> Trajectory:
        return Trajectory(
            times=np.array(self.t),
            config_ids=np.array(self.ids, dtype=int),
            sup_norm=np.array(self.sup),
            mean_infection=np.array(self.mean),
            final=final,
            occupancy=occupancy,
            segments=tuple(segments),
            states=np.array(self.states) if self.keep else None,
        )


def _run(schedule, by_id: dict, initial: InfectionState, dt: float, record_every: int,
         keep_states: bool, check_linear_bound: bool) -> Trajectory:
    for c in by_id.values():
        if c.structure is None:
            raise InvalidParameter(f"config {c.id}: simulation requires explicit structure (got bare lambda1)")
        if c.structure.node_count != len(initial):
            raise InvalidParameter(f"config {c.id}: structure size differs from the initial state")
    if dt <= 0:
        raise InvalidParameter("dt must be positive")

    i = np.array(initial.probabilities, dtype=float)
    t = initial.time
    rec = _Recorder(record_every, keep_states)
    time_in = {}
    segments = []
    step = 0
    rhs_cache = {}
    for cid, duration in schedule:
        if cid not in by_id:
            raise InvalidParameter(f"scheduler emitted unknown configuration id {cid}")
        if duration <= 0:
            continue
        cfg = by_id[cid]
        if dt > stability_limit(cfg) * (1 + 1e-12):
            raise StabilityError(
                f"dt={dt} exceeds stability guard {stability_limit(cfg):.6g} for config {cid}")
        if not rec.t:
            rec.add(t, cid, i)
        f = rhs_cache.get(cid) or rhs_cache.setdefault(cid, _Rhs(cfg, check_linear_bound))
        n_steps = max(1, math.ceil(duration / dt - 1e-9))
        h = duration / n_steps
        start = t
        for k in range(1, n_steps + 1):
            k1 = f(i)
            k2 = f(i + 0.5 * h * k1)
            k3 = f(i + 0.5 * h * k2)
            k4 = f(i + h * k3)
            i = np.clip(i + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), 0.0, 1.0)
            t = start + k * h
            step += 1
            if step % rec.every == 0 or k == n_steps:
                rec.add(t, cid, i)
        t = start + duration
        time_in[cid] = time_in.get(cid, 0.0) + duration
        segments.append((cid, start, duration))

    total = sum(time_in.values())
    occupancy = {cid: v / total for cid, v in sorted(time_in.items())} if total > 0 else {}
    return rec.build(InfectionState(i, t), occupancy, segments)


def integrate_static(
    config: Configuration,
    initial: InfectionState,
    dt: float | None = None,
    horizon: float = 100.0,
    record_every: int = 1,
    keep_states: bool = False,
    check_linear_bound: bool = False,
) -> Trajectory:
    """Integrate a single configuration over ``[t0, t0 + horizon]``."""
    if horizon <= 0:
        raise InvalidParameter("horizon must be positive")
    if dt is None:
        dt = default_dt([config])
    return _run([(config.id, horizon)], {config.id: config}, initial, dt,
                record_every, keep_states, check_linear_bound)


def simulate_switched(
    configs: Sequence[Configuration],
    scheduler,
    initial: InfectionState,
    dt: float | None = None,
    horizon: float = 100.0,
    seed: int | None = None,
    record_every: int = 1,
    keep_states: bool = False,
    check_linear_bound: bool = False,
) -> Trajectory:
    """Integrate piecewise along the sojourns emitted by ``scheduler``.

    ``scheduler`` is a :class:`~mtdpower.markov.Scheduler` (sampled up to
    ``horizon``, reseeded when ``seed`` is given) or an explicit sequence of
    ``(config_id, duration)`` pairs.
    """
    from .markov import Scheduler, sample_schedule

    if horizon <= 0:
        raise InvalidParameter("horizon must be positive")
    by_id = {c.id: c for c in configs}
    if len(by_id) != len(configs):
        raise InvalidParameter("configuration ids must be unique")
    if isinstance(scheduler, Scheduler):
        if seed is not None:
            scheduler = scheduler.reseeded(seed)
        schedule = sample_schedule(scheduler, horizon)
    else:
        schedule = _truncate(scheduler, horizon)
    if dt is None:
        dt = default_dt(by_id.values())
    return _run(schedule, by_id, initial, dt, record_every, keep_states, check_linear_bound)


def _truncate(pairs, horizon):
    out, used = [], 0.0
    for cid, d in pairs:
        if used >= horizon:
            break
        d = min(float(d), horizon - used)
        out.append((cid, d))
        used += d
    return out


def clean_equilibrium_check(traj: Trajectory, eps: float = 1e-4, window: float = 50.0) -> bool:
    """True iff the sup-norm stays below ``eps`` over the trailing ``window``."""
    if traj.times.size == 0:
        raise InvalidParameter("empty trajectory; convergence is indeterminate")
    if traj.horizon < window:
        raise InvalidParameter(f"trajectory horizon {traj.horizon} shorter than window {window}")
    tail = traj.times >= traj.times[-1] - window
    return bool(np.all(traj.sup_norm[tail] < eps))
