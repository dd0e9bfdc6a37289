import numpy as np
import pytest
from scipy.optimize import linprog

from mtdpower.model import Configuration, CostFunction

LAMBDA1 = 118.4
PAIRS = [(0.2, 0.00422), (0.4, 0.000845), (0.6, 0.00169), (0.8, 0.00169)]


def four_configs():
    return [Configuration(k + 1, b, g, LAMBDA1) for k, (b, g) in enumerate(PAIRS)]


@pytest.fixture
def reference_configs():
    return four_configs()


@pytest.fixture
def sqrt_cost():
    return CostFunction.sqrt_shifted(10.0, 0.5)


@pytest.fixture
def square_cost():
    return CostFunction.quadratic_shifted(100.0, 0.1)


def lp_min_cost(margins, pi1, cost, delta):
    """Independent LP oracle: min sum(pi*f(mu)) over the induced shares."""
    mu = np.asarray(margins, dtype=float)
    v = int(np.argmin(mu))
    rest = [k for k in range(mu.size) if k != v]
    c = np.array([cost(mu[k]) for k in rest])
    res = linprog(c,
                  A_ub=[-mu[rest]], b_ub=[-(delta - pi1 * mu[v])],
                  A_eq=[np.ones(len(rest))], b_eq=[1.0 - pi1],
                  bounds=[(0, None)] * len(rest), method="highs")
    assert res.status == 0
    return pi1 * cost(mu[v]) + res.fun


def lp_min_cost_struct(p):
    """Charnes-Cooper LP per subset for the linear-fractional sojourn problem."""
    import itertools

    g = p.cost
    best = np.inf
    x1 = p.xbar1()
    budget = (1 - p.pi1) / p.pi1 * x1
    for size in range(1, p.n):
        for subset in itertools.combinations(range(2, p.n + 1), size):
            lo = [p.xbar(k, size) for k in subset]
            if sum(lo) > budget * (1 + 1e-12):
                continue
            # variables y_1..y_m, t ; y = x * t, t = 1/sum(x)
            m = len(subset)
            cvec = np.r_[[g(p.mu[k - 1]) for k in subset], 0.0]
            A_ub = []
            b_ub = []
            for r in range(m):
                row = np.zeros(m + 1)
                row[r] = -1.0
                row[-1] = lo[r]
                A_ub.append(row)
                b_ub.append(0.0)
            A_ub.append(np.r_[np.zeros(m), -budget])
            b_ub.append(-1.0)
            res = linprog(cvec, A_ub=A_ub, b_ub=b_ub, A_eq=[np.r_[np.ones(m), 0.0]], b_eq=[1.0],
                          bounds=[(0, None)] * (m + 1), method="highs")
            if res.status == 0:
                best = min(best, res.fun)
    return p.pi1 * g(p.mu[0]) + (1 - p.pi1) * best
