import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtdpower.errors import InvalidParameter, ParseError
from mtdpower.spectral import (AttackDefenseStructure, complete_graph, dump_structure, erdos_renyi_graph,
                               generate_structure, load_structure, path_graph, spectral_radius, star_graph)

# Frozen from numpy.linalg.eigvals on the dense adjacency.
STAR_10 = 3.1622776601683804
PATH_5 = 1.7320508075688805


def dense_radius(s):
    return float(max(abs(np.linalg.eigvals(s.adjacency().toarray()))))


@pytest.mark.parametrize("n", [2, 3, 5, 20])
def test_complete_graph_radius(n):
    assert complete_graph(n).lambda1 == pytest.approx(n - 1, abs=1e-8)


def test_star_and_path_match_dense_eigensolver():
    assert star_graph(10).lambda1 == pytest.approx(STAR_10, abs=1e-8)
    assert path_graph(5).lambda1 == pytest.approx(PATH_5, abs=1e-8)
    assert path_graph(2).lambda1 == pytest.approx(1.0, abs=1e-8)


def test_empty_and_acyclic_have_zero_radius():
    assert AttackDefenseStructure(4, []).lambda1 == 0.0
    dag = AttackDefenseStructure(3, [(1, 2), (2, 3), (1, 3)], directed=True)
    assert dag.lambda1 == 0.0


def test_directed_cycle():
    cyc = AttackDefenseStructure(4, [(1, 2), (2, 3), (3, 4), (4, 1)], directed=True)
    assert cyc.lambda1 == pytest.approx(1.0, abs=1e-8)


def test_adjacency_orientation():
    s = AttackDefenseStructure(3, [(1, 2)], directed=True)
    a = s.adjacency().toarray()
    # Row v collects the attackers of v.
    assert a[1, 0] == 1 and a[0, 1] == 0
    assert s.in_degrees().tolist() == [0, 1, 0]


def test_undirected_is_symmetric():
    a = path_graph(4).adjacency().toarray()
    assert np.array_equal(a, a.T)


def test_rejects_self_loops_and_bad_ids():
    with pytest.raises(InvalidParameter):
        AttackDefenseStructure(3, [(2, 2)])
    with pytest.raises(InvalidParameter):
        AttackDefenseStructure(3, [(1, 4)])
    with pytest.raises(InvalidParameter):
        AttackDefenseStructure(0, [])


def test_lambda1_is_cached():
    s = star_graph(4)
    assert s.cached_lambda1 is None
    val = s.lambda1
    assert s.cached_lambda1 == val


def test_parse_round_trip():
    s = erdos_renyi_graph(12, 0.3, seed=4)
    back = load_structure(dump_structure(s))
    assert back == s


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError, match="line 3"):
        load_structure("n=3\n1 2\n1 x\n")
    with pytest.raises(InvalidParameter):
        load_structure("n=3\n2 2\n")
    with pytest.raises(InvalidParameter):
        load_structure("n=3\n1 5\n")


def test_parse_comments_and_blank_lines():
    s = load_structure("# a star\nn=4\n\n1 2\n1 3 # hub\n1 4\n")
    assert s.lambda1 == pytest.approx(math.sqrt(3), abs=1e-8)


def test_generator_recipes():
    assert generate_structure("complete", {"n": 6}).node_count == 6
    assert generate_structure("star", {"leaves": 3}).node_count == 4
    a = generate_structure("erdos_renyi", {"n": 30, "p": 0.2}, seed=1)
    b = generate_structure("erdos_renyi", {"n": 30, "p": 0.2}, seed=1)
    assert a == b
    with pytest.raises(InvalidParameter):
        generate_structure("complete", {})
    with pytest.raises(InvalidParameter):
        generate_structure("lattice", {"n": 3})


def test_erdos_renyi_extremes():
    assert erdos_renyi_graph(8, 0.0, seed=0).lambda1 == 0.0
    assert erdos_renyi_graph(8, 1.0, seed=0) == complete_graph(8)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), st.floats(0.05, 1.0), st.integers(0, 10_000))
def test_power_iteration_agrees_with_dense(n, p, seed):
    s = erdos_renyi_graph(n, p, seed=seed)
    assert spectral_radius(s) == pytest.approx(dense_radius(s), abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 15), st.integers(0, 1000))
def test_radius_invariant_under_relabeling(n, seed):
    s = erdos_renyi_graph(n, 0.4, seed=seed)
    perm = np.random.default_rng(seed).permutation(n) + 1
    assert s.relabel(perm).lambda1 == pytest.approx(s.lambda1, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 12), st.integers(0, 1000))
def test_adding_an_edge_never_lowers_radius(n, seed):
    s = erdos_renyi_graph(n, 0.3, seed=seed)
    rng = np.random.default_rng(seed)
    u, v = rng.choice(np.arange(1, n + 1), size=2, replace=False)
    assert s.with_edge(int(u), int(v)).lambda1 >= s.lambda1 - 1e-8
