import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtdpower.errors import InvalidParameter
from mtdpower.markov import (GeneratorConstants, GeneratorMatrix, Scheduler, build_generator,
                             empirical_occupancy, sample_schedule, stationary_distribution,
                             uniform_generator, validate_constants)

K = GeneratorConstants(0.8, 1.5, 2.4, 1e-5, 1)


def test_validate_constants_accepts_reference_values():
    for n in range(2, 8):
        validate_constants(K, n)


def test_validate_constants_names_each_violation():
    with pytest.raises(InvalidParameter, match="a must be < 1"):
        validate_constants(GeneratorConstants(1.2, 1.5, 2.4), 2)
    # Two violators among three states leave the (ii) denominator negative.
    with pytest.raises(InvalidParameter, match=r"\(ii\)-denominator"):
        validate_constants(GeneratorConstants(0.8, 1.5, 2.4, j=2), 3)
    with pytest.raises(InvalidParameter, match=r"\(i\)-denominator"):
        validate_constants(GeneratorConstants(0.8, 1.5, 0.5), 3)


def test_validate_constants_small_b_is_still_admissible():
    validate_constants(GeneratorConstants(0.8, 1.01, 2.4), 2)


def test_two_state_generator_rates():
    # -q_11 = 2b(delta - mu1)/(b - 1), -q_22 = 2a(mu2 - delta)/(c - a) for one violator.
    q = build_generator([-0.3, 0.6], K)
    assert -q.rates[0, 0] == pytest.approx(2 * 1.5 * (0.3 + 1e-5) / 0.5, rel=1e-12)
    assert -q.rates[1, 1] == pytest.approx(2 * 0.8 * (0.6 - 1e-5) / 1.6, rel=1e-12)
    assert stationary_distribution(q).fractions[0] == pytest.approx(0.2499906, abs=1e-7)


def test_generator_rows_sum_to_zero_and_are_uniform():
    q = build_generator([-0.5, 0.1, 0.2, 0.7], K)
    assert np.allclose(q.rates.sum(axis=1), 0.0, atol=1e-12)
    assert q.has_uniform_rows()


def test_build_generator_rejects_bad_margins():
    with pytest.raises(InvalidParameter):
        build_generator([0.3, 0.6], K)
    with pytest.raises(InvalidParameter):
        build_generator([-0.3, 0.0], K)


def test_generator_matrix_validation(tmp_path):
    with pytest.raises(InvalidParameter):
        GeneratorMatrix(np.array([[-1.0, 1.0], [1.0, -2.0]]))
    with pytest.raises(InvalidParameter):
        GeneratorMatrix(np.array([[1.0, -1.0], [1.0, -1.0]]))
    q = uniform_generator([1.0, 2.0, 4.0])
    q.to_csv(tmp_path / "q.csv")
    assert np.array_equal(GeneratorMatrix.from_csv(tmp_path / "q.csv").rates, q.rates)


def test_reducible_generator_is_rejected():
    rates = np.array([[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, -1.0]])
    with pytest.raises(InvalidParameter):
        stationary_distribution(GeneratorMatrix(rates))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 50.0), min_size=2, max_size=7))
def test_uniform_stationary_is_inverse_exit_rate(rates):
    pi = stationary_distribution(uniform_generator(rates)).as_array()
    expect = 1.0 / np.array(rates)
    assert np.allclose(pi, expect / expect.sum(), atol=1e-10)


def test_scheduler_round_trip():
    s = Scheduler.fixed_mix([1, 2, 3], [0.5, 0.3, 0.2], resolution=2.0, seed=4)
    assert Scheduler.from_dict(s.to_dict()) == s
    m = Scheduler.markov(uniform_generator([1.0, 3.0]), [5, 9], seed=1)
    back = Scheduler.from_dict(m.to_dict())
    assert back.ids == (5, 9) and np.array_equal(back.generator.rates, m.generator.rates)
    with pytest.raises(InvalidParameter):
        Scheduler.from_dict({**s.to_dict(), "extra": 1})


def test_schedule_is_seeded_and_truncated():
    s = Scheduler.fixed_mix([1, 2], [0.6, 0.4], seed=11)
    a, b = sample_schedule(s, 50.0), sample_schedule(s, 50.0)
    assert a == b
    assert sum(d for _, d in a) == pytest.approx(50.0)
    assert a[0][0] == 1
    assert all(x[0] != y[0] for x, y in zip(a, a[1:]))


def test_single_active_configuration():
    s = Scheduler.fixed_mix([1, 2], [1.0, 0.0])
    assert sample_schedule(s, 10.0) == [(1, 10.0)]


@pytest.mark.parametrize("fractions", [(0.6, 0.4), (0.2, 0.5, 0.3), (0.1, 0.0, 0.6, 0.3)])
def test_fixed_mix_occupancy_converges(fractions):
    s = Scheduler.fixed_mix(range(1, len(fractions) + 1), fractions, seed=2)
    occ = empirical_occupancy(sample_schedule(s, 1e5))
    for cid, target in s.target().items():
        assert occ.get(cid, 0.0) == pytest.approx(target, abs=0.02)


def test_markov_occupancy_matches_stationary():
    q = build_generator([-0.3, 0.1, 0.3], K)
    s = Scheduler.markov(q, [1, 2, 3], seed=5)
    occ = empirical_occupancy(sample_schedule(s, 1e5))
    for cid, target in s.target().items():
        assert occ[cid] == pytest.approx(target, abs=0.02)
