import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from margtrack.marginal import (Structure, bidirectional_softmax_probabilities, collect_structures, cost_vector,
                                enumerate_structures, exact_marginals, marginal_association, marginal_probabilities,
                                row_softmax_probabilities, structure_weights)


def test_two_by_two_diagonal_marginal():
    s = np.array([[0.9, 0.1], [0.1, 0.9]])
    p = marginal_association(s, steps=10)
    expected = 1.0 / (1.0 + math.exp(-1.6))
    assert p[0, 0] == pytest.approx(expected, abs=1e-12)
    assert p[1, 1] == pytest.approx(expected, abs=1e-12)
    assert p[0, 1] == pytest.approx(1 - expected, abs=1e-12)


def test_single_pair_is_certain():
    sset = collect_structures([[0.3]], steps=5)
    assert len(sset) == 1
    assert sset.steps == 2
    assert marginal_probabilities(sset)[0, 0] == 1.0


def test_first_structure_is_map():
    rng = np.random.default_rng(3)
    s = rng.random((5, 5))
    sset = collect_structures(s, steps=3)
    first = sset.assignments[0]
    # MAP maximizes total similarity
    best = max(enumerate_structures((5, 5)), key=lambda r: s[np.arange(5), r].sum())
    assert first.tolist() == best.tolist()


def test_one_by_three_saturates_with_exploration():
    s = np.array([[0.9, 0.8, 0.1]])
    full = collect_structures(s, steps=10)
    assert sorted(full.assignments[:, 0].tolist()) == [0, 1, 2]
    np.testing.assert_allclose(marginal_probabilities(full), exact_marginals(s), atol=1e-12)


def test_literal_update_cycles_between_two_structures():
    s = np.array([[0.9, 0.8, 0.1]])
    literal = collect_structures(s, steps=10, explore=False)
    assert literal.assignments[:, 0].tolist() == [0, 1]


def test_forbidden_pairs_never_collected():
    s = np.full((3, 3), 0.5)
    forbidden = np.eye(3, dtype=bool)
    sset = collect_structures(s, steps=50, forbidden=forbidden)
    assert len(sset) == 2  # the two derangements of three items
    p = marginal_probabilities(sset)
    assert (p[forbidden] == 0).all()
    np.testing.assert_allclose(p, exact_marginals(s, forbidden=forbidden), atol=1e-12)


def test_structure_helpers():
    st_ = Structure((1, -1, 0))
    assert st_.pairs == frozenset({(0, 1), (2, 0)})
    z = st_.indicator(2)
    assert z.tolist() == [[0, 1], [0, 0], [1, 0]]


def test_cost_vector_and_weights():
    s = np.array([[1.2, 0.5], [-0.3, 0.0]])
    np.testing.assert_allclose(cost_vector(s), [0.0, 0.5, 1.0, 1.0])
    w = structure_weights(np.array([0.0, 1.0, 1000.0]))
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert w[0] > w[1] > w[2] >= 0


def test_distance_scale_sharpens():
    s = np.array([[0.9, 0.1], [0.1, 0.9]])
    soft = marginal_association(s, distance_scale=1.0)
    sharp = marginal_association(s, distance_scale=5.0)
    assert sharp[0, 0] > soft[0, 0]
    assert sharp[0, 0] == pytest.approx(1 / (1 + math.exp(-8.0)), abs=1e-12)


@pytest.mark.parametrize("bad", [dict(steps=0), dict(distance_scale=0.0)])
def test_invalid_arguments(bad):
    with pytest.raises(ValueError):
        collect_structures([[0.5]], **bad)


def test_empty_scores():
    assert marginal_association(np.zeros((0, 4))).shape == (0, 4)
    with pytest.raises(ValueError):
        collect_structures(np.zeros((0, 4)))


def test_rejects_nan_scores():
    with pytest.raises(ValueError):
        collect_structures([[np.nan, 0.2]])


def test_enumeration_counts():
    assert len(enumerate_structures((3, 3))) == 6
    assert len(enumerate_structures((2, 4))) == 12
    assert len(enumerate_structures((4, 2))) == 12


def test_backends_give_same_structures(rng):
    from margtrack.bench import available_backends
    s = rng.random((12, 15))
    sets = [collect_structures(s, steps=40, backend=b) for b in available_backends()]
    for other in sets[1:]:
        np.testing.assert_array_equal(sets[0].assignments, other.assignments)


def test_neighbor_move_kernels_agree(rng):
    from margtrack import _cg_kernels
    if _cg_kernels.neighbor_moves_numba is None:
        pytest.skip("numba disabled")
    for _ in range(200):
        m, n = rng.integers(1, 9, size=2)
        d = rng.random((m, n))
        k = min(m, n)
        r2c = -np.ones(m, dtype=np.int64)
        rows, cols = rng.permutation(m)[:k], rng.permutation(n)[:k]
        live = int(rng.integers(0, k + 1))
        r2c[rows[:live]] = cols[:live]
        d[rng.random((m, n)) < 0.2] = np.inf
        d[rows[:live], cols[:live]] = rng.random(live)
        ref = _cg_kernels.neighbor_moves_numpy(d, r2c)
        got = _cg_kernels.neighbor_moves_numba(d, r2c)
        for x, y in zip(ref, got):
            np.testing.assert_array_equal(x, y)


small = st.integers(1, 3).flatmap(lambda m: st.integers(1, 3).flatmap(
    lambda n: arrays(np.float64, (m, n), elements=st.floats(0, 1))))


@settings(max_examples=200, deadline=None)
@given(small)
def test_property_saturates_small_spaces(s):
    sset = collect_structures(s, steps=200)
    assert len(sset) == len(enumerate_structures(s.shape))
    np.testing.assert_allclose(marginal_probabilities(sset), exact_marginals(s), atol=1e-9)


medium = st.integers(1, 8).flatmap(lambda m: st.integers(m, 9).map(lambda n: (m, n)))


@settings(max_examples=80, deadline=None)
@given(medium, st.integers(0, 2**32 - 1), st.integers(1, 60))
def test_property_row_sums_one(shape, seed, steps):
    s = np.random.default_rng(seed).random(shape)
    sset = collect_structures(s, steps=steps)
    assert abs(sset.weights.sum() - 1.0) < 1e-12
    assert len({row.tobytes() for row in sset.assignments}) == len(sset)
    p = marginal_probabilities(sset)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
    assert (p.sum(axis=0) <= 1.0 + 1e-9).all()
    assert ((p >= 0) & (p <= 1)).all()


def test_row_softmax_rows_sum_to_one(rng):
    s = rng.random((4, 6))
    p = row_softmax_probabilities(s, temperature=0.5)
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    assert (np.argmax(p, axis=1) == np.argmax(s, axis=1)).all()


def test_bidirectional_softmax_is_average(rng):
    s = rng.random((3, 5))
    p = bidirectional_softmax_probabilities(s, temperature=0.2)
    expected = 0.5 * (row_softmax_probabilities(s, 0.2) + row_softmax_probabilities(s.T, 0.2).T)
    np.testing.assert_allclose(p, expected)


def test_softmax_rejects_bad_temperature():
    with pytest.raises(ValueError):
        row_softmax_probabilities([[0.1]], temperature=0.0)
