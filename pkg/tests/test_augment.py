import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from votefuse.augment import AbstainPolicy, augment_graph, augment_matrix, augment_row
from votefuse.graph import LabelMatrix

from conftest import star, star_with_edges


class TestPairEncoding:
    def test_vote_plus_one(self):
        A = augment_matrix(LabelMatrix(np.array([[1]])))
        assert tuple(A.data[0]) == (1, -1)

    def test_vote_minus_one(self):
        A = augment_matrix(LabelMatrix(np.array([[-1]])))
        assert tuple(A.data[0]) == (-1, 1)

    def test_alternating_column(self):
        L = LabelMatrix(np.zeros((4, 1), dtype=np.int8))
        A = augment_matrix(L, AbstainPolicy(mode="alternating"))
        expected = [(1, 1), (-1, -1), (1, 1), (-1, -1)]
        assert [tuple(r) for r in A.data] == expected

    def test_alternating_counts_with_votes_interleaved(self):
        votes = np.array([[0], [1], [0], [0], [-1], [0], [0]], dtype=np.int8)
        A = augment_matrix(LabelMatrix(votes), AbstainPolicy(mode="alternating"))
        abst = A.data[votes[:, 0] == 0]
        pos = int((abst[:, 0] == 1).sum())
        assert pos == int(np.ceil(abst.shape[0] / 2))

    def test_deterministic_given_policy(self):
        rng = np.random.default_rng(5)
        L = LabelMatrix(rng.integers(-1, 2, size=(50, 4)).astype(np.int8))
        pol = AbstainPolicy(mode="seeded-random", seed=99)
        a1 = augment_matrix(L, pol)
        a2 = augment_matrix(L, pol)
        np.testing.assert_array_equal(a1.data, a2.data)


@settings(max_examples=80, deadline=None)
@given(arrays(np.int8, st.tuples(st.integers(1, 30), st.integers(1, 5)),
              elements=st.sampled_from([-1, 0, 1])),
       st.sampled_from(["alternating", "seeded-random"]),
       st.integers(0, 2 ** 32))
def test_round_trip(votes, mode, seed):
    L = LabelMatrix(votes)
    A = augment_matrix(L, AbstainPolicy(mode=mode, seed=seed))
    np.testing.assert_array_equal(A.collapse().votes, L.votes)


def test_seeded_random_column_mean_within_coin_bound():
    # mean of the pair value over k abstains stays inside 4 sigma of a fair coin
    k = 40_000
    L = LabelMatrix(np.zeros((k, 2), dtype=np.int8))
    A = augment_matrix(L, AbstainPolicy(mode="seeded-random", seed=1234))
    for col in range(2):
        mean = A.data[:, 2 * col].astype(float).mean()
        assert abs(mean) < 4.0 / np.sqrt(k)


def test_column_fill_independent_of_other_columns():
    # the fill-in stream of column j is keyed by (seed, j, ordinal) only, so
    # editing other columns leaves it untouched
    rng = np.random.default_rng(3)
    votes = rng.integers(-1, 2, size=(200, 4)).astype(np.int8)
    pol = AbstainPolicy(mode="seeded-random", seed=7)
    A = augment_matrix(LabelMatrix(votes), pol)
    other = votes.copy()
    other[:, [0, 2, 3]] = rng.integers(-1, 2, size=(200, 3)).astype(np.int8)
    B = augment_matrix(LabelMatrix(other), pol)
    np.testing.assert_array_equal(A.data[:, 2:4], B.data[:, 2:4])


def test_augment_row_continues_ordinals():
    votes = np.array([[0, 1], [0, 0], [1, 0], [0, -1]], dtype=np.int8)
    pol = AbstainPolicy(mode="alternating")
    batch = augment_matrix(LabelMatrix(votes), pol)
    counts = np.zeros(2, dtype=np.int64)
    rows = [augment_row(votes[t], pol, counts) for t in range(4)]
    np.testing.assert_array_equal(np.stack(rows), batch.data)
    assert list(counts) == [3, 2]


def test_phase_offsets_continue_a_stream():
    votes = np.zeros((6, 1), dtype=np.int8)
    full = augment_matrix(LabelMatrix(votes), AbstainPolicy(mode="alternating"))
    tail = augment_matrix(LabelMatrix(votes[2:]),
                          AbstainPolicy(mode="alternating", phase=(2,)))
    np.testing.assert_array_equal(tail.data, full.data[2:])


class TestAugmentGraph:
    def test_counts_with_dependency(self):
        G = augment_graph(star_with_edges(4, [(0, 1)]))
        assert G.n_vertices == 1 + 8
        assert len(G.abstain_edges()) == 4
        assert len(G.cross_edges()) == 4
        assert len(G.accuracy_edges()) == 8
        assert G.lift(2) == (4, 5)
        assert G.task_of(5) == 0

    def test_single_source(self):
        G = augment_graph(star(1))
        assert G.n_vertices == 3
        assert G.abstain_edges() == ((0, 1),)
        assert G.cross_edges() == ()
        assert len(G.accuracy_edges()) == 2

    def test_no_edges_no_cross(self):
        G = augment_graph(star(5))
        assert G.cross_edges() == ()

    def test_dependence_test(self):
        G = augment_graph(star_with_edges(4, [(0, 1)]))
        assert G.columns_dependent(0, 1)        # same pair
        assert G.columns_dependent(0, 2)        # dependency edge
        assert G.columns_dependent(1, 3)
        assert not G.columns_dependent(0, 4)
        assert not G.columns_dependent(2, 7)
