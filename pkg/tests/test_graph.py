import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from votefuse.errors import (
    AssignmentMissing,
    NotTriangulated,
    SelfEdge,
    UnsupportedCliqueSize,
)
from votefuse.graph import (
    ClassPrior,
    DependencyGraph,
    LabelMatrix,
    VarSet,
    build_junction_tree,
    marginalize_table,
    validate_graph,
)

from conftest import chain3, star, star_with_edges


class TestLabelMatrix:
    def test_entries_validated(self):
        with pytest.raises(ValueError, match="row 1, column 2"):
            LabelMatrix(np.array([[0, 0, 0], [1, 0, 2]]))

    def test_fit_shape_requirements(self):
        L = LabelMatrix(np.array([[1, -1]]))
        with pytest.raises(ValueError, match="at least 3 sources"):
            L.require_fit_shape()
        L.require_fit_shape(allow_small=True)
        empty = LabelMatrix(np.zeros((0, 3), dtype=np.int8))
        with pytest.raises(ValueError, match="at least one sample"):
            empty.require_fit_shape()

    def test_votes_frozen(self):
        L = LabelMatrix(np.array([[1, 0, -1]]))
        with pytest.raises(ValueError):
            L.votes[0, 0] = 0


class TestValidateGraph:
    def test_star_unchanged(self):
        g = star(3)
        assert validate_graph(g) is g

    def test_four_cycle_gets_one_chord(self):
        g = DependencyGraph(n_tasks=4, n_sources=0, assignment=(),
                            task_edges=((0, 1), (1, 2), (2, 3), (0, 3)))
        out = validate_graph(g)
        assert len(out.task_edges) == 5

    def test_chain_of_tasks_unchanged(self):
        g = chain3()
        assert validate_graph(g) is g

    def test_idempotent(self):
        g = DependencyGraph(n_tasks=4, n_sources=0, assignment=(),
                            task_edges=((0, 1), (1, 2), (2, 3), (0, 3)))
        once = validate_graph(g)
        assert validate_graph(once) is once

    def test_self_edge_rejected(self):
        with pytest.raises(SelfEdge):
            DependencyGraph(n_tasks=1, n_sources=3, assignment=(0, 0, 0),
                            source_edges=((1, 1),))

    def test_missing_assignment_rejected(self):
        with pytest.raises(AssignmentMissing):
            DependencyGraph(n_tasks=1, n_sources=3, assignment=(0, 0))

    def test_three_source_clique_rejected(self):
        g = star_with_edges(4, [(0, 1), (1, 2), (0, 2)])
        with pytest.raises(UnsupportedCliqueSize):
            validate_graph(g)

    def test_cross_task_source_edge_rejected(self):
        g = DependencyGraph(n_tasks=2, n_sources=4, assignment=(0, 0, 1, 1),
                            task_edges=((0, 1),), source_edges=((1, 2),))
        with pytest.raises(UnsupportedCliqueSize):
            validate_graph(g)


class TestJunctionTree:
    def test_star_decomposition(self):
        jt = build_junction_tree(star(3))
        labels = {c.label() for c in jt.cliques}
        assert labels == {"{Y1,L1}", "{Y1,L2}", "{Y1,L3}"}
        assert len(jt.separators) == 1
        sep, deg = jt.separators[0]
        assert sep == VarSet((0,), ()) and deg == 3

    def test_dependent_pair_clique(self):
        jt = build_junction_tree(star_with_edges(4, [(0, 1)]))
        labels = {c.label() for c in jt.cliques}
        assert "{Y1,L1,L2}" in labels
        assert "{Y1,L3}" in labels and "{Y1,L4}" in labels

    def test_chain_separators(self):
        jt = build_junction_tree(chain3())
        assert jt.running_intersection_holds()
        degs = {s.label(): d for s, d in jt.separators}
        assert degs == {"{Y1}": 4, "{Y2}": 5, "{Y3}": 4}

    def test_requires_triangulated(self):
        g = DependencyGraph(n_tasks=4, n_sources=0, assignment=(),
                            task_edges=((0, 1), (1, 2), (2, 3), (0, 3)))
        with pytest.raises(NotTriangulated):
            build_junction_tree(g)

    def test_every_edge_in_some_clique(self):
        g = validate_graph(star_with_edges(6, [(0, 1), (3, 4)]))
        jt = build_junction_tree(g)
        for a, b in g.source_edges:
            assert any(a in c.sources and b in c.sources for c in jt.cliques)
        for i, d in enumerate(g.assignment):
            assert any(i in c.sources and d in c.tasks for c in jt.cliques)

    def test_separator_degree_identity(self):
        # sum over separators of (d(S) - 1) = #cliques - 1 for connected graphs
        for g in (star(4), star_with_edges(5, [(1, 2)]), chain3()):
            jt = build_junction_tree(validate_graph(g))
            assert sum(d - 1 for _, d in jt.separators) == len(jt.cliques) - 1


@st.composite
def small_graphs(draw):
    D = draw(st.integers(1, 3))
    m = draw(st.integers(0, 5))
    assignment = tuple(draw(st.integers(0, D - 1)) for _ in range(m))
    tedges = []
    for a in range(D):
        for b in range(a + 1, D):
            if draw(st.booleans()):
                tedges.append((a, b))
    sedges = []
    for a in range(m):
        for b in range(a + 1, m):
            if assignment[a] == assignment[b] and draw(st.integers(0, 3)) == 0:
                sedges.append((a, b))
    return DependencyGraph(n_tasks=D, n_sources=m, assignment=assignment,
                           task_edges=tuple(tedges), source_edges=tuple(sedges))


@settings(max_examples=60, deadline=None)
@given(small_graphs())
def test_triangulation_idempotent_and_tree_consistent(g):
    try:
        v = validate_graph(g)
    except UnsupportedCliqueSize:
        return
    assert validate_graph(v) is v
    jt = build_junction_tree(v)
    assert jt.running_intersection_holds()
    # every validated edge sits inside some maximal clique
    for a, b in v.task_edges:
        assert any(a in c.tasks and b in c.tasks for c in jt.cliques)
    for a, b in v.source_edges:
        assert any(a in c.sources and b in c.sources for c in jt.cliques)


class TestClassPrior:
    def test_joint_must_normalize(self):
        with pytest.raises(ValueError, match="sum to 1"):
            ClassPrior(n_tasks=1, joint=np.array([0.6, 0.5]))

    def test_balance_round_trip(self):
        p = ClassPrior.from_balance(0.3)
        assert p.p_pos(0) == pytest.approx(0.3, abs=1e-15)
        assert p.task_mean(0) == pytest.approx(-0.4, abs=1e-15)

    def test_factorized_pair_table(self):
        p = ClassPrior(n_tasks=2, task_means=np.array([0.2, -0.1]),
                       pair_means={(0, 1): 0.3})
        tbl = p.table((0, 1))
        assert tbl.sum() == pytest.approx(1.0, abs=1e-12)
        assert tbl[0, 0] - tbl[0, 1] - tbl[1, 0] + tbl[1, 1] == pytest.approx(0.3)
        with pytest.raises(ValueError, match="3 or more"):
            ClassPrior(n_tasks=3, task_means=np.zeros(3), pair_means={}).table((0, 1, 2))

    def test_joint_marginals(self):
        table = np.array([[[0.1, 0.2], [0.05, 0.15]], [[0.2, 0.1], [0.12, 0.08]]])
        p = ClassPrior(n_tasks=3, joint=table)
        assert p.task_mean(0) == pytest.approx(float(table[0].sum() - table[1].sum()))
        sub = p.table((0, 2))
        assert sub.shape == (2, 2)
        assert sub.sum() == pytest.approx(1.0)


def test_marginalize_table_axes():
    vs = VarSet((0,), (1, 4))
    tbl = np.random.default_rng(1).random((2, 3, 3))
    tbl /= tbl.sum()
    onto = marginalize_table(vs, tbl, VarSet((0,), (4,)))
    assert onto.shape == (2, 3)
    np.testing.assert_allclose(onto, tbl.sum(axis=1))
