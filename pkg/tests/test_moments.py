import numpy as np
import pytest

from votefuse.augment import augment_graph, augment_matrix
from votefuse.config import RunConfig
from votefuse.errors import (
    DegenerateTriplet,
    InsufficientIndependence,
    PriorNearZero,
    TooFewAbstainRows,
)
from votefuse.graph import ClassPrior, LabelMatrix
from votefuse.moments import (
    aggregate_accuracies,
    conditional_accuracy,
    enumerate_triplets,
    estimate_accuracies,
    estimate_moments,
    ratio_accuracy,
    resolve_signs,
    solve_triplet,
)
from votefuse.oracle import (
    CanonicalParameters,
    enumerate_joint,
    random_model,
    sample,
    sample_symmetric_star,
)

from conftest import chain3, star, star_with_edges


class TestEstimateMoments:
    def test_direct_average(self):
        # two +/-1 columns with products (1, -1, 1, 1) average to 0.5
        data = np.array([[1, 1], [1, -1], [-1, -1], [1, 1]], dtype=np.int8)
        from votefuse.graph import AugmentedLabelMatrix
        A = AugmentedLabelMatrix(data)
        me = estimate_moments(A, ClassPrior.from_balance(0.5))
        assert me.M[0, 1] == pytest.approx(0.5, abs=0)

    def test_diagonal_is_one(self):
        rng = np.random.default_rng(0)
        L = LabelMatrix(rng.integers(-1, 2, size=(100, 3)).astype(np.int8))
        me = estimate_moments(augment_matrix(L), ClassPrior.from_balance(0.5))
        np.testing.assert_array_equal(np.diag(me.M), 1.0)
        np.testing.assert_allclose(me.M, me.M.T)
        assert np.max(np.abs(me.M)) <= 1.0

    def test_weighted_enumeration_reproduces_exact_moments(self):
        # feeding the full enumeration weighted by probability reproduces the
        # enumerated second moments
        g = star_with_edges(4, [(0, 1)])
        th = random_model(g, seed=3)
        j = enumerate_joint(th)
        me = j.moment_estimates()
        p = j.p_full
        cols = np.stack([j.column_value(c) for c in range(8)])
        weighted = (cols * p) @ cols.T
        np.testing.assert_allclose(weighted, me.M, atol=1e-12)

    def test_vote_marginals_and_pairs(self):
        votes = np.array([[1, 0], [0, 0], [-1, 1], [1, 1]], dtype=np.int8)
        g = star_with_edges(2, [(0, 1)])
        me = estimate_moments(augment_matrix(LabelMatrix(votes)),
                              ClassPrior.from_balance(0.5), augment_graph(g))
        np.testing.assert_allclose(me.vote_marginals[0], [0.5, 0.25, 0.25])
        pair = me.pair_table(0, 1)
        assert pair[0, 0] == pytest.approx(0.25)   # (+1, +1) once
        assert pair.sum() == pytest.approx(1.0)


class TestEnumerateTriplets:
    def test_star_contains_vote_tracking_triple(self):
        plan = enumerate_triplets(augment_graph(star(3)))
        assert (2, 4) in {tuple(p) for p in plan.partners[0]}
        assert sorted(plan.omega) == list(range(6))

    def test_dependent_pair_excluded(self):
        # with an edge between sources 1 and 2, source 1 may partner with
        # sources 3 and 4 but never source 2
        plan = enumerate_triplets(augment_graph(star_with_edges(4, [(0, 1)])))
        for j, k in plan.partners[0]:
            assert j // 2 != 1 and k // 2 != 1
            assert {j // 2, k // 2} <= {2, 3}

    def test_shared_neighbor_makes_sources_dependent(self):
        # sources 2 and 3 have no direct edge but both couple to source 1;
        # the pair path between them never touches the hidden layer, so no
        # triplet may mix them
        G = augment_graph(star_with_edges(4, [(0, 1), (0, 2)]))
        assert G.columns_dependent(2, 4)
        plan = enumerate_triplets(G, RunConfig(ratio_fallback=True))
        # component {1,2,3} plus singleton {4}: only two independence classes,
        # so nothing is triplet-recoverable
        assert plan.partners == {}
        assert len(plan.fallback) == 8

    def test_two_dependent_sources_have_no_triplets(self):
        G = augment_graph(star_with_edges(2, [(0, 1)]))
        with pytest.raises(InsufficientIndependence):
            enumerate_triplets(G, RunConfig())
        plan = enumerate_triplets(G, RunConfig(ratio_fallback=True))
        assert plan.partners == {}
        assert set(plan.fallback) == {0, 1, 2, 3}

    def test_cap_respected(self):
        plan = enumerate_triplets(augment_graph(star(8)), RunConfig(triplet_cap=7))
        assert all(len(p) == 7 for p in plan.partners.values())

    def test_no_observed_path_avoids_hidden_layer(self):
        # pairwise validity means no two triple members are joined by
        # observed-only edges (same pair or cross-pair edges)
        G = augment_graph(star_with_edges(5, [(1, 2)]))
        observed = set(G.abstain_edges()) | set(G.cross_edges())
        adj = {}
        for a, b in observed:
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)

        def connected(a, b):
            seen, stack = {a}, [a]
            while stack:
                u = stack.pop()
                if u == b:
                    return True
                for w in adj.get(u, ()):
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            return False

        plan = enumerate_triplets(G)
        for a, partners in plan.partners.items():
            for j, k in partners[:20]:
                for x, y in ((a, j), (a, k), (j, k)):
                    assert not connected(x, y)

    def test_multi_task_triples_keep_an_on_task_partner(self):
        plan = enumerate_triplets(augment_graph(chain3()))
        G = augment_graph(chain3())
        for a, partners in plan.partners.items():
            ta = G.task_of(a)
            for j, k in partners:
                assert G.task_of(j) == ta or G.task_of(k) == ta


class TestSolveTriplet:
    def test_forward_products(self):
        M = np.eye(3)
        M[0, 1] = M[1, 0] = 0.48
        M[0, 2] = M[2, 0] = 0.48
        M[1, 2] = M[2, 1] = 0.36
        assert solve_triplet(M, (0, 1, 2)) == pytest.approx((0.8, 0.6, 0.6))

    def test_perfect_sources(self):
        M = np.ones((3, 3))
        assert solve_triplet(M, (0, 1, 2)) == (1.0, 1.0, 1.0)

    def test_signs_discarded(self):
        M = np.eye(3)
        M[0, 1] = M[1, 0] = -0.48
        M[0, 2] = M[2, 0] = 0.48
        M[1, 2] = M[2, 1] = -0.36
        assert solve_triplet(M, (0, 1, 2)) == pytest.approx((0.8, 0.6, 0.6))

    def test_degenerate_denominator(self):
        M = np.eye(3)
        M[0, 1] = M[1, 0] = 0.5
        M[0, 2] = M[2, 0] = 0.5
        M[1, 2] = M[2, 1] = 1e-6
        with pytest.raises(DegenerateTriplet):
            solve_triplet(M, (0, 1, 2))

    def test_clamped_to_floor_and_one(self):
        M = np.eye(3)
        M[0, 1] = M[1, 0] = 0.9
        M[0, 2] = M[2, 0] = 0.9
        M[1, 2] = M[2, 1] = 0.1  # implies |a_0| > 1
        vals = solve_triplet(M, (0, 1, 2))
        assert vals[0] == 1.0


class TestAggregate:
    def _plan_for(self, pairs):
        from votefuse.moments import TripletPlan
        return TripletPlan(n_columns=6,
                           partners={0: np.asarray(pairs, dtype=np.intp)},
                           fallback=())

    def test_mean(self):
        # two triplets yielding 0.6 and 0.8 average to 0.7
        M = np.eye(6)
        M[0, 1] = M[1, 0] = 0.6 * 0.5
        M[0, 2] = M[2, 0] = 0.6 * 0.5
        M[1, 2] = M[2, 1] = 0.25
        M[0, 3] = M[3, 0] = 0.8 * 0.5
        M[0, 4] = M[4, 0] = 0.8 * 0.5
        M[3, 4] = M[4, 3] = 0.25
        plan = self._plan_for([(1, 2), (3, 4)])
        cfg = RunConfig(low_acc_isolation=False)
        mags, _ = aggregate_accuracies(plan, M, "mean", cfg)
        assert mags[0] == pytest.approx(0.7)

    def test_median(self):
        M = np.eye(8)
        for (j, k), a in zip([(1, 2), (3, 4), (5, 6)], [0.5, 0.9, 0.9]):
            M[0, j] = M[j, 0] = a * 0.5
            M[0, k] = M[k, 0] = a * 0.5
            M[j, k] = M[k, j] = 0.25
        from votefuse.moments import TripletPlan
        plan = TripletPlan(n_columns=8,
                           partners={0: np.asarray([(1, 2), (3, 4), (5, 6)], dtype=np.intp)},
                           fallback=())
        mags, _ = aggregate_accuracies(plan, M, "median",
                                       RunConfig(low_acc_isolation=False))
        assert mags[0] == pytest.approx(0.9)

    def test_exact_moments_make_all_triplets_agree(self):
        g = star(5)
        th = random_model(g, seed=6)
        j = enumerate_joint(th)
        me = j.moment_estimates()
        plan = enumerate_triplets(augment_graph(g))
        mean_mags, _ = aggregate_accuracies(plan, me.M, "mean", RunConfig())
        med_mags, _ = aggregate_accuracies(plan, me.M, "median", RunConfig())
        truth = np.abs(j.column_accuracies())
        for c in mean_mags:
            assert mean_mags[c] == pytest.approx(truth[c], abs=1e-10)
            assert med_mags[c] == pytest.approx(truth[c], abs=1e-10)


class TestResolveSigns:
    def test_mixed_signs(self):
        # magnitudes (0.8, 0.6, 0.6) with M_01 < 0 < M_02 force (+, -, +)
        G = augment_graph(star(3))
        M = np.eye(6)
        sgn = {(0, 2): -1, (0, 4): 1, (2, 4): -1}
        for (a, b), s in sgn.items():
            M[a, b] = M[b, a] = s * 0.4
        mags = {0: 0.8, 2: 0.6, 4: 0.6}
        plan = enumerate_triplets(G)
        signed, _ = resolve_signs(mags, M, plan, G)
        assert signed[0] > 0 and signed[2] < 0 and signed[4] > 0

    def test_all_positive(self):
        G = augment_graph(star(3))
        M = np.eye(6)
        for a in (0, 2, 4):
            for b in (0, 2, 4):
                if a != b:
                    M[a, b] = 0.3
        signed, _ = resolve_signs({0: 0.5, 2: 0.6, 4: 0.7}, M,
                                  enumerate_triplets(G), G)
        assert all(v > 0 for v in signed.values())

    def test_anchor_propagates(self):
        G = augment_graph(star(3))
        M = np.eye(6)
        for a in (0, 2, 4):
            for b in (0, 2, 4):
                if a != b:
                    M[a, b] = 0.3
        cfg = RunConfig(sign_strategy="anchor", anchor_source=0, anchor_sign=-1)
        signed, _ = resolve_signs({0: 0.5, 2: 0.6, 4: 0.7}, M,
                                  enumerate_triplets(G), G, cfg)
        assert all(v < 0 for v in signed.values())

    def test_anchor_unreachable(self):
        from votefuse.errors import AnchorUnreachable
        G = augment_graph(star(4))
        M = np.eye(8)
        M[0, 2] = M[2, 0] = 0.3  # sources 1-2 related, 3-4 related, no bridge
        M[4, 6] = M[6, 4] = 0.3
        cfg = RunConfig(sign_strategy="anchor", anchor_source=0, anchor_sign=1)
        with pytest.raises(AnchorUnreachable):
            resolve_signs({0: 0.5, 2: 0.5, 4: 0.5, 6: 0.5}, M, None, G, cfg)

    def test_scaling_leaves_pattern_unchanged(self):
        G = augment_graph(star(3))
        M = np.eye(6)
        sgn = {(0, 2): -1, (0, 4): 1, (2, 4): -1}
        for (a, b), s in sgn.items():
            M[a, b] = M[b, a] = s * 0.4
        plan = enumerate_triplets(G)
        base = {0: 0.8, 2: 0.6, 4: 0.6}
        s1, _ = resolve_signs(base, M, plan, G)
        s2, _ = resolve_signs({k: 3.7 * v for k, v in base.items()}, M, plan, G)
        assert {k: np.sign(v) for k, v in s1.items()} == \
               {k: np.sign(v) for k, v in s2.items()}


class TestRatioAccuracy:
    def _moments(self, first, balance):
        g = star(1)
        me = estimate_moments(augment_matrix(LabelMatrix(np.array([[1]]))),
                              ClassPrior.from_balance(balance))
        me.first_moments = np.array(first, dtype=float)
        return me

    def test_division(self):
        me = self._moments([0.14, -0.14], balance=0.6)  # E[Y] = 0.2
        assert ratio_accuracy(0, me, augment_graph(star(1))) == pytest.approx(0.7)

    def test_zero_numerator(self):
        me = self._moments([0.0, 0.0], balance=0.6)
        assert ratio_accuracy(0, me, augment_graph(star(1))) == 0.0

    def test_near_zero_prior_rejected(self):
        me = self._moments([0.14, -0.14], balance=0.5)
        with pytest.raises(PriorNearZero):
            ratio_accuracy(0, me, augment_graph(star(1)))

    def test_exact_on_enumerated_joint(self):
        g = star(2)
        th = CanonicalParameters(graph=g, theta_task=(np.arctanh(0.2),),
                                 theta_acc=(0.5, 0.7), theta_abstain=(0.2, -0.1))
        j = enumerate_joint(th)
        me = j.moment_estimates()
        truth = j.accuracies()
        G = augment_graph(g)
        for i in range(2):
            assert ratio_accuracy(2 * i, me, G) == pytest.approx(truth[i], abs=1e-12)


class TestConditionalAccuracy:
    def test_never_abstains_errors(self):
        g = star(4)
        votes = np.ones((100, 4), dtype=np.int8)
        A = augment_matrix(LabelMatrix(votes))
        plan = enumerate_triplets(augment_graph(g))
        with pytest.raises(TooFewAbstainRows):
            conditional_accuracy(1, 0, A, plan, augment_graph(g),
                                 ClassPrior.from_balance(0.5))

    def test_independent_abstention_equals_unconditional(self):
        # when the conditioning source has no dependency edge, restricting to
        # its abstain rows leaves the other accuracies untouched
        g = star(4)
        th = random_model(g, seed=5)
        j = enumerate_joint(th)
        me = j.moment_estimates()
        from votefuse.moments import conditional_accuracy_from_stats
        me.conditional[0] = j.restricted_moments(0)
        plan = enumerate_triplets(augment_graph(g))
        truth = j.accuracies()
        got = conditional_accuracy_from_stats(1, 0, me, plan, augment_graph(g),
                                              RunConfig(), sign_hint=truth[1])
        assert got == pytest.approx(truth[1], abs=1e-12)

    def test_sampled_conditional_close_to_oracle(self):
        g = star_with_edges(4, [(0, 1)])
        th = CanonicalParameters(
            graph=g, theta_task=(0.1,), theta_acc=(0.5, 0.6, 0.7, 0.8),
            theta_abstain=(0.0, -0.1, 0.1, 0.0), theta_dep={(0, 1): 0.2})
        j = enumerate_joint(th)
        truth = j.conditional_accuracy(target=1, cond=0)
        L, _ = sample(j, 200_000, seed=13)
        A = augment_matrix(L)
        plan = enumerate_triplets(augment_graph(g))
        got = conditional_accuracy(1, 0, A, plan, augment_graph(g), j.prior(),
                                   RunConfig(), sign_hint=truth)
        assert abs(got - truth) < 0.03


class TestPipelineProperties:
    def test_product_consistency_on_exact_moments(self):
        # recovered accuracies reproduce every independent pairwise moment
        g = star(5)
        th = random_model(g, seed=9)
        j = enumerate_joint(th)
        me = j.moment_estimates()
        G = augment_graph(g)
        acc = estimate_accuracies(me, enumerate_triplets(G), G, RunConfig())
        for a in range(10):
            for b in range(10):
                if G.columns_dependent(a, b):
                    continue
                assert acc.values[a] * acc.values[b] == pytest.approx(
                    me.M[a, b], abs=1e-10)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(14)
        L, _ = sample_symmetric_star(np.array([0.4, 0.55, 0.7, 0.6]),
                                     np.full(4, 0.2), 0.5, 5000, seed=3)
        g = star(4)
        G = augment_graph(g)
        me = estimate_moments(augment_matrix(L), ClassPrior.from_balance(0.5), G)
        acc = estimate_accuracies(me, enumerate_triplets(G), G, RunConfig())
        perm = np.array([2, 0, 3, 1])
        Lp = LabelMatrix(L.votes[:, perm])
        mep = estimate_moments(augment_matrix(Lp), ClassPrior.from_balance(0.5), G)
        accp = estimate_accuracies(mep, enumerate_triplets(G), G, RunConfig())
        np.testing.assert_allclose(accp.per_source, acc.per_source[perm], atol=1e-12)

    def test_greedy_mode_covers_all_columns(self):
        g = star(5)
        th = random_model(g, seed=10)
        j = enumerate_joint(th)
        me = j.moment_estimates()
        G = augment_graph(g)
        acc = estimate_accuracies(me, enumerate_triplets(G), G,
                                  RunConfig(greedy_triplets=True))
        truth = j.accuracies()
        np.testing.assert_allclose(acc.per_source, truth, atol=1e-10)

    def test_cross_task_triples_stay_exact(self):
        # a task group with only two independent sources must borrow the third
        # triple member from a correlated task; on exact moments the recovered
        # accuracies still match the enumerated truth
        from votefuse.graph import DependencyGraph, validate_graph
        g = validate_graph(DependencyGraph(2, 5, (0, 0, 1, 1, 1),
                                           task_edges=((0, 1),)))
        G = augment_graph(g)
        plan = enumerate_triplets(G, RunConfig())
        assert 0 in plan.partners  # solvable despite the two-source group
        for seed in range(4):
            j = enumerate_joint(random_model(g, seed=seed))
            acc = estimate_accuracies(j.moment_estimates(), plan, G, RunConfig())
            np.testing.assert_allclose(acc.per_source, j.accuracies(), atol=1e-10)

    def test_error_shrinks_with_sample_size(self):
        g = star(4)
        a = np.array([0.5, 0.6, 0.7, 0.8])
        th = CanonicalParameters(graph=g, theta_task=(0.0,),
                                 theta_acc=tuple(np.arctanh(a)), abstaining=False)
        j = enumerate_joint(th)
        truth = j.accuracies()
        G = augment_graph(g)
        plan = enumerate_triplets(G)

        def err(n, seed):
            L, _ = sample(j, n, seed)
            me = estimate_moments(augment_matrix(L), j.prior(), G)
            acc = estimate_accuracies(me, plan, G, RunConfig())
            return np.linalg.norm(acc.per_source - truth)

        small = np.mean([err(2_000, s) for s in range(8)])
        big = np.mean([err(32_000, 100 + s) for s in range(8)])
        assert big < small
