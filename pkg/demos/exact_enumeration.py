"""The exact enumerator that backs every numerical claim in the test suite.

For models small enough to enumerate, every moment, marginal table and
posterior can be integrated exactly, so the estimation pipeline can be
checked end to end: feed it exact moments and it must reproduce the exact
tables; feed it samples and its error must shrink at the root-n rate.
"""

import numpy as np

from votefuse import (
    RunConfig,
    enumerate_joint,
    random_model,
    recover_from_moments,
    recover_parameters,
    sample,
)
from votefuse.graph import DependencyGraph, build_junction_tree, validate_graph

g = validate_graph(DependencyGraph(n_tasks=1, n_sources=5,
                                   assignment=(0,) * 5,
                                   source_edges=((0, 1),)))
model = random_model(g, seed=3)
joint = enumerate_joint(model)
print(f"enumerated {joint.p_full.size} configurations; "
      f"mass check: {joint.collapsed.sum():.15f}")

jt = build_junction_tree(g)
truth = joint.true_parameters(jt)
print(f"maximal cliques: {[c.label() for c in jt.cliques]}")
print(f"separators (degree): "
      f"{[(s.label(), d) for s, d in jt.separators]}")

# closed loop on exact moments: the pipeline must reproduce the exact tables
mu = recover_from_moments(joint.moment_estimates(), g, RunConfig())
worst = max(float(np.max(np.abs(mu.cliques[vs] - truth.cliques[vs])))
            for vs in jt.cliques)
print(f"\nrecovery on exact moments: max table error {worst:.2e}")

# sampled error shrinks like 1/sqrt(n)
print("\nsampled recovery error vs sample size (5 seeds each):")
for n in (2_000, 8_000, 32_000, 128_000):
    errs = []
    for seed in range(5):
        L, _ = sample(joint, n, seed=seed)
        fit = recover_parameters(L, g, joint.prior(), RunConfig())
        errs.append(max(float(np.max(np.abs(fit.cliques[vs] - truth.cliques[vs])))
                        for vs in jt.cliques))
    print(f"  n={n:>7}: mean max-entry error {np.mean(errs):.4f}")
print("\nQuadrupling n roughly halves the error, as the closed-form "
      "estimator's\nsampling noise predicts.")
