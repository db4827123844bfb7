"""Correlated sources: why the dependency edge matters.

Two of four sources copy each other's mistakes. Modeling the edge keeps the
pair from being double-counted; ignoring it overweights their shared vote.
"""

from votefuse import (
    DependencyGraph,
    RunConfig,
    enumerate_joint,
    predict_proba,
    random_model,
    recover_parameters,
    sample,
)

g_dep = DependencyGraph(n_tasks=1, n_sources=4, assignment=(0, 0, 0, 0),
                        source_edges=((0, 1),))
g_naive = DependencyGraph(n_tasks=1, n_sources=4, assignment=(0, 0, 0, 0))

model = random_model(g_dep, seed=42)
model = type(model)(graph=g_dep, theta_task=(0.1,),
                    theta_acc=(0.5, 0.5, 0.6, 0.7),
                    theta_abstain=(0.0, 0.0, 0.1, -0.1),
                    theta_dep={(0, 1): 0.6})           # strongly coupled pair
joint = enumerate_joint(model)
votes, hidden = sample(joint, n=60_000, seed=1)
y = hidden[:, 0]
prior = joint.prior()

pair_agree = (votes.votes[:, 0] == votes.votes[:, 1]).mean()
print(f"sources 1 and 2 agree on {pair_agree:.0%} of rows "
      f"(far above what their accuracies alone explain)")

for name, g in (("with the edge", g_dep), ("edge ignored", g_naive)):
    mu = recover_parameters(votes, g, prior, RunConfig())
    post = predict_proba(votes, mu, mu.jtree, prior)
    acc = (post.thresholded()[:, 0] == y).mean()
    cliques = sorted(c.label() for c in mu.cliques)
    print(f"\n{name}: cliques {cliques}")
    print(f"  label agreement with hidden truth: {acc:.4f}")

print("\nThe joint clique over the coupled pair absorbs their shared errors;"
      "\nwithout it they are treated as two independent confirmations.")
