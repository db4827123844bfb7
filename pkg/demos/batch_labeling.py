"""Fuse five noisy voting sources into probabilistic labels, end to end.

We simulate a single hidden binary label and five sources of varying quality
that sometimes abstain, fit the label model without ever showing it the
hidden labels, and compare its output against majority vote.
"""

import numpy as np

from votefuse import (
    CanonicalParameters,
    RunConfig,
    enumerate_joint,
    majority_vote,
    predict_proba,
    recover_parameters,
    sample,
    star_graph,
)

# --- build a ground-truth model and sample votes from it --------------------
g = star_graph(5)
truth_acc = np.array([0.45, 0.55, 0.65, 0.75, 0.85])   # E[vote * label] targets
model = CanonicalParameters(
    graph=g,
    theta_task=(np.arctanh(0.2),),                     # P(Y=1) = 0.6
    theta_acc=tuple(np.arctanh(truth_acc)),
    theta_abstain=(0.2, 0.0, -0.1, 0.1, 0.0),
)
joint = enumerate_joint(model)
votes, hidden = sample(joint, n=50_000, seed=0)
print(f"sampled {votes.n} rows from {votes.m} sources; "
      f"abstain rates {np.round((votes.votes == 0).mean(axis=0), 2)}")

# --- fit: the model sees only the votes and the class prior -----------------
prior = joint.prior()
mu = recover_parameters(votes, g, prior, RunConfig())
print("\nfitted accuracies vs truth:")
true_acc = joint.accuracies()
for i, vs in enumerate(sorted(mu.cliques, key=lambda v: v.sources)):
    tbl = mu.cliques[vs]
    # read E[lambda Y] back out of the fitted table
    est = tbl[0, 0] - tbl[1, 0] - tbl[0, 2] + tbl[1, 2]
    print(f"  source {i + 1}: fitted {est:+.3f}   true {true_acc[i]:+.3f}")

# --- label and score ---------------------------------------------------------
post = predict_proba(votes, mu, mu.jtree, prior)
fused = post.thresholded()[:, 0]
mv = majority_vote(votes)
y = hidden[:, 0]
print(f"\nagreement with the hidden labels:")
print(f"  fused posteriors: {(fused == y).mean():.4f}")
print(f"  majority vote:    {(mv == y).mean():.4f}")
print(f"\nfirst rows (votes -> P(Y=1)):")
for r in range(5):
    print(f"  {votes.votes[r]} -> {post.probs[r, 0]:.3f}   (true Y = {y[r]:+d})")
