"""Three-way classification by repeated one-vs-rest reduction.

Sources vote for one of three classes (or abstain). Each class gets a binary
fit of "this class against the rest"; the per-class positive posteriors are
renormalized into a class distribution per row.
"""

import numpy as np

from votefuse import RunConfig, one_vs_all, star_graph

rng = np.random.default_rng(7)
k, n, m = 3, 30_000, 4
q = np.array([0.85, 0.55, 0.5, 0.5])    # P(vote = true class)
r = np.array([0.05, 0.2, 0.25, 0.2])    # P(abstain)

truth = rng.integers(1, k + 1, n)
votes = np.zeros((n, m), dtype=np.int8)
for i in range(m):
    u = rng.random(n)
    correct = u < q[i]
    abstain = (u >= q[i]) & (u < q[i] + r[i])
    wrong = ~(correct | abstain)
    votes[correct, i] = truth[correct]
    votes[wrong, i] = (truth[wrong] - 1 + rng.integers(1, k, int(wrong.sum()))) % k + 1

result = one_vs_all(votes, star_graph(m), class_priors=[1 / 3] * 3,
                    cfg=RunConfig())
pred = result.argmax_class()
print(f"fitted {len(result.models)} one-vs-rest binary models")
print(f"accuracy of the fused argmax: {(pred == truth).mean():.4f}")

vote_counts = np.stack([(votes == c).sum(axis=1) for c in range(1, k + 1)], axis=1)
plurality = np.argmax(vote_counts, axis=1) + 1
print(f"accuracy of plurality vote:   {(plurality == truth).mean():.4f}")

print("\nper-row class distributions (first rows):")
for row in range(4):
    probs = ", ".join(f"{p:.3f}" for p in result.class_probs[row])
    print(f"  votes {votes[row]} -> [{probs}]  true class {truth[row]}")
