"""Streaming estimation under drift: rolling window vs cumulative averages.

Source accuracies invert every 2,000 steps. A windowed estimator tracks the
flips; cumulative averages wash out and the posterior degrades. Under zero
drift the ordering reverses, and a window sweep exposes the tradeoff.
"""

import warnings

import numpy as np

from votefuse import ClassPrior, DriftStream, RunConfig, star_graph, sweep_window
from votefuse.online import run_stream
from votefuse.oracle import CanonicalParameters

warnings.filterwarnings("ignore")

g = star_graph(5)
targets = np.linspace(0.55, 0.85, 5)
base = CanonicalParameters(graph=g,
                           theta_task=(np.arctanh(0.3),),   # P(Y=1) = 0.65
                           theta_acc=tuple(np.arctanh(targets)),
                           abstaining=False)
prior = ClassPrior.from_balance(0.65)

# sign flips are invisible to second moments, so the flip detector needs the
# first moments: the ratio-anchor strategy reads the sign of E[v]/E[Y]
cfg = RunConfig(sign_strategy="ratio-anchor")

print("--- accuracies invert every 2,000 steps -------------------------")
drift = DriftStream(base=base, n_steps=6_000, seed=0, flip_period=2_000)
for label, window in (("rolling window W=500", 500), ("cumulative", None)):
    res = run_stream(drift, window, cfg, prior, warmup=200)
    print(f"  {label:>22}: mean |posterior - truth| = "
          f"{res['posterior_error']:.4f}")

print("\n--- stationary stream --------------------------------------------")
calm = DriftStream(base=base, n_steps=3_000, seed=1, flip_period=None)
for label, window in (("rolling window W=500", 500), ("cumulative", None)):
    res = run_stream(calm, window, cfg, prior, warmup=200)
    print(f"  {label:>22}: mean |posterior - truth| = "
          f"{res['posterior_error']:.4f}")

print("\n--- window sweep under moderate drift (flip every 1,000) ---------")
mod = DriftStream(base=base, n_steps=4_000, seed=2, flip_period=1_000)
res = sweep_window(mod, [25, 120, 500, 2_000], cfg, prior=prior, warmup=25)
for w in sorted(res["errors"]):
    marker = "  <- best" if w == res["best_window"] else ""
    print(f"  W={w:>5}: mean parameter error {res['errors'][w]:.3f}{marker}")
print("\nToo small a window is noise-dominated, too large drags in stale "
      "regimes;\nthe sweep finds the interior compromise.")
