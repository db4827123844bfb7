"""Run configuration shared by the batch, streaming and CLI entry points."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from .augment import AbstainPolicy
from .errors import ConfigError

AGG_METHODS = ("mean", "median")
SIGN_STRATEGIES = ("nonnegative-sum", "anchor", "ratio-anchor")


@dataclass(frozen=True)
class RunConfig:
    """Tunables for accuracy estimation and parameter recovery.

    eps_den
        Triplets whose pairwise moments fall below this magnitude are skipped
        as numerically degenerate.
    eps_acc
        Floor for triplet-recovered accuracy magnitudes.
    eps_prior
        Minimum |E[Y]| for the first-moment ratio fallback.
    sign_strategy
        "nonnegative-sum" picks, per task, the sign flip making the accuracy
        sum nonnegative. "anchor" propagates a known sign (set ``anchor_source``
        and ``anchor_sign``). "ratio-anchor" derives the anchor sign from the
        observed first moments and the prior, which lets a windowed estimator
        track accuracy sign inversions when the class balance is not 50/50.
    triplet_cap
        Maximum number of triplets enumerated per observed variable.
    greedy_triplets
        Compatibility mode: one triplet per variable, consumed in a single
        greedy pass, instead of aggregating over all enumerated triplets.
    low_acc_isolation
        Re-estimate every variable excluding the globally least accurate one,
        which is the main driver of triplet noise.
    ratio_fallback
        Allow accuracies to be estimated as E[v]/E[Y] for variables without a
        usable triplet (and permit m < 3 inputs).
    """

    agg_method: str = "mean"
    sign_strategy: str = "nonnegative-sum"
    anchor_source: Optional[int] = None
    anchor_sign: int = 1
    policy: AbstainPolicy = field(default_factory=AbstainPolicy)
    eps_den: float = 1e-4
    eps_acc: float = 1e-3
    eps_prior: float = 1e-2
    triplet_cap: int = 500
    n_min_abstain: int = 50
    ratio_fallback: bool = False
    greedy_triplets: bool = False
    low_acc_isolation: bool = True
    window: Optional[int] = None
    warmup: Optional[int] = None
    threads: int = 1

    def __post_init__(self):
        if self.agg_method not in AGG_METHODS:
            raise ConfigError(f"unknown aggregation method {self.agg_method!r}")
        if self.sign_strategy not in SIGN_STRATEGIES:
            raise ConfigError(f"unknown sign strategy {self.sign_strategy!r}")
        if self.sign_strategy == "anchor" and self.anchor_source is None:
            raise ConfigError("anchor strategy needs anchor_source")
        if self.anchor_sign not in (-1, 1):
            raise ConfigError("anchor_sign must be +1 or -1")
        for name in ("eps_den", "eps_acc", "eps_prior"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.triplet_cap < 1:
            raise ConfigError("triplet_cap must be at least 1")
        if self.window is not None and self.window < 1:
            raise ConfigError("window must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        """Build a config from a plain dict, rejecting unknown keys."""
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)
