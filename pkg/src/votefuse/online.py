"""Rolling-window re-estimation interleaved with per-sample labeling.

Every statistic the recovery stage consumes is a plain average, so a window
of size W is maintained by adding the newest augmented row's contributions
and subtracting the evicted row's. Fitting a step is then the same
closed-form solve as the batch path, on the windowed averages; per-step cost
does not grow with the stream length.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .augment import AbstainPolicy, augment_graph, augment_row
from .config import RunConfig
from .errors import EstimationWarning, VoteFuseError
from .graph import ClassPrior, DependencyGraph, LabelModelParameters, build_junction_tree, validate_graph
from .inference import marginal_positives, posterior
from .moments import RunningStats, enumerate_triplets
from .recovery import recover_from_moments


@dataclass
class StepResult:
    params: Optional[LabelModelParameters]
    posterior_pos: np.ndarray  # P(Y_d = 1 | current row) per task
    warmup: bool
    stale: bool
    t: int


class RollingState:
    """Single-writer streaming estimator state.

    Keeps the last W raw and augmented rows in ring buffers plus running
    integer sums of every windowed statistic. ``window=None`` means cumulative
    estimation (never evict). Parameters recovered at each step are immutable
    snapshots; on a failed window the last valid snapshot is reused and the
    step is flagged stale.
    """

    def __init__(self, g: DependencyGraph, cfg: RunConfig = RunConfig(),
                 window: Optional[int] = None, warmup: Optional[int] = None):
        self.graph = validate_graph(g)
        self.cfg = cfg
        self.window = window if window is not None else cfg.window
        m = self.graph.n_sources
        default_warmup = max(100, 10 * m)
        self.warmup = warmup if warmup is not None else (cfg.warmup or default_warmup)
        if self.window is not None and self.warmup > self.window:
            self.warmup = self.window
        self.jtree = build_junction_tree(self.graph)
        self.aug_graph = augment_graph(self.graph)
        self.plan = enumerate_triplets(self.aug_graph, cfg)
        tracked = self.graph.source_edges
        cond = tuple(sorted({s for e in tracked for s in e}))
        self.stats = RunningStats(m, tracked, cond)
        self.t = 0
        self.abstain_ordinals = np.zeros(m, dtype=np.int64)
        cap = self.window if self.window is not None else 0
        self._votes_buf: List[np.ndarray] = []
        self._aug_buf: List[np.ndarray] = []
        self._cap = cap
        self.last_params: Optional[LabelModelParameters] = None
        self.stale_steps = 0
        self._stale_warned = False

    # -- bookkeeping -----------------------------------------------------------

    @property
    def buffered(self) -> int:
        return len(self._votes_buf)

    def window_rows(self) -> np.ndarray:
        """Raw vote rows currently inside the window (oldest first)."""
        if not self._votes_buf:
            return np.zeros((0, self.graph.n_sources), dtype=np.int8)
        return np.stack(self._votes_buf)

    def window_policy(self) -> AbstainPolicy:
        """A policy whose per-column phase reproduces this stream's abstain
        fill-ins for the buffered rows, so a batch augmentation of
        ``window_rows()`` matches the stream bit for bit."""
        in_buf = np.zeros(self.graph.n_sources, dtype=np.int64)
        for row in self._votes_buf:
            in_buf += row == 0
        phase = self.abstain_ordinals - in_buf
        return AbstainPolicy(mode=self.cfg.policy.mode, seed=self.cfg.policy.seed,
                             phase=tuple(int(p) for p in phase))

    # -- the step ---------------------------------------------------------------

    def step(self, lam_t: Sequence[int], prior_t: ClassPrior) -> StepResult:
        row = np.asarray(lam_t, dtype=np.int8)
        if row.shape != (self.graph.n_sources,):
            raise ValueError(f"expected {self.graph.n_sources} votes, got {row.shape}")
        aug = augment_row(row, self.cfg.policy, self.abstain_ordinals)
        self.stats.add(aug, row)
        self._votes_buf.append(row)
        self._aug_buf.append(aug)
        if self._cap and len(self._votes_buf) > self._cap:
            old_votes = self._votes_buf.pop(0)
            old_aug = self._aug_buf.pop(0)
            self.stats.remove(old_aug, old_votes)
        self.t += 1

        prior_pos = np.array([prior_t.p_pos(d) for d in range(self.graph.n_tasks)])
        if self.t < self.warmup:
            return StepResult(params=None, posterior_pos=prior_pos, warmup=True,
                              stale=False, t=self.t)

        fresh = None
        failure = None
        try:
            # estimator degradation warnings would repeat every step; the
            # per-step diagnostics on the returned parameters carry the same
            # information
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EstimationWarning)
                moments = self.stats.to_moments(prior_t)
                fresh = recover_from_moments(
                    moments, self.graph, self.cfg,
                    jtree=self.jtree, G=self.aug_graph, plan=self.plan,
                )
        except VoteFuseError as exc:
            failure = exc

        # Degrade rather than interrupt the stream: a failed window (or a row
        # the fresh tables assign zero mass) falls back to the last valid
        # parameters, and to the prior if even those cannot score the row.
        for params, is_stale in ((fresh, False), (self.last_params, True)):
            if params is None:
                continue
            try:
                post = posterior(params, self.jtree, prior_t, row)
            except VoteFuseError as exc:
                failure = failure or exc
                continue
            if is_stale:
                self._note_stale(failure)
                params.diagnostics.stale = True
            else:
                self.last_params = params
            return StepResult(params=params,
                              posterior_pos=marginal_positives(post),
                              warmup=False, stale=is_stale, t=self.t)

        self._note_stale(failure)
        return StepResult(params=None, posterior_pos=prior_pos, warmup=False,
                          stale=True, t=self.t)

    def _note_stale(self, failure) -> None:
        self.stale_steps += 1
        if not self._stale_warned:
            warnings.warn(
                f"window fit unusable at step {self.t} ({failure}); degrading "
                f"to stale parameters or the prior (warning once; see "
                f"StepResult.stale)",
                EstimationWarning,
            )
            self._stale_warned = True


def step(state: RollingState, lam_t: Sequence[int], prior_t: ClassPrior) -> StepResult:
    """Functional alias for :meth:`RollingState.step`."""
    return state.step(lam_t, prior_t)


# ---------------------------------------------------------------------------
# window sweep
# ---------------------------------------------------------------------------

def parameter_error(est: LabelModelParameters, truth: LabelModelParameters) -> float:
    """l2 distance between two parameter sets over all clique and separator tables."""
    diffs = []
    for vs, tbl in est.cliques.items():
        diffs.append((tbl - truth.cliques[vs]).reshape(-1))
    for vs, tbl in est.separators.items():
        diffs.append((tbl - truth.separators[vs]).reshape(-1))
    return float(np.linalg.norm(np.concatenate(diffs)))


def run_stream(stream, window: Optional[int], cfg: RunConfig,
               prior: ClassPrior, warmup: Optional[int] = None,
               score_posterior: bool = True) -> dict:
    """Drive a RollingState over an oracle-backed stream and score it.

    Returns per-step posterior errors |P_hat - P_true| (first task) and
    parameter errors against the regime-true parameters, post warmup.
    """
    state = RollingState(stream.base.graph, cfg, window=window, warmup=warmup)
    post_err, param_err = [], []
    for t in range(stream.n_steps):
        res = state.step(stream.rows[t], prior)
        if res.warmup:
            continue
        if score_posterior:
            truth = stream.true_posterior_pos(t)
            post_err.append(float(np.abs(res.posterior_pos - truth).mean()))
        if res.params is not None:
            param_err.append(parameter_error(res.params, stream.true_parameters_at(t)))
    return {
        "posterior_error": float(np.mean(post_err)) if post_err else float("nan"),
        "parameter_error": float(np.mean(param_err)) if param_err else float("nan"),
        "steps_scored": len(param_err),
    }


def sweep_window(stream, candidate_windows: Sequence[int],
                 cfg: RunConfig = RunConfig(),
                 prior: Optional[ClassPrior] = None,
                 warmup: Optional[int] = None) -> dict:
    """Mean parameter error per candidate window on an oracle-backed stream.

    Returns the error curve and the empirical minimizer; the analytic optimum
    depends on constants that are not observable, so the sweep substitutes.
    """
    if prior is None:
        prior = ClassPrior.from_balance(0.5)
    errors = {}
    for W in candidate_windows:
        res = run_stream(stream, int(W), cfg, prior, warmup=warmup,
                         score_posterior=False)
        errors[int(W)] = res["parameter_error"]
    best = min(sorted(errors), key=lambda w: errors[w])
    return {"errors": errors, "best_window": best}
