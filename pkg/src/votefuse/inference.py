"""Joint and posterior probabilities from recovered marginal tables.

The joint over (tasks, votes) is the junction-tree product: clique marginals
multiplied together, divided by each separator marginal raised to one less
than its adjacency degree. Posteriors enumerate the task configurations
exactly (the task count is capped low enough for that to be cheap) and
normalize per vote row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .config import RunConfig
from .errors import (
    AllZeroLikelihood,
    DegenerateClass,
    ShapeMismatch,
)
from .graph import (
    ClassPrior,
    DependencyGraph,
    JunctionTree,
    LabelMatrix,
    LabelModelParameters,
    MAX_EXACT_TASKS,
    TASK_IDX,
    VOTE_IDX,
    VarSet,
)


@dataclass
class InferenceDiagnostics:
    zero_separators: List[dict] = field(default_factory=list)


@dataclass(frozen=True)
class PosteriorLabels:
    """Per-sample, per-task P(Y_d = 1 | vote row), usable as training labels."""

    probs: np.ndarray  # n x D in [0, 1]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 2:
            raise ValueError("posterior probabilities must be n x D")
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    def thresholded(self) -> np.ndarray:
        """Hard +/-1 labels (ties resolve to +1)."""
        return np.where(self.probs >= 0.5, 1, -1).astype(np.int8)


def _clique_factor(table: np.ndarray, vs: VarSet, y, lam) -> float:
    idx = tuple(TASK_IDX[int(y[d])] for d in vs.tasks) + \
          tuple(VOTE_IDX[int(lam[i])] for i in vs.sources)
    return float(table[idx])


def joint_probability(mu: LabelModelParameters, jt: JunctionTree,
                      y: Sequence[int], lam: Sequence[int],
                      diag: Optional[InferenceDiagnostics] = None) -> float:
    """P(Y = y, votes = lam) via the junction-tree product.

    A zero clique factor makes the joint zero outright. A zero separator
    factor with every adjacent clique factor zero is also a plain zero; a zero
    separator under nonzero cliques is a 0/0 ambiguity, resolved to zero with
    a diagnostic record.
    """
    factors = {}
    for vs in jt.cliques:
        f = _clique_factor(mu.cliques[vs], vs, y, lam)
        if f == 0.0:
            return 0.0
        factors[vs] = f
    log_p = 0.0
    for vs, f in factors.items():
        log_p += np.log(f)
    for sep, deg in jt.separators:
        fs = _clique_factor(mu.separators[sep], sep, y, lam)
        if fs == 0.0:
            if diag is not None:
                diag.zero_separators.append(
                    {"separator": sep.label(), "y": tuple(int(v) for v in y),
                     "lam": tuple(int(v) for v in lam)})
            return 0.0
        log_p -= (deg - 1) * np.log(fs)
    return float(np.exp(log_p))


def _task_configs(D: int) -> np.ndarray:
    """All +/-1 task configurations, shape (2^D, D), matching C-order over
    task state indices (so config g corresponds to flat index g)."""
    grids = np.indices((2,) * D).reshape(D, -1).T
    return np.where(grids == 0, 1, -1).astype(np.int8)


def posterior(mu: LabelModelParameters, jt: JunctionTree, prior: ClassPrior,
              lam: Sequence[int],
              diag: Optional[InferenceDiagnostics] = None) -> np.ndarray:
    """P(Y | votes) over {-1,+1}^D, returned as a table with axes (2,)*D.

    Exact enumeration over task configurations; the result sums to one. The
    prior argument is kept for interface symmetry (the tables already embed
    it) and only checked for shape.
    """
    D = mu.graph.n_tasks
    if prior.n_tasks != D:
        raise ShapeMismatch(f"prior covers {prior.n_tasks} tasks, model has {D}")
    if D > MAX_EXACT_TASKS:
        raise ShapeMismatch(f"exact enumeration caps at {MAX_EXACT_TASKS} tasks")
    configs = _task_configs(D)
    joint = np.array([joint_probability(mu, jt, cfg, lam, diag) for cfg in configs])
    total = joint.sum()
    if total <= 0.0:
        raise AllZeroLikelihood(
            f"every task configuration has zero probability for votes "
            f"{tuple(int(v) for v in lam)}"
        )
    return (joint / total).reshape((2,) * D)


def marginal_positives(post_table: np.ndarray) -> np.ndarray:
    """P(Y_d = 1) per task from a posterior table."""
    D = post_table.ndim
    return np.array([post_table.take(0, axis=d).sum() for d in range(D)])


def predict_proba(L: LabelMatrix, mu: LabelModelParameters, jt: JunctionTree,
                  prior: ClassPrior) -> PosteriorLabels:
    """Row-wise posterior marginals P(Y_d = 1 | row); deterministic.

    Vectorized over rows: per task configuration, log clique factors are
    gathered per clique with fancy indexing, so cost scales with
    2^D * (#cliques) row-length gathers rather than per-row python work.
    """
    if L.m != mu.graph.n_sources:
        raise ShapeMismatch(
            f"matrix has {L.m} sources, model expects {mu.graph.n_sources}"
        )
    D = mu.graph.n_tasks
    n = L.n
    if n == 0:
        return PosteriorLabels(np.zeros((0, D)))
    if D > MAX_EXACT_TASKS:
        raise ShapeMismatch(f"exact enumeration caps at {MAX_EXACT_TASKS} tasks")

    state = (1 - L.votes.astype(np.intp))  # vote -> state index, n x m
    configs = _task_configs(D)
    n_cfg = configs.shape[0]
    log_joint = np.zeros((n_cfg, n))

    with np.errstate(divide="ignore"):
        for gi in range(n_cfg):
            y_idx = np.unravel_index(gi, (2,) * D)
            acc = np.zeros(n)
            for vs in jt.cliques:
                tbl = mu.cliques[vs]
                t_idx = tuple(y_idx[d] for d in vs.tasks)
                sub = tbl[t_idx]  # table over this clique's source axes
                if vs.sources:
                    cols = tuple(state[:, i] for i in vs.sources)
                    acc += np.log(sub[cols])
                else:
                    acc += np.log(float(sub))
            for sep, deg in jt.separators:
                tbl = mu.separators[sep]
                t_idx = tuple(y_idx[d] for d in sep.tasks)
                sub = tbl[t_idx] if sep.tasks else tbl
                if sep.sources:
                    cols = tuple(state[:, i] for i in sep.sources)
                    acc -= (deg - 1) * np.log(sub[cols])
                else:
                    acc -= (deg - 1) * np.log(float(sub))
            log_joint[gi] = acc

    peak = log_joint.max(axis=0)
    dead = ~np.isfinite(peak)
    if np.any(dead):
        raise AllZeroLikelihood(
            f"every task configuration has zero probability for row "
            f"{int(np.nonzero(dead)[0][0])}"
        )
    w = np.exp(log_joint - peak)
    w /= w.sum(axis=0)

    probs = np.empty((n, D))
    cfg_pos = configs == 1  # (n_cfg, D)
    for d in range(D):
        probs[:, d] = w[cfg_pos[:, d]].sum(axis=0)
    return PosteriorLabels(probs)


def majority_vote(L: LabelMatrix) -> np.ndarray:
    """Baseline +/-1 labels from the vote sums (ties and all-abstain go to +1)."""
    s = L.votes.sum(axis=1)
    return np.where(s >= 0, 1, -1).astype(np.int8)


# ---------------------------------------------------------------------------
# one-vs-all multiclass reduction
# ---------------------------------------------------------------------------

@dataclass
class OneVsAllResult:
    models: List[LabelModelParameters]
    jtree: JunctionTree
    class_probs: np.ndarray  # n x k, rows sum to 1

    def argmax_class(self) -> np.ndarray:
        """Most probable class per row, 1-based."""
        return np.argmax(self.class_probs, axis=1) + 1


def reduce_one_vs_rest(votes_multi: np.ndarray, cls: int) -> LabelMatrix:
    """Map class ``cls`` votes to +1, other class votes to -1, abstains stay 0."""
    v = np.asarray(votes_multi)
    out = np.where(v == cls, 1, np.where(v == 0, 0, -1)).astype(np.int8)
    return LabelMatrix(out)


def one_vs_all(votes_multi: np.ndarray, g: DependencyGraph,
               class_priors: Sequence[float],
               cfg: RunConfig = RunConfig()) -> OneVsAllResult:
    """k binary fits, one class against the rest, fused by renormalizing the
    per-class positive posteriors across classes.

    ``votes_multi`` holds integer class votes 1..k with 0 meaning abstain;
    only single-task graphs are supported. The per-row renormalization is a
    pragmatic fusion choice, not the only possible one.
    """
    from .recovery import recover_parameters  # deferred to avoid an import cycle

    if g.n_tasks != 1:
        raise ShapeMismatch("the one-vs-all reduction supports a single task")
    v = np.asarray(votes_multi)
    k = len(class_priors)
    if k < 2:
        raise ValueError("need at least two classes")
    present = set(np.unique(v)) - {0}
    if not present <= set(range(1, k + 1)):
        raise ValueError(f"votes contain labels outside 1..{k}")
    for c in range(1, k + 1):
        if c not in present:
            raise DegenerateClass(f"class {c} never receives a vote")

    priors = np.asarray(class_priors, dtype=np.float64)
    models = []
    cols = []
    jtree = None
    for c in range(1, k + 1):
        Lc = reduce_one_vs_rest(v, c)
        prior_c = ClassPrior.from_balance(float(priors[c - 1]))
        mu = recover_parameters(Lc, g, prior_c, cfg)
        jtree = mu.jtree
        post = predict_proba(Lc, mu, jtree, prior_c)
        models.append(mu)
        cols.append(post.probs[:, 0])
    raw = np.stack(cols, axis=1)
    totals = raw.sum(axis=1, keepdims=True)
    flat = totals[:, 0] <= 0.0
    if np.any(flat):
        raw[flat] = priors
        totals[flat] = priors.sum()
    return OneVsAllResult(models=models, jtree=jtree, class_probs=raw / totals)
