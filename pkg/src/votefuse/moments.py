"""Observable moments and closed-form recovery of unobservable source accuracies.

The accuracy of observed column ``a`` is E[v_a Y(a)], the scaled correlation
with its hidden task. For three columns that are pairwise conditionally
independent given the anchor's task, each pairwise product moment factors into
a product of two accuracies, so three observable agreement rates determine the
three magnitudes in closed form:

    |a_i| = sqrt(|M_ij * M_ik / M_jk|),   M_ab = E[v_a v_b].

Signs are recovered separately: per task, either by picking the global flip
with a nonnegative accuracy sum, by propagating one anchored sign through the
pairwise products, or by agreeing with the first moments E[v] = a * E[Y].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .augment import AugmentedGraph
from .config import RunConfig
from .errors import (
    DegenerateTriplet,
    EstimationWarning,
    InsufficientIndependence,
    NoUsableTriplet,
    PriorNearZero,
    AnchorUnreachable,
    TooFewAbstainRows,
)
from .graph import AugmentedLabelMatrix, ClassPrior

_EXACT_F32_LIMIT = 1 << 24  # +/-1 dot products stay integral in float32 below this n


# ---------------------------------------------------------------------------
# sufficient statistics (shared by the batch and streaming paths)
# ---------------------------------------------------------------------------

class RunningStats:
    """Integer-exact sufficient statistics over a set of augmented rows.

    Holds everything parameter recovery consumes: pairwise products and first
    moments of the augmented columns, per-source vote histograms, vote
    cross-tabs for tracked source pairs, and abstain-restricted copies of the
    pairwise sums for tracked conditioning sources. Rows can be added and
    removed, so a rolling window maintains the same statistics the batch path
    computes, bit for bit.
    """

    def __init__(self, m: int,
                 tracked_pairs: Iterable[Tuple[int, int]] = (),
                 cond_sources: Iterable[int] = ()):
        self.m = m
        self.n = 0
        c = 2 * m
        self.second = np.zeros((c, c), dtype=np.int64)
        self.first = np.zeros(c, dtype=np.int64)
        self.vote_counts = np.zeros((m, 3), dtype=np.int64)
        self.tracked_pairs = tuple(sorted({(min(a, b), max(a, b)) for a, b in tracked_pairs}))
        self.pair_counts = {p: np.zeros((3, 3), dtype=np.int64) for p in self.tracked_pairs}
        self.cond_sources = tuple(sorted(set(cond_sources)))
        self.cond_second = {i: np.zeros((c, c), dtype=np.int64) for i in self.cond_sources}
        self.cond_first = {i: np.zeros(c, dtype=np.int64) for i in self.cond_sources}
        self.cond_n = {i: 0 for i in self.cond_sources}

    @staticmethod
    def _vote_idx(votes_row: np.ndarray) -> np.ndarray:
        return (1 - votes_row).astype(np.intp)  # +1 -> 0, 0 -> 1, -1 -> 2

    def _apply(self, aug_row: np.ndarray, votes_row: np.ndarray, sign: int) -> None:
        a64 = aug_row.astype(np.int64)
        outer = np.outer(a64, a64)
        self.second += sign * outer
        self.first += sign * a64
        vi = self._vote_idx(votes_row)
        for j in range(self.m):
            self.vote_counts[j, vi[j]] += sign
        for (p, q) in self.tracked_pairs:
            self.pair_counts[(p, q)][vi[p], vi[q]] += sign
        for i in self.cond_sources:
            if votes_row[i] == 0:
                self.cond_second[i] += sign * outer
                self.cond_first[i] += sign * a64
                self.cond_n[i] += sign
        self.n += sign

    def add(self, aug_row: np.ndarray, votes_row: np.ndarray) -> None:
        self._apply(aug_row, votes_row, 1)

    def remove(self, aug_row: np.ndarray, votes_row: np.ndarray) -> None:
        self._apply(aug_row, votes_row, -1)

    @classmethod
    def from_matrix(cls, A: AugmentedLabelMatrix, votes: np.ndarray,
                    tracked_pairs=(), cond_sources=()) -> "RunningStats":
        st = cls(A.m, tracked_pairs, cond_sources)
        st.n = A.n
        data = A.data
        st.second = _exact_gram(data)
        st.first = data.sum(axis=0, dtype=np.int64)
        vi = cls._vote_idx(votes)
        for j in range(A.m):
            st.vote_counts[j] = np.bincount(vi[:, j], minlength=3)
        for (p, q) in st.tracked_pairs:
            flat = vi[:, p] * 3 + vi[:, q]
            st.pair_counts[(p, q)] = np.bincount(flat, minlength=9).reshape(3, 3)
        for i in st.cond_sources:
            rows = votes[:, i] == 0
            sub = data[rows]
            st.cond_second[i] = _exact_gram(sub)
            st.cond_first[i] = sub.sum(axis=0, dtype=np.int64)
            st.cond_n[i] = int(rows.sum())
        return st

    def to_moments(self, prior: ClassPrior) -> "MomentEstimates":
        if self.n < 1:
            raise ValueError("no rows accumulated")
        n = float(self.n)
        conditional = {}
        for i in self.cond_sources:
            cn = self.cond_n[i]
            if cn > 0:
                conditional[i] = CondStats(
                    n_rows=cn,
                    M=self.cond_second[i].astype(np.float64) / float(cn),
                    first=self.cond_first[i].astype(np.float64) / float(cn),
                )
        return MomentEstimates(
            n=self.n,
            M=self.second.astype(np.float64) / n,
            first_moments=self.first.astype(np.float64) / n,
            vote_marginals=self.vote_counts.astype(np.float64) / n,
            prior=prior,
            pair_tables={p: c.astype(np.float64) / n for p, c in self.pair_counts.items()},
            conditional=conditional,
        )


def _exact_gram(data: np.ndarray) -> np.ndarray:
    """data.T @ data with integer-exact arithmetic, returned as int64."""
    if data.shape[0] == 0:
        return np.zeros((data.shape[1], data.shape[1]), dtype=np.int64)
    dtype = np.float32 if data.shape[0] < _EXACT_F32_LIMIT else np.float64
    f = data.astype(dtype)
    g = f.T @ f
    return np.rint(g).astype(np.int64)


# ---------------------------------------------------------------------------
# moment estimates
# ---------------------------------------------------------------------------

@dataclass
class CondStats:
    """Moments restricted to rows where one source abstained.

    ``n_rows`` is None when the statistics are exact (oracle-provided).
    """

    M: np.ndarray
    first: np.ndarray
    n_rows: Optional[int] = None


@dataclass
class MomentEstimates:
    """First and second moments of the augmented columns plus vote statistics.

    ``M`` is the 2m x 2m matrix of pairwise products E[v_a v_b]; it is
    symmetric with unit diagonal. ``n`` is None for exact (enumerated)
    moments.
    """

    M: np.ndarray
    first_moments: np.ndarray
    vote_marginals: np.ndarray
    prior: ClassPrior
    n: Optional[int] = None
    pair_tables: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)
    conditional: Dict[int, CondStats] = field(default_factory=dict)

    @property
    def n_columns(self) -> int:
        return self.M.shape[0]

    @property
    def m(self) -> int:
        return self.n_columns // 2

    @property
    def abstain_rates(self) -> np.ndarray:
        """P(lambda_i = 0) per source."""
        return self.vote_marginals[:, 1]

    def p_vote(self, i: int, v: int) -> float:
        return float(self.vote_marginals[i, {1: 0, 0: 1, -1: 2}[v]])

    def pair_table(self, i: int, j: int) -> np.ndarray:
        """3x3 cross-tab P(lambda_i = a, lambda_j = b), rows indexed by i's state."""
        key = (min(i, j), max(i, j))
        tbl = self.pair_tables[key]
        return tbl if i <= j else tbl.T

    def prior_task_mean(self, d: int) -> float:
        return self.prior.task_mean(d)

    def prior_pair_mean(self, d: int, e: int) -> float:
        return self.prior.pair_mean(d, e)


def estimate_moments(A: AugmentedLabelMatrix, prior: ClassPrior,
                     graph: Optional[AugmentedGraph] = None) -> MomentEstimates:
    """Empirical moments of an augmented matrix: M_ab = (1/n) sum_t A_ta A_tb.

    When the dependency graph is supplied, vote cross-tabs are kept for every
    dependent source pair and abstain-restricted moments for every source that
    appears in a dependency edge (both are needed to recover two-source clique
    marginals).
    """
    if A.n < 1:
        raise ValueError("need at least one sample")
    votes = A.collapse().votes
    tracked, cond = (), ()
    if graph is not None:
        tracked = graph.graph.source_edges
        cond = tuple(sorted({s for e in graph.graph.source_edges for s in e}))
    stats = RunningStats.from_matrix(A, votes, tracked, cond)
    return stats.to_moments(prior)


# ---------------------------------------------------------------------------
# triplet enumeration
# ---------------------------------------------------------------------------

@dataclass
class TripletPlan:
    """Per-column lists of valid triplets (stored as partner index pairs).

    A triplet anchored at column ``a`` with partners (j, k) is valid when the
    three columns are pairwise conditionally independent (their sources lie in
    three distinct components of the dependency-edge graph) and at least one
    partner votes on the anchor's task, so that all three pairwise moments
    factor into accuracy products against the anchor's hidden variable.
    """

    n_columns: int
    partners: Dict[int, np.ndarray]   # column -> (T, 2) int array
    fallback: Tuple[int, ...]         # columns with no valid triplet

    @property
    def omega(self) -> Tuple[int, ...]:
        return tuple(sorted(self.partners))

    def triples(self, a: int) -> List[Tuple[int, int, int]]:
        return [(a, int(j), int(k)) for j, k in self.partners.get(a, ())]


def enumerate_triplets(G: AugmentedGraph, cfg: RunConfig = RunConfig()) -> TripletPlan:
    """All valid triplets per observed column, lexicographic, capped per column."""
    n_cols = G.n_columns
    g = G.graph
    task = [g.assignment[c >> 1] for c in range(n_cols)]
    comp = G.source_components()
    cap = cfg.triplet_cap
    partners: Dict[int, np.ndarray] = {}
    fallback: List[int] = []
    for a in range(n_cols):
        ca = comp[a >> 1]
        ta = task[a]
        found: List[Tuple[int, int]] = []
        for j in range(n_cols):
            if j == a or comp[j >> 1] == ca:
                continue
            cj = comp[j >> 1]
            j_on_task = task[j] == ta
            for k in range(j + 1, n_cols):
                if k == a:
                    continue
                ck = comp[k >> 1]
                if ck == ca or ck == cj:
                    continue
                if not j_on_task and task[k] != ta:
                    continue
                found.append((j, k))
                if len(found) >= cap:
                    break
            if len(found) >= cap:
                break
        if found:
            partners[a] = np.asarray(found, dtype=np.intp)
        else:
            fallback.append(a)
    if not partners and not cfg.ratio_fallback:
        raise InsufficientIndependence(
            "no observed variable admits a conditionally independent triplet; "
            "enable the ratio fallback or revise the dependency graph"
        )
    return TripletPlan(n_columns=n_cols, partners=partners, fallback=tuple(fallback))


# ---------------------------------------------------------------------------
# triplet solving and aggregation
# ---------------------------------------------------------------------------

def solve_triplet(M: np.ndarray, t: Tuple[int, int, int],
                  eps_den: float = 1e-4, eps_acc: float = 1e-3) -> Tuple[float, float, float]:
    """Magnitudes (|a_i|, |a_j|, |a_k|) from one triplet's pairwise moments."""
    i, j, k = t
    mij, mik, mjk = float(M[i, j]), float(M[i, k]), float(M[j, k])
    if min(abs(mij), abs(mik), abs(mjk)) < eps_den:
        raise DegenerateTriplet(
            f"triplet ({i}, {j}, {k}) has a pairwise moment below {eps_den}"
        )
    ai = np.sqrt(abs(mij * mik / mjk))
    aj = np.sqrt(abs(mij * mjk / mik))
    ak = np.sqrt(abs(mik * mjk / mij))
    clip = lambda x: float(min(1.0, max(eps_acc, x)))
    return clip(ai), clip(aj), clip(ak)


def _anchor_magnitudes(M: np.ndarray, a: int, partners: np.ndarray,
                       eps_den: float, eps_acc: float) -> np.ndarray:
    """Vectorized |a_anchor| estimates over a partner array; degenerates dropped."""
    j, k = partners[:, 0], partners[:, 1]
    mij, mik, mjk = M[a, j], M[a, k], M[j, k]
    ok = (np.abs(mij) >= eps_den) & (np.abs(mik) >= eps_den) & (np.abs(mjk) >= eps_den)
    if not np.any(ok):
        return np.empty(0)
    vals = np.sqrt(np.abs(mij[ok] * mik[ok] / mjk[ok]))
    return np.clip(vals, eps_acc, 1.0)


def _reduce(values: np.ndarray, method: str) -> float:
    values = np.sort(values)
    return float(np.mean(values) if method == "mean" else np.median(values))


def aggregate_accuracies(plan: TripletPlan, M: np.ndarray,
                         method: str = "mean",
                         cfg: RunConfig = RunConfig()) -> Tuple[Dict[int, float], Dict[int, dict]]:
    """Accuracy magnitude per column, aggregating over all its triplets.

    Columns whose every triplet is degenerate are omitted from the result so
    the caller can route them to the ratio fallback; with the fallback
    disabled this raises NoUsableTriplet.
    """
    mags: Dict[int, float] = {}
    info: Dict[int, dict] = {}
    for a in sorted(plan.partners):
        vals = _anchor_magnitudes(M, a, plan.partners[a], cfg.eps_den, cfg.eps_acc)
        total = len(plan.partners[a])
        info[a] = {"triplets": total, "used": int(vals.size)}
        if vals.size == 0:
            if not cfg.ratio_fallback:
                raise NoUsableTriplet(
                    f"every triplet for column {a} is degenerate and the ratio "
                    f"fallback is disabled"
                )
            continue
        mags[a] = _reduce(vals, method)

    if cfg.low_acc_isolation and len(mags) > 2:
        worst = min(sorted(mags), key=lambda c: mags[c])
        for a in sorted(plan.partners):
            if a == worst or a not in mags:
                continue
            p = plan.partners[a]
            keep = (p[:, 0] != worst) & (p[:, 1] != worst)
            if not np.any(keep):
                continue
            vals = _anchor_magnitudes(M, a, p[keep], cfg.eps_den, cfg.eps_acc)
            if vals.size:
                mags[a] = _reduce(vals, method)
                info[a]["used_after_isolation"] = int(vals.size)
    return mags, info


def greedy_accuracies(plan: TripletPlan, M: np.ndarray, G: AugmentedGraph,
                      cfg: RunConfig = RunConfig()) -> Tuple[Dict[int, float], Dict[int, dict]]:
    """Single-pass variant: each column keeps the value from the first triplet
    that covers it, and covered columns are skipped as anchors."""
    mags: Dict[int, float] = {}
    info: Dict[int, dict] = {}
    covered = set()
    for a in sorted(plan.partners):
        if a in covered:
            continue
        for (j, k) in map(tuple, plan.partners[a]):
            try:
                xa, xj, xk = solve_triplet(M, (a, j, k), cfg.eps_den, cfg.eps_acc)
            except DegenerateTriplet:
                continue
            mags[a] = xa
            info[a] = {"triplets": 1, "used": 1}
            covered.update((a, j, k))
            if j not in mags and G.task_of(j) == G.task_of(a):
                mags[j] = xj
                info[j] = {"triplets": 1, "used": 1}
            if k not in mags and G.task_of(k) == G.task_of(a):
                mags[k] = xk
                info[k] = {"triplets": 1, "used": 1}
            break
        else:
            if not cfg.ratio_fallback:
                raise NoUsableTriplet(
                    f"every triplet for column {a} is degenerate and the ratio "
                    f"fallback is disabled"
                )
    return mags, info


# ---------------------------------------------------------------------------
# sign resolution
# ---------------------------------------------------------------------------

@dataclass
class Accuracies:
    """Signed accuracy per observed column; column 2i+1 mirrors column 2i.

    Triplet-recovered magnitudes are clamped to [eps_acc, 1]; ratio-fallback
    values may be any value in [-1, 1], including 0 for an uninformative
    source. ``method[c]`` records how column c was estimated.
    """

    values: np.ndarray
    method: Tuple[str, ...]
    diagnostics: dict = field(default_factory=dict)

    @property
    def per_source(self) -> np.ndarray:
        """a_i = E[lambda_i Y], read off the vote-tracking column of each pair."""
        return self.values[0::2]


def _sign_components(group: List[int], M: np.ndarray, G: AugmentedGraph,
                     eps_den: float):
    """Connected components of the sign-constraint graph over one task group.

    Edges join independent column pairs with a usable pairwise moment and
    constrain the sign product to sign(M). Returns (component, pattern) pairs
    where pattern fixes relative signs with the lowest column set positive.
    """
    idx = {c: t for t, c in enumerate(group)}
    adj = {c: [] for c in group}
    for x in range(len(group)):
        for y in range(x + 1, len(group)):
            cx, cy = group[x], group[y]
            if G.columns_dependent(cx, cy):
                continue
            if abs(M[cx, cy]) < eps_den:
                continue
            rel = 1 if M[cx, cy] > 0 else -1
            adj[cx].append((cy, rel))
            adj[cy].append((cx, rel))
    comps = []
    seen = set()
    for c in group:
        if c in seen:
            continue
        pattern = {c: 1}
        stack = [c]
        seen.add(c)
        while stack:
            u = stack.pop()
            for w, rel in adj[u]:
                if w not in pattern:
                    pattern[w] = pattern[u] * rel
                    seen.add(w)
                    stack.append(w)
        comps.append(pattern)
    return comps


def resolve_signs(magnitudes: Dict[int, float], M: np.ndarray, plan: TripletPlan,
                  G: AugmentedGraph, cfg: RunConfig = RunConfig(),
                  first_moments: Optional[np.ndarray] = None,
                  prior: Optional[ClassPrior] = None) -> Tuple[Dict[int, float], dict]:
    """Assign signs to per-source accuracy magnitudes.

    Operates on the vote-tracking (even) columns, grouped per task; relative
    signs inside a group come from the signs of the pairwise moments (two hops
    through a conditionally independent column relate a dependent pair), and
    the remaining global flip per component is fixed by the configured
    strategy.
    """
    diag = {"sign_ties": [], "ratio_anchor_fallbacks": []}
    signed: Dict[int, float] = {}
    anchor_col = 2 * cfg.anchor_source if cfg.anchor_source is not None else None
    for d in range(G.n_tasks):
        group = [c for c in sorted(magnitudes) if c % 2 == 0 and G.task_of(c) == d]
        if not group:
            continue
        components = _sign_components(group, M, G, cfg.eps_den)
        anchored_task = (cfg.sign_strategy == "anchor" and anchor_col in group)
        if anchored_task and len(components) > 1:
            reachable = next(set(p) for p in components if anchor_col in p)
            missing = sorted(set(group) - reachable)
            raise AnchorUnreachable(
                f"sign propagation from source {cfg.anchor_source + 1} cannot "
                f"reach columns {missing}"
            )
        for pattern in components:
            cols = sorted(pattern)
            weights = np.array([pattern[c] * magnitudes[c] for c in cols])

            flip = None
            if anchored_task and anchor_col in pattern:
                flip = cfg.anchor_sign * pattern[anchor_col]
            elif cfg.sign_strategy == "ratio-anchor":
                ey = prior.task_mean(d) if prior is not None else 0.0
                if first_moments is not None and abs(ey) >= cfg.eps_prior:
                    score = float(np.sum(weights * first_moments[cols]))
                    if score != 0.0:
                        flip = 1 if score * ey > 0 else -1
                if flip is None:
                    diag["ratio_anchor_fallbacks"].append(cols[0])
            if flip is None:  # nonnegative-sum
                total = float(np.sum(weights))
                if total == 0.0:
                    diag["sign_ties"].append(cols[0])
                    warnings.warn(
                        f"sign tie for task {d + 1}: accuracy sum is zero under "
                        f"both flips; defaulting to positive",
                        EstimationWarning,
                    )
                    flip = 1
                else:
                    flip = 1 if total > 0 else -1

            for c in cols:
                signed[c] = flip * pattern[c] * magnitudes[c]
    return signed, diag


# ---------------------------------------------------------------------------
# fallbacks
# ---------------------------------------------------------------------------

def ratio_accuracy(col: int, moments: MomentEstimates, G: AugmentedGraph,
                   eps_prior: float = 1e-2) -> float:
    """First-moment fallback: a = E[v] / E[Y(col)], valid without triplets.

    Fails when the task mean is too close to zero and assumes no singleton
    potentials on the sources (a documented model assumption).
    """
    ey = moments.prior.task_mean(G.task_of(col))
    if abs(ey) < eps_prior:
        raise PriorNearZero(
            f"ratio fallback for column {col} needs |E[Y]| >= {eps_prior}, "
            f"got {ey:.3g}"
        )
    return float(np.clip(moments.first_moments[col] / ey, -1.0, 1.0))


def conditional_accuracy_from_stats(target: int, cond: int,
                                    moments: MomentEstimates, plan: TripletPlan,
                                    G: AugmentedGraph, cfg: RunConfig,
                                    sign_hint: float) -> float:
    """E[lambda_target Y | lambda_cond = 0] via triplets on restricted moments.

    Sources without a usable restricted triplet fall back (when enabled) to
    the restricted first-moment ratio: the abstain indicator is independent of
    the task, so E[Y | lambda_cond = 0] is just the prior mean.
    """
    cs = moments.conditional.get(cond)
    if cs is None or (cs.n_rows is not None and cs.n_rows < cfg.n_min_abstain):
        have = 0 if cs is None else cs.n_rows
        raise TooFewAbstainRows(
            f"source {cond + 1} abstains on {have} rows; need {cfg.n_min_abstain}"
        )
    col = 2 * target

    def ratio_or_raise(reason: str) -> float:
        ey = moments.prior.task_mean(G.task_of(col))
        if cfg.ratio_fallback and abs(ey) >= cfg.eps_prior:
            return float(np.clip(cs.first[col] / ey, -1.0, 1.0))
        raise NoUsableTriplet(reason)

    p = plan.partners.get(col)
    if p is None:
        return ratio_or_raise(f"no triplets available for column {col}")
    avoid = {2 * cond, 2 * cond + 1}
    keep = ~(np.isin(p[:, 0], list(avoid)) | np.isin(p[:, 1], list(avoid)))
    if not np.any(keep):
        return ratio_or_raise(
            f"no abstain-restricted triplet for source {target + 1} avoids "
            f"source {cond + 1}"
        )
    vals = _anchor_magnitudes(cs.M, col, p[keep], cfg.eps_den, cfg.eps_acc)
    if vals.size == 0:
        return ratio_or_raise(
            f"abstain-restricted triplets for source {target + 1} are all "
            f"degenerate"
        )
    mag = _reduce(vals, cfg.agg_method)
    sign = 1.0 if sign_hint >= 0 else -1.0
    return float(np.clip(sign * mag, -1.0, 1.0))


def conditional_accuracy(target: int, cond: int, A: AugmentedLabelMatrix,
                         plan: TripletPlan, G: AugmentedGraph, prior: ClassPrior,
                         cfg: RunConfig = RunConfig(),
                         sign_hint: float = 1.0) -> float:
    """Public wrapper re-running the triplet pipeline on the abstain-restricted
    subset of rows where ``cond`` abstained."""
    votes = A.collapse().votes
    rows = votes[:, cond] == 0
    n_rows = int(rows.sum())
    if n_rows < cfg.n_min_abstain:
        raise TooFewAbstainRows(
            f"source {cond + 1} abstains on {n_rows} rows; need {cfg.n_min_abstain}"
        )
    sub = A.data[rows]
    stats = RunningStats(A.m)
    stats.n = n_rows
    stats.second = _exact_gram(sub)
    stats.first = sub.sum(axis=0, dtype=np.int64)
    vi = RunningStats._vote_idx(votes[rows])
    for j in range(A.m):
        stats.vote_counts[j] = np.bincount(vi[:, j], minlength=3)
    sub_moments = stats.to_moments(prior)
    sub_moments.conditional[cond] = CondStats(M=sub_moments.M,
                                              first=sub_moments.first_moments,
                                              n_rows=n_rows)
    return conditional_accuracy_from_stats(target, cond, sub_moments, plan, G,
                                           cfg, sign_hint)


# ---------------------------------------------------------------------------
# full accuracy pipeline
# ---------------------------------------------------------------------------

def estimate_accuracies(moments: MomentEstimates, plan: TripletPlan,
                        G: AugmentedGraph, cfg: RunConfig = RunConfig()) -> Accuracies:
    """Triplet magnitudes, sign resolution, and ratio fallback, in one pass."""
    if cfg.greedy_triplets:
        mags, info = greedy_accuracies(plan, moments.M, G, cfg)
    else:
        mags, info = aggregate_accuracies(plan, moments.M, cfg.agg_method, cfg)

    signed, sign_diag = resolve_signs(
        mags, moments.M, plan, G, cfg,
        first_moments=moments.first_moments, prior=moments.prior,
    )

    n_cols = G.n_columns
    values = np.zeros(n_cols)
    method = ["unset"] * n_cols
    floored = []
    for c, v in signed.items():
        values[c] = v
        method[c] = "triplet"
        if abs(v) <= cfg.eps_acc:
            floored.append(c)

    fallback_used = []
    for c in range(0, n_cols, 2):
        if method[c] != "unset":
            continue
        if not cfg.ratio_fallback:
            raise NoUsableTriplet(
                f"no triplet-recovered accuracy for column {c} and the ratio "
                f"fallback is disabled"
            )
        values[c] = ratio_accuracy(c, moments, G, cfg.eps_prior)
        method[c] = "ratio"
        fallback_used.append(c // 2)

    for c in range(0, n_cols, 2):
        values[c + 1] = -values[c]
        method[c + 1] = "mirror"

    if floored:
        warnings.warn(
            f"accuracy magnitude clamped to the {cfg.eps_acc} floor for columns "
            f"{floored}; these sources look uninformative",
            EstimationWarning,
        )

    diag = {
        "triplet_info": info,
        "sign": sign_diag,
        "ratio_fallback_sources": fallback_used,
        "floored_columns": floored,
    }
    return Accuracies(values=values, method=tuple(method), diagnostics=diag)
