"""Reviewer-paper assignment: exact max-weight matching and b-matching under
per-paper demand and per-reviewer capacity, plus a uniform random sampler.

Tie-breaking everywhere is randomized by relabeling rows and columns before
the deterministic solver runs, so symmetric optima are chosen uniformly and
optimal totals are computed on the unperturbed weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .core import Assignment, RngStream

MAX_RESAMPLE_TRIES = 500
FORBIDDEN = -1e18


class InfeasibleAssignmentError(Exception):
    pass


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("similarity matrix must be 2-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError("similarities must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class BidMatrix:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("bid matrix must be 2-dimensional")
        if not np.all(np.isin(values, (-1.0, 0.0, 1.0))):
            raise ValueError("bids must be -1, 0 or +1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def _generator(rng) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


def hungarian_max(weights: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    """Maximum-weight one-to-one matching of size min(rows, cols).

    Rows and columns are randomly relabeled first, so among equally good
    matchings the returned one is symmetric in distribution (uniform over the
    full optimal set whenever rows/columns are exchangeable, e.g. all-equal
    weights).
    """
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 2 or 0 in weights.shape:
        raise ValueError("weights must be a non-empty 2-d matrix")
    if not np.all(np.isfinite(weights[weights > FORBIDDEN / 2])):
        raise ValueError("weights must be finite")
    gen = _generator(rng)
    rperm = gen.permutation(weights.shape[0])
    cperm = gen.permutation(weights.shape[1])
    ri, ci = linear_sum_assignment(weights[np.ix_(rperm, cperm)], maximize=True)
    return rperm[ri], cperm[ci]


def max_cardinality_matching(adj: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    """Maximum one-to-one matching on a 0/1 adjacency matrix (rows x cols).

    Uses Hopcroft-Karp with the same random-relabeling tie-break as
    hungarian_max; on unit weights the two solve the same problem and this is
    orders of magnitude faster at Monte Carlo scale.
    """
    adj = np.asarray(adj)
    gen = _generator(rng)
    rperm = gen.permutation(adj.shape[0])
    cperm = gen.permutation(adj.shape[1])
    sub = adj[np.ix_(rperm, cperm)]
    match = maximum_bipartite_matching(csr_matrix(sub), perm_type="column")
    rows = np.flatnonzero(match >= 0)
    return rperm[rows], cperm[match[rows]]


def _check_feasible(demand: np.ndarray, cap: np.ndarray) -> None:
    if demand.sum() > cap.sum():
        raise InfeasibleAssignmentError(
            f"total demand {int(demand.sum())} exceeds total capacity {int(cap.sum())}")


def _solve_by_replication(weights: np.ndarray, demand: np.ndarray, cap: np.ndarray,
                          rng) -> tuple[np.ndarray, np.ndarray]:
    """Exact b-matching by slot replication; valid when one side has unit loads
    (a duplicate (reviewer, paper) pair is then impossible)."""
    rev_slots = np.repeat(np.arange(cap.size), cap)
    pap_slots = np.repeat(np.arange(demand.size), demand)
    big = weights[np.ix_(rev_slots, pap_slots)]
    ri, ci = hungarian_max(big, rng)
    reviewers = rev_slots[ri]
    papers = pap_slots[ci]
    keep = big[ri, ci] > FORBIDDEN / 2
    if pap_slots.size and not (keep.size == pap_slots.size and keep.all()):
        # some paper slot was only coverable through a forbidden pair
        raise InfeasibleAssignmentError("demands cannot be met without forbidden pairs")
    return reviewers, papers


def _solve_by_flow(weights: np.ndarray, demand: np.ndarray, cap: np.ndarray,
                   rng) -> tuple[np.ndarray, np.ndarray]:
    """Exact b-matching as a transportation LP with unit pair capacities.

    The constraint matrix is totally unimodular, so the simplex vertex
    returned by HiGHS is integral; integrality is asserted, not assumed.
    """
    from scipy.optimize import linprog
    from scipy.sparse import lil_matrix

    gen = _generator(rng)
    m, n = weights.shape
    nv = m * n
    # random tiny objective jitter for tie-breaking only; totals use true weights
    scale = max(1.0, float(np.abs(weights[weights > FORBIDDEN / 2]).max(initial=1.0)))
    jitter = gen.random(nv) * (1e-9 * scale)
    c = -(weights.reshape(-1) + jitter)
    a_eq = lil_matrix((n, nv))
    for j in range(n):
        a_eq[j, j::n] = 1.0
    a_ub = lil_matrix((m, nv))
    for i in range(m):
        a_ub[i, i * n:(i + 1) * n] = 1.0
    upper = np.ones(nv)
    upper[weights.reshape(-1) <= FORBIDDEN / 2] = 0.0
    res = linprog(c, A_ub=a_ub.tocsr(), b_ub=cap, A_eq=a_eq.tocsr(), b_eq=demand,
                  bounds=list(zip(np.zeros(nv), upper)), method="highs")
    if res.status != 0:
        raise InfeasibleAssignmentError(f"assignment LP infeasible: {res.message}")
    x = res.x.reshape(m, n)
    if np.abs(x - np.round(x)).max() > 1e-6:
        raise RuntimeError("LP relaxation returned a fractional vertex")
    reviewers, papers = np.nonzero(np.round(x) > 0.5)
    return reviewers, papers


def solve_bmatching(weights: np.ndarray, demand: np.ndarray, cap: np.ndarray,
                    rng, forbidden: set[tuple[int, int]] | None = None
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Max-total-weight assignment meeting each paper's demand exactly, with
    per-reviewer capacities and no duplicate pairs. Returns (reviewers, papers)."""
    weights = np.asarray(weights, dtype=float)
    demand = np.asarray(demand, dtype=int)
    cap = np.asarray(cap, dtype=int)
    _check_feasible(demand, cap)
    if forbidden:
        weights = weights.copy()
        for r, p in forbidden:
            weights[r, p] = FORBIDDEN
    if demand.max(initial=0) <= 1 or cap.max(initial=0) <= 1:
        return _solve_by_replication(weights, demand, cap, rng)
    return _solve_by_flow(weights, demand, cap, rng)


def _subset_solve(scores: np.ndarray, lam: int, mu: int, rng,
                  reviewers: np.ndarray | None, papers: np.ndarray | None,
                  m: int, n: int) -> Assignment:
    reviewers = np.arange(m) if reviewers is None else np.asarray(reviewers)
    papers = np.arange(n) if papers is None else np.asarray(papers)
    if mu * reviewers.size < lam * papers.size:
        raise InfeasibleAssignmentError(
            f"mu*|reviewers|={mu * reviewers.size} < lam*|papers|={lam * papers.size}")
    sub = scores[np.ix_(reviewers, papers)]
    demand = np.full(papers.size, lam)
    cap = np.full(reviewers.size, mu)
    ri, pi = solve_bmatching(sub, demand, cap, rng)
    return Assignment(reviewers[ri], papers[pi], m=m, n=n, lam=lam, mu=mu,
                      complete=papers.size == n)


def solve_tpms(s: SimilarityMatrix, lam: int, mu: int, rng,
               eligible_reviewers: np.ndarray | None = None,
               eligible_papers: np.ndarray | None = None) -> Assignment:
    """Similarity-maximizing assignment: every eligible paper gets exactly lam
    of the eligible reviewers, each reviewer at most mu papers, total
    similarity exactly optimal."""
    m, n = s.values.shape
    return _subset_solve(s.values, lam, mu, rng, eligible_reviewers, eligible_papers, m, n)


def solve_bid_assignment(b: BidMatrix, lam: int, mu: int, rng,
                         eligible_reviewers: np.ndarray | None = None,
                         eligible_papers: np.ndarray | None = None) -> Assignment:
    """Bid-sum-maximizing assignment; identical contract to solve_tpms."""
    m, n = b.values.shape
    return _subset_solve(b.values, lam, mu, rng, eligible_reviewers, eligible_papers, m, n)


def sample_random_pairs(demand: np.ndarray, cap: np.ndarray, rng,
                        forbidden: set[tuple[int, int]] | None = None
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Random feasible assignment by slot replication: papers and reviewers are
    expanded to unit slots, a uniformly random slot matching is drawn, and the
    draw is rejected whenever it repeats a (reviewer, paper) pair or hits a
    forbidden one."""
    demand = np.asarray(demand, dtype=int)
    cap = np.asarray(cap, dtype=int)
    _check_feasible(demand, cap)
    gen = _generator(rng)
    n = demand.size
    rev_slots = np.repeat(np.arange(cap.size), cap)
    pap_slots = np.repeat(np.arange(n), demand)
    forbid_keys = (np.array([r * n + p for r, p in forbidden], dtype=np.int64)
                   if forbidden else None)
    for _ in range(MAX_RESAMPLE_TRIES):
        chosen = gen.permutation(rev_slots)[:pap_slots.size]
        keys = chosen.astype(np.int64) * n + pap_slots
        if np.unique(keys).size != keys.size:
            continue
        if forbid_keys is not None and np.intersect1d(keys, forbid_keys).size:
            continue
        return chosen, pap_slots.copy()
    raise InfeasibleAssignmentError(
        f"rejection sampling failed after {MAX_RESAMPLE_TRIES} tries")


def sample_random_assignment(n: int, m: int, lam: int, mu: int, rng,
                             eligible_reviewers: np.ndarray | None = None) -> Assignment:
    """Feasible (lam, mu) assignment drawn by the replication sampler.

    Exactly uniform for lam = mu = 1; for general loads the conditioning on
    "no repeated pair" can tilt the distribution slightly, but the sampler
    keeps the two reviewers of any paper exchangeable, which is what the
    calibration results rely on.
    """
    reviewers = np.arange(m) if eligible_reviewers is None else np.asarray(eligible_reviewers)
    if mu * reviewers.size < lam * n:
        raise InfeasibleAssignmentError(
            f"mu*|reviewers|={mu * reviewers.size} < lam*n={lam * n}")
    ri, pi = sample_random_pairs(np.full(n, lam), np.full(reviewers.size, mu), rng)
    return Assignment(reviewers[ri], pi, m=m, n=n, lam=lam, mu=mu, complete=True)


class TpmsAlgorithm:
    """Assignment rule for the experiment designs: maximize total similarity."""

    def __init__(self, s: SimilarityMatrix):
        self.s = s

    def solve(self, demand: np.ndarray, cap: np.ndarray, rng,
              forbidden: set[tuple[int, int]] | None = None
              ) -> tuple[np.ndarray, np.ndarray]:
        return solve_bmatching(self.s.values, demand, cap, rng, forbidden)


class BidAlgorithm:
    """Assignment rule maximizing the total of declared bids."""

    def __init__(self, b: BidMatrix):
        self.b = b

    def solve(self, demand, cap, rng, forbidden=None):
        return solve_bmatching(self.b.values, demand, cap, rng, forbidden)


class RandomAlgorithm:
    """Assignment rule drawing a random feasible assignment."""

    def solve(self, demand, cap, rng, forbidden=None):
        return sample_random_pairs(demand, cap, rng, forbidden)
