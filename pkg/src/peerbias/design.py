"""Experiment designs: the paired joint-assignment procedure (assignment,
condition allocation and tuple construction done together) and the matching
algorithms that extract one-decision-per-reviewer tuples from a conventional
split-pool setup.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import InfeasibleAssignmentError
from .core import Assignment, ConditionAllocation, PropertyVector, RngStream

Slot = tuple  # (paper, sb_reviewer, db_reviewer)


@dataclass(frozen=True)
class ExperimentPlan:
    """Output of the paired design: the seed assignment (2 reviewers per chosen
    paper, 1 paper each), the SB/DB allocation, the completed assignment and
    the tuple slots the tests will consume once decisions exist."""

    a_star: Assignment
    allocation: ConditionAllocation
    a_full: Assignment
    slots: tuple

    def condition_pairs(self, condition_mask: np.ndarray) -> Assignment:
        mask = condition_mask[self.a_full.reviewers]
        lam = self.a_full.lam // 2
        return Assignment(self.a_full.reviewers[mask], self.a_full.papers[mask],
                          self.a_full.m, self.a_full.n, lam=lam, mu=self.a_full.mu,
                          complete=True)

    def sb_assignment(self) -> Assignment:
        return self.condition_pairs(self.allocation.sb_mask)

    def db_assignment(self) -> Assignment:
        return self.condition_pairs(~self.allocation.sb_mask)


def _generator(rng) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


def _select_balanced_papers(labels: PropertyVector, count: int,
                            gen: np.random.Generator) -> np.ndarray:
    """Pick ``count`` papers with the two property groups as even as possible.

    Asks for ceil(count/2) from a coin-chosen side (so neither group is
    systematically favored when count is odd), takes a whole group when it is
    too small, and fills the remainder from the other group, uniformly within
    each group.
    """
    pos = labels.positive_set()
    neg = labels.negative_set()
    first, second = (pos, neg) if gen.random() < 0.5 else (neg, pos)
    want_first = min((count + 1) // 2, first.size)
    want_second = min(count - want_first, second.size)
    want_first = count - want_second  # refill if the second group was short
    if want_first > first.size:
        raise InfeasibleAssignmentError("not enough papers to select the requested count")
    chosen = np.concatenate([gen.choice(first, want_first, replace=False),
                             gen.choice(second, want_second, replace=False)])
    return np.sort(chosen)


def run_procedure1(n: int, m: int, lam: int, mu: int, labels: PropertyVector,
                   algo, rng) -> ExperimentPlan:
    """The paired experiment design.

    1. bidding (if any) already lives inside ``algo``'s scores and was
       collected blind;
    2. a seed assignment gives 2 reviewers to each selected paper, one paper
       per reviewer, selecting reviewers (pool too big) or a property-balanced
       set of papers (pool too small) as needed;
    3. for every seed pair one reviewer goes single-blind and one double-blind
       by a fair coin; reviewers outside the seed split half and half;
    4. ``algo`` completes the assignment to lam reviewers per paper per
       condition under the residual loads, never unseating a seed pair;
    5. each seed paper becomes one tuple slot.
    """
    if m % 2 != 0:
        raise ValueError("the design needs an even reviewer pool")
    if labels.n != n:
        raise ValueError("property vector length must equal the paper count")
    gen = _generator(rng)

    # step 2: seed assignment A*
    demand = np.zeros(n, dtype=int)
    cap = np.zeros(m, dtype=int)
    if m > 2 * n:
        chosen_reviewers = gen.choice(m, 2 * n, replace=False)
        cap[chosen_reviewers] = 1
        demand[:] = 2
    elif m < 2 * n:
        selected = _select_balanced_papers(labels, m // 2, gen)
        demand[selected] = 2
        cap[:] = 1
    else:
        demand[:] = 2
        cap[:] = 1
    star_r, star_p = algo.solve(demand, cap, gen)
    a_star = Assignment(star_r, star_p, m=m, n=n, lam=2, mu=1)
    star_papers = np.unique(star_p)
    _assert_seed_balance(labels, star_papers, m, case_b=m < 2 * n)

    # step 3: allocation
    sb_mask = np.zeros(m, dtype=bool)
    order = np.argsort(star_p, kind="stable")
    pairs = star_r[order].reshape(-1, 2)  # two reviewers per seed paper
    flips = gen.random(pairs.shape[0]) < 0.5
    sb_of_pair = np.where(flips, pairs[:, 0], pairs[:, 1])
    db_of_pair = np.where(flips, pairs[:, 1], pairs[:, 0])
    sb_mask[sb_of_pair] = True
    leftovers = np.setdiff1d(np.arange(m), star_r)
    if leftovers.size:
        shuffled = gen.permutation(leftovers)
        half = leftovers.size // 2
        sb_mask[shuffled[:half]] = True
        if leftovers.size % 2 == 1:
            sb_mask[shuffled[-1]] = gen.random() < 0.5
    allocation = ConditionAllocation(sb_mask)

    # step 4: completion to the full assignment
    star_pairs = list(zip(star_r.tolist(), star_p.tolist()))
    full_r = [star_r]
    full_p = [star_p]
    in_star_paper = np.zeros(n, dtype=bool)
    in_star_paper[star_papers] = True
    star_load = np.bincount(star_r, minlength=m)
    for mask in (sb_mask, ~sb_mask):
        residual_demand = np.full(n, lam) - in_star_paper.astype(int)
        residual_cap = np.where(mask, mu - star_load, 0)
        if residual_demand.sum() == 0:
            continue
        extra_r, extra_p = algo.solve(residual_demand, residual_cap, gen,
                                      forbidden=set(star_pairs))
        full_r.append(extra_r)
        full_p.append(extra_p)
    a_full = Assignment(np.concatenate(full_r), np.concatenate(full_p),
                        m=m, n=n, lam=2 * lam, mu=mu, complete=True)
    _assert_condition_loads(a_full, sb_mask, lam)

    # step 5: tuple slots
    paper_of_pair = star_p[order].reshape(-1, 2)[:, 0]
    slots = tuple((int(p), int(s), int(d))
                  for p, s, d in zip(paper_of_pair, sb_of_pair, db_of_pair))
    return ExperimentPlan(a_star=a_star, allocation=allocation, a_full=a_full,
                          slots=slots)


def _assert_seed_balance(labels: PropertyVector, star_papers: np.ndarray,
                         m: int, case_b: bool) -> None:
    w = labels.column(0)
    n_pos, n_neg = labels.positive_set().size, labels.negative_set().size
    got_pos = int((w[star_papers] == 1).sum())
    got_neg = star_papers.size - got_pos
    if case_b:
        floor = min(n_pos, n_neg, m // 4)
    else:
        floor = min(n_pos, n_neg)
    if got_pos < min(n_pos, floor) or got_neg < min(n_neg, floor):
        raise AssertionError("seed assignment lost the property balance guarantee")


def _assert_condition_loads(a_full: Assignment, sb_mask: np.ndarray, lam: int) -> None:
    for mask in (sb_mask, ~sb_mask):
        sel = mask[a_full.reviewers]
        per_paper = np.bincount(a_full.papers[sel], minlength=a_full.n)
        if not np.all(per_paper == lam):
            raise AssertionError("completion failed to give every paper lam "
                                 "reviewers in each condition")


def _paper_adjacency(a: Assignment) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {}
    for r, p in zip(a.reviewers.tolist(), a.papers.tolist()):
        adj.setdefault(p, set()).add(r)
    return adj


def exact_match(a_sb: Assignment, a_db: Assignment, rng) -> tuple:
    """One tuple slot per paper via two maximum one-to-one matchings
    (papers-to-SB-reviewers and papers-to-DB-reviewers) on the review graph.

    Requires lam >= mu, which guarantees (Hall) that every paper is matched on
    both sides. Tie-breaking is uniform through random relabeling.
    """
    if a_sb.lam < a_sb.mu:
        raise ValueError("exact matching needs lam >= mu; use greedy_match instead")
    from .assignment import max_cardinality_matching
    gen = _generator(rng)
    n, m = a_sb.n, a_sb.m
    slots_by_paper: dict[int, list[int]] = {}
    for a in (a_sb, a_db):
        adj = np.zeros((n, m), dtype=np.int8)
        adj[a.papers, a.reviewers] = 1
        rows, cols = max_cardinality_matching(adj, gen)
        for p, r in zip(rows.tolist(), cols.tolist()):
            slots_by_paper.setdefault(p, []).append(r)
    return tuple((p, rs[0], rs[1]) for p, rs in sorted(slots_by_paper.items())
                 if len(rs) == 2)


class _GreedyState:
    def __init__(self, a_sb: Assignment, a_db: Assignment, n: int):
        self.sb_adj = _paper_adjacency(a_sb)
        self.db_adj = _paper_adjacency(a_db)
        self.deg_s = np.bincount(a_sb.papers, minlength=n)
        self.deg_d = np.bincount(a_db.papers, minlength=n)
        self.sb_papers_of: dict[int, list[int]] = {}
        self.db_papers_of: dict[int, list[int]] = {}
        for r, p in zip(a_sb.reviewers.tolist(), a_sb.papers.tolist()):
            self.sb_papers_of.setdefault(r, []).append(p)
        for r, p in zip(a_db.reviewers.tolist(), a_db.papers.tolist()):
            self.db_papers_of.setdefault(r, []).append(p)

    def draw(self, papers: np.ndarray, index_of: dict[int, int],
             gen: np.random.Generator,
             skip_sb: int | None = None, skip_db: int | None = None):
        """Uniform draw over (sb reviewer, paper, db reviewer) triples;
        triples using a skipped reviewer are excluded from the count."""
        weights = (self.deg_s[papers] * self.deg_d[papers]).astype(float)
        touched = []
        if skip_sb is not None:
            touched.extend(self.sb_papers_of.get(skip_sb, ()))
        if skip_db is not None:
            touched.extend(self.db_papers_of.get(skip_db, ()))
        for p in touched:
            i = index_of.get(p)
            if i is None:
                continue
            ds = self.deg_s[p] - (skip_sb in self.sb_adj.get(p, ()))
            dd = self.deg_d[p] - (skip_db in self.db_adj.get(p, ()))
            weights[i] = ds * dd
        total = weights.sum()
        if total <= 0:
            return None
        cum = np.cumsum(weights)
        pick = min(int(np.searchsorted(cum, gen.random() * total, side="right")),
                   papers.size - 1)
        paper = int(papers[pick])
        sb_opts = sorted(r for r in self.sb_adj[paper] if r != skip_sb)
        db_opts = sorted(r for r in self.db_adj[paper] if r != skip_db)
        return paper, sb_opts[gen.integers(len(sb_opts))], db_opts[gen.integers(len(db_opts))]

    def remove(self, sb_reviewer: int, db_reviewer: int) -> None:
        for p in self.sb_papers_of.pop(sb_reviewer, ()):
            self.sb_adj[p].discard(sb_reviewer)
            self.deg_s[p] -= 1
        for p in self.db_papers_of.pop(db_reviewer, ()):
            self.db_adj[p].discard(db_reviewer)
            self.deg_d[p] -= 1


def greedy_match(a_sb: Assignment, a_db: Assignment, labels: PropertyVector,
                 rng) -> tuple:
    """Iteratively extract one property-positive and one property-negative
    tuple with four fresh reviewers per round, until neither side yields one.

    Guaranteed to keep at least floor(min(group sizes) / (4 mu)) tuples per
    property group on feasible inputs.
    """
    gen = _generator(rng)
    state = _GreedyState(a_sb, a_db, labels.n)
    pos = labels.positive_set()
    neg = labels.negative_set()
    pos_index = {int(p): i for i, p in enumerate(pos)}
    neg_index = {int(p): i for i, p in enumerate(neg)}
    slots: list[tuple[int, int, int]] = []
    while True:
        t1 = state.draw(pos, pos_index, gen)
        t2 = state.draw(neg, neg_index, gen,
                        skip_sb=None if t1 is None else t1[1],
                        skip_db=None if t1 is None else t1[2])
        if t1 is None and t2 is None:
            return tuple(slots)
        for t in (t1, t2):
            if t is not None:
                slots.append((t[0], t[1], t[2]))
                state.remove(t[1], t[2])


def full_assignment_slots(a_sb: Assignment, a_db: Assignment, rng) -> tuple:
    """One slot per (paper, SB review, DB review) pairing over the FULL
    assignment, letting a reviewer contribute a decision to several tuples.

    Opt-in only: reusing reviewers treats their reviews as independent, which
    forfeits the robustness of the tests to reviewer-level dependence. Pass
    the result to the tests with allow_reviewer_reuse=True.
    """
    gen = _generator(rng)
    sb_adj = _paper_adjacency(a_sb)
    db_adj = _paper_adjacency(a_db)
    slots = []
    for paper in sorted(set(sb_adj) & set(db_adj)):
        sb_rs = gen.permutation(sorted(sb_adj[paper]))
        db_rs = gen.permutation(sorted(db_adj[paper]))
        for s, d in zip(sb_rs.tolist(), db_rs.tolist()):
            slots.append((paper, s, d))
    return tuple(slots)


def match_dispatch(a_sb: Assignment, a_db: Assignment, lam: int, mu: int,
                   labels: PropertyVector, rng) -> tuple:
    """Route to the exact matcher when lam >= mu, else to the greedy one, then
    run a greedy pass over reviewers the first pass left unused and take the
    union. Each reviewer still contributes at most one decision."""
    gen = _generator(rng)
    if lam >= mu:
        slots = exact_match(a_sb, a_db, gen)
    else:
        slots = greedy_match(a_sb, a_db, labels, gen)
    used = {r for s in slots for r in (s[1], s[2])}
    rest_sb = a_sb.restrict_to_reviewers(
        np.array([r for r in a_sb.used_reviewers() if r not in used], dtype=int))
    rest_db = a_db.restrict_to_reviewers(
        np.array([r for r in a_db.used_reviewers() if r not in used], dtype=int))
    if rest_sb.size and rest_db.size:
        slots = slots + greedy_match(rest_sb, rest_db, labels, gen)
    return slots
