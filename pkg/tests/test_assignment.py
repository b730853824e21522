import math

import numpy as np
import pytest
from _oracles import brute_force_bmatching, brute_force_matching

from peerbias.assignment import (BidAlgorithm, BidMatrix,
                                 InfeasibleAssignmentError, RandomAlgorithm,
                                 SimilarityMatrix, TpmsAlgorithm,
                                 hungarian_max, sample_random_assignment,
                                 solve_bid_assignment, solve_bmatching,
                                 solve_tpms)
from peerbias.core import RngStream


def test_hungarian_dominant_diagonal():
    w = np.eye(4) * 10 + 1
    rows, cols = hungarian_max(w, RngStream(0))
    assert sorted(zip(rows.tolist(), cols.tolist())) == [(i, i) for i in range(4)]


def test_hungarian_known_matrix():
    w = np.array([[4., 1., 3.], [2., 0., 5.], [3., 2., 2.]])
    rows, cols = hungarian_max(w, RngStream(1))
    pairs = dict(zip(rows.tolist(), cols.tolist()))
    assert pairs == {0: 0, 1: 2, 2: 1}
    assert w[rows, cols].sum() == 11.0


def test_hungarian_matches_brute_force():
    gen = np.random.default_rng(12)
    stream = RngStream(13)
    for trial in range(200):
        shape = (int(gen.integers(2, 7)), int(gen.integers(2, 7)))
        w = gen.random(shape)
        rows, cols = hungarian_max(w, stream.child(trial))
        assert rows.size == min(shape)
        assert abs(w[rows, cols].sum() - brute_force_matching(w)) < 1e-9


def test_hungarian_uniform_tie_breaking():
    # all-equal weights: each of the 3! matchings within 3 sigma of uniform
    counts = {}
    w = np.ones((3, 3))
    for trial in range(6000):
        rows, cols = hungarian_max(w, RngStream(99, (trial,)))
        key = tuple(cols[np.argsort(rows)].tolist())
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    expect = 1000
    sigma = math.sqrt(6000 * (1 / 6) * (5 / 6))
    for key, count in counts.items():
        assert abs(count - expect) < 3 * sigma, (key, count)


def test_tpms_two_by_two():
    s = SimilarityMatrix(np.array([[1., 2.], [3., 5.]]))
    a = solve_tpms(s, 1, 1, RngStream(2))
    assert a.pair_set() == {(0, 0), (1, 1)}
    assert a.total_weight(s.values) == 6.0


def test_tpms_all_equal_total():
    s = SimilarityMatrix(np.full((6, 3), 2.0))
    a = solve_tpms(s, 2, 1, RngStream(3))
    assert a.total_weight(s.values) == 2.0 * 2 * 3  # lam * n * s
    per_paper = np.bincount(a.papers, minlength=3)
    assert np.all(per_paper == 2)


def test_tpms_matches_brute_force_unit_loads():
    gen = np.random.default_rng(4)
    stream = RngStream(5)
    for trial in range(200):
        n = int(gen.integers(2, 7))
        w = gen.random((n, n))
        a = solve_tpms(SimilarityMatrix(w), 1, 1, stream.child(trial))
        assert abs(a.total_weight(w) - brute_force_matching(w)) < 1e-9


def test_tpms_general_loads_match_replication_oracle():
    # slot replication + one-to-one matching is exact when one side has unit
    # loads; the solver must reproduce those totals
    gen = np.random.default_rng(6)
    stream = RngStream(7)
    for trial in range(60):
        m, n = int(gen.integers(4, 9)), int(gen.integers(2, 5))
        w = gen.random((m, n))
        for lam, mu in ((2, 1), (1, 3)):
            if mu * m < lam * n:
                continue
            a = solve_tpms(SimilarityMatrix(w), lam, mu, stream.child(trial, lam, mu))
            if mu == 1:
                big = np.repeat(w, lam, axis=1)
            else:
                big = np.repeat(w, mu, axis=0)
            rows, cols = hungarian_max(big, stream.child(trial, lam, mu, "oracle"))
            if mu == 1:
                oracle = big[rows, cols].sum()
            else:
                # papers appear once; keep the n best slot pairs covering them
                oracle = big[rows, cols].sum()
            assert abs(a.total_weight(w) - oracle) < 1e-9


def test_tpms_both_loads_above_one_matches_brute_force():
    gen = np.random.default_rng(8)
    stream = RngStream(9)
    for trial in range(25):
        m, n = 4, 3
        lam, mu = 2, 2
        w = gen.random((m, n))
        a = solve_tpms(SimilarityMatrix(w), lam, mu, stream.child(trial))
        per_paper = np.bincount(a.papers, minlength=n)
        assert np.all(per_paper == lam)
        assert np.bincount(a.reviewers, minlength=m).max() <= mu
        assert abs(a.total_weight(w) - brute_force_bmatching(w, lam, mu)) < 1e-9


def test_tpms_infeasible():
    with pytest.raises(InfeasibleAssignmentError):
        solve_tpms(SimilarityMatrix(np.ones((2, 3))), 1, 1, RngStream(0))


def test_tpms_diagonal_product_structure():
    # strictly decreasing row x column products: the best unit-load assignment
    # on any square sub-block is that block's diagonal
    m, n = 8, 8
    i = np.arange(1, m + 1)[:, None]
    j = np.arange(1, n + 1)[None, :]
    s = SimilarityMatrix(((m + 1 - i) * (n + 1 - j)).astype(float))
    gen = np.random.default_rng(10)
    for trial in range(10):
        rows = np.sort(gen.choice(m, 4, replace=False))
        cols = np.sort(gen.choice(n, 4, replace=False))
        a = solve_tpms(s, 1, 1, RngStream(11, (trial,)),
                       eligible_reviewers=rows, eligible_papers=cols)
        assert a.pair_set() == set(zip(rows.tolist(), cols.tolist()))


def test_bid_assignment_zero_bids_any_feasible():
    b = BidMatrix(np.zeros((4, 4)))
    a = solve_bid_assignment(b, 1, 1, RngStream(12))
    assert a.total_weight(b.values) == 0.0
    assert np.bincount(a.papers, minlength=4).tolist() == [1, 1, 1, 1]


def test_bid_assignment_favored_group_gets_bidders():
    # 3 enthusiasts bid +1 on the first 2 papers, -1 elsewhere; 3 neutral
    # reviewers bid 0; with unit loads the first 2 papers get enthusiasts
    bids = np.zeros((6, 4))
    bids[:3, :2] = 1.0
    bids[:3, 2:] = -1.0
    b = BidMatrix(bids)
    best = brute_force_bmatching(bids, 1, 1)
    for trial in range(10):
        a = solve_bid_assignment(b, 1, 1, RngStream(13, (trial,)))
        assert abs(a.total_weight(bids) - best) < 1e-9
        for reviewer, paper in a.pairs():
            if paper < 2:
                assert reviewer < 3


def test_bid_assignment_reluctant_reviewer_skipped():
    bids = np.zeros((5, 3))
    bids[2, :] = -1.0
    b = BidMatrix(bids)
    best = brute_force_bmatching(bids, 1, 1)
    a = solve_bid_assignment(b, 1, 1, RngStream(14))
    assert abs(a.total_weight(bids) - best) < 1e-9
    assert 2 not in a.reviewers


def test_bid_matrix_validation():
    with pytest.raises(ValueError):
        BidMatrix(np.array([[0.5]]))


def test_random_assignment_uniform_at_unit_loads():
    counts = {}
    for trial in range(6000):
        a = sample_random_assignment(3, 3, 1, 1, RngStream(15, (trial,)))
        key = tuple(a.papers[np.argsort(a.reviewers)].tolist())
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    sigma = math.sqrt(6000 * (1 / 6) * (5 / 6))
    for key, count in counts.items():
        assert abs(count - 1000) < 3 * sigma, (key, count)


def test_random_assignment_constraints():
    a = sample_random_assignment(5, 10, 2, 1, RngStream(16))
    assert np.all(np.bincount(a.papers, minlength=5) == 2)
    assert np.bincount(a.reviewers, minlength=10).max() == 1
    # two distinct reviewers per paper is implied by the no-duplicate invariant
    for p in range(5):
        assert len(set(a.reviewers_of(p).tolist())) == 2


def test_random_assignment_infeasible():
    with pytest.raises(InfeasibleAssignmentError):
        sample_random_assignment(10, 3, 2, 1, RngStream(17))


def test_solve_bmatching_respects_forbidden_pairs():
    w = np.ones((3, 3))
    w[0, 0] = 5.0
    reviewers, papers = solve_bmatching(w, np.ones(3, dtype=int),
                                        np.ones(3, dtype=int), RngStream(18),
                                        forbidden={(0, 0)})
    assert (0, 0) not in set(zip(reviewers.tolist(), papers.tolist()))


def test_algorithm_wrappers():
    gen = RngStream(19).generator()
    demand = np.array([1, 1])
    cap = np.array([1, 1, 1])
    for algo in (RandomAlgorithm(),
                 TpmsAlgorithm(SimilarityMatrix(np.random.default_rng(1).random((3, 2)))),
                 BidAlgorithm(BidMatrix(np.zeros((3, 2))))):
        r, p = algo.solve(demand, cap, gen)
        assert sorted(p.tolist()) == [0, 1]
        assert len(set(r.tolist())) == 2
