"""Brute-force reference implementations the solver tests compare against."""

import itertools

import numpy as np


def brute_force_matching(weights):
    """Best one-to-one matching by enumerating injections of the smaller side."""
    weights = np.asarray(weights, dtype=float)
    m, n = weights.shape
    best = -np.inf
    if m <= n:
        for cols in itertools.permutations(range(n), m):
            best = max(best, sum(weights[i, c] for i, c in enumerate(cols)))
    else:
        for rows in itertools.permutations(range(m), n):
            best = max(best, sum(weights[r, j] for j, r in enumerate(rows)))
    return best


def brute_force_bmatching(weights, lam, mu):
    """Best (lam, mu) assignment by enumerating per-paper reviewer subsets."""
    weights = np.asarray(weights, dtype=float)
    m, n = weights.shape
    best = -np.inf
    subsets = list(itertools.combinations(range(m), lam))
    for combo in itertools.product(subsets, repeat=n):
        loads = [0] * m
        ok = True
        total = 0.0
        for j, subset in enumerate(combo):
            for i in subset:
                loads[i] += 1
                if loads[i] > mu:
                    ok = False
                    break
                total += weights[i, j]
            if not ok:
                break
        if ok:
            best = max(best, total)
    return best
