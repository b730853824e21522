"""The bias tests: two-sample permutation engine, the disagreement and counting
tests, the score-plug-in Wald baseline, and the multi-property regressions on
transformed decisions.

All tests are two-sided on |statistic|; the sign of the effect size carries
the direction of any detected bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import hypergeom

from . import glm
from .core import (DecisionTuple, PropertyVector, RngStream, TestOutcome,
                   keep_null, validate_tuple_set)

ENUMERATION_CAP = 100_000
MC_PERMUTATIONS = 10_000
_TIE_EPS = 1e-12   # |tau_perm| >= |tau_obs| with a float guard; ties count toward p


@dataclass(frozen=True)
class PermutationPlan:
    """How to run the permutation test.

    ``auto`` picks an exact computation whenever it is affordable (binary
    data of any size, or enumerable label splits) and falls back to Monte
    Carlo with an add-one p-value, which is valid at any resampling count.
    """

    mode: str = "auto"              # auto | exact | mc
    num_permutations: int = MC_PERMUTATIONS
    enumeration_cap: int = ENUMERATION_CAP
    rng: RngStream | None = None

    def __post_init__(self):
        if self.mode not in ("auto", "exact", "mc"):
            raise ValueError("permutation mode must be auto, exact or mc")
        if self.num_permutations < 1:
            raise ValueError("need at least one permutation")


def _exact_binary_p(u: np.ndarray, v: np.ndarray, tau_obs: float) -> float:
    """Exact permutation p-value for 0/1 data via the hypergeometric count law.

    Permuting the pooled labels only moves ones between the two groups, so the
    statistic is a function of how many ones land in the first group; weighting
    each count by its number of label splits reproduces full enumeration.
    """
    n_u, n_v = u.size, v.size
    total_ones = int(u.sum() + v.sum())
    ks = np.arange(max(0, total_ones - n_v), min(total_ones, n_u) + 1)
    taus = ks / n_u - (total_ones - ks) / n_v
    pmf = hypergeom.pmf(ks, n_u + n_v, total_ones, n_u)
    return float(pmf[np.abs(taus) >= abs(tau_obs) - _TIE_EPS].sum())


def _exact_enumeration_p(pooled: np.ndarray, n_u: int, tau_obs: float) -> float:
    n = pooled.size
    n_v = n - n_u
    total = pooled.sum()
    hits = 0
    count = 0
    for idx in combinations(range(n), n_u):
        s_u = pooled[list(idx)].sum()
        tau = s_u / n_u - (total - s_u) / n_v
        count += 1
        if abs(tau) >= abs(tau_obs) - _TIE_EPS:
            hits += 1
    return hits / count


def _mc_p(pooled: np.ndarray, n_u: int, tau_obs: float, plan: PermutationPlan) -> float:
    rng = (plan.rng or RngStream(0, ("permutation",))).generator()
    n_v = pooled.size - n_u
    total = pooled.sum()
    hits = 0
    remaining = plan.num_permutations
    block = max(1, min(remaining, 4_000_000 // max(pooled.size, 1)))
    while remaining > 0:
        b = min(block, remaining)
        perm = rng.permuted(np.tile(pooled, (b, 1)), axis=1)
        s_u = perm[:, :n_u].sum(axis=1)
        taus = s_u / n_u - (total - s_u) / n_v
        hits += int((np.abs(taus) >= abs(tau_obs) - _TIE_EPS).sum())
        remaining -= b
    # the observed labeling counts too, guaranteeing validity
    return (1 + hits) / (plan.num_permutations + 1)


def permutation_two_sample(u: Sequence[float], v: Sequence[float], alpha: float,
                           plan: PermutationPlan | None = None) -> TestOutcome:
    """Two-sided permutation test of exchangeability with tau = mean(u) - mean(v)."""
    plan = plan or PermutationPlan()
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.size == 0 or v.size == 0:
        raise ValueError("permutation test needs non-empty samples")
    tau_obs = float(u.mean() - v.mean())
    pooled = np.concatenate([u, v])
    binary = np.all(np.isin(pooled, (0.0, 1.0)))
    enumerable = math.comb(pooled.size, u.size) <= plan.enumeration_cap
    mode = plan.mode
    if mode == "auto":
        mode = "exact" if (binary or enumerable) else "mc"
    if mode == "exact":
        if binary:
            p = _exact_binary_p(u, v, tau_obs)
            method = "exact"
        elif enumerable:
            p = _exact_enumeration_p(pooled, u.size, tau_obs)
            method = "exact"
        else:
            raise ValueError("exact mode requested but the split count exceeds the cap")
    else:
        p = _mc_p(pooled, u.size, tau_obs, plan)
        method = f"mc:{plan.num_permutations}"
    return TestOutcome(reject=p <= alpha, statistic=tau_obs, p_value=p,
                       effect_size=tau_obs, n_u=int(u.size), n_v=int(v.size),
                       method=method)


def _require_valid(tuples: Sequence[DecisionTuple], allow_reviewer_reuse: bool) -> None:
    if allow_reviewer_reuse:
        return
    report = validate_tuple_set(tuples)
    if not report:
        raise ValueError("invalid tuple set: " + "; ".join(report.messages))


def _scalar_w(t: DecisionTuple) -> int:
    if isinstance(t.w, tuple):
        if len(t.w) != 1:
            raise ValueError("this test handles a single property; "
                             "use the multi-property regressions for k > 1")
        return t.w[0]
    return t.w


def disagreement_test(tuples: Sequence[DecisionTuple], alpha: float,
                      plan: PermutationPlan | None = None,
                      allow_reviewer_reuse: bool = False) -> TestOutcome:
    """Permutation test on SB decisions of reviewer pairs that disagreed.

    Keeps the null outright when either side contributes no disagreement;
    the effect size tau is the SB acceptance-rate gap among disagreements.
    ``allow_reviewer_reuse`` accepts tuple sets built from the full assignment
    (several decisions per reviewer); that treats same-reviewer reviews as
    independent and voids the calibration guarantee, so it is never a default.
    """
    _require_valid(tuples, allow_reviewer_reuse)
    u = [t.sb_decision for t in tuples if t.sb_decision != t.db_decision and _scalar_w(t) == 1]
    v = [t.sb_decision for t in tuples if t.sb_decision != t.db_decision and _scalar_w(t) == -1]
    if not u or not v:
        return keep_null(n_u=len(u), n_v=len(v), method="empty-side")
    return permutation_two_sample(u, v, alpha, plan)


def counting_threshold(n_u: int, n_v: int, alpha: float) -> float:
    return math.sqrt(2.0 * (1.0 / n_u + 1.0 / n_v) * math.log(2.0 / alpha))


def counting_test(tuples: Sequence[DecisionTuple], alpha: float,
                  allow_reviewer_reuse: bool = False) -> TestOutcome:
    """Within-pair decision differences compared across the two paper groups.

    gamma = mean(Y - X | w=+1) - mean(Y - X | w=-1); rejects when |gamma|
    clears the sub-Gaussian concentration threshold for the two sample sizes.
    ``allow_reviewer_reuse`` admits full-assignment tuple sets; see
    disagreement_test for the caveat.
    """
    _require_valid(tuples, allow_reviewer_reuse)
    u = np.array([t.sb_decision - t.db_decision for t in tuples if _scalar_w(t) == 1], dtype=float)
    v = np.array([t.sb_decision - t.db_decision for t in tuples if _scalar_w(t) == -1], dtype=float)
    if u.size == 0 or v.size == 0:
        return keep_null(n_u=int(u.size), n_v=int(v.size), method="empty-side")
    gamma = float(u.mean() - v.mean())
    threshold = counting_threshold(u.size, v.size, alpha)
    return TestOutcome(reject=abs(gamma) > threshold, statistic=gamma,
                       threshold=threshold, effect_size=gamma,
                       n_u=int(u.size), n_v=int(v.size), method="hoeffding")


def wald_baseline_test(sb_decisions: Mapping[tuple[int, int], int],
                       score_estimates: np.ndarray,
                       labels: PropertyVector,
                       alpha: float,
                       reviewer_fixed_effects: bool = False) -> TestOutcome:
    """The score-plug-in logistic baseline: regress every SB decision on the
    per-paper score estimate and the property indicator, then Wald-test the
    property coefficient.

    Degenerate fits (separation, rank loss, non-convergence) keep the null
    and are flagged, so a Monte Carlo caller can report them separately.
    """
    if not sb_decisions:
        return keep_null(degenerate=True, method="no-data")
    score_estimates = np.asarray(score_estimates, dtype=float)
    items = sorted(sb_decisions.items())
    reviewers = np.array([r for (r, _p), _d in items])
    papers = np.array([p for (_r, p), _d in items])
    y = np.array([d for _pair, d in items], dtype=float)
    if papers.max() >= score_estimates.size or np.any(np.isnan(score_estimates[papers])):
        raise ValueError("every reviewed paper needs a score estimate")
    w = labels.column(0)[papers].astype(float)
    cols = [np.ones(y.size), score_estimates[papers], w]
    w_index = 2
    if reviewer_fixed_effects:
        cols.append(glm.reviewer_effect_columns(reviewers))
    X = np.column_stack(cols)
    try:
        fit = glm.fit_logistic(X, y)
        return wald_outcome_at(fit, w_index, alpha)
    except glm.GlmError as exc:
        return keep_null(degenerate=True, method=f"degenerate:{type(exc).__name__}")


def wald_outcome_at(fit: glm.GlmFit, index: int, alpha: float) -> TestOutcome:
    try:
        return glm.wald_test(fit, index, alpha)
    except ValueError:
        return keep_null(degenerate=True, method="degenerate:ZeroSE")


def _label_matrix(tuples: Sequence[DecisionTuple]) -> np.ndarray:
    rows = []
    for t in tuples:
        rows.append(t.w if isinstance(t.w, tuple) else (t.w,))
    return np.asarray(rows, dtype=float)


def multiprop_linear_test(tuples: Sequence[DecisionTuple], target: int,
                          alpha: float) -> TestOutcome:
    """Regress the within-pair difference Y - X on the property indicators.

    Differencing removes the unknown per-paper representation from the mean,
    so ordinary least squares with a normal-reference Wald test applies.
    ``target`` is the 1-based property index.
    """
    _require_valid(tuples, allow_reviewer_reuse=False)
    if not tuples:
        return keep_null(degenerate=True, method="no-data")
    W = _label_matrix(tuples)
    if not 1 <= target <= W.shape[1]:
        raise IndexError(f"target property {target} out of range")
    y = np.array([t.sb_decision - t.db_decision for t in tuples], dtype=float)
    X = np.column_stack([np.ones(len(tuples)), W])
    fit = glm.fit_linear(X, y)
    return wald_outcome_at(fit, target, alpha)


def multiprop_logistic_test(tuples: Sequence[DecisionTuple], target: int,
                            alpha: float) -> TestOutcome:
    """Logistic regression of SB decisions on the property indicators,
    restricted to disagreeing pairs.

    Conditioning on disagreement cancels the per-paper representation in the
    log-odds; the intercept then estimates the SB-vs-DB intercept gap.
    Rank problems and separation propagate as glm errors.
    """
    _require_valid(tuples, allow_reviewer_reuse=False)
    kept = [t for t in tuples if t.sb_decision != t.db_decision]
    if not kept:
        return keep_null(degenerate=True, method="no-disagreement")
    W = _label_matrix(kept)
    if not 1 <= target <= W.shape[1]:
        raise IndexError(f"target property {target} out of range")
    y = np.array([t.sb_decision for t in kept], dtype=float)
    X = np.column_stack([np.ones(len(kept)), W])
    fit = glm.fit_logistic(X, y)
    return wald_outcome_at(fit, target, alpha)
