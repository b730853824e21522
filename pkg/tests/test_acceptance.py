"""Acceptance suite: one test per criterion, each printing PASS/FAIL lines.

Profiles (PEERBIAS_ACCEPTANCE_PROFILE): "ci" (default) runs 1000 Monte Carlo
iterations with halved paper counts and binomial-3-sigma widened bands;
"full" runs the 5000-iteration studies at full size with the stated bands.
The dual-instance study keeps its full paper count in both profiles because
its power clauses are statements about that specific size; only its iteration
count changes. Exact-value and oracle-equivalence criteria run identically in
both profiles.
"""

import math
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from peerbias import glm
from peerbias.assignment import SimilarityMatrix, hungarian_max, solve_tpms
from peerbias.core import DecisionTuple, PropertyVector, RngStream
from peerbias.design import exact_match, greedy_match
from peerbias.harness import SCENARIOS, run_scenario
from peerbias.stattests import (PermutationPlan, counting_threshold,
                                multiprop_linear_test, multiprop_logistic_test,
                                permutation_two_sample)
from peerbias.worlds import logistic

PROFILE = os.environ.get("PEERBIAS_ACCEPTANCE_PROFILE", "ci").strip() or "ci"
assert PROFILE in ("ci", "full"), PROFILE
ITERS = 5000 if PROFILE == "full" else 1000
ALPHA = 0.05
_checks: list[tuple[str, bool, str]] = []


def check(name: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line)
    _checks.append((name, ok, detail))
    return ok


def band3(p: float, r: int) -> float:
    return 3.0 * math.sqrt(p * (1.0 - p) / r)


def widen(p_nominal: float) -> float:
    """Extra slack for the ci profile: the growth of the 3-sigma binomial
    band when the iteration count drops from 5000 to ITERS."""
    return max(0.0, band3(p_nominal, ITERS) - band3(p_nominal, 5000))


UPPER_NULL = 0.06 + widen(0.05)            # "holds the level" ceilings
LOWER_INFLATED_15 = 0.15 - widen(0.15)     # "clearly inflated" floors
LOWER_INFLATED_10 = 0.10 - widen(0.10)
LOWER_POWER_50 = 0.50 - widen(0.50)
CAL_BAND = (0.03 - widen(0.05), 0.07 + widen(0.05))
MONO_SLACK_2 = 0.02 + math.sqrt(2.0) * widen(0.15)
MONO_SLACK_3 = 0.03 + math.sqrt(2.0) * widen(0.5)
GAP_10 = 0.10 - math.sqrt(2.0) * widen(0.5)


def _run(scenario: str, grid=None, full_n: bool = False, iters: int = ITERS):
    spec = SCENARIOS[scenario]
    cfg = spec.default_config(profile="full" if full_n else PROFILE)
    cfg = replace(cfg, iterations=iters)
    if grid is not None:
        cfg = replace(cfg, sweep_grid=grid)
    return run_scenario(cfg)


print(f"\nacceptance profile: {PROFILE} ({ITERS} iterations)")


def test_criterion_01_null_calibration():
    start = time.perf_counter()
    res = _run("null-calibration")
    elapsed = time.perf_counter() - start
    d = res.rate("disagreement", "paired-null")
    c = res.rate("counting", "paired-null")
    ok = check("criterion 1", d <= UPPER_NULL and c <= UPPER_NULL,
               f"paired-design null: disagreement={d:.4f}, counting={c:.4f}, "
               f"bound={UPPER_NULL:.4f}")
    ok &= check("criterion 1 runtime", elapsed < 300,
                f"{elapsed:.1f}s for {ITERS} iterations (target < 300s)")
    assert ok


@pytest.fixture(scope="module")
def fig2a():
    return _run("fig2a")


def test_criterion_02_measurement_error(fig2a):
    grid = [r.sweep_value for r in fig2a.by("baseline")]
    base = [fig2a.rate("baseline", v) for v in grid]
    dis = [fig2a.rate("disagreement", v) for v in grid]
    ok = check("criterion 2 inflation", base[-1] >= LOWER_INFLATED_15,
               f"baseline at correlation {grid[-1]}: {base[-1]:.4f} "
               f">= {LOWER_INFLATED_15:.4f}")
    mono = all(b >= a - MONO_SLACK_2 for a, b in zip(base, base[1:]))
    ok &= check("criterion 2 monotone", mono,
                f"baseline along the sweep: {[f'{b:.3f}' for b in base]}")
    lo, hi = CAL_BAND
    ok &= check("criterion 2 robust-test band",
                all(lo <= v <= hi for v in dis),
                f"disagreement in [{lo:.3f}, {hi:.3f}] at every point: "
                f"{[f'{v:.3f}' for v in dis]}")
    assert ok


def test_criterion_03_mismatch_and_calibration():
    fig2b = _run("fig2b", grid=(0.0, 0.25, 0.5))
    base = fig2b.rate("baseline", 0.5)
    dis_vals = [r.rejection_rate for r in fig2b.by("disagreement")]
    ok = check("criterion 3 cubic link", base >= LOWER_INFLATED_15,
               f"baseline with exact scores, cubic truth: {base:.4f}")
    ok &= check("criterion 3 cubic robust", max(dis_vals) <= UPPER_NULL,
                f"disagreement max over sweep: {max(dis_vals):.4f}")
    fig2c = _run("fig2c", grid=(1, 40))
    base40 = fig2c.rate("baseline", 40)
    dis40 = fig2c.rate("disagreement", 40)
    ok &= check("criterion 3 reviewer-load 40", base40 >= LOWER_INFLATED_15,
                f"baseline with per-reviewer intercepts: {base40:.4f}")
    ok &= check("criterion 3 load robust", dis40 <= UPPER_NULL,
                f"disagreement at load 40: {dis40:.4f}")
    base1 = fig2c.rate("baseline", 1)
    ok &= check("criterion 3 single-review calibration",
                abs(base1 - 0.05) <= 0.01 + widen(0.05),
                f"baseline at one paper per reviewer: {base1:.4f} "
                f"(0.05 +/- {0.01 + widen(0.05):.3f})")
    assert ok


def test_criterion_04_setup_effects():
    fig3a = _run("fig3a")
    ok = True
    for test in ("baseline", "disagreement"):
        nb = fig3a.rate(test, "non-blind")
        bl = fig3a.rate(test, "blind")
        ok &= check(f"criterion 4 bidding {test}",
                    nb > LOWER_INFLATED_10 and bl <= UPPER_NULL,
                    f"non-blind={nb:.4f} (> {LOWER_INFLATED_10:.3f}), "
                    f"blind={bl:.4f} (<= {UPPER_NULL:.3f})")
    fig3b = _run("fig3b")
    for test in ("baseline", "disagreement"):
        split = fig3b.rate(test, "split")
        paired = fig3b.rate(test, "paired")
        ok &= check(f"criterion 4 assignment {test}",
                    split > LOWER_INFLATED_10 and paired <= UPPER_NULL,
                    f"split-pool={split:.4f}, paired design={paired:.4f}")
    assert ok


def test_criterion_05_power_ordering():
    fig4a = _run("fig4a")
    grid = [r.sweep_value for r in fig4a.by("baseline")]
    top = grid[-1]
    gap = fig4a.rate("disagreement", top) - fig4a.rate("baseline", top)
    ok = check("criterion 5 noisy-world gap", gap >= GAP_10,
               f"disagreement - baseline at n={top}: {gap:.4f} >= {GAP_10:.3f}")
    fig4b = _run("fig4b")
    b = fig4b.rate("baseline", top)
    d = fig4b.rate("disagreement", top)
    c = fig4b.rate("counting", top)
    ok &= check("criterion 5 exact-world order", b >= d >= c,
                f"baseline={b:.4f} >= disagreement={d:.4f} >= counting={c:.4f}")
    for test in ("baseline", "disagreement", "counting"):
        series = [fig4b.rate(test, v) for v in grid]
        mono = all(y >= x - MONO_SLACK_3 for x, y in zip(series, series[1:]))
        ok &= check(f"criterion 5 monotone {test}", mono,
                    f"{[f'{v:.3f}' for v in series]}")
    assert ok


def test_criterion_06_dual_instances():
    # power clauses are statements about the full paper count; only the
    # iteration budget follows the profile
    fig5a = _run("fig5a", full_n=True)
    fig5b = _run("fig5b", full_n=True)
    ok = check("criterion 6 instance-i calibration",
               fig5a.rate("counting", "i") <= UPPER_NULL,
               f"counting on (i): {fig5a.rate('counting', 'i'):.4f}")
    ok &= check("criterion 6 instance-i power",
                fig5a.rate("disagreement", "i") >= LOWER_POWER_50,
                f"disagreement on (i): {fig5a.rate('disagreement', 'i'):.4f} "
                f">= {LOWER_POWER_50:.3f}")
    ok &= check("criterion 6 instance-ii calibration",
                fig5a.rate("disagreement", "ii") <= UPPER_NULL,
                f"disagreement on (ii): {fig5a.rate('disagreement', 'ii'):.4f}")
    same = all(ra.rejection_rate == rb.rejection_rate
               and ra.mean_effect == rb.mean_effect
               for ra, rb in zip(fig5a.rows, fig5b.rows))
    ok &= check("criterion 6 reading invariance", same,
                "both readings measure identical rates (same matrices)")
    # Unattainable at these sizes: the within-pair rate gap of instance (ii)
    # (0.1063) sits below the concentration threshold reachable with at most
    # m/2 = 2000 one-decision-per-reviewer tuples (0.1215), capping the power
    # near 0.30. See the decisions ledger. Kept as stated, expected red.
    ok &= check("criterion 6 instance-ii power",
                fig5a.rate("counting", "ii") >= LOWER_POWER_50,
                f"counting on (ii): {fig5a.rate('counting', 'ii'):.4f} "
                f">= {LOWER_POWER_50:.3f}")
    assert ok


def test_criterion_07_random_split_setup():
    res = _run("proposition-b")
    d = res.rate("disagreement", "split-random-null")
    c = res.rate("counting", "split-random-null")
    assert check("criterion 7", d <= UPPER_NULL and c <= UPPER_NULL,
                 f"split-pool random-assignment null: disagreement={d:.4f}, "
                 f"counting={c:.4f}")


def test_criterion_08_exact_unit_values():
    th = counting_threshold(20, 20, ALPHA)
    ok = check("criterion 8 threshold", abs(th - 0.8589388166934752) < 1e-6,
               f"counting threshold at 20/20: {th:.10f}")
    out = permutation_two_sample([1, 1], [0, 0], ALPHA, PermutationPlan(mode="exact"))
    ok &= check("criterion 8 exact p", abs(out.p_value - 1 / 3) < 1e-15,
                f"two-vs-two pure split: p={out.p_value}")
    values = logistic(np.array([-1.0, 0.0, 1.0]))
    expect = (0.2689414213699951, 0.5, 0.7310585786300049)
    ok &= check("criterion 8 counterexample entries",
                bool(np.max(np.abs(values - expect)) < 1e-6),
                f"logistic at (-1, 0, 1) = {values.round(7).tolist()}")
    assert ok


def test_criterion_09_oracle_equivalence():
    from _oracles import brute_force_matching
    gen = np.random.default_rng(90)
    stream = RngStream(91)
    worst = 0.0
    for trial in range(200):
        w = gen.random((6, 6))
        a = solve_tpms(SimilarityMatrix(w), 1, 1, stream.child("tpms", trial))
        worst = max(worst, abs(a.total_weight(w) - brute_force_matching(w)))
    ok = check("criterion 9 tpms oracle", worst < 1e-9,
               f"max |solver - brute force| over 200 6x6 instances: {worst:.2e}")
    worst = 0.0
    for trial in range(200):
        shape = (int(gen.integers(2, 7)), int(gen.integers(2, 7)))
        w = gen.random(shape)
        rows, cols = hungarian_max(w, stream.child("hung", trial))
        worst = max(worst, abs(w[rows, cols].sum() - brute_force_matching(w)))
    ok &= check("criterion 9 matching oracle", worst < 1e-9,
                f"max gap over 200 rectangular instances: {worst:.2e}")

    from peerbias.assignment import sample_random_assignment
    all_n = True
    for trial in range(50):
        n = int(gen.integers(3, 10))
        lam = int(gen.integers(1, 4))
        mu = int(gen.integers(1, lam + 1))
        per = math.ceil(lam * n / mu) + int(gen.integers(0, 3))
        g = stream.child("em", trial).generator()
        a_sb = sample_random_assignment(n, 2 * per, lam, mu, g,
                                        eligible_reviewers=np.arange(per))
        a_db = sample_random_assignment(n, 2 * per, lam, mu, g,
                                        eligible_reviewers=np.arange(per, 2 * per))
        all_n &= len(exact_match(a_sb, a_db, g)) == n
    ok &= check("criterion 9 exact matcher", all_n,
                "one tuple per paper on 50 random instances with lam >= mu")

    bound_ok = True
    for trial in range(100):
        n = int(gen.integers(8, 24))
        mu = int(gen.integers(2, 5))
        per = math.ceil(n / mu) + 1
        n_pos = int(gen.integers(1, n))
        w = np.full(n, -1)
        w[gen.choice(n, n_pos, replace=False)] = 1
        labels = PropertyVector(w)
        g = stream.child("gm", trial).generator()
        a_sb = sample_random_assignment(n, 2 * per, 1, mu, g,
                                        eligible_reviewers=np.arange(per))
        a_db = sample_random_assignment(n, 2 * per, 1, mu, g,
                                        eligible_reviewers=np.arange(per, 2 * per))
        slots = greedy_match(a_sb, a_db, labels, g)
        need = min(n_pos, n - n_pos) // (4 * mu)
        pos = sum(labels.values[p] == 1 for p, _, _ in slots)
        bound_ok &= pos >= need and (len(slots) - pos) >= need
    ok &= check("criterion 9 greedy floor", bound_ok,
                "per-group tuple floor met on 100 random instances")
    assert ok


def test_criterion_10_numerics():
    gen = np.random.default_rng(100)
    q = gen.uniform(-1, 1, 800)
    w = np.where(gen.random(800) < 0.5, 1.0, -1.0)
    X = np.column_stack([np.ones(800), q, w])
    y = (gen.random(800) < logistic(1 + 2 * q + 0.35 * w)).astype(float)
    fit = glm.fit_logistic(X, y)
    h = 1e-6
    worst = 0.0
    for point in (fit.coefficients, np.zeros(3)):
        analytic = glm.logistic_score(X, y, point)
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            fd = (glm.logistic_loglik(X, y, point + e)
                  - glm.logistic_loglik(X, y, point - e)) / (2 * h)
            worst = max(worst, abs(analytic[j] - fd) / max(1.0, abs(fd), abs(analytic[j])))
    ok = check("criterion 10 gradient", worst < 1e-5,
               f"worst relative gap analytic-vs-central-difference: {worst:.2e}")

    rejects = 0
    trials = 5000
    for t in range(trials):
        g = RngStream(101, (t,)).generator()
        qs = g.uniform(-1, 1, 1000)
        ws = np.where(g.random(1000) < 0.5, 1.0, -1.0)
        rows_q = np.concatenate([qs, qs])
        rows_w = np.concatenate([ws, ws])
        ys = (g.random(2000) < logistic(1 + 2 * rows_q)).astype(float)
        Xs = np.column_stack([np.ones(2000), rows_q, rows_w])
        try:
            rejects += glm.wald_test(glm.fit_logistic(Xs, ys), 2, ALPHA).reject
        except glm.GlmError:
            pass
    rate = rejects / trials
    ok &= check("criterion 10 calibration", abs(rate - 0.05) <= 0.01,
                f"plug-in test under its exact assumptions: {rate:.4f} "
                f"(0.05 +/- 0.01 over {trials} trials)")
    assert ok


def _relative_tuples(gen, n, kind, beta0, betas):
    W = np.where(gen.random((n, 2)) < 0.5, 1, -1)
    if kind == "linear":
        q = gen.uniform(0.25, 0.65, n)
        p_db, p_sb = q, q + beta0 + W @ np.asarray(betas)
    else:
        q = gen.uniform(-1, 1, n)
        p_db = logistic(0.2 + q)
        p_sb = logistic(0.2 + beta0 + q + W @ np.asarray(betas))
    return [DecisionTuple(paper=j, sb_decision=int(gen.random() < p_sb[j]),
                          db_decision=int(gen.random() < p_db[j]),
                          w=(int(W[j, 0]), int(W[j, 1])),
                          sb_reviewer=2 * j, db_reviewer=2 * j + 1)
            for j in range(n)]


def test_criterion_11_multi_property():
    trials = ITERS
    rej_lin = rej_log = 0
    for t in range(trials):
        g = RngStream(110, (t,)).generator()
        rej_lin += multiprop_linear_test(
            _relative_tuples(g, 1000, "linear", 0.05, (0.0, 0.0)), 1, ALPHA).reject
        out = multiprop_logistic_test(
            _relative_tuples(g, 1000, "logistic", 0.4, (0.0, 0.0)), 1, ALPHA)
        rej_log += out.reject
    ok = check("criterion 11 shift-family nulls",
               rej_lin / trials <= UPPER_NULL and rej_log / trials <= UPPER_NULL,
               f"two-property nulls: linear={rej_lin / trials:.4f}, "
               f"logistic={rej_log / trials:.4f} (bound {UPPER_NULL:.4f})")
    hits = 0
    for t in range(trials):
        g = RngStream(111, (t,)).generator()
        hits += multiprop_linear_test(
            _relative_tuples(g, 4000, "linear", 0.05, (0.1, 0.0)), 1, ALPHA).reject
    power = hits / trials
    ok &= check("criterion 11 power", power >= 0.8 - widen(0.8),
                f"coefficient 0.1 at 4000 papers: power={power:.4f}")
    assert ok


def test_zzz_summary():
    failed = [name for name, ok, _ in _checks if not ok]
    print(f"\nacceptance summary: {len(_checks) - len(failed)}/{len(_checks)} "
          f"checks passed ({PROFILE} profile)")
    for name in failed:
        print(f"  red: {name}")
