"""Scenario registry and seeded Monte Carlo driver.

Every registered scenario knows how to run one iteration given its parameters
and a per-iteration random stream derived from (seed, family, sweep index,
iteration index), so results are reproducible bit for bit regardless of how
many worker processes execute the iterations.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import design, stattests, worlds
from .assignment import (BidAlgorithm, RandomAlgorithm, TpmsAlgorithm,
                         sample_random_assignment, solve_bid_assignment,
                         solve_tpms)
from .core import (Assignment, ConditionAllocation, PropertyVector, RngStream,
                   TestOutcome, build_tuples, sample_decisions)

ALPHA = 0.05
THREADS_ENV = "PEERBIAS_THREADS"

BASELINE = "baseline"
DISAGREEMENT = "disagreement"
COUNTING = "counting"


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    sweep_name: str
    sweep_grid: tuple
    iterations: int
    seed: int
    tests: tuple
    params: dict = field(default_factory=dict)
    family: str = ""

    def __post_init__(self):
        if not self.sweep_grid:
            raise ValueError("sweep grid must be nonempty")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.family:
            object.__setattr__(self, "family", self.scenario)


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    sweep_name: str
    sweep_value: object
    test: str
    rejection_rate: float
    mean_effect: float
    degenerate: int
    iters: int
    seed: int


@dataclass(frozen=True)
class ScenarioResult:
    rows: tuple

    def by(self, test: str | None = None, sweep_value=None) -> list[ResultRow]:
        out = [r for r in self.rows
               if (test is None or r.test == test)
               and (sweep_value is None or r.sweep_value == sweep_value)]
        return out

    def rate(self, test: str, sweep_value) -> float:
        rows = self.by(test, sweep_value)
        if len(rows) != 1:
            raise KeyError(f"no unique row for {test}/{sweep_value}")
        return rows[0].rejection_rate


# ---------------------------------------------------------------------------
# building blocks shared by the scenario iteration functions


def random_split(m: int, gen: np.random.Generator) -> ConditionAllocation:
    mask = np.zeros(m, dtype=bool)
    mask[gen.permutation(m)[: m // 2]] = True
    return ConditionAllocation(mask)


def split_setup_assignments(inst: worlds.Instance, lam: int, mu: int,
                            gen: np.random.Generator,
                            similarity=None, bids=None
                            ) -> tuple[ConditionAllocation, Assignment, Assignment]:
    """The conventional setup: reviewers split into conditions first, then the
    two condition assignments are computed independently."""
    alloc = random_split(inst.m, gen)
    out = []
    for reviewers, bid_matrix in ((alloc.sb_reviewers(), bids[0] if bids else None),
                                  (alloc.db_reviewers(), bids[1] if bids else None)):
        if similarity is not None:
            a = solve_tpms(similarity, lam, mu, gen, eligible_reviewers=reviewers)
        elif bid_matrix is not None:
            a = solve_bid_assignment(bid_matrix, lam, mu, gen,
                                     eligible_reviewers=reviewers)
        else:
            a = sample_random_assignment(inst.n, inst.m, lam, mu, gen,
                                         eligible_reviewers=reviewers)
        out.append(a)
    return alloc, out[0], out[1]


def run_tests(inst: worlds.Instance, a_sb: Assignment, a_db: Assignment,
              slots, tests: tuple, gen: np.random.Generator,
              fixed_effects: bool = False, alpha: float = ALPHA
              ) -> dict[str, TestOutcome]:
    sb_dec = sample_decisions(inst.pi_sb, a_sb, gen)
    db_dec = sample_decisions(inst.pi_db, a_db, gen)
    tuples = build_tuples(slots, sb_dec, db_dec, inst.labels)
    out: dict[str, TestOutcome] = {}
    for test in tests:
        if test == DISAGREEMENT:
            out[test] = stattests.disagreement_test(tuples, alpha)
        elif test == COUNTING:
            out[test] = stattests.counting_test(tuples, alpha)
        elif test == BASELINE:
            scores = inst.score_estimates(a_db, gen)
            out[test] = stattests.wald_baseline_test(
                sb_dec, scores, inst.labels, alpha,
                reviewer_fixed_effects=fixed_effects)
        else:
            raise ValueError(f"unknown test {test!r}")
    return out


def split_setup_iteration(inst: worlds.Instance, lam: int, mu: int, tests: tuple,
                          gen: np.random.Generator, similarity=None, bids=None,
                          fixed_effects: bool = False) -> dict[str, TestOutcome]:
    alloc, a_sb, a_db = split_setup_assignments(inst, lam, mu, gen, similarity, bids)
    slots = design.match_dispatch(a_sb, a_db, lam, mu, inst.labels, gen)
    return run_tests(inst, a_sb, a_db, slots, tests, gen, fixed_effects)


def paired_setup_iteration(inst: worlds.Instance, lam: int, mu: int, tests: tuple,
                           gen: np.random.Generator, algo=None,
                           fixed_effects: bool = False) -> dict[str, TestOutcome]:
    plan = design.run_procedure1(inst.n, inst.m, lam, mu, inst.labels,
                                 algo or RandomAlgorithm(), gen)
    return run_tests(inst, plan.sb_assignment(), plan.db_assignment(),
                     plan.slots, tests, gen, fixed_effects)


# ---------------------------------------------------------------------------
# the scenario registry


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    description: str
    sweep_name: str
    sweep_grid: tuple
    tests: tuple
    params: dict
    iterate: Callable  # (params: dict, sweep_value, gen) -> dict[test, TestOutcome]
    family: str = ""
    halve_grid_in_ci: bool = False

    def default_config(self, iterations: int = 5000, seed: int = 20240838,
                       profile: str = "full") -> ScenarioConfig:
        params = dict(self.params)
        grid = self.sweep_grid
        if profile == "ci":
            iterations = min(iterations, 1000)
            if self.halve_grid_in_ci:
                grid = tuple(v // 2 for v in grid)
            elif "n" in params:
                params["n"] = params["n"] // 2
        return ScenarioConfig(scenario=self.name, sweep_name=self.sweep_name,
                              sweep_grid=grid, iterations=iterations, seed=seed,
                              tests=self.tests, params=params,
                              family=self.family or self.name)


def _noisy_logistic_iter(params: dict, sweep_value, gen) -> dict[str, TestOutcome]:
    """Split-pool setup over the three-coefficient logistic world; the sweep
    variable is either the score-label correlation or the paper count."""
    p = dict(params)
    if p.get("sweep") == "phi":
        p["phi"] = sweep_value
    else:
        p["n"] = int(sweep_value)
    n = p["n"]
    lam, mu = p["lam"], p["mu"]
    m = 2 * ((lam * n + mu - 1) // mu)
    inst = worlds.gen_logistic_world(n, m, p["beta0"], p["beta1"], p["beta2"],
                                     tuple(p["q_range"]), p["phi"], p["sigma"], gen)
    return split_setup_iteration(inst, lam, mu, tuple(p["tests"]), gen)


def _cubic_iter(params: dict, sweep_value, gen) -> dict[str, TestOutcome]:
    p = dict(params)
    p["phi"] = sweep_value
    n = p["n"]
    lam, mu = p["lam"], p["mu"]
    m = 2 * ((lam * n + mu - 1) // mu)
    inst = worlds.gen_cubic_mismatch(n, m, p["beta0"], p["beta1"],
                                     tuple(p["q_range"]), p["phi"], gen)
    return split_setup_iteration(inst, lam, mu, tuple(p["tests"]), gen)


def _calibration_iter(params: dict, sweep_value, gen) -> dict[str, TestOutcome]:
    """Reviewer-load sweep: fewer, busier reviewers as mu grows; the baseline
    gets a per-reviewer intercept whenever reviewers have more than one paper."""
    mu = int(sweep_value)
    n = params["n"]
    m = 2 * ((n + mu - 1) // mu)
    inst = worlds.gen_calibration_world(n, m, params["beta0"], params["beta1"],
                                        params["leniency"], gen)
    return split_setup_iteration(inst, 1, mu, tuple(params["tests"]), gen,
                                 fixed_effects=mu > 1)


def _bidding_iter(params: dict, sweep_value, gen) -> dict[str, TestOutcome]:
    blind = sweep_value == "blind"
    n = params["n"]
    m = 2 * n
    inst, sb_bids, db_bids = worlds.gen_bidding_world(n, m, blind, gen)
    return split_setup_iteration(inst, 1, 1, tuple(params["tests"]), gen,
                                 bids=(sb_bids, db_bids))


def _assignment_iter(params: dict, sweep_value, gen) -> dict[str, TestOutcome]:
    """Engineered-similarity world under the split-pool setup versus the
    paired design, both assigning by similarity maximization."""
    n = params["n"]
    m = 2 * n
    inst, sim, _thresholds = worlds.gen_adversarial_similarity(n, m, gen)
    if sweep_value == "split":
        return split_setup_iteration(inst, 1, 1, tuple(params["tests"]), gen,
                                     similarity=sim)
    return paired_setup_iteration(inst, 1, 1, tuple(params["tests"]), gen,
                                  algo=TpmsAlgorithm(sim))


def _dual_instance_iter(params: dict, sweep_value, gen) -> dict[str, TestOutcome]:
    """The two matrix pairs satisfying one relative-bias family's null and the
    other's alternative. The reading parameter is metadata only: it must not
    influence a single random draw, so both readings measure identical rates."""
    n = params["n"]
    lam, mu = params["lam"], params["mu"]
    m = 2 * lam * n
    labels = PropertyVector(np.where(gen.random(n) < 0.5, 1, -1))
    inst_i, inst_ii = worlds.gen_relative_dual_instances(labels, m)
    inst = inst_i if sweep_value == "i" else inst_ii
    return split_setup_iteration(inst, lam, mu, tuple(params["tests"]), gen)


def _null_calibration_iter(params: dict, sweep_value, gen) -> dict[str, TestOutcome]:
    n = params["n"]
    m = 2 * n
    inst = worlds.gen_logistic_world(n, m, params["beta0"], params["beta1"], 0.0,
                                     tuple(params["q_range"]), params["phi"],
                                     params["sigma"], gen)
    return paired_setup_iteration(inst, params["lam"], params["mu"],
                                  tuple(params["tests"]), gen)


def _random_split_null_iter(params: dict, sweep_value, gen) -> dict[str, TestOutcome]:
    n = params["n"]
    lam, mu = params["lam"], params["mu"]
    per_condition = math.ceil(1.2 * lam * n / mu)  # 20% reviewer slack
    m = 2 * per_condition
    inst = worlds.gen_logistic_world(n, m, params["beta0"], params["beta1"], 0.0,
                                     tuple(params["q_range"]), params["phi"],
                                     params["sigma"], gen)
    return split_setup_iteration(inst, lam, mu, tuple(params["tests"]), gen)


def _logistic_params(beta2, q_range, phi, sigma, n, lam, mu, tests, sweep="n"):
    return {"beta0": 1.0, "beta1": 2.0, "beta2": beta2, "q_range": q_range,
            "phi": phi, "sigma": sigma, "n": n, "lam": lam, "mu": mu,
            "tests": tests, "sweep": sweep}


SCENARIOS: dict[str, ScenarioSpec] = {}


def _register(spec: ScenarioSpec) -> None:
    SCENARIOS[spec.name] = spec


_TWO = (BASELINE, DISAGREEMENT)
_THREE = (BASELINE, DISAGREEMENT, COUNTING)
_PAIR = (DISAGREEMENT, COUNTING)

_register(ScenarioSpec(
    "fig1a", "No-bias world with noisy score estimates and score-label "
    "correlation 0.4; false-alarm rate of the plug-in baseline and the "
    "disagreement test as the paper count grows.",
    "n", (100, 250, 500, 1000), _TWO,
    _logistic_params(0.0, (-1.0, 1.0), 0.4, 0.7, 0, 2, 1, _TWO),
    _noisy_logistic_iter, halve_grid_in_ci=True))

_register(ScenarioSpec(
    "fig1b", "Bias against the property group (log-odds -0.35) with noisy "
    "scores and correlation 0.6; detection power versus paper count.",
    "n", (250, 500, 750, 1000), _TWO,
    _logistic_params(-0.35, (-0.5, 0.5), 0.6, 0.7, 0, 2, 1, _TWO),
    _noisy_logistic_iter, halve_grid_in_ci=True))

_register(ScenarioSpec(
    "fig1c", "Bias in favor (log-odds +0.35) with exact scores and zero "
    "correlation, the plug-in baseline's ideal conditions; power versus "
    "paper count.",
    "n", (250, 500, 750, 1000), _TWO,
    _logistic_params(0.35, (-1.0, 1.0), 0.0, 0.0, 0, 2, 1, _TWO),
    _noisy_logistic_iter, halve_grid_in_ci=True))

_register(ScenarioSpec(
    "fig2a", "Measurement error: no-bias world, noisy score estimates "
    "(sd 0.7), false-alarm rate versus score-label correlation.",
    "phi", (0.0, 0.1, 0.2, 0.3, 0.4, 0.5), _TWO,
    _logistic_params(0.0, (-2.0, 2.0), 0.0, 0.7, 500, 2, 2, _TWO, sweep="phi"),
    _noisy_logistic_iter))

_register(ScenarioSpec(
    "fig2b", "Model mismatch: scores enter the true link cubed while the "
    "baseline fits them linearly and knows them exactly; false-alarm rate "
    "versus correlation.",
    "phi", (0.0, 0.1, 0.2, 0.3, 0.4, 0.5), _TWO,
    {"beta0": 1.0, "beta1": 2.0, "q_range": (-2.0, 2.0), "n": 500,
     "lam": 2, "mu": 2, "tests": _TWO},
    _cubic_iter))

_register(ScenarioSpec(
    "fig2c", "Reviewer calibration: per-reviewer leniency on low-clarity "
    "papers, extreme score-label dependence; false-alarm rate versus papers "
    "per reviewer (baseline gets per-reviewer intercepts).",
    "mu", (1, 5, 10, 15, 20, 40, 60), _TWO,
    {"beta0": 0.0, "beta1": 0.25, "leniency": 0.4, "n": 1000, "tests": _TWO},
    _calibration_iter))

_register(ScenarioSpec(
    "fig3a", "Non-blind bidding: a lenient reviewer minority bids up the "
    "property group when identities are visible; both tests' false-alarm "
    "rates under non-blind versus blind bidding.",
    "bidding", ("non-blind", "blind"), _TWO,
    {"n": 1000, "tests": _TWO}, _bidding_iter))

_register(ScenarioSpec(
    "fig3b", "Similarity-driven assignment: engineered similarities put "
    "reviewers at an enthusiasm boundary; false-alarm rates under the "
    "split-pool setup versus the paired design, same assignment algorithm.",
    "setup", ("split", "paired"), _TWO,
    {"n": 500, "tests": _TWO}, _assignment_iter))

_register(ScenarioSpec(
    "fig4a", "Power comparison of all three tests in the noisy, correlated "
    "world of fig1b.",
    "n", (250, 500, 750, 1000), _THREE,
    _logistic_params(-0.35, (-0.5, 0.5), 0.6, 0.7, 0, 2, 1, _THREE),
    _noisy_logistic_iter, halve_grid_in_ci=True))

_register(ScenarioSpec(
    "fig4b", "Power comparison of all three tests with exact scores and zero "
    "correlation (fig1c world).",
    "n", (250, 500, 750, 1000), _THREE,
    _logistic_params(0.35, (-1.0, 1.0), 0.0, 0.0, 0, 2, 1, _THREE),
    _noisy_logistic_iter, halve_grid_in_ci=True))

_register(ScenarioSpec(
    "fig5a", "The dual matrix pairs read as the probability-shift family: "
    "instance (i) is its null, instance (ii) its alternative.",
    "instance", ("i", "ii"), _PAIR,
    {"n": 1000, "lam": 2, "mu": 1, "tests": _PAIR, "reading": "linear"},
    _dual_instance_iter, family="fig5"))

_register(ScenarioSpec(
    "fig5b", "The same dual matrix pairs read as the log-odds-shift family: "
    "instance (i) becomes the alternative, instance (ii) the null. Rates are "
    "identical to fig5a by construction (same matrices, same streams).",
    "instance", ("i", "ii"), _PAIR,
    {"n": 1000, "lam": 2, "mu": 1, "tests": _PAIR, "reading": "logistic"},
    _dual_instance_iter, family="fig5"))

_register(ScenarioSpec(
    "null-calibration", "No-bias logistic world under the paired design with "
    "random assignment; both robust tests must hold the 0.05 level.",
    "setting", ("paired-null",), _PAIR,
    {"beta0": 1.0, "beta1": 2.0, "q_range": (-2.0, 2.0), "phi": 0.3,
     "sigma": 0.7, "n": 500, "lam": 1, "mu": 1, "tests": _PAIR},
    _null_calibration_iter))

_register(ScenarioSpec(
    "proposition-b", "No-bias world under the split-pool setup with random "
    "assignment and the tuple-extraction matchers; both robust tests must "
    "hold the level.",
    "setting", ("split-random-null",), _PAIR,
    {"beta0": 1.0, "beta1": 2.0, "q_range": (-2.0, 2.0), "phi": 0.3,
     "sigma": 0.7, "n": 500, "lam": 1, "mu": 2, "tests": _PAIR},
    _random_split_null_iter))


# ---------------------------------------------------------------------------
# the Monte Carlo driver


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw and raw != "0":
        return max(1, int(raw))
    return os.cpu_count() or 1


def _partial_sums(scenario: str, params: dict, sweep_value, tests: tuple,
                  seed: int, family: str, sweep_idx: int,
                  start: int, stop: int) -> dict[str, list]:
    spec = SCENARIOS[scenario]
    sums = {t: [0, 0.0, 0] for t in tests}  # rejects, effect sum, degenerate
    for it in range(start, stop):
        gen = RngStream(seed, (family, sweep_idx, it)).generator()
        outcomes = spec.iterate(params, sweep_value, gen)
        for t in tests:
            o = outcomes[t]
            s = sums[t]
            s[0] += int(o.reject)
            if not o.degenerate:
                s[1] += o.effect_size
            s[2] += int(o.degenerate)
    return sums


def _merge(into: dict, part: dict) -> None:
    for t, s in part.items():
        acc = into.setdefault(t, [0, 0.0, 0])
        acc[0] += s[0]
        acc[1] += s[1]
        acc[2] += s[2]


def run_scenario(cfg: ScenarioConfig, workers: int | None = None) -> ScenarioResult:
    """Run every (sweep value, iteration) cell and aggregate rejection rates.

    Deterministic for a fixed config: iteration streams depend only on
    (seed, family, sweep index, iteration index) and partial results are
    reduced in index order, never in completion order.
    """
    if cfg.scenario not in SCENARIOS:
        raise KeyError(f"unknown scenario {cfg.scenario!r}")
    workers = _worker_count() if workers is None else max(1, workers)
    tasks = []
    # chunk boundaries must not depend on the worker count, or float effect
    # sums would regroup and break bitwise determinism
    chunk = max(1, math.ceil(cfg.iterations / 32))
    for sweep_idx, sweep_value in enumerate(cfg.sweep_grid):
        for start in range(0, cfg.iterations, chunk):
            stop = min(start + chunk, cfg.iterations)
            tasks.append((cfg.scenario, cfg.params, sweep_value, cfg.tests,
                          cfg.seed, cfg.family, sweep_idx, start, stop))
    if workers > 1 and len(tasks) > 1:
        import multiprocessing as mp
        with mp.get_context("spawn").Pool(workers) as pool:
            partials = pool.starmap(_partial_sums, tasks)
    else:
        partials = [_partial_sums(*t) for t in tasks]
    rows = []
    for sweep_idx, sweep_value in enumerate(cfg.sweep_grid):
        agg: dict[str, list] = {}
        for task, part in zip(tasks, partials):
            if task[6] == sweep_idx:
                _merge(agg, part)
        for t in cfg.tests:
            rejects, effect_sum, degen = agg[t]
            live = cfg.iterations - degen
            rows.append(ResultRow(
                scenario=cfg.scenario, sweep_name=cfg.sweep_name,
                sweep_value=sweep_value, test=t,
                rejection_rate=rejects / cfg.iterations,
                mean_effect=effect_sum / live if live else 0.0,
                degenerate=degen, iters=cfg.iterations, seed=cfg.seed))
    return ScenarioResult(rows=tuple(rows))


CSV_HEADER = "scenario,sweep_name,sweep_value,test,rejection_rate,mean_effect,degenerate,iters,seed"


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def csv_lines(result: ScenarioResult) -> list[str]:
    lines = [CSV_HEADER]
    for r in result.rows:
        lines.append(",".join([r.scenario, r.sweep_name, _fmt(r.sweep_value),
                               r.test, _fmt(r.rejection_rate), _fmt(r.mean_effect),
                               str(r.degenerate), str(r.iters), str(r.seed)]))
    return lines


def write_csv(result: ScenarioResult, path) -> None:
    """Six-significant-digit CSV with a fixed header, UTF-8, LF line endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(csv_lines(result)) + "\n")


def read_csv_rows(path) -> list[dict]:
    import csv
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
