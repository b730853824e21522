"""Generators for the synthetic review worlds used by the Monte Carlo studies:
the logistic decision model and its corruptions (noisy score estimates, cubic
link, reviewer leniency, strategic bidding, engineered similarities), the
shift-in-probability and shift-in-log-odds relative-bias families, and the
paired counterexample instances whose decision law is identical under two
different model readings.

Generators never clip probabilities: a parameterization that leaves [0, 1]
raises instead of silently changing the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assignment import BidMatrix, SimilarityMatrix
from .core import DB, SB, AcceptanceMatrix, Assignment, PropertyVector, RngStream

NULL = "null"
FAVOR = "favor"          # single-blind leniency toward the property group
AGAINST = "against"


def logistic(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def log_odds_shift(t: np.ndarray, shift: float) -> np.ndarray:
    """Push probabilities by a constant amount in log-odds space."""
    t = np.asarray(t, dtype=float)
    e = math.exp(shift)
    return t * e / (1.0 - t + t * e)


@dataclass(frozen=True)
class ScoreModel:
    """How the double-blind side reports a per-paper score estimate.

    ``exact`` returns the true score; ``noisy`` adds one Gaussian with the
    given standard deviation to the per-paper mean estimate; ``prob-report``
    averages the assigned DB reviewers' own acceptance probabilities.
    """

    kind: str = "exact"
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("exact", "noisy", "prob-report"):
            raise ValueError("unknown score model")


@dataclass(frozen=True)
class Instance:
    """One fully specified world: acceptance probabilities for both conditions,
    the property labels, and how DB score estimates are produced."""

    pi_sb: AcceptanceMatrix
    pi_db: AcceptanceMatrix
    labels: PropertyVector
    true_scores: np.ndarray | None
    score_model: ScoreModel
    ground_truth: str
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ground_truth not in (NULL, FAVOR, AGAINST):
            raise ValueError("ground truth must be null/favor/against")
        if self.pi_sb.n != self.pi_db.n or self.pi_sb.m != self.pi_db.m:
            raise ValueError("condition matrices must share the roster")

    @property
    def n(self) -> int:
        return self.pi_sb.n

    @property
    def m(self) -> int:
        return self.pi_sb.m

    def score_estimates(self, db_assignment: Assignment,
                        gen: np.random.Generator) -> np.ndarray:
        if self.score_model.kind == "exact":
            return np.asarray(self.true_scores, dtype=float)
        if self.score_model.kind == "noisy":
            return self.true_scores + gen.normal(0.0, self.score_model.sigma, self.n)
        probs = self.pi_db.pair_probs(db_assignment.reviewers, db_assignment.papers)
        sums = np.bincount(db_assignment.papers, weights=probs, minlength=self.n)
        counts = np.bincount(db_assignment.papers, minlength=self.n)
        return np.divide(sums, counts, out=np.full(self.n, np.nan), where=counts > 0)


def _probs(values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise ValueError(f"{what} leaves [0, 1]; refusing to clip")
    return values


def sample_correlated_w(q: np.ndarray, gamma: float, rng,
                        threshold: float = 0.0) -> PropertyVector:
    """Property labels tilted by the score: papers at or above the threshold
    get w=+1 with probability 0.5+gamma, papers below with 0.5-gamma."""
    if not 0.0 <= gamma < 0.5:
        raise ValueError("gamma must lie in [0, 0.5)")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    q = np.asarray(q, dtype=float)
    p_plus = np.where(q >= threshold, 0.5 + gamma, 0.5 - gamma)
    return PropertyVector(np.where(gen.random(q.size) < p_plus, 1, -1))


def gamma_for_correlation(phi: float) -> float:
    """Tilt producing correlation phi between the score and the label when the
    score is uniform and symmetric around the threshold: corr = gamma * sqrt(3)."""
    gamma = phi / math.sqrt(3.0)
    if not 0.0 <= gamma < 0.5:
        raise ValueError(f"target correlation {phi} is out of reach for the tilt sampler")
    return gamma


def gen_logistic_world(n: int, m: int, beta0: float, beta1: float, beta2: float,
                       q_range: tuple[float, float], phi: float,
                       noise_sigma: float, rng) -> Instance:
    """The three-coefficient logistic decision world.

    Every reviewer accepts with sigma(beta0 + beta1*q + beta2*w); the DB side
    has no property term. Labels are tilted toward high scores to hit the
    requested score-label correlation, and the DB score estimate carries
    Gaussian noise with standard deviation ``noise_sigma`` (0 means exact).
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    q = gen.uniform(q_range[0], q_range[1], n)
    labels = sample_correlated_w(q, gamma_for_correlation(phi), gen,
                                 threshold=(q_range[0] + q_range[1]) / 2.0)
    eta_db = beta0 + beta1 * q
    pi_db = AcceptanceMatrix(logistic(eta_db), m=m, condition=DB)
    pi_sb = AcceptanceMatrix(logistic(eta_db + beta2 * labels.values), m=m, condition=SB)
    truth = NULL if beta2 == 0 else (FAVOR if beta2 > 0 else AGAINST)
    model = ScoreModel("noisy", noise_sigma) if noise_sigma > 0 else ScoreModel("exact")
    return Instance(pi_sb, pi_db, labels, q, model, truth, "logistic-world",
                    {"beta": (beta0, beta1, beta2), "phi": phi, "sigma": noise_sigma})


def gen_cubic_mismatch(n: int, m: int, beta0: float, beta1: float,
                       q_range: tuple[float, float], phi: float, rng) -> Instance:
    """No-bias world whose true link is cubic in the score while the plug-in
    baseline keeps fitting the linear-in-score model with exactly known scores."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    q = gen.uniform(q_range[0], q_range[1], n)
    labels = sample_correlated_w(q, gamma_for_correlation(phi), gen,
                                 threshold=(q_range[0] + q_range[1]) / 2.0)
    probs = logistic(beta0 + beta1 * q ** 3)
    return Instance(AcceptanceMatrix(probs, m=m, condition=SB),
                    AcceptanceMatrix(probs, m=m, condition=DB),
                    labels, q, ScoreModel("exact"), NULL, "cubic-mismatch",
                    {"beta": (beta0, beta1), "phi": phi})


def gen_calibration_world(n: int, m: int, beta0: float, beta1: float,
                          leniency: float, rng) -> Instance:
    """Reviewer-leniency world: the per-paper model is correct marginally, but
    each reviewer adds a personal +/-leniency to papers below the clarity cut,
    so decisions by the same reviewer are dependent.

    Labels are the extreme pattern w=+1 iff score > 0.5.
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    clarity = gen.uniform(-1.0, 1.0, n)
    q = clarity
    labels = PropertyVector(np.where(q > 0.5, 1, -1))
    base = logistic(beta0 + beta1 * q)
    lean = np.where(gen.random(m) < 0.5, leniency, -leniency)
    per_reviewer = base[None, :] + lean[:, None] * (clarity < 0.5)[None, :]
    per_reviewer = _probs(per_reviewer, "calibration-world probabilities")
    return Instance(AcceptanceMatrix(per_reviewer, m=m, condition=SB),
                    AcceptanceMatrix(per_reviewer, m=m, condition=DB),
                    labels, q, ScoreModel("exact"), NULL, "reviewer-calibration",
                    {"beta": (beta0, beta1), "leniency": leniency})


def gen_bidding_world(n: int, m: int, blind: bool, rng,
                      type_a_prob: float = 0.3, j_prob: float = 0.3,
                      lenient_bonus: float = 0.1
                      ) -> tuple[Instance, BidMatrix, BidMatrix]:
    """Two reviewer personalities: a lenient minority that accepts with
    q*+bonus and, when it can see identities, bids up the property group and
    down the rest; and an accurate majority that accepts with q* and always
    bids zero. Evaluations are identical across conditions (no bias); only the
    SB bid matrix differs between the blind and non-blind variants.
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    q = gen.uniform(0.0, 0.9, n)
    labels = PropertyVector(np.where(gen.random(n) < j_prob, 1, -1))
    type_a = gen.random(m) < type_a_prob
    acc = _probs(q[None, :] + lenient_bonus * type_a[:, None], "bidding-world probabilities")
    sb_bids = np.zeros((m, n))
    if not blind:
        sb_bids[type_a] = np.where(labels.values[None, :] == 1, 1.0, -1.0)
    db_bids = np.zeros((m, n))
    inst = Instance(AcceptanceMatrix(acc, m=m, condition=SB),
                    AcceptanceMatrix(acc, m=m, condition=DB),
                    labels, q, ScoreModel("exact"), NULL, "bidding",
                    {"blind": blind, "type_a_prob": type_a_prob, "j_prob": j_prob})
    return inst, BidMatrix(sb_bids), BidMatrix(db_bids)


def gen_adversarial_similarity(n: int, m: int, rng, phi: float = 0.45
                               ) -> tuple[Instance, SimilarityMatrix, np.ndarray]:
    """The engineered similarity world: products of decreasing row and column
    scores, and per-reviewer thresholds placed so that a similarity-maximizing
    assignment lands each reviewer right at the boundary between "always
    enthusiastic" (accept with 0.9) and "score-driven" (accept with q*)."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    i = np.arange(1, m + 1)[:, None]
    j = np.arange(1, n + 1)[None, :]
    sim = ((m + 1 - i) * (n + 1 - j)).astype(float)
    thresholds = ((m + 1 - i[:, 0]) * (n - (i[:, 0] - 1) // 2)).astype(float)
    q = gen.uniform(0.0, 0.9, n)
    labels = sample_correlated_w(q, gamma_for_correlation(phi), gen, threshold=0.45)
    probs = np.where(sim >= thresholds[:, None], 0.9, q[None, :])
    inst = Instance(AcceptanceMatrix(probs, m=m, condition=SB),
                    AcceptanceMatrix(probs, m=m, condition=DB),
                    labels, q, ScoreModel("prob-report"), NULL,
                    "adversarial-similarity", {"phi": phi})
    return inst, SimilarityMatrix(sim), thresholds


def gen_generalized_linear(q: np.ndarray, nu: float, labels: PropertyVector,
                           m: int, margin_pos: float = 0.0,
                           margin_neg: float = 0.0, name: str = "shift-linear",
                           params: dict | None = None) -> Instance:
    """Relative-bias family with a constant shift in probability space.

    Null: pi_sb = q + nu everywhere. The alternative pushes the property
    group up by ``margin_pos`` and the complement down by ``margin_neg``.
    """
    q = np.asarray(q, dtype=float)
    w = labels.column(0)
    sb = q + nu + np.where(w == 1, margin_pos, -margin_neg)
    truth = NULL if margin_pos == 0 and margin_neg == 0 else (
        FAVOR if margin_pos >= 0 and margin_neg >= 0 else AGAINST)
    return Instance(AcceptanceMatrix(_probs(sb, "shifted probabilities"), m=m, condition=SB),
                    AcceptanceMatrix(_probs(q, "representations"), m=m, condition=DB),
                    labels, q, ScoreModel("exact"), truth, name,
                    params or {"nu": nu, "margins": (margin_pos, margin_neg)})


def gen_generalized_logistic(q: np.ndarray, beta0: float, beta1: float,
                             nu_tilde: float, labels: PropertyVector, m: int,
                             margin_pos: float = 0.0, margin_neg: float = 0.0,
                             name: str = "shift-logistic") -> Instance:
    """Relative-bias family with a constant shift in log-odds space.

    Null: every SB probability is the DB probability pushed by nu_tilde in
    log-odds; the alternative adds probability-space margins on top with the
    usual signs.
    """
    q = np.asarray(q, dtype=float)
    w = labels.column(0)
    db = logistic(beta0 + beta1 * q)
    sb = log_odds_shift(db, nu_tilde) + np.where(w == 1, margin_pos, -margin_neg)
    truth = NULL if margin_pos == 0 and margin_neg == 0 else (
        FAVOR if margin_pos >= 0 and margin_neg >= 0 else AGAINST)
    return Instance(AcceptanceMatrix(_probs(sb, "shifted probabilities"), m=m, condition=SB),
                    AcceptanceMatrix(db, m=m, condition=DB),
                    labels, q, ScoreModel("exact"), truth, name,
                    {"beta0": beta0, "beta1": beta1, "nu_tilde": nu_tilde,
                     "margins": (margin_pos, margin_neg)})


def gen_multiprop_linear(q: np.ndarray, labels: PropertyVector, m: int,
                         beta0_sb: float, betas_sb: np.ndarray) -> Instance:
    """Multi-property probability-shift world: pi_sb = q + beta0 + W.betas."""
    q = np.asarray(q, dtype=float)
    betas_sb = np.asarray(betas_sb, dtype=float)
    W = labels.values.reshape(labels.n, labels.k).astype(float)
    sb = q + beta0_sb + W @ betas_sb
    truth = NULL if not betas_sb.any() else FAVOR
    return Instance(AcceptanceMatrix(_probs(sb, "shifted probabilities"), m=m, condition=SB),
                    AcceptanceMatrix(_probs(q, "representations"), m=m, condition=DB),
                    labels, q, ScoreModel("exact"), truth, "multiprop-linear",
                    {"beta0_sb": beta0_sb, "betas_sb": tuple(betas_sb)})


def gen_multiprop_logistic(q: np.ndarray, labels: PropertyVector, m: int,
                           beta0_db: float, beta0_sb: float, beta1: float,
                           betas_sb: np.ndarray) -> Instance:
    """Multi-property log-odds world: DB has logit beta0_db + beta1*q, SB has
    logit beta0_sb + beta1*q + W.betas."""
    q = np.asarray(q, dtype=float)
    betas_sb = np.asarray(betas_sb, dtype=float)
    W = labels.values.reshape(labels.n, labels.k).astype(float)
    db = logistic(beta0_db + beta1 * q)
    sb = logistic(beta0_sb + beta1 * q + W @ betas_sb)
    truth = NULL if not betas_sb.any() else FAVOR
    return Instance(AcceptanceMatrix(sb, m=m, condition=SB),
                    AcceptanceMatrix(db, m=m, condition=DB),
                    labels, q, ScoreModel("exact"), truth, "multiprop-logistic",
                    {"beta0_db": beta0_db, "beta0_sb": beta0_sb, "beta1": beta1,
                     "betas_sb": tuple(betas_sb)})


# The two matrix pairs that make the shift-in-probability and shift-in-log-odds
# families non-trivially incompatible: each pair satisfies one family's null
# exactly while sitting a fixed margin inside the other family's alternative.
DUAL_I_NU = 0.175
DUAL_I_LOGISTIC = {"beta0": -2.5 * math.log(7 / 3), "beta1": 5 * math.log(7 / 3),
                   "nu_tilde": 1.0}
DUAL_II_LOGISTIC = {"beta0": math.log(1 / 3) - 0.625 * math.log(39 / 7),
                    "beta1": 2.5 * math.log(39 / 7), "nu_tilde": 1.5}


def dual_ii_shifts() -> tuple[float, float]:
    b0 = DUAL_II_LOGISTIC["beta0"]
    b1 = DUAL_II_LOGISTIC["beta1"]
    nt = DUAL_II_LOGISTIC["nu_tilde"]
    nu1 = -0.65 + 1.0 / (1.0 + math.exp(-b0 - nt - 0.65 * b1))
    nu2 = -0.25 + 1.0 / (1.0 + math.exp(-b0 - nt - 0.25 * b1))
    return nu1, nu2


def gen_relative_dual_instances(labels: PropertyVector, m: int
                                ) -> tuple[Instance, Instance]:
    """Instance (i): probability-shift null / log-odds alternative.
    Instance (ii): probability-shift alternative (against the property group)
    / log-odds null. Both readings are recorded in the instance params; the
    matrices are the same object either way, so any test's rejection rate
    cannot depend on the reading."""
    w = labels.column(0)
    q1 = np.where(w == 1, 0.7, 0.5)
    inst_i = gen_generalized_linear(q1, DUAL_I_NU, labels, m, name="dual-instance-i")
    inst_i = Instance(inst_i.pi_sb, inst_i.pi_db, labels, q1, ScoreModel("exact"),
                      NULL, "dual-instance-i",
                      {"readings": {"linear": {"null": True, "nu": DUAL_I_NU},
                                    "logistic": {"null": False, **DUAL_I_LOGISTIC}}})
    q2 = np.where(w == 1, 0.65, 0.25)
    nu1, nu2 = dual_ii_shifts()
    sb2 = q2 + np.where(w == 1, nu1, nu2)
    inst_ii = Instance(AcceptanceMatrix(_probs(sb2, "dual instance (ii)"), m=m, condition=SB),
                       AcceptanceMatrix(q2, m=m, condition=DB),
                       labels, q2, ScoreModel("exact"), AGAINST, "dual-instance-ii",
                       {"readings": {"linear": {"null": False, "nu1": nu1, "nu2": nu2},
                                     "logistic": {"null": True, **DUAL_II_LOGISTIC}}})
    return inst_i, inst_ii


def gen_extended_logistic_counterexample(labels: PropertyVector, m: int
                                         ) -> tuple[Instance, Instance]:
    """Two readings of one decision law for the logistic family with a free
    slope: under (intercept +1, slope 1) the SB matrix is the exact null;
    under (intercept 1.5, slope 2) it is a fixed-margin alternative. Returned
    as two Instance objects sharing the same matrices."""
    w = labels.column(0)
    q = np.where(w == 1, -1.0, 0.0)
    db = logistic(q)
    sb = np.where(w == 1, 0.5, float(logistic(1.0)))
    common = dict(labels=labels, true_scores=q, score_model=ScoreModel("exact"))
    pi_sb = AcceptanceMatrix(sb, m=m, condition=SB)
    pi_db = AcceptanceMatrix(db, m=m, condition=DB)
    null_reading = Instance(pi_sb, pi_db, ground_truth=NULL,
                            name="extended-logistic-null-reading",
                            params={"sb_model": {"intercept": 1.0, "slope": 1.0}},
                            **common)
    alt_reading = Instance(pi_sb, pi_db, ground_truth=FAVOR,
                           name="extended-logistic-alt-reading",
                           params={"sb_model": {"intercept": 1.5, "slope": 2.0}},
                           **common)
    return null_reading, alt_reading
