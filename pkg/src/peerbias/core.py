"""Shared domain types: rosters, acceptance probabilities, decisions, review tuples.

Conventions used throughout the package:

* reviewer ids are dense integers ``0..m-1``, paper ids ``0..n-1``;
* accept/reject decisions are stored as 0/1 integers;
* the property indicator ``w`` is stored as +1/-1 (never 0/1), so that a
  decision vector and a property vector can never be silently confused.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

SB = "SB"
DB = "DB"


def _encode_label_part(part) -> list[int]:
    """Map one label component to 32-bit words for SeedSequence entropy."""
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream labels must use non-negative integers")
        part = int(part)
        words = []
        while True:
            words.append(part & 0xFFFFFFFF)
            part >>= 32
            if part == 0:
                return words
    if isinstance(part, str):
        return [zlib.crc32(part.encode("utf-8"))]
    raise TypeError(f"unsupported stream label component: {part!r}")


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    The pair ``(seed, label)`` fully determines every draw; distinct labels
    give statistically independent streams (numpy SeedSequence hashing), which
    is what makes per-iteration parallelism deterministic.
    """

    seed: int
    label: tuple = ()

    def child(self, *parts) -> "RngStream":
        return RngStream(self.seed, self.label + tuple(parts))

    def generator(self) -> np.random.Generator:
        entropy = [self.seed & 0xFFFFFFFFFFFFFFFF]
        for part in self.label:
            entropy.extend(_encode_label_part(part))
        return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class PropertyVector:
    """Per-paper property indicators, entries in {-1, +1}.

    ``values`` has shape (n,) for a single property or (n, k) for k > 1.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int8)
        if values.ndim not in (1, 2):
            raise ValueError("property vector must be 1- or 2-dimensional")
        if not np.all(np.isin(values, (-1, 1))):
            raise ValueError("property entries must be exactly -1 or +1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[1]

    def column(self, index: int = 0) -> np.ndarray:
        if self.values.ndim == 1:
            if index != 0:
                raise IndexError("single-property vector has only column 0")
            return self.values
        return self.values[:, index]

    def positive_set(self, index: int = 0) -> np.ndarray:
        """Papers satisfying the property (w = +1)."""
        return np.flatnonzero(self.column(index) == 1)

    def negative_set(self, index: int = 0) -> np.ndarray:
        return np.flatnonzero(self.column(index) == -1)


@dataclass(frozen=True)
class AcceptanceMatrix:
    """Per-(reviewer, paper) acceptance probabilities for one condition.

    ``values`` is either an (m, n) matrix or, for worlds where all reviewers
    behave identically, an (n,) vector broadcast across reviewers.
    """

    values: np.ndarray
    m: int
    condition: str = SB

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 2 and values.shape[0] != self.m:
            raise ValueError("matrix row count does not match reviewer count")
        if values.ndim not in (1, 2):
            raise ValueError("acceptance probabilities must be 1- or 2-dimensional")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueError("acceptance probabilities must lie in [0, 1]")
        if self.condition not in (SB, DB):
            raise ValueError("condition must be SB or DB")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    @property
    def per_reviewer(self) -> bool:
        return self.values.ndim == 2

    def pair_probs(self, reviewers: np.ndarray, papers: np.ndarray) -> np.ndarray:
        reviewers = np.asarray(reviewers)
        papers = np.asarray(papers)
        if papers.size and (papers.min() < 0 or papers.max() >= self.n):
            raise ValueError("paper id out of range for acceptance matrix")
        if reviewers.size and (reviewers.min() < 0 or reviewers.max() >= self.m):
            raise ValueError("reviewer id out of range for acceptance matrix")
        if self.per_reviewer:
            return self.values[reviewers, papers]
        return self.values[papers]

    def full(self) -> np.ndarray:
        if self.per_reviewer:
            return self.values
        return np.broadcast_to(self.values, (self.m, self.n))


@dataclass(frozen=True)
class Assignment:
    """A set of (reviewer, paper) review pairs under (lam, mu) load limits.

    ``lam`` is the required number of reviewers per paper (per condition);
    ``mu`` the maximum number of papers per reviewer. ``complete`` marks
    assignments that promise exactly ``lam`` reviewers for every paper.
    """

    reviewers: np.ndarray
    papers: np.ndarray
    m: int
    n: int
    lam: int
    mu: int
    complete: bool = False

    def __post_init__(self):
        reviewers = np.asarray(self.reviewers, dtype=np.int64)
        papers = np.asarray(self.papers, dtype=np.int64)
        if reviewers.shape != papers.shape or reviewers.ndim != 1:
            raise ValueError("reviewers and papers must be equal-length 1-d arrays")
        if reviewers.size:
            if reviewers.min() < 0 or reviewers.max() >= self.m:
                raise ValueError("reviewer id out of range")
            if papers.min() < 0 or papers.max() >= self.n:
                raise ValueError("paper id out of range")
        key = reviewers * self.n + papers
        if np.unique(key).size != key.size:
            raise ValueError("duplicate (reviewer, paper) pair in assignment")
        counts = np.bincount(reviewers, minlength=self.m)
        if counts.size and counts.max(initial=0) > self.mu:
            raise ValueError("a reviewer exceeds the per-reviewer load mu")
        if self.complete:
            per_paper = np.bincount(papers, minlength=self.n)
            if not np.all(per_paper == self.lam):
                raise ValueError("complete assignment must give every paper lam reviewers")
        reviewers.setflags(write=False)
        papers.setflags(write=False)
        object.__setattr__(self, "reviewers", reviewers)
        object.__setattr__(self, "papers", papers)

    @property
    def size(self) -> int:
        return int(self.reviewers.size)

    def pairs(self) -> Iterable[tuple[int, int]]:
        return zip(self.reviewers.tolist(), self.papers.tolist())

    def pair_set(self) -> set[tuple[int, int]]:
        return set(self.pairs())

    def total_weight(self, weights: np.ndarray) -> float:
        return float(np.asarray(weights)[self.reviewers, self.papers].sum())

    def reviewers_of(self, paper: int) -> np.ndarray:
        return self.reviewers[self.papers == paper]

    def papers_of(self, reviewer: int) -> np.ndarray:
        return self.papers[self.reviewers == reviewer]

    def used_reviewers(self) -> np.ndarray:
        return np.unique(self.reviewers)

    def restrict_to_reviewers(self, keep: np.ndarray) -> "Assignment":
        mask = np.isin(self.reviewers, keep)
        return Assignment(self.reviewers[mask], self.papers[mask],
                          self.m, self.n, self.lam, self.mu)


@dataclass(frozen=True)
class ConditionAllocation:
    """Reviewer -> {SB, DB} split. ``sb_mask[i]`` is True when i reviews single-blind."""

    sb_mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.sb_mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "sb_mask", mask)

    @property
    def m(self) -> int:
        return int(self.sb_mask.size)

    def condition_of(self, reviewer: int) -> str:
        return SB if self.sb_mask[reviewer] else DB

    def sb_reviewers(self) -> np.ndarray:
        return np.flatnonzero(self.sb_mask)

    def db_reviewers(self) -> np.ndarray:
        return np.flatnonzero(~self.sb_mask)

    def check_balanced(self) -> None:
        n_sb = int(self.sb_mask.sum())
        if self.m % 2 == 0 and n_sb * 2 != self.m:
            raise ValueError("allocation must split an even pool into equal halves")


@dataclass(frozen=True)
class DecisionTuple:
    """One paper with one single-blind and one double-blind decision.

    ``w`` is the +1/-1 property indicator, or a tuple of them when several
    properties are tracked.
    """

    paper: int
    sb_decision: int
    db_decision: int
    w: int | tuple
    sb_reviewer: int
    db_reviewer: int

    def __post_init__(self):
        if self.sb_decision not in (0, 1) or self.db_decision not in (0, 1):
            raise ValueError("decisions must be 0 or 1")
        if self.sb_reviewer == self.db_reviewer:
            raise ValueError("a tuple needs two distinct reviewers")
        ws = self.w if isinstance(self.w, tuple) else (self.w,)
        if any(x not in (-1, 1) for x in ws):
            raise ValueError("property indicators must be -1 or +1")


TupleSet = list  # list[DecisionTuple]


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    repeated_reviewers: tuple = ()
    messages: tuple = ()

    def __bool__(self) -> bool:
        return self.ok


def validate_tuple_set(tuples: Sequence[DecisionTuple],
                       allocation: ConditionAllocation | None = None) -> ValidationReport:
    """Check that no reviewer contributes more than one decision.

    Per-tuple invariants (distinct reviewers, binary decisions) are enforced
    at construction; this validates the cross-tuple constraint, plus condition
    consistency when an allocation is supplied.
    """
    seen: set[int] = set()
    repeated: list[int] = []
    messages: list[str] = []
    for t in tuples:
        for rid in (t.sb_reviewer, t.db_reviewer):
            if rid in seen:
                repeated.append(rid)
            seen.add(rid)
        if allocation is not None:
            if allocation.condition_of(t.sb_reviewer) != SB:
                messages.append(f"reviewer {t.sb_reviewer} gave an SB decision but is allocated to DB")
            if allocation.condition_of(t.db_reviewer) != DB:
                messages.append(f"reviewer {t.db_reviewer} gave a DB decision but is allocated to SB")
    if repeated:
        messages.insert(0, "reviewers contributing more than one decision: "
                        + ", ".join(str(r) for r in sorted(set(repeated))))
    return ValidationReport(ok=not repeated and not messages,
                            repeated_reviewers=tuple(sorted(set(repeated))),
                            messages=tuple(messages))


def sample_decisions(pi: AcceptanceMatrix, a: Assignment,
                     rng: RngStream | np.random.Generator) -> dict[tuple[int, int], int]:
    """Draw one independent Bernoulli accept/reject decision per assigned pair."""
    if a.m > pi.m or a.n > pi.n:
        raise ValueError("assignment roster does not fit the acceptance matrix")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    probs = pi.pair_probs(a.reviewers, a.papers)
    draws = (gen.random(a.size) < probs).astype(np.int8)
    return {(int(r), int(p)): int(d)
            for r, p, d in zip(a.reviewers, a.papers, draws)}


@dataclass(frozen=True)
class TestOutcome:
    """Result of one hypothesis test.

    ``reject`` is always consistent with the reported p-value or threshold;
    ``degenerate`` marks keep-null outcomes forced by a failed or impossible
    fit rather than by the data.
    """

    reject: bool
    statistic: float
    effect_size: float
    p_value: float | None = None
    threshold: float | None = None
    n_u: int = 0
    n_v: int = 0
    degenerate: bool = False
    method: str = ""


def keep_null(statistic: float = 0.0, *, n_u: int = 0, n_v: int = 0,
              degenerate: bool = False, method: str = "") -> TestOutcome:
    return TestOutcome(reject=False, statistic=statistic, effect_size=statistic,
                       n_u=n_u, n_v=n_v, degenerate=degenerate, method=method)


def build_tuples(slots: Sequence[tuple[int, int, int]],
                 sb_decisions: Mapping[tuple[int, int], int],
                 db_decisions: Mapping[tuple[int, int], int],
                 labels: PropertyVector) -> TupleSet:
    """Bind sampled decisions to (paper, sb reviewer, db reviewer) slots."""
    out: TupleSet = []
    multi = labels.k > 1
    for paper, sb_r, db_r in slots:
        w = tuple(int(x) for x in labels.values[paper]) if multi else int(labels.values[paper])
        out.append(DecisionTuple(paper=paper,
                                 sb_decision=sb_decisions[(sb_r, paper)],
                                 db_decision=db_decisions[(db_r, paper)],
                                 w=w, sb_reviewer=sb_r, db_reviewer=db_r))
    return out
