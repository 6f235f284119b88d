"""Survey statistics from summary data, plus alignment-accuracy measurement.

Two-sample comparisons use the unequal-variance t test computed from
(n, mean, sd) triples, since per-participant raw data is not part of the
corpus format. Categorical comparisons use Pearson goodness-of-fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from scipy.stats import chi2 as _chi2_dist
from scipy.stats import t as _t_dist

from .alignment import AlignConfig, SimilarityProvider, align_cue
from .corpus import Corpus, cue_text
from .graph import Adg


class StatsError(Exception):
    def __init__(self, code: str, message: str, *, subject: str = ""):
        super().__init__(message)
        self.code = code
        self.subject = subject


class Verdict(str, Enum):
    SIG_01 = "sig_01"
    SIG_05 = "sig_05"
    NS = "ns"

    @property
    def marker(self) -> str:
        return {Verdict.SIG_01: "**", Verdict.SIG_05: "*", Verdict.NS: "ns"}[self]


def verdict_for(p_value: float) -> Verdict:
    if p_value < 0.01:
        return Verdict.SIG_01
    if p_value < 0.05:
        return Verdict.SIG_05
    return Verdict.NS


def two_level_marker(result: "TestResult") -> str:
    """Marker in a two-symbol vocabulary: ** for p < 0.01, ns otherwise."""
    return "**" if result.verdict is Verdict.SIG_01 else "ns"


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    sd: float

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if self.sd < 0:
            raise ValueError(f"sd must be non-negative, got {self.sd!r}")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: float
    p_value: float
    verdict: Verdict

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p_value {self.p_value!r} outside [0, 1]")


def welch_t(a: SummaryStats, b: SummaryStats) -> TestResult:
    """Two-sample unequal-variance t test from summary statistics.

    Degrees of freedom follow Welch-Satterthwaite. When both groups have
    zero variance the statistic degenerates: equal means give p = 1 by
    convention, different means give a certain difference (p = 0).
    """
    va, vb = a.sd ** 2, b.sd ** 2
    se2 = va / a.n + vb / b.n
    if se2 == 0.0:
        df = float(a.n + b.n - 2)
        if a.mean == b.mean:
            return TestResult(statistic=0.0, df=df, p_value=1.0, verdict=Verdict.NS)
        stat = math.inf if a.mean > b.mean else -math.inf
        return TestResult(statistic=stat, df=df, p_value=0.0, verdict=Verdict.SIG_01)
    stat = (a.mean - b.mean) / math.sqrt(se2)
    # The fourth powers can underflow to zero for near-zero variances even
    # though se2 did not; the limiting distribution is normal (df infinite).
    denom = (va / a.n) ** 2 / (a.n - 1) + (vb / b.n) ** 2 / (b.n - 1)
    df = se2 ** 2 / denom if denom > 0.0 else math.inf
    p = float(2.0 * _t_dist.sf(abs(stat), df))
    p = min(p, 1.0)
    return TestResult(statistic=stat, df=df, p_value=p, verdict=verdict_for(p))


def chi_square_gof(counts: Sequence[int], expected: Sequence[float] | None = None,
                   yates: bool = False) -> TestResult:
    """Pearson goodness-of-fit against expected proportions (default uniform).

    yates applies the continuity correction |o - e| - 0.5 (floored at 0);
    off by default.
    """
    if len(counts) < 2:
        raise StatsError("too-few-categories",
                         f"need at least 2 categories, got {len(counts)}")
    if any(c < 0 for c in counts):
        raise ValueError(f"counts must be non-negative, got {list(counts)}")
    total = sum(counts)
    if total == 0:
        raise StatsError("empty-sample", "all counts are zero")
    if expected is None:
        proportions = [1.0 / len(counts)] * len(counts)
    else:
        if len(expected) != len(counts):
            raise ValueError(f"{len(expected)} expected proportions for {len(counts)} categories")
        if any(p <= 0 for p in expected):
            raise ValueError("expected proportions must be positive")
        norm = sum(expected)
        proportions = [p / norm for p in expected]
    stat = 0.0
    for observed, proportion in zip(counts, proportions):
        exp = total * proportion
        diff = abs(observed - exp)
        if yates:
            diff = max(diff - 0.5, 0.0)
        stat += diff * diff / exp
    df = float(len(counts) - 1)
    p = float(_chi2_dist.sf(stat, df))
    return TestResult(statistic=stat, df=df, p_value=p, verdict=verdict_for(p))


@dataclass(frozen=True)
class LikertCounts:
    """Counts over six ordered agreement categories, most negative first."""

    counts: tuple[int, int, int, int, int, int]

    def __post_init__(self) -> None:
        if len(self.counts) != 6:
            raise ValueError(f"expected 6 categories, got {len(self.counts)}")
        if any(c < 0 for c in self.counts):
            raise ValueError(f"counts must be non-negative, got {self.counts}")

    @property
    def total(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class Trichotomy:
    negative: int
    neutral: int
    positive: int

    @property
    def total(self) -> int:
        return self.negative + self.neutral + self.positive


def trichotomize(likert: LikertCounts) -> Trichotomy:
    """Collapse six categories into negative (first two), neutral (middle
    two), positive (last two)."""
    c = likert.counts
    return Trichotomy(negative=c[0] + c[1], neutral=c[2] + c[3], positive=c[4] + c[5])


PAIR_NAMES = ("negative=neutral", "negative=positive", "neutral=positive")


def pairwise_trichotomy_tests(likert: LikertCounts) -> tuple[tuple[str, TestResult], ...]:
    """The three pairwise comparisons of a trichotomized row.

    Each pair is tested as a 2-category goodness-of-fit against 50/50: under
    the null, a respondent in either group is equally likely to be in each.
    """
    tri = trichotomize(likert)
    pairs = (
        (PAIR_NAMES[0], (tri.negative, tri.neutral)),
        (PAIR_NAMES[1], (tri.negative, tri.positive)),
        (PAIR_NAMES[2], (tri.neutral, tri.positive)),
    )
    return tuple((name, chi_square_gof(counts)) for name, counts in pairs)


@dataclass(frozen=True)
class AccuracyReport:
    """Alignment quality against gold response-node annotations.

    top1 and mean_margin are None when nothing was evaluated. confusion is
    keyed by (gold node kind, predicted node kind); its diagonal counts
    kind-level agreement even when the exact node differed.
    """

    evaluated: int
    skipped: int
    correct: int
    top1: float | None
    mean_margin: float | None
    confusion: tuple[tuple[str, str, int], ...]

    @property
    def confusion_map(self) -> dict[tuple[str, str], int]:
        return {(gold, predicted): count for gold, predicted, count in self.confusion}

    def to_document(self) -> dict:
        return {
            "evaluated": self.evaluated,
            "skipped": self.skipped,
            "correct": self.correct,
            "top1": self.top1,
            "mean_margin": self.mean_margin,
            "confusion": [{"gold_kind": g, "predicted_kind": p, "count": c}
                          for g, p, c in self.confusion],
        }


def alignment_accuracy(corpus: Corpus, adgs: Mapping[str, Adg],
                       provider: SimilarityProvider | None = None,
                       config: AlignConfig = AlignConfig()) -> AccuracyReport:
    """Score every cue-bearing (response, criterion) pair against the gold
    node annotation; pairs without an annotation are skipped and tallied."""
    oracle = corpus.oracle_map
    evaluated = 0
    skipped = 0
    correct = 0
    margins: list[float] = []
    confusion: dict[tuple[str, str], int] = {}
    for response in corpus.responses:
        adg = adgs.get(response.prompt_id)
        if adg is None:
            raise StatsError("missing-graph",
                             f"no graph for prompt {response.prompt_id!r}",
                             subject=response.prompt_id)
        for criterion_id, _result in response.per_criterion:
            cue = cue_text(response, criterion_id)
            if cue is None:
                continue
            gold = oracle.get((response.response_id, criterion_id))
            if gold is None:
                skipped += 1
                continue
            outcome = align_cue(cue, adg, provider, config)
            evaluated += 1
            margins.append(outcome.margin)
            if outcome.node_id == gold:
                correct += 1
            key = (adg.node(gold).kind.value, adg.node(outcome.node_id).kind.value)
            confusion[key] = confusion.get(key, 0) + 1
    top1 = correct / evaluated if evaluated else None
    mean_margin = sum(margins) / len(margins) if margins else None
    return AccuracyReport(
        evaluated=evaluated, skipped=skipped, correct=correct, top1=top1,
        mean_margin=mean_margin,
        confusion=tuple(sorted((g, p, c) for (g, p), c in confusion.items())),
    )


def _split_row(line: str) -> list[str]:
    delimiter = "\t" if "\t" in line else ","
    return [cell.strip() for cell in line.split(delimiter)]


def parse_summary_rows(text: str) -> list[tuple[str, SummaryStats, SummaryStats]]:
    """Rows of "id, n1, mean1, sd1, n2, mean2, sd2"; blank and #-comment
    lines skipped."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cells = _split_row(line)
        if len(cells) != 7:
            raise StatsError("bad-row", f"line {lineno}: expected 7 cells, got {len(cells)}")
        rows.append((cells[0],
                     SummaryStats(n=int(cells[1]), mean=float(cells[2]), sd=float(cells[3])),
                     SummaryStats(n=int(cells[4]), mean=float(cells[5]), sd=float(cells[6]))))
    return rows


def parse_count_rows(text: str) -> list[tuple[str, tuple[int, ...]]]:
    """Rows of "id, count, count, ..."; blank and #-comment lines skipped."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cells = _split_row(line)
        if len(cells) < 3:
            raise StatsError("bad-row", f"line {lineno}: expected an id and >= 2 counts")
        rows.append((cells[0], tuple(int(c) for c in cells[1:])))
    return rows


def run_summary_table(text: str) -> list[tuple[str, TestResult]]:
    return [(row_id, welch_t(a, b)) for row_id, a, b in parse_summary_rows(text)]


def run_count_table(text: str) -> list[tuple[str, TestResult, int]]:
    """Goodness-of-fit per row; the last element is the majority category
    index (0-based), which names the direction of the deviation."""
    out = []
    for row_id, counts in parse_count_rows(text):
        result = chi_square_gof(counts)
        majority = max(range(len(counts)), key=lambda i: counts[i])
        out.append((row_id, result, majority))
    return out


def run_likert_table(text: str) -> list[tuple[str, tuple[tuple[str, TestResult], ...]]]:
    """Six-count rows; each yields the three pairwise trichotomy tests."""
    out = []
    for row_id, counts in parse_count_rows(text):
        if len(counts) != 6:
            raise StatsError("bad-row", f"row {row_id!r}: expected 6 counts, got {len(counts)}")
        likert = LikertCounts(counts=counts)  # type: ignore[arg-type]
        out.append((row_id, pairwise_trichotomy_tests(likert)))
    return out
