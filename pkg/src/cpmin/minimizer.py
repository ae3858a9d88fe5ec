"""Test scoring from dependency CP values, ranking, and budgeted selection."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .callgraph import DependencySet
from .errors import DomainError
from .proneness import CpTable, Metric
from .signature import MethodId

# Scores are rounded before ranking so that mathematically tied tests
# compare equal regardless of floating-point evaluation order.
SCORE_DIGITS = 12

DEFAULT_BUDGETS = (0.25, 0.5, 0.75)


class Measure(str, enum.Enum):
    AVG = "Avg"
    GMEAN = "GMean"
    HMEAN = "HMean"
    MEDIAN = "Median"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Measure":
        for m in cls:
            if m.value.lower() == text.strip().lower():
                return m
        raise ValueError(f"unknown measure {text!r}; expected one of {[m.value for m in cls]}")


def _gmean(values: Sequence[float]) -> float:
    # Work on (mantissa, exponent) pairs: the log-sum never underflows and
    # scaling every input by 2**k scales the result by exactly 2**k.
    n = len(values)
    exp_sum = 0
    logs = []
    for v in values:
        m, e = math.frexp(v)
        logs.append(math.log(m))
        exp_sum += e
    log_sum = math.fsum(logs)
    q, r = divmod(exp_sum, n)
    return math.ldexp(math.exp(log_sum / n) * 2.0 ** (r / n), q)


def aggregate_score(values: Sequence[float], measure: Measure | str) -> float:
    """Summarize the CP values of one test's dependencies."""
    measure = Measure.parse(measure) if isinstance(measure, str) else measure
    if not values:
        raise DomainError("cannot aggregate an empty list of values")
    if any(v < 0 or math.isnan(v) for v in values):
        raise DomainError("CP values must be non-negative")
    n = len(values)
    if n == 1:
        return float(values[0])
    if measure is Measure.AVG:
        return math.fsum(values) / n
    if measure is Measure.MEDIAN:
        s = sorted(values)
        mid = n // 2
        return s[mid] if n % 2 else (s[mid - 1] + s[mid]) / 2
    if any(v == 0 for v in values):
        return 0.0
    if measure is Measure.GMEAN:
        return _gmean(values)
    return n / math.fsum(1.0 / v for v in values)


@dataclass(frozen=True)
class TestScore:
    test: MethodId
    score: float
    dependency_count: int
    measure: Measure
    metric: Metric

    __test__ = False  # not a pytest class


@dataclass
class MinimizedSuite:
    budget: float
    selected: list[MethodId]
    scores: list[TestScore]


def _round(score: float, digits: int) -> float:
    return float(f"{score:.{digits}g}")


def rank_key(ts: TestScore) -> tuple[float, str]:
    return (-ts.score, ts.test.render())


def score_tests(
    cp: CpTable,
    deps: Iterable[DependencySet],
    measure: Measure | str,
    *,
    digits: int = SCORE_DIGITS,
) -> list[TestScore]:
    """Score every test and return them ranked (score desc, test id asc)."""
    measure = Measure.parse(measure) if isinstance(measure, str) else measure
    scores = []
    for ds in deps:
        values = [cp.get(m) for m in ds.methods]
        raw = aggregate_score(values, measure)
        scores.append(TestScore(ds.test, _round(raw, digits), len(ds.methods), measure, cp.metric))
    scores.sort(key=rank_key)
    return scores


def budget_size(budget: float, n: int) -> int:
    """``ceil(budget * n)`` evaluated on the decimal value of ``budget``."""
    if not (0 < budget <= 1):
        raise DomainError(f"budget must lie in (0, 1], got {budget}")
    return math.ceil(Fraction(repr(float(budget))) * n)


def select(scores: Sequence[TestScore], budget: float) -> MinimizedSuite:
    k = budget_size(budget, len(scores))
    ranked = sorted(scores, key=rank_key)
    return MinimizedSuite(budget, [s.test for s in ranked[:k]], list(ranked))


def format_ranking(scores: Sequence[TestScore]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("rank", "test_id", "score", "dependency_count", "measure", "metric"))
    for rank, s in enumerate(scores, start=1):
        w.writerow((rank, s.test.render(), f"{s.score:.12g}", s.dependency_count, s.measure.value, s.metric.value))
    return buf.getvalue()


def format_suite(suite: MinimizedSuite) -> str:
    return "".join(t.render() + "\n" for t in suite.selected)


def write_ranking(path: str | Path, scores: Sequence[TestScore]) -> None:
    Path(path).write_text(format_ranking(scores), encoding="utf-8")


def write_suite(path: str | Path, suite: MinimizedSuite) -> None:
    Path(path).write_text(format_suite(suite), encoding="utf-8")
