"""Accuracy, fault detection rate, and pairwise statistical comparison.

Ground-truth and selection files share one layout, ``version_id<TAB>test_id``
per row, so outputs of external tools can be compared against ours.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .callgraph import normalize_node
from .errors import DomainError, EvaluationInputError
from .signature import MethodId, parse_method_ref


@dataclass(frozen=True)
class VersionOutcome:
    version_id: str
    fault_revealing: frozenset[MethodId]
    selected: frozenset[MethodId]

    @property
    def retained(self) -> frozenset[MethodId]:
        return self.fault_revealing & self.selected

    @property
    def detected(self) -> bool:
        return bool(self.retained)


def accuracy(outcome: VersionOutcome) -> float:
    if not outcome.fault_revealing:
        raise DomainError(f"version {outcome.version_id} has no fault-revealing test")
    return len(outcome.retained) / len(outcome.fault_revealing)


def fdr(outcomes: Sequence[VersionOutcome]) -> float:
    if not outcomes:
        raise DomainError("fault detection rate needs at least one version")
    return sum(1 for o in outcomes if o.detected) / len(outcomes)


def mean_accuracy(outcomes: Sequence[VersionOutcome]) -> float:
    if not outcomes:
        raise DomainError("mean accuracy needs at least one version")
    return math.fsum(accuracy(o) for o in outcomes) / len(outcomes)


def _check_table(table) -> tuple[int, int, int, int]:
    (a, b), (c, d) = table
    cells = (int(a), int(b), int(c), int(d))
    if any(x < 0 for x in cells):
        raise DomainError(f"contingency counts must be non-negative: {table}")
    if sum(cells) == 0:
        raise DomainError("contingency table is all zeros")
    return cells


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def fisher_exact(table) -> float:
    """Two-sided p-value of Fisher's exact test on a 2x2 table.

    Sums the hypergeometric probabilities of every table with the observed
    margins that is no more likely than the observed one.
    """
    a, b, c, d = _check_table(table)
    row1, row2, col1 = a + b, c + d, a + c
    n = row1 + row2
    lo, hi = max(0, col1 - row2), min(row1, col1)
    denom = _log_comb(n, col1)
    logp = {x: _log_comb(row1, x) + _log_comb(row2, col1 - x) - denom for x in range(lo, hi + 1)}
    cutoff = logp[a] + 1e-9  # relative tolerance for exactly tied probabilities
    top = max(logp.values())
    probs = {x: math.exp(lp - top) for x, lp in logp.items()}
    # normalizing by the total mass cancels the lgamma rounding shared by all terms
    p = math.fsum(pr for x, pr in probs.items() if logp[x] <= cutoff) / math.fsum(probs.values())
    return min(1.0, p)


def odds_ratio(table) -> float:
    a, b, c, d = _check_table(table)
    num, den = a * d, b * c
    if den == 0:
        if num == 0:
            raise DomainError(f"odds ratio undefined (0/0) for {table}")
        return math.inf
    return num / den


@dataclass
class ConfigResult:
    name: str
    outcomes: list[VersionOutcome]

    @property
    def accuracies(self) -> dict[str, float]:
        return {o.version_id: accuracy(o) for o in self.outcomes}

    @property
    def mean_accuracy(self) -> float:
        return mean_accuracy(self.outcomes)

    @property
    def fdr(self) -> float:
        return fdr(self.outcomes)

    @property
    def detections(self) -> int:
        return sum(1 for o in self.outcomes if o.detected)


@dataclass
class Comparison:
    a: str
    b: str
    table: tuple[tuple[int, int], tuple[int, int]]
    p_value: float
    odds_ratio: float  # nan when undefined
    accuracy_a: float
    accuracy_b: float
    fdr_a: float
    fdr_b: float


def compare(
    outcomes_a: Sequence[VersionOutcome],
    outcomes_b: Sequence[VersionOutcome],
    names: tuple[str, str] = ("A", "B"),
) -> Comparison:
    """Detection/miss counts of two configurations as a 2x2 table, tested."""
    va = {o.version_id for o in outcomes_a}
    vb = {o.version_id for o in outcomes_b}
    if va != vb:
        only_a = sorted(va - vb)
        only_b = sorted(vb - va)
        raise EvaluationInputError(f"version sets differ: only in {names[0]}: {only_a}; only in {names[1]}: {only_b}")
    da = sum(1 for o in outcomes_a if o.detected)
    db = sum(1 for o in outcomes_b if o.detected)
    table = ((da, len(outcomes_a) - da), (db, len(outcomes_b) - db))
    try:
        ratio = odds_ratio(table)
    except DomainError:
        ratio = math.nan
    return Comparison(
        a=names[0],
        b=names[1],
        table=table,
        p_value=fisher_exact(table),
        odds_ratio=ratio,
        accuracy_a=mean_accuracy(outcomes_a),
        accuracy_b=mean_accuracy(outcomes_b),
        fdr_a=fdr(outcomes_a),
        fdr_b=fdr(outcomes_b),
    )


def _parse_test_id(text: str) -> MethodId:
    return normalize_node(parse_method_ref(text.strip()))


def parse_version_tests(text: str) -> dict[str, frozenset[MethodId]]:
    """Parse ``version_id<TAB>test_id`` rows (blank lines and ``#`` comments skipped)."""
    out: dict[str, set[MethodId]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise EvaluationInputError(f"line {line_no}: expected version_id<TAB>test_id")
        out.setdefault(parts[0].strip(), set()).add(_parse_test_id(parts[1]))
    return {k: frozenset(v) for k, v in out.items()}


def read_version_tests(path: str | Path) -> dict[str, frozenset[MethodId]]:
    return parse_version_tests(Path(path).read_text(encoding="utf-8"))


def build_outcomes(
    ground_truth: Mapping[str, frozenset[MethodId]],
    selections: Mapping[str, Iterable[MethodId]],
) -> list[VersionOutcome]:
    """Pair each ground-truth version with its selected suite.

    A version absent from ``selections`` is treated as having selected nothing.
    """
    return [
        VersionOutcome(v, frozenset(ground_truth[v]), frozenset(selections.get(v, ())))
        for v in sorted(ground_truth)
    ]


def average_runs(runs: Sequence[Sequence[VersionOutcome]]) -> tuple[float, float]:
    """Mean accuracy and FDR averaged over repeated runs of a non-deterministic tool."""
    if not runs:
        raise DomainError("no runs to average")
    accs = [mean_accuracy(r) for r in runs]
    fdrs = [fdr(r) for r in runs]
    return math.fsum(accs) / len(runs), math.fsum(fdrs) / len(runs)


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf"
    return f"{x:.12g}"


@dataclass
class EvaluationReport:
    results: list[ConfigResult] = field(default_factory=list)
    comparisons: list[Comparison] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # keep key case
        cp["report"] = {"configs": str(len(self.results)), "comparisons": str(len(self.comparisons))}
        for i, note in enumerate(self.notices):
            cp["report"][f"notice.{i}"] = note
        for r in self.results:
            sec = f"config {r.name}"
            cp[sec] = {
                "n_versions": str(len(r.outcomes)),
                "mean_accuracy": _fmt(r.mean_accuracy),
                "fdr": _fmt(r.fdr),
                "detected_versions": str(r.detections),
            }
            for v, acc in r.accuracies.items():
                cp[sec][f"accuracy.{v}"] = _fmt(acc)
        for c in self.comparisons:
            sec = f"compare {c.a} vs {c.b}"
            (a, b), (cc, d) = c.table
            cp[sec] = {
                "table": f"{a},{b};{cc},{d}",
                "p_value": _fmt(c.p_value),
                "odds_ratio": _fmt(c.odds_ratio),
                "accuracy_a": _fmt(c.accuracy_a),
                "accuracy_b": _fmt(c.accuracy_b),
                "fdr_a": _fmt(c.fdr_a),
                "fdr_b": _fmt(c.fdr_b),
            }
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("config", "mean_accuracy", "fdr", "n_versions", "total_seconds"))
        total = sum(self.timings.values())
        for r in self.results:
            w.writerow((r.name, _fmt(r.mean_accuracy), _fmt(r.fdr), len(r.outcomes), f"{total:.3f}"))
        return buf.getvalue()
