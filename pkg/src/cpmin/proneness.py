"""Change-proneness values: change frequency and change extent per method."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import DomainError, LedgerFormatError
from .ledger import ChangeRecord
from .signature import MethodId, normalize_signature


class Metric(str, enum.Enum):
    CHG_FREQ = "ChgFreq"
    CHG_EXT = "ChgExt"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Metric":
        for m in cls:
            if m.value.lower() == text.strip().lower():
                return m
        raise ValueError(f"unknown metric {text!r}; expected one of {[m.value for m in cls]}")


def _require_lifetime(record: ChangeRecord) -> None:
    if record.total_commits < 1:
        raise DomainError(f"total_commits must be >= 1, got {record.total_commits}")


def chg_freq(record: ChangeRecord) -> float:
    _require_lifetime(record)
    return record.change_commits / record.total_commits


def code_churn(record: ChangeRecord) -> int:
    return record.insertions + record.deletions + record.modifications


def chg_ext(record: ChangeRecord) -> float:
    _require_lifetime(record)
    return code_churn(record) / record.total_commits


_FORMULAS = {Metric.CHG_FREQ: chg_freq, Metric.CHG_EXT: chg_ext}


@dataclass
class CpTable:
    metric: Metric
    values: dict[MethodId, float] = field(default_factory=dict)

    def get(self, method: MethodId) -> float:
        """CP of ``method``; methods without change evidence score 0."""
        return self.values.get(method, 0.0)

    def scaled(self, factor: float) -> "CpTable":
        return CpTable(self.metric, {k: v * factor for k, v in self.values.items()})

    def __len__(self) -> int:
        return len(self.values)


def cp_table(ledger: Mapping[MethodId, ChangeRecord], metric: Metric | str) -> CpTable:
    metric = Metric.parse(metric) if isinstance(metric, str) else metric
    formula = _FORMULAS[metric]
    return CpTable(metric, {mid: formula(rec) for mid, rec in ledger.items()})


def format_cp_table(table: CpTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("method_id", "metric", "value"))
    for mid in sorted(table.values, key=MethodId.render):
        w.writerow((mid.render(), table.metric.value, f"{table.values[mid]:.12g}"))
    return buf.getvalue()


def write_cp_table(path: str | Path, table: CpTable) -> None:
    Path(path).write_text(format_cp_table(table), encoding="utf-8")


def read_cp_table(path: str | Path) -> CpTable:
    rows = list(csv.DictReader(io.StringIO(Path(path).read_text(encoding="utf-8"))))
    if not rows:
        raise LedgerFormatError(f"{path}: CP table has no rows")
    metrics = {r["metric"] for r in rows}
    if len(metrics) != 1:
        raise LedgerFormatError(f"{path}: mixed metrics {sorted(metrics)}")
    return CpTable(
        Metric.parse(metrics.pop()),
        {normalize_signature(r["method_id"]): float(r["value"]) for r in rows},
    )
