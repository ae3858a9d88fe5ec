"""Change-ledger rows and their CSV representation.

A ledger maps a method signature (raw or canonical) to the counts that
feed the change-proneness formulas::

    raw_signature,change_commits,total_commits,insertions,deletions,modifications
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import LedgerFormatError

LEDGER_COLUMNS = (
    "raw_signature",
    "change_commits",
    "total_commits",
    "insertions",
    "deletions",
    "modifications",
)


@dataclass(frozen=True)
class ChangeRecord:
    change_commits: int
    total_commits: int
    insertions: int = 0
    deletions: int = 0
    modifications: int = 0

    def __post_init__(self):
        for field in ("change_commits", "total_commits", "insertions", "deletions", "modifications"):
            if getattr(self, field) < 0:
                raise LedgerFormatError(f"{field} must be non-negative, got {getattr(self, field)}")

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (
            self.change_commits,
            self.total_commits,
            self.insertions,
            self.deletions,
            self.modifications,
        )


def format_ledger(rows: Mapping[object, ChangeRecord], key_column: str = "raw_signature") -> str:
    """Render rows sorted by their string key; the key is always quoted."""
    buf = io.StringIO()
    header = csv.writer(buf, lineterminator="\n")
    header.writerow((key_column,) + LEDGER_COLUMNS[1:])
    for key in sorted(rows, key=str):
        rec = rows[key]
        # csv.QUOTE_MINIMAL would leave comma-free keys bare; the key is always quoted.
        escaped = str(key).replace('"', '""')
        buf.write(f'"{escaped}",' + ",".join(str(v) for v in rec.as_tuple()) + "\n")
    return buf.getvalue()


def write_ledger(path: str | Path, rows: Mapping[object, ChangeRecord], key_column: str = "raw_signature") -> None:
    Path(path).write_text(format_ledger(rows, key_column), encoding="utf-8")


def parse_ledger(text: str) -> dict[str, ChangeRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise LedgerFormatError("ledger is empty; a header row is required") from None
    if tuple(header[1:]) != LEDGER_COLUMNS[1:]:
        raise LedgerFormatError(f"unexpected ledger header: {header}")
    rows: dict[str, ChangeRecord] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(LEDGER_COLUMNS):
            raise LedgerFormatError(f"line {line_no}: expected {len(LEDGER_COLUMNS)} fields, got {len(row)}")
        try:
            counts = [int(v) for v in row[1:]]
        except ValueError as exc:
            raise LedgerFormatError(f"line {line_no}: {exc}") from None
        rows[row[0]] = ChangeRecord(*counts)
    return rows


def read_ledger(path: str | Path) -> dict[str, ChangeRecord]:
    return parse_ledger(Path(path).read_text(encoding="utf-8"))
