"""Parsing of git's unified-diff output into per-file hunks with line numbers."""

from __future__ import annotations

import codecs
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_INDEX_RE = re.compile(r"^index ([0-9a-f]+)\.\.([0-9a-f]+)")

NULL_PATH = "/dev/null"


@dataclass
class Hunk:
    old_start: int
    old_count: int
    new_start: int
    new_count: int
    deleted: list[int] = field(default_factory=list)  # old-side line numbers
    inserted: list[int] = field(default_factory=list)  # new-side line numbers


@dataclass
class FileDiff:
    old_path: str | None
    new_path: str | None
    old_blob: str | None = None
    new_blob: str | None = None
    binary: bool = False
    hunks: list[Hunk] = field(default_factory=list)

    @property
    def path(self) -> str:
        return self.new_path or self.old_path or ""

    @property
    def insertions(self) -> int:
        return sum(len(h.inserted) for h in self.hunks)

    @property
    def deletions(self) -> int:
        return sum(len(h.deleted) for h in self.hunks)


def _strip_prefix(path: str) -> str | None:
    path = path.rstrip("\t")
    if "\t" in path:
        path = path.split("\t", 1)[0]
    if path == NULL_PATH:
        return None
    if path.startswith('"') and path.endswith('"'):
        path = codecs.escape_decode(path[1:-1].encode("utf-8"))[0].decode("utf-8", "replace")
    if path[:2] in ("a/", "b/"):
        return path[2:]
    return path


def _null_blob(blob: str) -> str | None:
    return None if set(blob) == {"0"} else blob


class DiffParser:
    """Incremental parser; feed lines of one patch, then call :meth:`finish`."""

    def __init__(self):
        self.files: list[FileDiff] = []
        self._cur: FileDiff | None = None
        self._hunk: Hunk | None = None
        self._old_line = 0
        self._new_line = 0
        self._old_left = 0
        self._new_left = 0

    def feed(self, line: str) -> None:
        line = line.rstrip("\n")
        if self._hunk is not None and (self._old_left > 0 or self._new_left > 0):
            tag = line[:1]
            if tag == "-":
                self._hunk.deleted.append(self._old_line)
                self._old_line += 1
                self._old_left -= 1
                return
            if tag == "+":
                self._hunk.inserted.append(self._new_line)
                self._new_line += 1
                self._new_left -= 1
                return
            if tag == " " or line == "":
                self._old_line += 1
                self._new_line += 1
                self._old_left -= 1
                self._new_left -= 1
                return
            if tag == "\\":
                return
            # malformed counts; fall through and treat as a header line
            self._hunk = None
        if line.startswith("\\"):
            return
        if line.startswith("diff --git ") or line.startswith("diff --cc ") or line.startswith("diff --combined "):
            self._cur = FileDiff(old_path=None, new_path=None)
            self.files.append(self._cur)
            self._hunk = None
            parts = line[len("diff --git ") :].split(" b/", 1) if line.startswith("diff --git ") else []
            if len(parts) == 2 and parts[0].startswith("a/"):
                self._cur.old_path = parts[0][2:]
                self._cur.new_path = parts[1]
            return
        if self._cur is None:
            if line.startswith("--- "):
                self._cur = FileDiff(old_path=None, new_path=None)
                self.files.append(self._cur)
            else:
                return
        m = _HUNK_RE.match(line)
        if m:
            old_start, old_count, new_start, new_count = (
                int(m.group(1)),
                int(m.group(2) if m.group(2) is not None else 1),
                int(m.group(3)),
                int(m.group(4) if m.group(4) is not None else 1),
            )
            self._hunk = Hunk(old_start, old_count, new_start, new_count)
            self._cur.hunks.append(self._hunk)
            self._old_line, self._new_line = old_start, new_start
            self._old_left, self._new_left = old_count, new_count
            return
        if line.startswith("--- "):
            self._cur.old_path = _strip_prefix(line[4:])
        elif line.startswith("+++ "):
            self._cur.new_path = _strip_prefix(line[4:])
        elif line.startswith("new file mode"):
            self._cur.old_path = None
        elif line.startswith("deleted file mode"):
            self._cur.new_path = None
        elif line.startswith("rename from "):
            self._cur.old_path = line[len("rename from ") :]
        elif line.startswith("rename to "):
            self._cur.new_path = line[len("rename to ") :]
        elif line.startswith("Binary files ") or line.startswith("GIT binary patch"):
            self._cur.binary = True
        else:
            im = _INDEX_RE.match(line)
            if im:
                self._cur.old_blob = _null_blob(im.group(1))
                self._cur.new_blob = _null_blob(im.group(2))

    def finish(self) -> list[FileDiff]:
        files, self.files = self.files, []
        self._cur = None
        self._hunk = None
        return files


def parse_unified_diff(text: str | Iterable[str]) -> list[FileDiff]:
    """Parse a (possibly multi-file) unified diff.

    Hunk bodies may carry context lines; only ``-``/``+`` lines are recorded.
    """
    parser = DiffParser()
    lines: Iterator[str] = iter(text.split("\n")) if isinstance(text, str) else iter(text)
    for line in lines:
        parser.feed(line)
    return parser.finish()
