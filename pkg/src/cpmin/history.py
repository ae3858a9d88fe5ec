"""Method-level change mining over a git repository's first-parent history."""

from __future__ import annotations

import logging
import os
import subprocess
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .diffparse import DiffParser, FileDiff, Hunk
from .errors import CommitIdentifierError, ExtractionError, RepositoryAccessError
from .ledger import ChangeRecord
from .spans import JAVA, LanguageProfile, MethodSpan, extract_method_spans

logger = logging.getLogger(__name__)

_COMMIT_MARK = "\x01"

# Flags pinned so that user configuration cannot change hunk boundaries.
_DIFF_FLAGS = (
    "-U0",
    "-M",
    "--full-index",
    "--no-color",
    "--no-ext-diff",
    "--no-textconv",
    "--diff-algorithm=myers",
    "--indent-heuristic",
)


@dataclass(frozen=True)
class CommitMeta:
    hash: str
    index: int
    timestamp: int


@dataclass
class RawChangeRecord:
    raw_signature: str
    change_commits: int
    first_seen_index: int
    insertions: int = 0
    deletions: int = 0
    modifications: int = 0

    def total_commits(self, history_length: int) -> int:
        return history_length - self.first_seen_index


@dataclass
class MineResult:
    records: dict[str, RawChangeRecord]
    history_length: int
    commits: list[CommitMeta] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def ledger(self) -> dict[str, ChangeRecord]:
        """Ledger rows with per-method lifetime ``total_commits``."""
        return {
            sig: ChangeRecord(
                change_commits=r.change_commits,
                total_commits=r.total_commits(self.history_length),
                insertions=r.insertions,
                deletions=r.deletions,
                modifications=r.modifications,
            )
            for sig, r in sorted(self.records.items())
        }


def _git(repo: str | Path, *args: str, check: bool = True) -> subprocess.CompletedProcess:
    return subprocess.run(
        ["git", "-C", str(repo), "-c", "core.quotepath=false", *args],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        check=check,
    )


def _check_repo(repo_path: str | Path) -> None:
    if not Path(repo_path).is_dir():
        raise RepositoryAccessError(f"not a directory: {repo_path}")
    proc = _git(repo_path, "rev-parse", "--git-dir", check=False)
    if proc.returncode != 0:
        raise RepositoryAccessError(
            f"not a readable git repository: {repo_path}: {proc.stderr.decode(errors='replace').strip()}"
        )


def resolve_commit(repo_path: str | Path, commit: str) -> str:
    _check_repo(repo_path)
    proc = _git(repo_path, "rev-parse", "--verify", "--quiet", f"{commit}^{{commit}}", check=False)
    if proc.returncode != 0:
        raise CommitIdentifierError(f"cannot resolve commit {commit!r} in {repo_path}")
    return proc.stdout.decode().strip()


def linearize_history(repo_path: str | Path, end_commit: str = "HEAD") -> list[CommitMeta]:
    """Commits on the first-parent chain ending at ``end_commit``, oldest first."""
    sha = resolve_commit(repo_path, end_commit)
    proc = _git(repo_path, "log", "--first-parent", "--reverse", "--format=%H %ct", sha)
    commits = []
    for idx, line in enumerate(proc.stdout.decode().splitlines()):
        h, ts = line.split()
        commits.append(CommitMeta(hash=h, index=idx, timestamp=int(ts)))
    return commits


def _innermost_map(spans: Sequence[MethodSpan]) -> list[int]:
    if not spans:
        return []
    owner = [-1] * (max(s.end_line for s in spans) + 1)
    order = sorted(range(len(spans)), key=lambda k: (spans[k].start_line, -spans[k].end_line))
    for k in order:
        s = spans[k]
        for line in range(s.start_line, s.end_line + 1):
            owner[line] = k
    return owner


def _lookup(spans: Sequence[MethodSpan], owner: list[int], line: int) -> str | None:
    if 0 <= line < len(owner) and owner[line] >= 0:
        return spans[owner[line]].raw_signature
    return None


def attribute_diff(
    old_spans: Sequence[MethodSpan],
    new_spans: Sequence[MethodSpan],
    hunks: Iterable[Hunk],
    *,
    _old_owner: list[int] | None = None,
    _new_owner: list[int] | None = None,
) -> dict[str, tuple[int, int, int]]:
    """Attribute hunk lines to methods as ``(insertions, deletions, modifications)``.

    Deleted lines go to the innermost old span containing them, inserted lines
    to the innermost new span. Within one hunk a signature that received both
    gets ``min(ins, del)`` modifications; the remainder stay pure insertions or
    deletions. Lines outside every span are dropped.
    """
    old_owner = _innermost_map(old_spans) if _old_owner is None else _old_owner
    new_owner = _innermost_map(new_spans) if _new_owner is None else _new_owner
    totals: dict[str, list[int]] = {}
    for hunk in hunks:
        ins: dict[str, int] = {}
        dels: dict[str, int] = {}
        for line in hunk.deleted:
            sig = _lookup(old_spans, old_owner, line)
            if sig is not None:
                dels[sig] = dels.get(sig, 0) + 1
        for line in hunk.inserted:
            sig = _lookup(new_spans, new_owner, line)
            if sig is not None:
                ins[sig] = ins.get(sig, 0) + 1
        for sig in ins.keys() | dels.keys():
            i, d = ins.get(sig, 0), dels.get(sig, 0)
            mods = min(i, d)
            acc = totals.setdefault(sig, [0, 0, 0])
            acc[0] += i - mods
            acc[1] += d - mods
            acc[2] += mods
    return {sig: tuple(v) for sig, v in sorted(totals.items())}


class _BlobReader:
    """Long-lived ``git cat-file --batch`` process with a small span cache."""

    def __init__(self, repo: str | Path, profile: LanguageProfile, cache_size: int = 4096):
        self.profile = profile
        self.cache: OrderedDict[str, object] = OrderedDict()
        self.cache_size = cache_size
        self.proc = subprocess.Popen(
            ["git", "-C", str(repo), "cat-file", "--batch"],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )

    def text(self, blob: str) -> str:
        assert self.proc.stdin and self.proc.stdout
        self.proc.stdin.write(blob.encode() + b"\n")
        self.proc.stdin.flush()
        header = self.proc.stdout.readline().decode().split()
        if len(header) < 3 or header[1] == "missing":
            raise ExtractionError(f"blob {blob} missing from object store")
        size = int(header[2])
        data = self.proc.stdout.read(size)
        self.proc.stdout.read(1)
        return data.decode("utf-8", errors="replace")

    def spans(self, blob: str, path: str) -> tuple[list[MethodSpan], list[int]]:
        hit = self.cache.get(blob)
        if hit is None:
            try:
                spans = extract_method_spans(self.text(blob), self.profile, file=path)
                hit = (spans, _innermost_map(spans))
            except ExtractionError as exc:
                hit = exc
            self.cache[blob] = hit
            if len(self.cache) > self.cache_size:
                self.cache.popitem(last=False)
        else:
            self.cache.move_to_end(blob)
        if isinstance(hit, ExtractionError):
            raise ExtractionError(str(hit).split(": ", 1)[-1], path, hit.line)
        return hit  # type: ignore[return-value]

    def close(self) -> None:
        if self.proc.stdin:
            self.proc.stdin.close()
        self.proc.wait()


def _stream_patches(repo: str | Path, sha: str) -> Iterator[tuple[str, list[FileDiff]]]:
    proc = subprocess.Popen(
        [
            "git", "-C", str(repo), "-c", "core.quotepath=false", "log",
            "--first-parent", "--diff-merges=first-parent", "--reverse", "-p",
            *_DIFF_FLAGS, f"--format={_COMMIT_MARK}%H", sha,
        ],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
    )
    assert proc.stdout is not None
    parser = DiffParser()
    current: str | None = None
    for raw in proc.stdout:
        line = raw.decode("utf-8", errors="replace")
        if line.startswith(_COMMIT_MARK):
            if current is not None:
                yield current, parser.finish()
            current = line[1:].strip()
            continue
        parser.feed(line)
    if current is not None:
        yield current, parser.finish()
    proc.stdout.close()
    err = proc.stderr.read() if proc.stderr else b""
    if proc.wait() != 0:
        raise RepositoryAccessError(f"git log failed: {err.decode(errors='replace').strip()}")


def _relevant(fd: FileDiff, profile: LanguageProfile) -> bool:
    if fd.binary or not fd.hunks:
        return False
    return any(p is not None and profile.matches(p) for p in (fd.old_path, fd.new_path))


def _attribute_texts(args) -> tuple[dict[str, tuple[int, int, int]] | None, str | None]:
    path, old_text, new_text, hunks, profile = args
    try:
        old_spans = extract_method_spans(old_text, profile, file=path) if old_text is not None else []
        new_spans = extract_method_spans(new_text, profile, file=path) if new_text is not None else []
    except ExtractionError as exc:
        return None, str(exc)
    return attribute_diff(old_spans, new_spans, hunks), None


def _fold(
    records: dict[str, RawChangeRecord],
    index: int,
    per_commit: dict[str, list[int]],
) -> None:
    for sig, (i, d, m) in per_commit.items():
        if i == 0 and d == 0 and m == 0:
            continue
        rec = records.get(sig)
        if rec is None:
            rec = records[sig] = RawChangeRecord(sig, 0, index)
        rec.change_commits += 1
        rec.first_seen_index = min(rec.first_seen_index, index)
        rec.insertions += i
        rec.deletions += d
        rec.modifications += m


def _add(acc: dict[str, list[int]], part: dict[str, tuple[int, int, int]]) -> None:
    for sig, (i, d, m) in part.items():
        cur = acc.setdefault(sig, [0, 0, 0])
        cur[0] += i
        cur[1] += d
        cur[2] += m


def mine(
    repo_path: str | Path,
    end_commit: str = "HEAD",
    language_profile: LanguageProfile = JAVA,
    *,
    jobs: int = 1,
) -> MineResult:
    """Mine per-method change counts from the repository's inception to ``end_commit``."""
    commits = linearize_history(repo_path, end_commit)
    index_of = {c.hash: c.index for c in commits}
    sha = commits[-1].hash
    records: dict[str, RawChangeRecord] = {}
    warnings: list[str] = []
    reader = _BlobReader(repo_path, language_profile)
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        pending: list[tuple[int, list[tuple]]] = []

        def drain() -> None:
            flat = [task for _, tasks in pending for task in tasks]
            results = list(pool.map(_attribute_texts, flat, chunksize=8)) if flat else []
            pos = 0
            for idx, tasks in pending:
                acc: dict[str, list[int]] = {}
                for task in tasks:
                    part, err = results[pos]
                    pos += 1
                    if err is not None:
                        _warn(warnings, commits[idx].hash, task[0], err)
                    else:
                        _add(acc, part)
                _fold(records, idx, acc)
            pending.clear()

        for commit_hash, files in _stream_patches(repo_path, sha):
            idx = index_of[commit_hash]
            relevant = [fd for fd in files if _relevant(fd, language_profile)]
            if pool is not None:
                tasks = []
                for fd in relevant:
                    old = reader.text(fd.old_blob) if fd.old_blob else None
                    new = reader.text(fd.new_blob) if fd.new_blob else None
                    tasks.append((fd.path, old, new, fd.hunks, language_profile))
                pending.append((idx, tasks))
                if sum(len(t) for _, t in pending) >= 256:
                    drain()
                continue
            acc: dict[str, list[int]] = {}
            for fd in relevant:
                try:
                    old_spans, old_owner = reader.spans(fd.old_blob, fd.old_path or fd.path) if fd.old_blob else ([], [])
                    new_spans, new_owner = reader.spans(fd.new_blob, fd.path) if fd.new_blob else ([], [])
                except ExtractionError as exc:
                    _warn(warnings, commit_hash, fd.path, str(exc))
                    continue
                _add(acc, attribute_diff(old_spans, new_spans, fd.hunks, _old_owner=old_owner, _new_owner=new_owner))
            _fold(records, idx, acc)
        if pool is not None:
            drain()
    finally:
        # workers forked after cat-file started hold its stdin; stop them first
        if pool is not None:
            pool.shutdown()
        reader.close()
    return MineResult(records=dict(sorted(records.items())), history_length=len(commits), commits=commits, warnings=warnings)


def _warn(warnings: list[str], commit: str, path: str, message: str) -> None:
    text = f"{commit[:12]} {path}: skipped ({message})"
    logger.warning(text)
    warnings.append(text)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("CPMIN_JOBS", "1")))
    except ValueError:
        return 1
