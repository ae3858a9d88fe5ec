import os
import subprocess
from pathlib import Path

import pytest

from cpmin.fixtures import generate, write_fixture_inputs

GIT_ENV = {
    "GIT_AUTHOR_NAME": "Test",
    "GIT_AUTHOR_EMAIL": "test@example.invalid",
    "GIT_COMMITTER_NAME": "Test",
    "GIT_COMMITTER_EMAIL": "test@example.invalid",
    "GIT_CONFIG_NOSYSTEM": "1",
    "HOME": os.environ.get("HOME", "/tmp"),
    "PATH": os.environ["PATH"],
}


class GitRepo:
    """Tiny helper that scripts commits in a scratch repository."""

    def __init__(self, path: Path):
        self.path = path
        self.tick = 0
        path.mkdir(parents=True, exist_ok=True)
        self.git("init", "-q", "-b", "main")

    def git(self, *args: str) -> str:
        env = dict(GIT_ENV)
        env["GIT_AUTHOR_DATE"] = env["GIT_COMMITTER_DATE"] = f"{1_700_000_000 + self.tick} +0000"
        out = subprocess.run(
            ["git", "-C", str(self.path), *args],
            check=True,
            env=env,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        return out.stdout.strip()

    def write(self, rel: str, text: str) -> None:
        p = self.path / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")

    def commit(self, message: str, files: dict[str, str | None] | None = None) -> str:
        self.tick += 60
        for rel, text in (files or {}).items():
            if text is None:
                self.git("rm", "-q", rel)
            else:
                self.write(rel, text)
                self.git("add", rel)
        self.git("commit", "-q", "--allow-empty", "-m", message)
        return self.git("rev-parse", "HEAD")


@pytest.fixture
def git_repo(tmp_path):
    return GitRepo(tmp_path / "repo")


@pytest.fixture
def fixture_factory(tmp_path):
    """Build a materialized fixture and its input files for a seed."""

    def build(seed: int, **kwargs):
        root = tmp_path / f"fx{seed}"
        script = generate(seed, root / "repo", **kwargs)
        inputs = write_fixture_inputs(script, root / "in")
        return script, root / "repo", inputs

    return build


# -- acceptance summary ------------------------------------------------------

_criteria: dict[int, dict] = {}


def pytest_runtest_logreport(report):
    marker = _markers.get(report.nodeid)
    if marker is None:
        return
    number, title = marker
    entry = _criteria.setdefault(number, {"title": title, "passed": True, "seen": False, "seconds": 0.0})
    if report.when == "call" or report.failed:
        entry["seen"] = True
        entry["seconds"] += report.duration
        if report.failed or report.skipped:
            entry["passed"] = False


_markers: dict[str, tuple[int, str]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _markers[item.nodeid] = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        if not e["seen"]:
            continue
        verdict = "PASS" if e["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {e['title']} ({e['seconds']:.2f}s)")
