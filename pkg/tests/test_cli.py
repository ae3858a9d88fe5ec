import configparser
import csv
import io
import json
import math

import pytest

from cpmin import __version__
from cpmin.cli import (
    EXIT_DOMAIN,
    EXIT_FORMAT,
    EXIT_MISSING_INPUT,
    EXIT_OK,
    EXIT_OVERWRITE,
    EXIT_REPOSITORY,
    EXIT_USAGE,
    main,
)

NONDETERMINISTIC = {"timings.json"}


def artifacts(out_dir) -> dict[str, bytes]:
    """Artifact bytes with wall-clock measurements masked."""
    files = {}
    for p in sorted(out_dir.iterdir()):
        if p.name in NONDETERMINISTIC:
            continue
        data = p.read_bytes()
        if p.name == "summary.csv":
            rows = list(csv.reader(io.StringIO(data.decode())))
            data = "\n".join(",".join(r[:-1]) for r in rows).encode()
        files[p.name] = data
    return files


@pytest.fixture
def fx(fixture_factory):
    script, repo, inputs = fixture_factory(5)
    return script, repo, inputs


def base_args(repo, inputs, out):
    return ["--repo", str(repo), "--callgraph", str(inputs["callgraph"]), "-o", str(out)]


class TestPipelineCommand:
    def test_budget_half_suite_and_report(self, fx, tmp_path):
        script, repo, inputs = fx
        out = tmp_path / "out"
        code = main(["pipeline", *base_args(repo, inputs, out), "--ground-truth", str(inputs["ground_truth"]),
                     "--budget", "0.5", "--metric", "ChgFreq", "--measure", "Avg"])
        assert code == EXIT_OK
        suite = (out / "suite-ChgFreq-Avg-0.5.txt").read_text().splitlines()
        assert len(suite) == math.ceil(len(script.tests) / 2)
        assert suite == script.expected["selections"]["ChgFreq/Avg/0.5"]
        report = configparser.ConfigParser(interpolation=None)
        report.read(out / "report.ini")
        assert float(report["config ChgFreq-Avg-0.5"]["fdr"]) == pytest.approx(script.expected["fdr"]["ChgFreq/Avg/0.5"])
        timings = json.loads((out / "timings.json").read_text())
        assert set(timings) == {"mining", "graph", "scoring", "selection", "evaluation", "total"}
        assert all(v >= 0 for v in timings.values())
        assert timings["total"] == pytest.approx(sum(v for k, v in timings.items() if k != "total"), abs=1e-5)

    def test_two_runs_are_byte_identical(self, fx, tmp_path):
        _, repo, inputs = fx
        args = lambda out: ["pipeline", *base_args(repo, inputs, out), "--ground-truth", str(inputs["ground_truth"])]
        assert main(args(tmp_path / "a")) == EXIT_OK
        assert main(args(tmp_path / "b")) == EXIT_OK
        a, b = artifacts(tmp_path / "a"), artifacts(tmp_path / "b")
        assert a == b and len(a) > 30

    def test_manifest_records_inputs(self, fx, tmp_path):
        _, repo, inputs = fx
        out = tmp_path / "out"
        assert main(["score", *base_args(repo, inputs, out)]) == EXIT_OK
        man = json.loads((out / "run-manifest.json").read_text())
        assert man["version"] == __version__ and man["stage"] == "scoring"
        assert str(inputs["callgraph"]) in man["input_digests"]
        assert len(man["repository_head"]) == 40

    def test_evaluate_without_ground_truth(self, fx, tmp_path, capsys):
        _, repo, inputs = fx
        out = tmp_path / "out"
        assert main(["evaluate", *base_args(repo, inputs, out)]) == EXIT_OK
        report = configparser.ConfigParser(interpolation=None)
        report.read(out / "report.ini")
        assert not [s for s in report.sections() if s.startswith("config ")]
        assert "ground-truth" in report["report"]["notice.0"]
        assert (out / "ranking-ChgExt-HMean.csv").exists()
        assert "notice:" in capsys.readouterr().err

    def test_external_tool_is_compared(self, fx, tmp_path):
        script, repo, inputs = fx
        ext = tmp_path / "other.tsv"
        ext.write_text("".join(f"{v}\t{tests[0]}\n" for v, tests in script.fault_plants.items()))
        out = tmp_path / "out"
        code = main(["pipeline", *base_args(repo, inputs, out), "--ground-truth", str(inputs["ground_truth"]),
                     "--external", f"Other={ext}"])
        assert code == EXIT_OK
        report = configparser.ConfigParser(interpolation=None)
        report.read(out / "report.ini")
        assert report["config Other"]["fdr"] == "1"
        assert any(s.endswith(" vs Other") for s in report.sections())


class TestStages:
    def test_mine_twice_identical(self, fx, tmp_path):
        _, repo, _ = fx
        for name in ("a", "b"):
            assert main(["mine", "--repo", str(repo), "-o", str(tmp_path / name)]) == EXIT_OK
        for f in ("ledger.raw.csv", "ledger.csv", "cp-ChgFreq.csv", "cp-ChgExt.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_score_from_ledger(self, fx, tmp_path):
        _, repo, inputs = fx
        assert main(["mine", "--repo", str(repo), "-o", str(tmp_path / "m")]) == EXIT_OK
        out = tmp_path / "s"
        assert main(["minimize", "--ledger", str(tmp_path / "m" / "ledger.raw.csv"),
                     "--callgraph", str(inputs["callgraph"]), "-o", str(out)]) == EXIT_OK
        assert (out / "suite-ChgExt-Median-0.75.txt").exists()
        assert not (out / "report.ini").exists()

    def test_roots_file(self, fx, tmp_path):
        script, repo, inputs = fx
        roots = tmp_path / "roots.txt"
        roots.write_text(script.tests[0] + "\nGhostTest::testNothing()\n")
        out = tmp_path / "out"
        assert main(["score", *base_args(repo, inputs, out), "--roots-file", str(roots)]) == EXIT_OK
        rows = (out / "ranking-ChgFreq-Avg.csv").read_text().splitlines()
        assert len(rows) == 2 and script.tests[0] in rows[1]


class TestConfiguration:
    def test_config_file_and_flag_precedence(self, fx, tmp_path):
        _, repo, inputs = fx
        cfg = tmp_path / "run.ini"
        cfg.write_text(f"[cpmin]\nrepo = {repo}\ncallgraph = {inputs['callgraph']}\nmetrics = ChgExt\n"
                       f"measures = GMean, Avg\nbudgets = 0.25\noutput_dir = {tmp_path / 'from_file'}\n")
        assert main(["minimize", "--config", str(cfg), "--budget", "0.75"]) == EXIT_OK
        names = sorted(p.name for p in (tmp_path / "from_file").glob("suite-*"))
        assert names == ["suite-ChgExt-Avg-0.75.txt", "suite-ChgExt-GMean-0.75.txt"]

    def test_env_output_dir(self, fx, tmp_path, monkeypatch):
        _, repo, inputs = fx
        monkeypatch.setenv("CPMIN_OUTPUT_DIR", str(tmp_path / "envout"))
        monkeypatch.setenv("CPMIN_JOBS", "2")
        assert main(["mine", "--repo", str(repo)]) == EXIT_OK
        man = json.loads((tmp_path / "envout" / "run-manifest.json").read_text())
        assert man["config"]["jobs"] == 2

    def test_help_documents_exit_codes(self, capsys):
        assert main(["--help"]) == 0
        text = capsys.readouterr().out
        for code in range(8):
            assert f"\n  {code}  " in text


class TestExitCodes:
    def test_missing_call_graph(self, fx, tmp_path):
        _, repo, _ = fx
        code = main(["score", "--repo", str(repo), "--callgraph", str(tmp_path / "nope.txt"), "-o", str(tmp_path / "o")])
        assert code == EXIT_MISSING_INPUT

    def test_missing_repository_path(self, tmp_path):
        assert main(["mine", "--repo", str(tmp_path / "nope"), "-o", str(tmp_path / "o")]) == EXIT_MISSING_INPUT

    def test_budget_out_of_range(self, fx, tmp_path):
        _, repo, inputs = fx
        assert main(["minimize", *base_args(repo, inputs, tmp_path / "o"), "--budget", "1.5"]) == EXIT_DOMAIN

    def test_unparsable_call_graph(self, fx, tmp_path):
        _, repo, _ = fx
        bad = tmp_path / "bad.txt"
        bad.write_text("M:broken line\n")
        assert main(["score", "--repo", str(repo), "--callgraph", str(bad), "-o", str(tmp_path / "o")]) == EXIT_FORMAT

    def test_not_a_repository(self, tmp_path):
        assert main(["mine", "--repo", str(tmp_path), "-o", str(tmp_path / "o")]) == EXIT_REPOSITORY

    def test_unknown_end_commit(self, fx, tmp_path):
        _, repo, _ = fx
        assert main(["mine", "--repo", str(repo), "--end-commit", "nope", "-o", str(tmp_path / "o")]) == EXIT_REPOSITORY

    def test_output_would_overwrite_input(self, fx, tmp_path):
        _, repo, inputs = fx
        out = tmp_path / "m"
        assert main(["mine", "--repo", str(repo), "-o", str(out)]) == EXIT_OK
        code = main(["score", "--ledger", str(out / "ledger.csv"), "--callgraph", str(inputs["callgraph"]), "-o", str(out)])
        assert code == EXIT_OVERWRITE

    def test_unknown_metric_is_usage_error(self, fx, tmp_path):
        _, repo, inputs = fx
        assert main(["score", *base_args(repo, inputs, tmp_path / "o"), "--metric", "Churn"]) == EXIT_USAGE

    def test_missing_output_dir(self, fx, monkeypatch):
        _, repo, _ = fx
        monkeypatch.delenv("CPMIN_OUTPUT_DIR", raising=False)
        assert main(["mine", "--repo", str(repo)]) == EXIT_USAGE

    def test_bad_flag(self):
        assert main(["mine", "--bogus"]) == EXIT_USAGE
