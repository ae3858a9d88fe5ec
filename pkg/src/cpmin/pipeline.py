"""End-to-end orchestration: mine, score, minimize, evaluate, and write artifacts."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator

from . import __version__
from .callgraph import (
    EDGE_KINDS,
    CallGraph,
    DependencySet,
    dependencies,
    format_edge_list,
    identify_test_roots,
    read_callgraph,
    read_roots_file,
)
from .errors import CpminError, DomainError
from .evaluator import (
    ConfigResult,
    EvaluationReport,
    build_outcomes,
    compare,
    read_version_tests,
)
from .history import MineResult, mine, resolve_commit
from .ledger import ChangeRecord, format_ledger, read_ledger
from .minimizer import Measure, MinimizedSuite, TestScore, format_ranking, format_suite, score_tests, select
from .proneness import CpTable, Metric, cp_table, format_cp_table
from .signature import MethodId, aggregate
from .spans import PROFILES

logger = logging.getLogger(__name__)

STAGES = ("mining", "graph", "scoring", "selection", "evaluation")
DEFAULT_TEST_GLOB = "*Test::test*"


class OutputOverwriteError(CpminError):
    """An output path would replace one of the run's inputs."""


@dataclass
class PipelineConfig:
    repo: str | None = None
    end_commit: str = "HEAD"
    ledger: str | None = None
    callgraphs: list[str] = field(default_factory=list)
    graph_format: str = "auto"
    kinds: str = "".join(sorted(EDGE_KINDS))
    strip_packages: bool = True
    test_glob: str | None = None
    roots_file: str | None = None
    metrics: list[str] = field(default_factory=lambda: [m.value for m in Metric])
    measures: list[str] = field(default_factory=lambda: [m.value for m in Measure])
    budgets: list[float] = field(default_factory=lambda: [0.25, 0.5, 0.75])
    ground_truth: str | None = None
    externals: dict[str, str] = field(default_factory=dict)
    erase_generics: bool = False
    jobs: int = 1
    profile: str = "java"

    def validate(self) -> None:
        if not self.metrics or not self.measures or not self.budgets:
            raise DomainError("at least one (metric, measure, budget) triple is required")
        for m in self.metrics:
            Metric.parse(m)
        for m in self.measures:
            Measure.parse(m)
        for b in self.budgets:
            if not (0 < b <= 1):
                raise DomainError(f"budget must lie in (0, 1], got {b}")
        if self.profile not in PROFILES:
            raise DomainError(f"unknown language profile {self.profile!r}")
        if self.test_glob is not None and self.roots_file is not None:
            raise DomainError("give either a test glob or a roots file, not both")

    def input_files(self) -> list[Path]:
        paths = [self.ledger, *self.callgraphs, self.roots_file, self.ground_truth, *self.externals.values()]
        return [Path(p) for p in paths if p]

    def configurations(self) -> list[tuple[Metric, Measure]]:
        return [(Metric.parse(a), Measure.parse(b)) for a in self.metrics for b in self.measures]


@dataclass
class PipelineResult:
    config: PipelineConfig
    mined: MineResult | None = None
    raw_ledger: dict[str, ChangeRecord] | None = None
    ledger: dict[MethodId, ChangeRecord] | None = None
    cp: dict[Metric, CpTable] = field(default_factory=dict)
    graph: CallGraph | None = None
    roots: list[MethodId] = field(default_factory=list)
    deps: list[DependencySet] = field(default_factory=list)
    rankings: dict[tuple[Metric, Measure], list[TestScore]] = field(default_factory=dict)
    suites: dict[tuple[Metric, Measure, float], MinimizedSuite] = field(default_factory=dict)
    report: EvaluationReport = field(default_factory=EvaluationReport)
    head: str | None = None

    @property
    def timings(self) -> dict[str, float]:
        return self.report.timings


def config_name(metric: Metric, measure: Measure, budget: float | None = None) -> str:
    name = f"{metric.value}-{measure.value}"
    return name if budget is None else f"{name}-{budget:g}"


@contextmanager
def _timed(timings: dict[str, float], stage: str) -> Iterator[None]:
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[stage] = timings.get(stage, 0.0) + (time.perf_counter() - start)


def run_mining(cfg: PipelineConfig, result: PipelineResult) -> None:
    with _timed(result.timings, "mining"):
        if cfg.ledger:
            result.raw_ledger = read_ledger(cfg.ledger)
        elif cfg.repo:
            result.head = resolve_commit(cfg.repo, cfg.end_commit)
            result.mined = mine(cfg.repo, result.head, PROFILES[cfg.profile], jobs=cfg.jobs)
            result.raw_ledger = result.mined.ledger()
            for w in result.mined.warnings:
                result.report.notices.append(f"mining: {w}")
        else:
            raise DomainError("either a repository or a ledger file is required")
        result.ledger = aggregate(result.raw_ledger, erase_generics=cfg.erase_generics)
        for metric in {m for m, _ in cfg.configurations()}:
            result.cp[metric] = cp_table(result.ledger, metric)


def run_graph(cfg: PipelineConfig, result: PipelineResult) -> None:
    if not cfg.callgraphs:
        raise DomainError("at least one call-graph file is required")
    with _timed(result.timings, "graph"):
        nodes: set[MethodId] = set()
        edges: set[tuple[MethodId, MethodId]] = set()
        for path in cfg.callgraphs:
            g = read_callgraph(path, cfg.graph_format, kinds=cfg.kinds, strip_packages=cfg.strip_packages)
            nodes |= g.nodes
            edges |= g.edges
        result.graph = CallGraph.from_edges(edges, nodes)
        if cfg.roots_file:
            sel = identify_test_roots(result.graph, roots=read_roots_file(cfg.roots_file))
            for missing in sel.missing:
                result.report.notices.append(f"roots: {missing} is not in the call graph")
        else:
            sel = identify_test_roots(result.graph, glob=cfg.test_glob or DEFAULT_TEST_GLOB)
        result.roots = sel.roots
        if not result.roots:
            result.report.notices.append("roots: no test methods matched; rankings are empty")
        result.deps = [dependencies(result.graph, t) for t in result.roots]


def run_scoring(cfg: PipelineConfig, result: PipelineResult) -> None:
    with _timed(result.timings, "scoring"):
        for metric, measure in cfg.configurations():
            result.rankings[(metric, measure)] = score_tests(result.cp[metric], result.deps, measure)


def run_selection(cfg: PipelineConfig, result: PipelineResult) -> None:
    with _timed(result.timings, "selection"):
        for (metric, measure), ranking in result.rankings.items():
            for budget in cfg.budgets:
                result.suites[(metric, measure, budget)] = select(ranking, budget)


def _best(results: list[ConfigResult]) -> ConfigResult:
    return sorted(results, key=lambda r: (-r.fdr, -r.mean_accuracy, r.name))[0]


def run_evaluation(cfg: PipelineConfig, result: PipelineResult) -> None:
    report = result.report
    with _timed(result.timings, "evaluation"):
        if not cfg.ground_truth:
            report.notices.append(
                "evaluation: no ground-truth file given; accuracy and FDR are omitted"
            )
            return
        truth = read_version_tests(cfg.ground_truth)
        if not truth:
            raise DomainError(f"{cfg.ground_truth}: ground truth lists no versions")
        roots = set(result.roots)
        unknown = sorted({t.render() for tests in truth.values() for t in tests} - {r.render() for r in roots})
        if unknown:
            report.notices.append(f"evaluation: {len(unknown)} fault-revealing test(s) are not test roots")
        by_budget: dict[float, list[ConfigResult]] = {}
        for (metric, measure, budget), suite in result.suites.items():
            selected = frozenset(suite.selected)
            outcomes = build_outcomes(truth, {v: selected for v in truth})
            cr = ConfigResult(config_name(metric, measure, budget), outcomes)
            report.results.append(cr)
            by_budget.setdefault(budget, []).append(cr)
        externals = []
        for name, path in sorted(cfg.externals.items()):
            ext = ConfigResult(name, build_outcomes(truth, read_version_tests(path)))
            report.results.append(ext)
            externals.append(ext)
        for budget in sorted(by_budget):
            group = sorted(by_budget[budget], key=lambda r: r.name)
            for i, a in enumerate(group):
                for b in group[i + 1 :]:
                    report.comparisons.append(compare(a.outcomes, b.outcomes, (a.name, b.name)))
            best = _best(group)
            for ext in externals:
                report.comparisons.append(compare(best.outcomes, ext.outcomes, (best.name, ext.name)))


def run_pipeline(cfg: PipelineConfig, *, until: str = "evaluation") -> PipelineResult:
    """Run the stages in order up to and including ``until``."""
    cfg.validate()
    if until not in STAGES:
        raise ValueError(f"unknown stage {until!r}")
    result = PipelineResult(cfg)
    steps = [run_mining, run_graph, run_scoring, run_selection, run_evaluation]
    for stage, step in zip(STAGES, steps):
        step(cfg, result)
        logger.info("stage %s done in %.3fs", stage, result.timings.get(stage, 0.0))
        if stage == until:
            break
    return result


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def check_outputs(cfg: PipelineConfig, paths: list[Path]) -> None:
    """Refuse to write where an input lives."""
    if cfg.repo and paths and paths[0].parent.resolve() == Path(cfg.repo).resolve():
        raise OutputOverwriteError(f"output directory {paths[0].parent} is the repository itself")
    inputs = {p.resolve(): p for p in cfg.input_files() if p.exists()}
    for path in paths:
        if path.resolve() in inputs:
            raise OutputOverwriteError(f"output {path} would overwrite input {inputs[path.resolve()]}")


def manifest(cfg: PipelineConfig, result: PipelineResult, stage: str) -> dict:
    """Reproduction record; contains no wall-clock data so reruns are identical."""
    inputs = {str(p): file_digest(p) for p in cfg.input_files()}
    data = asdict(cfg)
    return {
        "tool": "cpmin",
        "version": __version__,
        "stage": stage,
        "config": data,
        "repository_head": result.head,
        "history_length": result.mined.history_length if result.mined else None,
        "input_digests": dict(sorted(inputs.items())),
    }


def render_outputs(result: PipelineResult, stage: str = "evaluation") -> dict[str, str]:
    """Artifact file names mapped to their contents, for stages up to ``stage``."""
    cfg = result.config
    files: dict[str, str] = {}
    reached = STAGES[: STAGES.index(stage) + 1]
    if result.raw_ledger is not None:
        files["ledger.raw.csv"] = format_ledger(result.raw_ledger)
        files["ledger.csv"] = format_ledger({k.render(): v for k, v in result.ledger.items()}, key_column="method_id")
        for metric in sorted(result.cp, key=lambda m: m.value):
            files[f"cp-{metric.value}.csv"] = format_cp_table(result.cp[metric])
    if "graph" in reached and result.graph is not None:
        files["graph.tsv"] = format_edge_list(result.graph)
    if "scoring" in reached:
        for (metric, measure), ranking in result.rankings.items():
            files[f"ranking-{config_name(metric, measure)}.csv"] = format_ranking(ranking)
    if "selection" in reached:
        for (metric, measure, budget), suite in result.suites.items():
            files[f"suite-{config_name(metric, measure, budget)}.txt"] = format_suite(suite)
    if "evaluation" in reached:
        files["report.ini"] = result.report.to_ini()
        files["summary.csv"] = result.report.summary_csv()
    timings = {s: round(result.timings.get(s, 0.0), 6) for s in reached}
    timings["total"] = round(sum(timings.values()), 6)
    files["timings.json"] = json.dumps(timings, indent=2) + "\n"
    files["run-manifest.json"] = json.dumps(manifest(cfg, result, stage), indent=2, sort_keys=True) + "\n"
    return files


def write_outputs(result: PipelineResult, out_dir: str | Path, *, stage: str = "evaluation") -> list[Path]:
    """Write every artifact produced up to ``stage``; returns the written paths."""
    out = Path(out_dir)
    files = render_outputs(result, stage)
    paths = [out / name for name in files]
    check_outputs(result.config, paths)
    out.mkdir(parents=True, exist_ok=True)
    for path, text in zip(paths, files.values()):
        path.write_text(text, encoding="utf-8")
    return paths
