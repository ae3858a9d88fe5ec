"""Command-line entry point: ``cpmin mine|score|minimize|evaluate|pipeline``."""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .callgraph import EDGE_KINDS, UnknownNodeError
from .errors import (
    CallGraphParseError,
    CommitIdentifierError,
    CpminError,
    DomainError,
    EvaluationInputError,
    ExtractionError,
    LedgerFormatError,
    NormalizationError,
    RepositoryAccessError,
)
from .minimizer import Measure
from .pipeline import STAGES, OutputOverwriteError, PipelineConfig, run_pipeline, write_outputs
from .proneness import Metric
from .spans import PROFILES

log = logging.getLogger("cpmin")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_FORMAT = 4
EXIT_DOMAIN = 5
EXIT_REPOSITORY = 6
EXIT_OVERWRITE = 7

EXIT_CODES_HELP = """\
exit codes:
  0  success
  1  unexpected internal error
  2  usage error (bad flag, unknown metric or measure, malformed config file)
  3  missing input (repository path, ledger, call graph, roots, ground truth)
  4  unparsable input (ledger, call graph, ground truth, source extraction)
  5  domain error (budget outside (0, 1], empty ground truth, zero lifetime)
  6  repository or commit error (not a git repository, unknown end commit)
  7  an output would overwrite an input

environment:
  CPMIN_OUTPUT_DIR  default for --output-dir
  CPMIN_JOBS        default for --jobs (parallel mining workers)
"""

# subcommand -> last pipeline stage it runs
_UNTIL = {
    "mine": "mining",
    "score": "scoring",
    "minimize": "selection",
    "evaluate": "evaluation",
    "pipeline": "evaluation",
}


class UsageError(Exception):
    pass


class MissingInputError(Exception):
    pass


def _split(values: Sequence[str] | None) -> list[str] | None:
    if values is None:
        return None
    out = []
    for v in values:
        out.extend(p.strip() for p in v.replace("\n", ",").split(",") if p.strip())
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="INI file with a [cpmin] section; flags win on conflict")
    p.add_argument("-o", "--output-dir", metavar="DIR", help="directory for artifacts (env CPMIN_OUTPUT_DIR)")
    p.add_argument("-j", "--jobs", type=int, metavar="N", help="parallel mining workers (env CPMIN_JOBS)")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--repo", metavar="PATH", help="git repository to mine")
    p.add_argument("--end-commit", metavar="REV", help="last commit of the mined history (default HEAD)")
    p.add_argument("--profile", choices=sorted(PROFILES), help="source language profile (default java)")
    p.add_argument("--erase-generics", action="store_true", default=None, help="drop type arguments from signatures")


def _add_scoring(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ledger", metavar="CSV", help="use an existing ledger instead of mining --repo")
    p.add_argument("--callgraph", action="append", metavar="FILE", help="call-graph file (repeatable; graphs are merged)")
    p.add_argument("--graph-format", choices=("auto", "javacg", "edges"), help="call-graph format (default auto)")
    p.add_argument("--kinds", metavar="LETTERS", help=f"java-callgraph invocation kinds to keep (default {''.join(sorted(EDGE_KINDS))})")
    p.add_argument("--no-strip-packages", dest="strip_packages", action="store_false", default=None,
                   help="keep package prefixes in java-callgraph names")
    roots = p.add_mutually_exclusive_group()
    roots.add_argument("--test-glob", metavar="GLOB", help="select tests by glob on rendered ids (default '*Test::test*')")
    roots.add_argument("--roots-file", metavar="FILE", help="explicit list of test ids, one per line")
    p.add_argument("--metric", action="append", metavar="NAME", help="ChgFreq and/or ChgExt (repeatable or comma list)")
    p.add_argument("--measure", action="append", metavar="NAME", help="Avg, GMean, HMean, Median (repeatable or comma list)")


def _add_budget(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", action="append", metavar="FRACTION", help="budget in (0, 1] (repeatable; default 0.25,0.5,0.75)")


def _add_evaluation(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ground-truth", metavar="TSV", help="version_id<TAB>test_id rows of fault-revealing tests")
    p.add_argument("--external", action="append", metavar="NAME=TSV",
                   help="selections of another tool, version_id<TAB>test_id, compared against the best configuration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpmin",
        description="Minimize a test suite by the change-proneness of the methods each test reaches.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"cpmin {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    helps = {
        "mine": "mine per-method change counts into ledger CSVs",
        "score": "rank tests for every (metric, measure) configuration",
        "minimize": "write minimized suites for every configuration and budget",
        "evaluate": "compute accuracy, FDR and Fisher comparisons against ground truth",
        "pipeline": "run every stage end to end",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text, epilog=EXIT_CODES_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        _add_common(p)
        _add_source(p)
        if name != "mine":
            _add_scoring(p)
        if name in ("minimize", "evaluate", "pipeline"):
            _add_budget(p)
        if name in ("evaluate", "pipeline"):
            _add_evaluation(p)
    return parser


def _read_config_file(path: str) -> dict[str, str]:
    if not Path(path).is_file():
        raise MissingInputError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    if not cp.has_section("cpmin"):
        raise UsageError(f"{path}: missing [cpmin] section")
    return {k.replace("-", "_"): v for k, v in cp["cpmin"].items()}


def _bool(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"config key {key}: expected a boolean, got {text!r}")


def _budgets(values: list[str]) -> list[float]:
    out = []
    for v in values:
        try:
            out.append(float(v))
        except ValueError:
            raise UsageError(f"budget {v!r} is not a number") from None
    return out


def _externals(values: list[str]) -> dict[str, str]:
    out = {}
    for v in values:
        name, sep, path = v.partition("=")
        if not sep or not name.strip() or not path.strip():
            raise UsageError(f"external {v!r}: expected NAME=PATH")
        out[name.strip()] = path.strip()
    return out


def resolve_config(args: argparse.Namespace, env: dict[str, str] | None = None) -> tuple[PipelineConfig, str]:
    """Merge flags, environment, config file and defaults (in that priority)."""
    env = os.environ if env is None else env
    file_cfg = _read_config_file(args.config) if args.config else {}

    def pick(flag, key, env_key=None):
        if flag is not None:
            return flag
        if env_key and env.get(env_key):
            return env[env_key]
        return file_cfg.get(key)

    cfg = PipelineConfig()
    cfg.repo = pick(args.repo, "repo")
    cfg.end_commit = pick(args.end_commit, "end_commit") or "HEAD"
    cfg.profile = pick(args.profile, "profile") or "java"
    erase = pick(args.erase_generics, "erase_generics")
    cfg.erase_generics = _bool(erase, "erase_generics") if isinstance(erase, str) else bool(erase)
    jobs = pick(args.jobs, "jobs", "CPMIN_JOBS")
    try:
        cfg.jobs = max(1, int(jobs)) if jobs is not None else 1
    except ValueError:
        raise UsageError(f"jobs must be an integer, got {jobs!r}") from None

    g = lambda name: getattr(args, name, None)  # noqa: E731
    cfg.ledger = pick(g("ledger"), "ledger")
    cfg.callgraphs = _split(g("callgraph")) or _split([file_cfg["callgraph"]] if "callgraph" in file_cfg else None) or []
    cfg.graph_format = pick(g("graph_format"), "graph_format") or "auto"
    if cfg.graph_format not in ("auto", "javacg", "edges"):
        raise UsageError(f"unknown graph format {cfg.graph_format!r}")
    cfg.kinds = pick(g("kinds"), "kinds") or cfg.kinds
    if set(cfg.kinds) - EDGE_KINDS:
        raise UsageError(f"unknown invocation kinds in {cfg.kinds!r}; allowed {''.join(sorted(EDGE_KINDS))}")
    strip = pick(g("strip_packages"), "strip_packages")
    cfg.strip_packages = True if strip is None else (_bool(strip, "strip_packages") if isinstance(strip, str) else strip)
    glob_flag, roots_flag = g("test_glob"), g("roots_file")
    if glob_flag is None and roots_flag is None:
        cfg.test_glob, cfg.roots_file = file_cfg.get("test_glob"), file_cfg.get("roots_file")
    else:
        cfg.test_glob, cfg.roots_file = glob_flag, roots_flag
    metrics = _split(g("metric")) or _split([file_cfg["metrics"]] if "metrics" in file_cfg else None)
    measures = _split(g("measure")) or _split([file_cfg["measures"]] if "measures" in file_cfg else None)
    budgets = _split(g("budget")) or _split([file_cfg["budgets"]] if "budgets" in file_cfg else None)
    try:
        if metrics:
            cfg.metrics = [Metric.parse(m).value for m in metrics]
        if measures:
            cfg.measures = [Measure.parse(m).value for m in measures]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if budgets:
        cfg.budgets = _budgets(budgets)
    cfg.ground_truth = pick(g("ground_truth"), "ground_truth")
    ext = _split(g("external")) or _split([file_cfg["externals"]] if "externals" in file_cfg else None)
    cfg.externals = _externals(ext or [])

    out_dir = pick(args.output_dir, "output_dir", "CPMIN_OUTPUT_DIR")
    if not out_dir:
        raise UsageError("an output directory is required (--output-dir or CPMIN_OUTPUT_DIR)")
    return cfg, out_dir


def _check_inputs(cfg: PipelineConfig, command: str) -> None:
    if command == "mine" or not cfg.ledger:
        if not cfg.repo:
            raise UsageError("--repo is required" + ("" if command == "mine" else " unless --ledger is given"))
        if not Path(cfg.repo).exists():
            raise MissingInputError(f"repository path not found: {cfg.repo}")
    if command != "mine" and not cfg.callgraphs:
        raise UsageError("at least one --callgraph is required")
    for p in cfg.input_files():
        if not p.is_file():
            raise MissingInputError(f"input file not found: {p}")


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, OutputOverwriteError):
        return EXIT_OVERWRITE
    if isinstance(exc, (RepositoryAccessError, CommitIdentifierError)):
        return EXIT_REPOSITORY
    if isinstance(exc, DomainError):
        return EXIT_DOMAIN
    if isinstance(exc, (CallGraphParseError, LedgerFormatError, NormalizationError, EvaluationInputError,
                        ExtractionError, UnicodeDecodeError)):
        return EXIT_FORMAT
    if isinstance(exc, (MissingInputError, FileNotFoundError, UnknownNodeError)):
        return EXIT_MISSING_INPUT
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    return EXIT_UNEXPECTED


_CATEGORY = {
    EXIT_UNEXPECTED: "internal error",
    EXIT_USAGE: "usage error",
    EXIT_MISSING_INPUT: "missing input",
    EXIT_FORMAT: "format error",
    EXIT_DOMAIN: "domain error",
    EXIT_REPOSITORY: "repository error",
    EXIT_OVERWRITE: "overwrite refused",
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg, out_dir = resolve_config(args)
        _check_inputs(cfg, args.command)
        until = _UNTIL[args.command]
        result = run_pipeline(cfg, until=until)
        paths = write_outputs(result, out_dir, stage=until)
    except (CpminError, UsageError, MissingInputError, OSError, UnicodeDecodeError) as exc:
        code = _exit_code(exc)
        print(f"cpmin: {_CATEGORY[code]}: {exc}", file=sys.stderr)
        return code
    except Exception as exc:  # pragma: no cover - last-resort guard
        log.debug("unexpected failure", exc_info=True)
        print(f"cpmin: {_CATEGORY[EXIT_UNEXPECTED]}: {exc!r}", file=sys.stderr)
        return EXIT_UNEXPECTED
    for note in result.report.notices:
        print(f"notice: {note}", file=sys.stderr)
    print(f"wrote {len(paths)} artifact(s) to {out_dir} ({', '.join(STAGES[: STAGES.index(until) + 1])})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
