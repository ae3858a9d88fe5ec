"""Synthetic repositories with planted ground truth.

A fixture is a seeded script of Java edits (method insertions, body edits,
parameter renames, deletions) replayed into a real git repository, together
with a static call graph in java-callgraph format and planted fault-revealing
tests. Every expected value (ledger, CP tables, dependency sets, rankings,
selections, accuracy, FDR) is computed here by direct enumeration with exact
rational arithmetic.

Nothing in this module imports the production pipeline: it is the
independent side of the differential tests.
"""

from __future__ import annotations

import functools
import json
import random
import subprocess
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

PACKAGE = "fx"
METRICS = ("ChgFreq", "ChgExt")
MEASURES = ("Avg", "GMean", "HMean", "Median")
BUDGETS = ("0.25", "0.5", "0.75")
TEST_GLOB = "*Test::test*"

_TYPES = ["int", "long", "double", "boolean", "String", "char[]", "char []", "String..."]
_PARAM_NAMES = ["a", "b", "n", "buf", "buffer", "off", "len", "value", "key", "count"]
_BYTECODE = {
    "int": "int",
    "long": "long",
    "double": "double",
    "boolean": "boolean",
    "String": "java.lang.String",
    "char[]": "char[]",
    "char []": "char[]",
    "String...": "java.lang.String[]",
}
_CANONICAL = {
    "int": "int",
    "long": "long",
    "double": "double",
    "boolean": "boolean",
    "String": "String",
    "char[]": "char []",
    "char []": "char []",
    "String...": "String []",
}
_LIBRARY = [
    "java.lang.String:length()",
    "java.lang.Math:max(int,int)",
    "org.junit.Assert:assertEquals(java.lang.Object,java.lang.Object)",
    "java.util.List:add(java.lang.Object)",
]
_LIBRARY_CANONICAL = [
    "String::length()",
    "Math::max(int, int)",
    "Assert::assertEquals(Object, Object)",
    "List::add(Object)",
]


@dataclass
class _Method:
    uid: int
    container: str  # "C0" or "C0::Inner0"
    name: str
    params: list[tuple[str, str]]
    body: list[str]
    is_test: bool = False

    @property
    def indent(self) -> str:
        return "    " * (self.container.count("::") + 1)

    def param_text(self) -> str:
        return ", ".join(f"{t} {n}" for t, n in self.params)

    def header(self) -> str:
        ret = "" if self.is_constructor else ("void " if self.is_test else "int ")
        return f"{self.indent}public {ret}{self.name}({self.param_text()}) {{"

    def closing(self) -> str:
        return f"{self.indent}}} // end {self.uid}"

    def lines(self) -> list[str]:
        return [self.header(), *self.body, self.closing()]

    @property
    def is_constructor(self) -> bool:
        return self.name == self.container.split("::")[-1]

    def raw_signature(self) -> str:
        return f"{self.container}::{self.name}({self.param_text()})"

    def canonical(self) -> str:
        return f"{self.container}::{self.name}({', '.join(_CANONICAL[t] for t, _ in self.params)})"

    def bytecode(self) -> str:
        owner = PACKAGE + "." + self.container.replace("::", "$")
        name = "<init>" if self.is_constructor else self.name
        return f"{owner}:{name}({','.join(_BYTECODE[t] for t, _ in self.params)})"


@dataclass
class _File:
    path: str
    cls: str
    inner: str | None
    methods: list[_Method] = field(default_factory=list)

    def render(self) -> str:
        out = [f"package {PACKAGE};", f"public class {self.cls} {{"]
        for m in self.methods:
            if m.container == self.cls:
                out += m.lines()
        if self.inner:
            out.append(f"    static class {self.inner} {{")
            for m in self.methods:
                if m.container != self.cls:
                    out += m.lines()
            out.append(f"    }} // end {self.inner}")
        out.append(f"}} // end {self.cls}")
        return "\n".join(out) + "\n"


@dataclass
class FixtureScript:
    seed: int
    history_length: int
    commits: list[dict]
    graph_text: str
    tests: list[str]
    fault_plants: dict[str, list[str]]
    expected: dict
    files: dict[str, list[str]] = field(default_factory=dict)  # commit index -> rendered tree, for replay

    def to_json(self) -> str:
        data = asdict(self)
        data.pop("files")
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "FixtureScript":
        return cls(**json.loads(text))


class _Generator:
    def __init__(self, seed: int, n_commits: int, max_methods: int, max_edges: int, n_files: int):
        self.rng = random.Random(seed)
        self.seed = seed
        self.n_commits = n_commits
        self.max_methods = max_methods
        self.max_edges = max_edges
        self.n_files = n_files
        self.uid = 0
        self.created = 0
        self.files: list[_File] = []
        self.planted: dict[str, dict[int, list[int]]] = {}  # raw sig -> commit -> [ins, del, mod]
        self.canonical_of: dict[str, str] = {}
        self.snapshots: list[dict[str, str]] = []
        self.log: list[dict] = []

    def next_uid(self) -> int:
        self.uid += 1
        return self.uid

    def body_line(self) -> str:
        u = self.next_uid()
        style = u % 4
        if style == 0:
            return f'        String s{u} = "}}{{ {u}";'
        if style == 1:
            return f"        char c{u} = '{{'; // {{ {u}"
        if style == 2:
            return f"        /* {{ */ int v{u} = {u};"
        return f"        int v{u} = {u} + 1;"

    def plant(self, commit: int, sig: str, ins: int = 0, dels: int = 0, mods: int = 0) -> None:
        acc = self.planted.setdefault(sig, {}).setdefault(commit, [0, 0, 0])
        acc[0] += ins
        acc[1] += dels
        acc[2] += mods

    def _register(self, m: _Method) -> None:
        self.canonical_of[m.raw_signature()] = m.canonical()

    def new_method(self, f: _File, is_test: bool) -> _Method | None:
        if self.created >= self.max_methods:
            return None
        rng = self.rng
        container = f.cls
        if f.inner and not is_test and rng.random() < 0.3:
            container = f"{f.cls}::{f.inner}"
        uid = self.next_uid()
        if is_test and rng.random() < 0.7:
            name, params = f"test{uid}", []
        else:
            if not is_test and container == f.cls and not any(m.is_constructor for m in f.methods) and rng.random() < 0.25:
                name = f.cls
            else:
                name = f"helper{uid}" if is_test else f"m{uid}"
            params = [
                (rng.choice(_TYPES[:-1]), n)
                for n in rng.sample(_PARAM_NAMES, rng.randint(0, 3))
            ]
            if params and rng.random() < 0.15:
                params[-1] = ("String...", params[-1][1])
        body = [self.body_line() for _ in range(rng.randint(0, 4))]
        m = _Method(uid, container, name, params, body, is_test)
        self.created += 1
        self._register(m)
        return m

    def add_method(self, commit: int, f: _File, is_test: bool) -> bool:
        m = self.new_method(f, is_test)
        if m is None:
            return False
        f.methods.append(m)
        self.plant(commit, m.raw_signature(), ins=len(m.lines()))
        self.log.append({"commit": commit, "file": f.path, "kind": "add_method", "method": m.raw_signature(), "added": len(m.lines()), "removed": 0})
        return True

    def edit_body(self, commit: int, f: _File, m: _Method) -> None:
        rng = self.rng
        pos = rng.randint(0, len(m.body))
        removed = rng.randint(0, min(3, len(m.body) - pos))
        added = rng.randint(0 if removed else 1, 4)
        m.body[pos : pos + removed] = [self.body_line() for _ in range(added)]
        mods = min(added, removed)
        self.plant(commit, m.raw_signature(), ins=added - mods, dels=removed - mods, mods=mods)
        self.log.append({"commit": commit, "file": f.path, "kind": "edit_body", "method": m.raw_signature(), "added": added, "removed": removed})

    def rename_param(self, commit: int, f: _File, m: _Method) -> bool:
        if not m.params:
            return False
        i = self.rng.randrange(len(m.params))
        used = {n for _, n in m.params}
        choices = [n for n in _PARAM_NAMES if n not in used]
        if not choices:
            return False
        old = m.raw_signature()
        t, _ = m.params[i]
        m.params[i] = (t, self.rng.choice(choices))
        self._register(m)
        self.plant(commit, old, dels=1)
        self.plant(commit, m.raw_signature(), ins=1)
        self.log.append({"commit": commit, "file": f.path, "kind": "rename_param", "method": old, "renamed_to": m.raw_signature(), "added": 1, "removed": 1})
        return True

    def delete_method(self, commit: int, f: _File, m: _Method) -> None:
        f.methods.remove(m)
        self.plant(commit, m.raw_signature(), dels=len(m.lines()))
        self.log.append({"commit": commit, "file": f.path, "kind": "delete_method", "method": m.raw_signature(), "added": 0, "removed": len(m.lines())})

    def snapshot(self, readme: str) -> None:
        tree = {f.path: f.render() for f in self.files}
        tree["README.md"] = readme
        self.snapshots.append(tree)

    def run(self) -> None:
        rng = self.rng
        if self.n_commits == 0:
            self.snapshot("fixture\n")
            return
        for k in range(self.n_files):
            cls = f"C{k}"
            inner = f"Inner{k}" if rng.random() < 0.5 else None
            self.files.append(_File(f"src/{PACKAGE}/{cls}.java", cls, inner))
            self.files.append(_File(f"test/{PACKAGE}/{cls}Test.java", f"{cls}Test", None))
        for f in self.files:
            for _ in range(rng.randint(1, 3)):
                self.add_method(0, f, f.cls.endswith("Test"))
        self.snapshot("fixture\n")
        for c in range(1, self.n_commits):
            if rng.random() < 0.1:
                self.snapshot(f"fixture\nrevision {c}\n")
                self.log.append({"commit": c, "kind": "readme"})
                continue
            touched: set[int] = set()
            for _ in range(rng.randint(1, 3)):
                f = rng.choice(self.files)
                live = [m for m in f.methods if m.uid not in touched]
                roll = rng.random()
                is_test = f.cls.endswith("Test")
                if roll < 0.2 or not live:
                    self.add_method(c, f, is_test)
                    if f.methods:
                        touched.add(f.methods[-1].uid)
                    continue
                m = rng.choice(live)
                touched.add(m.uid)
                if roll < 0.32:
                    if self.rename_param(c, f, m):
                        continue
                if roll > 0.95 and len(f.methods) > 1 and not m.is_constructor:
                    self.delete_method(c, f, m)
                    continue
                self.edit_body(c, f, m)
            self.snapshot(f"fixture\nrevision {c}\n")

    def all_methods(self) -> list[_Method]:
        return [m for f in self.files for m in f.methods]


# -- oracles ---------------------------------------------------------------


def _gmean_cmp(a: tuple[Fraction, int], b: tuple[Fraction, int]) -> int:
    # a = (product, n) stands for product ** (1/n)
    lhs = a[0] ** b[1]
    rhs = b[0] ** a[1]
    return (lhs > rhs) - (lhs < rhs)


def _exact_score(values: list[Fraction], measure: str):
    n = len(values)
    if measure == "Avg":
        return sum(values, Fraction(0)) / n
    if measure == "Median":
        s = sorted(values)
        return s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2
    if any(v == 0 for v in values):
        return (Fraction(0), 1) if measure == "GMean" else Fraction(0)
    if measure == "HMean":
        return n / sum((1 / v for v in values), Fraction(0))
    prod = Fraction(1)
    for v in values:
        prod *= v
    return (prod, n)


def _as_float(score) -> float:
    if isinstance(score, tuple):
        prod, n = score
        return float(prod) ** (1.0 / n) if prod else 0.0
    return float(score)


def _closure(edges: list[tuple[str, str]], root: str) -> set[str]:
    reach = {root}
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            if a in reach and b not in reach:
                reach.add(b)
                changed = True
    return reach


def _rank(tests: list[str], scores: dict[str, object], measure: str) -> list[str]:
    def cmp(x: str, y: str) -> int:
        sx, sy = scores[x], scores[y]
        c = _gmean_cmp(sx, sy) if measure == "GMean" else (sx > sy) - (sx < sy)
        if c:
            return -c
        return (x > y) - (x < y)

    return sorted(tests, key=functools.cmp_to_key(cmp))


def oracle_rank(script: FixtureScript, metric: str, measure: str) -> list[str]:
    """Recompute a ranking from the script's planted ledger by enumeration."""
    return _oracle_tables(script.expected["ledger"], script.expected["dependencies"], metric, measure)[0]


def _oracle_tables(ledger: dict, deps: dict, metric: str, measure: str):
    cp: dict[str, Fraction] = {}
    for mid, (cc, total, ins, dels, mods) in ledger.items():
        cp[mid] = Fraction(cc, total) if metric == "ChgFreq" else Fraction(ins + dels + mods, total)
    scores = {t: _exact_score([cp.get(m, Fraction(0)) for m in ds], measure) for t, ds in deps.items()}
    return _rank(sorted(deps), scores, measure), scores, cp


def _budget_count(budget: str, n: int) -> int:
    b = Fraction(budget)
    return -(-b.numerator * n // b.denominator)


def _expected(gen: _Generator, graph_edges: list[tuple[str, str]], tests: list[str], plants: dict[str, list[str]]) -> dict:
    history_length = len(gen.snapshots)
    raw: dict[str, list[int]] = {}
    for sig, per_commit in gen.planted.items():
        nonzero = {c: v for c, v in per_commit.items() if any(v)}
        if not nonzero:
            continue
        first = min(nonzero)
        raw[sig] = [
            len(nonzero),
            history_length - first,
            sum(v[0] for v in nonzero.values()),
            sum(v[1] for v in nonzero.values()),
            sum(v[2] for v in nonzero.values()),
        ]
    ledger: dict[str, list[int]] = {}
    for sig in sorted(raw):
        key = gen.canonical_of[sig]
        row = raw[sig]
        if key in ledger:
            old = ledger[key]
            ledger[key] = [old[0] + row[0], max(old[1], row[1]), old[2] + row[2], old[3] + row[3], old[4] + row[4]]
        else:
            ledger[key] = list(row)

    deps: dict[str, list[str]] = {}
    for t in tests:
        reach = _closure(graph_edges, t)
        deps[t] = [t] + sorted(reach - {t})

    cp_tables: dict[str, dict[str, float]] = {}
    rankings: dict[str, list[str]] = {}
    scores: dict[str, dict[str, float]] = {}
    selections: dict[str, list[str]] = {}
    accuracy: dict[str, dict[str, float]] = {}
    fdr: dict[str, float] = {}
    for metric in METRICS:
        for measure in MEASURES:
            ranking, exact, cp = _oracle_tables(ledger, deps, metric, measure)
            cp_tables[metric] = {k: float(v) for k, v in sorted(cp.items())}
            cfg = f"{metric}/{measure}"
            rankings[cfg] = ranking
            scores[cfg] = {t: _as_float(exact[t]) for t in ranking}
            for budget in BUDGETS:
                chosen = ranking[: _budget_count(budget, len(ranking))]
                key = f"{cfg}/{budget}"
                selections[key] = chosen
                if plants:
                    picked = set(chosen)
                    acc = {v: len(set(f) & picked) / len(f) for v, f in sorted(plants.items())}
                    accuracy[key] = acc
                    fdr[key] = sum(1 for v, f in plants.items() if set(f) & picked) / len(plants)
    return {
        "raw_ledger": raw,
        "ledger": ledger,
        "cp": cp_tables,
        "dependencies": deps,
        "rankings": rankings,
        "scores": scores,
        "selections": selections,
        "accuracy": accuracy,
        "fdr": fdr,
    }


def _graph(gen: _Generator) -> tuple[str, list[tuple[str, str]], list[str]]:
    rng = gen.rng
    methods = gen.all_methods()
    tests = [m for m in methods if m.is_test and m.name.startswith("test")]
    others = [m for m in methods if not (m.is_test and m.name.startswith("test"))]
    lines: list[str] = []
    canon: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    lib = list(zip(_LIBRARY, _LIBRARY_CANONICAL))

    def edge(src: _Method, dst_byte: str, dst_canon: str) -> None:
        key = (src.canonical(), dst_canon)
        kind = rng.choice("MMMIOSD")
        lines.append(f"M:{src.bytecode()} ({kind}){dst_byte}")
        if key not in seen:
            seen.add(key)
            canon.append(key)

    targets = [(m.bytecode(), m.canonical()) for m in others] + lib
    for t in tests:
        if len(canon) >= gen.max_edges:
            break
        for dst in rng.sample(targets, min(len(targets), rng.randint(1, 4))):
            edge(t, *dst)
    budget = gen.max_edges - len(canon)
    for _ in range(max(0, min(budget, 2 * len(others)))):
        if not others:
            break
        src = rng.choice(others)
        dst = rng.choice(targets + [(t.bytecode(), t.canonical()) for t in tests[:1]])
        edge(src, *dst)
    # class-level records and a duplicate edge line are part of the format
    classes = sorted({f"{PACKAGE}.{m.container.split('::')[0]}" for m in methods})
    header = [f"C:{a} {b}" for a, b in zip(classes, classes[1:])]
    if lines:
        lines.append(lines[0])
    text = "\n".join(header + lines) + ("\n" if header or lines else "")
    return text, canon, sorted(t.canonical() for t in tests)


def generate(
    seed: int,
    path: str | Path | None = None,
    *,
    n_commits: int | None = None,
    max_methods: int = 40,
    max_edges: int = 200,
    n_files: int | None = None,
    n_versions: int = 5,
) -> FixtureScript:
    """Build a fixture script and, when ``path`` is given, materialize its repository."""
    rng = random.Random(seed * 7919 + 17)
    if n_commits is None:
        n_commits = rng.randint(3, 12)
    if n_files is None:
        n_files = rng.randint(1, 3)
    if not (0 <= n_commits <= 50 and max_methods <= 40 and max_edges <= 200):
        raise ValueError("fixture sizes exceed the supported bounds")
    gen = _Generator(seed, n_commits, max_methods, max_edges, n_files)
    gen.run()
    graph_text, edges, tests = _graph(gen)
    # every test must be a graph node; a test without edges gets a self-loop record
    node_set = {a for a, _ in edges} | {b for _, b in edges}
    for m in gen.all_methods():
        if m.canonical() in tests and m.canonical() not in node_set:
            graph_text += f"M:{m.bytecode()} (M){m.bytecode()}\n"
            edges.append((m.canonical(), m.canonical()))
    plants: dict[str, list[str]] = {}
    if tests:
        for v in range(1, n_versions + 1):
            plants[f"v{v}"] = sorted(gen.rng.sample(tests, gen.rng.randint(1, min(3, len(tests)))))
    script = FixtureScript(
        seed=seed,
        history_length=len(gen.snapshots),
        commits=gen.log,
        graph_text=graph_text,
        tests=tests,
        fault_plants=plants,
        expected=_expected(gen, edges, tests, plants),
        files={str(i): sorted(s.items()) for i, s in enumerate(gen.snapshots)},
    )
    if path is not None:
        materialize(script, path)
    return script


def materialize(script: FixtureScript, path: str | Path) -> Path:
    """Write the script's snapshots as a git repository via ``git fast-import``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    subprocess.run(["git", "init", "-q", "-b", "main", str(path)], check=True)
    chunks: list[bytes] = []
    prev: dict[str, str] = {}
    for i in range(len(script.files)):
        tree = dict(script.files[str(i)])
        ts = 1_600_000_000 + 3600 * i
        msg = f"commit {i}\n".encode()
        chunks.append(b"commit refs/heads/main\n")
        chunks.append(f"mark :{i + 1}\n".encode())
        chunks.append(f"author Fixture <fixture@example.invalid> {ts} +0000\n".encode())
        chunks.append(f"committer Fixture <fixture@example.invalid> {ts} +0000\n".encode())
        chunks.append(f"data {len(msg)}\n".encode() + msg)
        if i:
            chunks.append(f"from :{i}\n".encode())
        for p in sorted(prev.keys() - tree.keys()):
            chunks.append(f"D {p}\n".encode())
        for p, content in sorted(tree.items()):
            if prev.get(p) == content:
                continue
            data = content.encode()
            chunks.append(f"M 100644 inline {p}\n".encode())
            chunks.append(f"data {len(data)}\n".encode() + data + b"\n")
        prev = tree
    subprocess.run(
        ["git", "-C", str(path), "fast-import", "--quiet"],
        input=b"".join(chunks),
        check=True,
    )
    subprocess.run(["git", "-C", str(path), "reset", "-q", "--hard", "main"], check=True)
    (path / ".git" / "fixture.json").write_text(script.to_json(), encoding="utf-8")
    return path


def write_fixture_inputs(script: FixtureScript, directory: str | Path) -> dict[str, Path]:
    """Write the call graph and ground truth next to a materialized fixture."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    graph = d / "callgraph.txt"
    graph.write_text(script.graph_text, encoding="utf-8")
    truth = d / "ground_truth.tsv"
    truth.write_text(
        "".join(f"{v}\t{t}\n" for v, tests in sorted(script.fault_plants.items()) for t in tests),
        encoding="utf-8",
    )
    return {"callgraph": graph, "ground_truth": truth}
