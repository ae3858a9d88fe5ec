"""Static call graphs of test code: parsing, normalization and traversal.

Two input formats are accepted:

* java-callgraph static output, one invocation per ``M:`` record::

      M:org.pkg.FooTest:testX() (M)org.pkg.Foo:<init>(int)

* a tab-separated edge list of already-rendered method ids::

      FooTest::testX()<TAB>Foo::Foo(int)
"""

from __future__ import annotations

import fnmatch
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

from .errors import CallGraphParseError, CpminError, NormalizationError
from .signature import MethodId, parse_method_ref

EDGE_KINDS = frozenset("MIOSD")

_M_RECORD = re.compile(r"^M:(?P<caller>\S+)\s+\((?P<kind>[A-Z])\)(?P<callee>\S+)\s*$")
_PACKAGE_PREFIX = re.compile(r"\b(?:[a-z_][\w]*\.)+(?=[A-Za-z_$])")


class UnknownNodeError(CpminError, LookupError):
    pass


@dataclass(frozen=True)
class CallGraph:
    nodes: frozenset[MethodId] = frozenset()
    edges: frozenset[tuple[MethodId, MethodId]] = frozenset()

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[MethodId, MethodId]], nodes: Iterable[MethodId] = ()) -> "CallGraph":
        edge_set = frozenset(edges)
        node_set = set(nodes)
        for a, b in edge_set:
            node_set.add(a)
            node_set.add(b)
        return cls(frozenset(node_set), edge_set)

    @cached_property
    def _adjacency(self) -> dict[MethodId, tuple[MethodId, ...]]:
        adj: dict[MethodId, list[MethodId]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            adj[a].append(b)
        return {n: tuple(sorted(vs, key=MethodId.render)) for n, vs in adj.items()}

    def successors(self, node: MethodId) -> tuple[MethodId, ...]:
        return self._adjacency.get(node, ())

    def __contains__(self, node: object) -> bool:
        return node in self.nodes


@dataclass(frozen=True)
class DependencySet:
    test: MethodId
    methods: tuple[MethodId, ...]

    def __post_init__(self):
        if not self.methods or self.methods[0] != self.test:
            raise ValueError("a dependency set starts with its test")

    def __len__(self) -> int:
        return len(self.methods)

    def __iter__(self):
        return iter(self.methods)


@dataclass
class RootSelection:
    roots: list[MethodId]
    missing: list[str] = field(default_factory=list)


def _strip_packages(text: str) -> str:
    return _PACKAGE_PREFIX.sub("", text)


def _java_node(text: str, strip_packages: bool) -> MethodId:
    head, sep, params = text.partition("(")
    if not sep or ":" not in head:
        raise NormalizationError(text, "expected Class:method(types)")
    container, name = head.rsplit(":", 1)
    # nested classes in parameter types use '$' in bytecode, '.' in source
    params = params.replace("$", ".")
    if strip_packages:
        container = _strip_packages(container)
        params = _strip_packages(params)
    return parse_method_ref(f"{container}::{name}({params}")


def parse_java_callgraph(
    text: str,
    *,
    kinds: Iterable[str] = EDGE_KINDS,
    strip_packages: bool = True,
    normalize: bool = True,
) -> CallGraph:
    """Parse java-callgraph static output; ``C:`` and other records are ignored."""
    keep = frozenset(kinds)
    edges = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.startswith("M:"):
            continue
        m = _M_RECORD.match(line)
        if not m:
            raise CallGraphParseError(f"malformed M: record {line!r}", line_no)
        if m.group("kind") not in EDGE_KINDS:
            raise CallGraphParseError(f"unknown invocation kind ({m.group('kind')})", line_no)
        if m.group("kind") not in keep:
            continue
        try:
            caller = _java_node(m.group("caller"), strip_packages)
            callee = _java_node(m.group("callee"), strip_packages)
        except NormalizationError as exc:
            raise CallGraphParseError(str(exc), line_no) from None
        edges.append((caller, callee))
    graph = CallGraph.from_edges(edges)
    return normalize_graph(graph) if normalize else graph


def parse_edge_list(text: str, *, strip_packages: bool = False, normalize: bool = True) -> CallGraph:
    """Parse ``caller<TAB>callee`` rows; a single-column row declares a node."""
    edges = []
    nodes = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in line.split("\t")]
        if len(fields) > 2 or not all(fields):
            raise CallGraphParseError(f"expected caller<TAB>callee, got {line!r}", line_no)
        try:
            ids = [
                parse_method_ref(_strip_packages(f) if strip_packages else f) for f in fields
            ]
        except NormalizationError as exc:
            raise CallGraphParseError(str(exc), line_no) from None
        if len(ids) == 2:
            edges.append((ids[0], ids[1]))
        else:
            nodes.append(ids[0])
    graph = CallGraph.from_edges(edges, nodes)
    return normalize_graph(graph) if normalize else graph


def normalize_node(node: MethodId) -> MethodId:
    container = node.container.replace("$", "::")
    name = node.name
    if name == "<init>":
        name = container.rsplit("::", 1)[-1]
    return MethodId(container, name, node.param_types)


def normalize_graph(graph: CallGraph) -> CallGraph:
    """Rename ``<init>`` to constructor names and ``$`` separators to ``::``."""
    mapping = {n: normalize_node(n) for n in graph.nodes}
    return CallGraph.from_edges(
        ((mapping[a], mapping[b]) for a, b in graph.edges),
        mapping.values(),
    )


def format_edge_list(graph: CallGraph) -> str:
    rows = sorted(f"{a.render()}\t{b.render()}" for a, b in graph.edges)
    touched = {n for e in graph.edges for n in e}
    rows += sorted(n.render() for n in graph.nodes - touched)
    return "".join(r + "\n" for r in rows)


def read_callgraph(
    path: str | Path,
    fmt: str = "auto",
    *,
    kinds: Iterable[str] = EDGE_KINDS,
    strip_packages: bool = True,
) -> CallGraph:
    text = Path(path).read_text(encoding="utf-8", errors="replace")
    if fmt == "auto":
        fmt = "javacg" if any(l.startswith(("M:", "C:")) for l in text.splitlines()[:50]) else "edges"
    if fmt == "javacg":
        return parse_java_callgraph(text, kinds=kinds, strip_packages=strip_packages)
    if fmt == "edges":
        return parse_edge_list(text, strip_packages=strip_packages)
    raise ValueError(f"unknown call-graph format {fmt!r}")


def dependencies(graph: CallGraph, test: MethodId) -> DependencySet:
    """Depth-first collection of everything reachable from ``test``.

    The test comes first; the rest follow in first-visit order, exploring
    callees in lexicographic order of their rendered ids.
    """
    if test not in graph.nodes:
        raise UnknownNodeError(f"test {test.render()} is not a node of the call graph")
    seen: set[MethodId] = set()
    order: list[MethodId] = []
    stack = [test]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        order.append(node)
        stack.extend(reversed([s for s in graph.successors(node) if s not in seen]))
    return DependencySet(test, tuple(order))


def identify_test_roots(
    graph: CallGraph,
    *,
    glob: str | None = None,
    roots: Iterable[str] | None = None,
) -> RootSelection:
    """Select test methods by glob over rendered ids, or from an explicit list."""
    if (glob is None) == (roots is None):
        raise ValueError("exactly one of glob or roots must be given")
    if glob is not None:
        picked = [n for n in graph.nodes if fnmatch.fnmatchcase(n.render(), glob)]
        return RootSelection(sorted(picked, key=MethodId.render))
    found: set[MethodId] = set()
    missing: list[str] = []
    for text in roots:
        text = text.strip()
        if not text or text.startswith("#"):
            continue
        mid = normalize_node(parse_method_ref(text))
        if mid in graph.nodes:
            found.add(mid)
        else:
            missing.append(text)
    return RootSelection(sorted(found, key=MethodId.render), missing)


def read_roots_file(path: str | Path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()
