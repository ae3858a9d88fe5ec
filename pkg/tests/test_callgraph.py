import itertools
import random

import pytest
from hypothesis import given, strategies as st

from cpmin.callgraph import (
    CallGraph,
    UnknownNodeError,
    dependencies,
    format_edge_list,
    identify_test_roots,
    normalize_graph,
    parse_edge_list,
    parse_java_callgraph,
)
from cpmin.errors import CallGraphParseError
from cpmin.signature import MethodId, parse_method_ref


def mid(text: str) -> MethodId:
    return parse_method_ref(text)


class TestJavaFormat:
    def test_single_record(self):
        g = parse_java_callgraph("M:A:f(int) (M)B:g()")
        assert g.edges == {(mid("A::f(int)"), mid("B::g()"))}

    def test_empty_input(self):
        g = parse_java_callgraph("")
        assert not g.nodes and not g.edges

    def test_class_records_ignored(self):
        assert not parse_java_callgraph("C:A B\n").edges

    def test_packages_stripped_and_constructor_renamed(self):
        g = parse_java_callgraph("M:org.x.FooTest:testA() (O)org.x.Foo$Bar:<init>(java.lang.String,org.x.Foo$Baz[])")
        ((caller, callee),) = g.edges
        assert caller.render() == "FooTest::testA()"
        assert callee.render() == "Foo::Bar::Bar(String, Foo.Baz [])"

    def test_packages_kept_on_request(self):
        g = parse_java_callgraph("M:org.x.A:f() (M)java.lang.String:length()", strip_packages=False)
        assert {n.container for n in g.nodes} == {"org.x.A", "java.lang.String"}

    def test_kind_filter(self):
        text = "M:A:f() (M)B:g()\nM:A:f() (I)C:h()\n"
        assert len(parse_java_callgraph(text, kinds="M").edges) == 1
        assert len(parse_java_callgraph(text).edges) == 2

    @pytest.mark.parametrize("line", ["M:A:f()", "M:A:f() (Q)B:g()", "M:Af() (M)B:g()"])
    def test_malformed_record_reports_line(self, line):
        with pytest.raises(CallGraphParseError) as err:
            parse_java_callgraph("C:A B\n" + line)
        assert err.value.line_no == 2


class TestEdgeList:
    def test_one_edge(self):
        assert len(parse_edge_list("A::f()\tB::g()").edges) == 1

    def test_comments_only(self):
        g = parse_edge_list("# nothing\n\n# here\n")
        assert not g.nodes

    def test_duplicates_collapse(self):
        assert len(parse_edge_list("A::f()\tB::g()\nA::f()\tB::g()\n").edges) == 1

    def test_single_column_declares_node(self):
        g = parse_edge_list("T::testX()\n")
        assert g.nodes == {mid("T::testX()")} and not g.edges

    def test_round_trip(self):
        g = parse_edge_list("A::f()\tB::g(int)\nB::g(int)\tB::g(int)\nLone::x()\n")
        assert parse_edge_list(format_edge_list(g)) == g


class TestNormalize:
    def test_constructor_rule(self):
        g = normalize_graph(CallGraph.from_edges([], [MethodId("Foo", "<init>", ())]))
        assert {n.render() for n in g.nodes} == {"Foo::Foo()"}

    def test_dollar_rule(self):
        g = normalize_graph(CallGraph.from_edges([], [MethodId("Outer$Inner", "g", ())]))
        assert {n.render() for n in g.nodes} == {"Outer::Inner::g()"}

    def test_idempotent(self):
        g = parse_java_callgraph("M:A$B:<init>() (M)C:f()\n")
        assert normalize_graph(g) == g


LOCALE_EXAMPLE = """\
LangUtilsTest::testLang865()\tLocaleUtilsTest::assertValidToLocale()
LangUtilsTest::testLang865()\tLocaleUtils::toLocale()
LocaleUtilsTest::assertValidToLocale()\tLocale::getVariant()
LocaleUtilsTest::assertValidToLocale()\tLocale::isEmpty()
LocaleUtilsTest::assertValidToLocale()\tLocale::getLanguage()
"""


class TestDependencies:
    def test_worked_example(self):
        g = parse_edge_list(LOCALE_EXAMPLE)
        deps = dependencies(g, mid("LangUtilsTest::testLang865()"))
        assert deps.methods[0] == mid("LangUtilsTest::testLang865()")
        assert {m.render() for m in deps.methods} == {
            "LangUtilsTest::testLang865()",
            "LocaleUtilsTest::assertValidToLocale()",
            "LocaleUtils::toLocale()",
            "Locale::getVariant()",
            "Locale::isEmpty()",
            "Locale::getLanguage()",
        }

    def test_lexicographic_first_visit_order(self):
        g = parse_edge_list(LOCALE_EXAMPLE)
        deps = dependencies(g, mid("LangUtilsTest::testLang865()"))
        assert [m.render() for m in deps.methods] == [
            "LangUtilsTest::testLang865()",
            "LocaleUtils::toLocale()",
            "LocaleUtilsTest::assertValidToLocale()",
            "Locale::getLanguage()",
            "Locale::getVariant()",
            "Locale::isEmpty()",
        ]

    def test_isolated_node(self):
        g = parse_edge_list("T::t()\n")
        assert dependencies(g, mid("T::t()")).methods == (mid("T::t()"),)

    def test_two_cycle_terminates(self):
        g = parse_edge_list("T::t()\tA::a()\nA::a()\tT::t()\n")
        assert [m.render() for m in dependencies(g, mid("T::t()"))] == ["T::t()", "A::a()"]

    def test_unknown_test(self):
        with pytest.raises(UnknownNodeError):
            dependencies(CallGraph(), mid("T::t()"))


class TestRoots:
    def test_glob(self):
        g = parse_edge_list(LOCALE_EXAMPLE)
        assert [r.render() for r in identify_test_roots(g, glob="*Test::test*").roots] == ["LangUtilsTest::testLang865()"]

    def test_roots_file_with_missing_id(self):
        g = parse_edge_list(LOCALE_EXAMPLE)
        sel = identify_test_roots(g, roots=["LangUtilsTest::testLang865()", "Nope::testX()", "# c"])
        assert [r.render() for r in sel.roots] == ["LangUtilsTest::testLang865()"]
        assert sel.missing == ["Nope::testX()"]

    def test_glob_matching_nothing(self):
        assert identify_test_roots(parse_edge_list(LOCALE_EXAMPLE), glob="Nothing*").roots == []


def closure(n: int, edges: set[tuple[int, int]], root: int) -> set[int]:
    reach = {root}
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            if a in reach and b not in reach:
                reach.add(b)
                changed = True
    return reach


def as_graph(n: int, edges) -> tuple[CallGraph, list[MethodId]]:
    nodes = [MethodId(f"N{i}", "m", ()) for i in range(n)]
    return CallGraph.from_edges(((nodes[a], nodes[b]) for a, b in edges), nodes), nodes


def test_exhaustive_small_graphs():
    for n in range(1, 4):
        pairs = list(itertools.product(range(n), repeat=2))
        for mask in range(1 << len(pairs)):
            edges = {p for k, p in enumerate(pairs) if mask >> k & 1}
            g, nodes = as_graph(n, edges)
            for r in range(n):
                got = {int(m.container[1:]) for m in dependencies(g, nodes[r])}
                assert got == closure(n, edges, r)


@given(st.integers(1, 12).flatmap(lambda n: st.tuples(st.just(n), st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))))))
def test_dependencies_equal_closure(case):
    n, edges = case
    g, nodes = as_graph(n, edges)
    for r in range(n):
        deps = dependencies(g, nodes[r])
        assert deps.methods[0] == nodes[r]
        assert len(set(deps.methods)) == len(deps.methods)
        assert {int(m.container[1:]) for m in deps} == closure(n, edges, r)


def test_traversal_deterministic():
    rng = random.Random(5)
    edges = {(rng.randrange(12), rng.randrange(12)) for _ in range(40)}
    g1, nodes = as_graph(12, edges)
    g2, _ = as_graph(12, list(reversed(sorted(edges))))
    assert dependencies(g1, nodes[0]) == dependencies(g2, nodes[0])
