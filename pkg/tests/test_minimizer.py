import math

import pytest
from hypothesis import given, settings, strategies as st

from cpmin.callgraph import DependencySet
from cpmin.errors import DomainError
from cpmin.minimizer import Measure, aggregate_score, budget_size, format_ranking, score_tests, select
from cpmin.proneness import CpTable, Metric
from cpmin.signature import MethodId


def t(name: str) -> MethodId:
    return MethodId("KTest", name, ())


def m(name: str) -> MethodId:
    return MethodId("K", name, ())


class TestAggregateScore:
    def test_examples(self):
        assert aggregate_score([0.25, 1.0], "GMean") == 0.5
        assert math.isclose(aggregate_score([0.2, 0.4], "Avg"), 0.3)
        assert aggregate_score([0, 0.9], "HMean") == 0
        assert aggregate_score([0, 0.9], "GMean") == 0
        assert aggregate_score([1, 3, 5, 7], "Median") == 4
        assert aggregate_score([1, 3, 5], "Median") == 3

    def test_harmonic_mean(self):
        assert math.isclose(aggregate_score([1.0, 2.0, 4.0], Measure.HMEAN), 3 / (1 + 0.5 + 0.25))

    def test_empty_is_domain_error(self):
        with pytest.raises(DomainError):
            aggregate_score([], "Avg")

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            aggregate_score([-1.0], "Avg")

    def test_gmean_does_not_underflow(self):
        assert aggregate_score([1e-300] * 50, "GMean") == pytest.approx(1e-300, rel=1e-9)

    def test_unknown_measure(self):
        with pytest.raises(ValueError):
            Measure.parse("Max")


_pos = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False)
_nonneg = st.one_of(st.just(0.0), _pos)


@given(_nonneg, st.sampled_from(list(Measure)))
def test_single_value_is_identity(v, measure):
    assert aggregate_score([v], measure) == v


@given(st.lists(st.tuples(_nonneg, _nonneg), min_size=1, max_size=8), st.sampled_from(list(Measure)))
def test_dominance(pairs, measure):
    hi = [max(a, b) for a, b in pairs]
    lo = [min(a, b) for a, b in pairs]
    assert aggregate_score(hi, measure) >= aggregate_score(lo, measure) * (1 - 1e-12)


@given(st.lists(_nonneg, min_size=1, max_size=8), st.sampled_from(list(Measure)))
def test_means_bounded_by_extremes(values, measure):
    s = aggregate_score(values, measure)
    assert min(values) * (1 - 1e-12) <= s <= max(values) * (1 + 1e-12)


class TestScoreAndSelect:
    def cp(self, **values) -> CpTable:
        return CpTable(Metric.CHG_FREQ, {m(k): v for k, v in values.items()})

    def test_avg_example(self):
        deps = [DependencySet(t("testA"), (t("testA"), m("m1"), m("m2")))]
        cp = CpTable(Metric.CHG_FREQ, {t("testA"): 0.0, m("m1"): 0.5, m("m2"): 0.1})
        (s,) = score_tests(cp, deps, "Avg")
        assert math.isclose(s.score, 0.2)
        (s,) = score_tests(CpTable(Metric.CHG_FREQ, {m("m1"): 0.5, m("m2"): 0.1}), [DependencySet(m("m1"), (m("m1"), m("m2")))], "Avg")
        assert math.isclose(s.score, 0.3)

    def test_unknown_dependencies_score_zero(self):
        deps = [DependencySet(t("testA"), (t("testA"), m("zz")))]
        for measure in Measure:
            assert score_tests(self.cp(), deps, measure)[0].score == 0

    def test_ties_broken_by_test_id(self):
        deps = [DependencySet(t(n), (t(n), m("x"))) for n in ("testC", "testA", "testB")]
        ranked = score_tests(self.cp(x=0.5), deps, "Median")
        assert [s.test.name for s in ranked] == ["testA", "testB", "testC"]

    def test_ranking_by_score(self):
        deps = [
            DependencySet(t("testLow"), (t("testLow"), m("a"))),
            DependencySet(t("testHigh"), (t("testHigh"), m("b"))),
        ]
        ranked = score_tests(self.cp(a=0.1, b=0.9), deps, "GMean")
        assert [s.test.name for s in ranked] == ["testHigh", "testLow"]

    @pytest.mark.parametrize("n,budget,k", [(10, 0.5, 5), (7, 0.5, 4), (3, 1.0, 3), (10, 0.75, 8), (4, 0.25, 1)])
    def test_budget_sizes(self, n, budget, k):
        assert budget_size(budget, n) == k

    @pytest.mark.parametrize("budget", [0, -0.1, 1.5])
    def test_budget_out_of_range(self, budget):
        with pytest.raises(DomainError):
            budget_size(budget, 10)

    def test_full_budget_keeps_rank_order(self):
        deps = [DependencySet(t(f"test{i}"), (t(f"test{i}"), m(f"m{i}"))) for i in range(4)]
        ranked = score_tests(self.cp(m0=0.1, m1=0.4, m2=0.3, m3=0.2), deps, "Avg")
        suite = select(ranked, 1.0)
        assert [x.name for x in suite.selected] == ["test1", "test2", "test3", "test0"]

    def test_ranking_csv(self):
        deps = [DependencySet(t("testA"), (t("testA"), m("a")))]
        text = format_ranking(score_tests(self.cp(a=1 / 3), deps, "Avg"))
        assert text.splitlines() == [
            "rank,test_id,score,dependency_count,measure,metric",
            "1,KTest::testA(),0.166666666667,2,Avg,ChgFreq",
        ]


@settings(max_examples=300)
@given(st.integers(1, 1000), st.sampled_from([0.25, 0.5, 0.75]))
def test_select_size_property(n, budget):
    k = budget_size(budget, n)
    assert k == -(-int(budget * 100) * n // 100)
    assert k - 1 < budget * n <= k


@settings(max_examples=100)
@given(
    st.lists(st.lists(_nonneg, min_size=1, max_size=5), min_size=1, max_size=12),
    st.sampled_from(list(Measure)),
    st.integers(-20, 20),
    st.sampled_from([0.25, 0.5, 0.75]),
)
def test_power_of_two_scaling_preserves_selection(dep_values, measure, exp, budget):
    values, deps = {}, []
    for i, vals in enumerate(dep_values):
        ids = [m(f"d{i}_{j}") for j in range(len(vals))]
        values.update(zip(ids, vals))
        deps.append(DependencySet(t(f"test{i}"), (t(f"test{i}"), *ids)))
    cp = CpTable(Metric.CHG_EXT, values)
    a = select(score_tests(cp, deps, measure), budget).selected
    b = select(score_tests(cp.scaled(2.0**exp), deps, measure), budget).selected
    assert a == b

