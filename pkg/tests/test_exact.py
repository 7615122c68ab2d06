from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from oracles import potts_moments, twospin_moments
from spinobs import exact as ex
from spinobs.graph import Multigraph, Subgraph, complete_bipartite, cycle_graph, path_graph
from spinobs.models import PinSet, Potts, TwoSpin, VertexEdgeObservable

K2 = path_graph(1)


def test_single_edge_values():
    potts = Potts(3, 2)
    assert ex.partition_function(K2, potts) == 12
    assert ex.susceptibility(K2, potts) == Fraction(1, 2)
    assert ex.gibbs_probability(K2, potts, PinSet(equal=((0, 1),))) == Fraction(1, 2)
    hc = TwoSpin.hardcore(1)
    assert ex.partition_function(K2, hc) == 3
    assert ex.magnetization(K2, hc) == Fraction(2, 3)


def test_pinned_zero_weight():
    with pytest.raises(ex.ZeroWeightError):
        ex.magnetization(K2, TwoSpin.hardcore(1), pins=PinSet({0: 1, 1: 1}))


def test_budget_guard():
    with ex.budget(potts_max_configs=10):
        with pytest.raises(ex.BudgetExceeded):
            ex.partition_function(complete_bipartite(3, 3), Potts(3, 2), method="enumerate")


small_graphs = st.integers(1, 6).flatmap(
    lambda n: st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] != e[1]), max_size=8).map(
        lambda es: Multigraph(n, tuple(es))
    )
)
ratios = st.fractions(min_value=Fraction(1, 5), max_value=4, max_denominator=7)


@settings(max_examples=60, deadline=None)
@given(small_graphs, st.integers(2, 4), ratios, st.sampled_from(["enumerate", "eliminate"]))
def test_potts_matches_brute_force(g, q, beta, method):
    Z, S = potts_moments(g, q, beta)
    m = Potts(q, beta)
    assert ex.partition_function(g, m, method=method) == Z
    assert ex.susceptibility(g, m, method=method) == S


@settings(max_examples=60, deadline=None)
@given(small_graphs, ratios, st.fractions(min_value=0, max_value=2, max_denominator=5), ratios,
       st.tuples(*(st.integers(-2, 2),) * 3), st.sampled_from(["enumerate", "eliminate"]))
def test_twospin_matches_brute_force(g, beta, gamma, lam, coeffs, method):
    Z, E = twospin_moments(g, beta, gamma, lam, coeffs)
    m = TwoSpin(beta, gamma, lam)
    assert ex.partition_function(g, m, method=method) == Z
    assert ex.observable_expectation(g, m, VertexEdgeObservable(*coeffs), method=method) == E


@settings(max_examples=30, deadline=None)
@given(small_graphs, ratios)
def test_restricted_susceptibility(g, beta):
    F = list(range(0, g.m, 2))
    _, S = potts_moments(g, 3, beta, F=F)
    assert ex.susceptibility(g, Potts(3, beta), F=Subgraph.from_edges(g, F)) == S


def test_edge_activities_and_pins_against_oracle():
    g = cycle_graph(5).with_edge_activity({0: Fraction(1, 3), 2: 5})
    Z, S = potts_moments(g, 3, 2, pins={0: 1})
    assert ex.partition_function(g, Potts(3, 2), PinSet({0: 1})) == Z
    assert ex.observable_expectation(g, Potts(3, 2), pins=PinSet({0: 1})) == S
    h = cycle_graph(5).with_vertex_activity({1: 3, 4: Fraction(1, 2)})
    Z2, M2 = twospin_moments(h, Fraction(1, 2), Fraction(1, 3), 2, pins={2: 0})
    assert ex.observable_expectation(h, TwoSpin(Fraction(1, 2), Fraction(1, 3), 2), VertexEdgeObservable(1), pins=PinSet({2: 0})) == M2


def test_partition_polynomial_counts():
    c = ex.potts_mono_counts(K2, 3)
    assert c == (6, 3)
    t = ex.twospin_counts(K2)
    assert t == {(0, 1, 0): 1, (1, 0, 0): 2, (2, 0, 1): 1}
