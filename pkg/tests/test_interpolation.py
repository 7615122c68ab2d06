import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinobs.graph import complete_bipartite, cycle_graph, path_graph
from spinobs.graphdata import KNOWN_COUNTS, connected_graphs
from spinobs.interpolation import (exact_log_partition, grid_for_error, integrate_log_partition, make_oracle,
                                   observable_range)
from spinobs.models import Potts, TwoSpin

K2 = path_graph(1)
P3 = Potts(3, 2)


def test_single_edge_closed_form():
    # log Z(K2, beta) = log(3 (beta + 2)), so the integral from 1 to 2 is log(4/3)
    res = integrate_log_partition(P3, K2, make_oracle("exact", P3, K2), 2, 1000)
    assert res.bracket.contains(math.log(12))
    assert res.bracket.lower - res.base <= math.log(4 / 3) <= res.bracket.upper - res.base
    assert res.bracket.width < 2e-4


def test_base_term_at_activity_one():
    res = integrate_log_partition(P3, K2, make_oracle("exact", P3, K2), 1, 10)
    assert res.bracket.lower == res.bracket.upper == 2 * math.log(3)


@pytest.mark.parametrize("target", [Fraction(3), Fraction(1, 2)])
def test_potts_tight_grid_width(target):
    g = cycle_graph(5)
    M = grid_for_error(P3, g, target, Fraction(1, 1000))
    res = integrate_log_partition(P3, g, make_oracle("poly", P3, g), target, M)
    assert res.bracket.width <= 1e-3
    assert res.bracket.contains(exact_log_partition(P3, g, target))


@pytest.mark.parametrize("model", [TwoSpin.hardcore(1), TwoSpin(Fraction(1, 2), Fraction(1, 3), 1)])
@pytest.mark.parametrize("target", [Fraction(3), Fraction(1, 3)])
def test_twospin_brackets(model, target):
    g = complete_bipartite(2, 3)
    M = grid_for_error(model, g, target, Fraction(1, 1000))
    res = integrate_log_partition(model, g, make_oracle("exact", model, g), target, M)
    assert res.bracket.width <= 1e-3 + 1e-12
    assert res.bracket.contains(exact_log_partition(model, g, target))
    assert res.non_monotone == 0


def test_rectangle_width_bound():
    g = cycle_graph(4)
    M = 200
    target = Fraction(5, 2)
    res = integrate_log_partition(P3, g, make_oracle("exact", P3, g), target, M)
    f = lambda b: float(res.readings.value[0 if b == 1 else -1])
    span = math.log(float(target))
    step = float(target - 1) / M
    # monotone integrand: width <= (f(end) - f(start)) * max cell log-length
    assert res.bracket.width <= (f(target) - f(1)) * math.log(1 + step) + 1e-9
    assert res.bracket.width <= (f(target) - f(1)) * span


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.001, 0.01, 0.05]))
def test_noise_robustness(seed, eps_o):
    g = cycle_graph(4)
    target = Fraction(2)
    M = 300
    exact = integrate_log_partition(P3, g, make_oracle("exact", P3, g), target, M)
    noisy = integrate_log_partition(P3, g, make_oracle(f"noise:eps={eps_o},seed={seed}", P3, g), target, M)
    truth = exact_log_partition(P3, g, target)
    total = float(np.sum(np.abs(noisy.readings.value[1:]) * np.log(noisy.grid[1:] / noisy.grid[:-1])))
    assert noisy.bracket.contains(truth)
    assert abs(noisy.estimate - truth) <= exact.bracket.width + eps_o * total + 1e-12


def test_mc_oracle_bracket():
    g = path_graph(2)
    res = integrate_log_partition(P3, g, make_oracle("mc:samples=3000,burn=200", P3, g, seed=5), Fraction(2), 20)
    assert res.bracket.contains(exact_log_partition(P3, g, 2))


def test_prescribed_grid_sizes():
    assert grid_for_error(P3, K2, 2, Fraction(1), mode="paper") == 60**4
    ising = TwoSpin.ising(Fraction(1, 2))
    assert grid_for_error(ising, K2, 2, Fraction(1), mode="paper") == math.ceil((10 * 2 * 2 / Fraction(1, 2)) ** 4)
    with pytest.raises(ValueError):
        grid_for_error(TwoSpin.hardcore(1), K2, 2, Fraction(1), mode="paper")


def test_observable_range_bounds_change():
    g = cycle_graph(5)
    for model, target in [(P3, Fraction(3)), (P3, Fraction(1, 3)), (TwoSpin.hardcore(1), Fraction(4)), (TwoSpin.hardcore(1), Fraction(1, 4))]:
        o = make_oracle("exact", model, g)
        change = abs(o.read(target).value - o.read(Fraction(1)).value)
        assert change <= observable_range(model, g, target) + 1e-12


def test_oracle_spec_errors():
    with pytest.raises(ValueError):
        make_oracle("mc:samples", P3, K2)
    with pytest.raises(ValueError):
        make_oracle("mc:frobs=3", P3, K2)
    with pytest.raises(ValueError):
        make_oracle("psychic", P3, K2)


@pytest.mark.parametrize("n", range(1, 7))
def test_connected_graph_counts(n):
    gs = connected_graphs(n)
    assert len(gs) == KNOWN_COUNTS[n]
    assert all(g.is_connected() for g in gs)
