from fractions import Fraction
import itertools

import numpy as np
import pytest

from spinobs import exact as ex
from spinobs.graph import Multigraph, cycle_graph, path_graph
from spinobs.models import MAGNETIZATION, Potts, TwoSpin
from spinobs.samplers import glauber_run, heat_bath_kernel, mc_estimate, mc_estimate_parallel

K2 = path_graph(1)

TWO_VERTEX_MODELS = [Potts(3, 2), Potts(2, Fraction(1, 3)), TwoSpin.hardcore(1), TwoSpin(Fraction(1, 2), Fraction(2, 3), 3),
                     TwoSpin.ising(Fraction(1, 4), Fraction(5, 2))]


@pytest.mark.parametrize("model", TWO_VERTEX_MODELS)
@pytest.mark.parametrize("g", [K2, Multigraph(2, ((0, 1), (0, 1))), Multigraph(2, ())])
def test_detailed_balance_exact(model, g):
    P, pi = heat_bath_kernel(g, model)
    states = list(pi)
    for x, y in itertools.product(states, repeat=2):
        if pi[x] and pi[y]:
            assert pi[x] * P.get((x, y), 0) == pi[y] * P.get((y, x), 0)
    for x in states:
        if pi[x]:
            assert sum(P.get((x, y), 0) for y in states) == 1


def test_same_seed_same_trajectory():
    a = glauber_run(Potts(3, 2), cycle_graph(5), 5000, seed=11)
    b = glauber_run(Potts(3, 2), cycle_graph(5), 5000, seed=11)
    c = glauber_run(Potts(3, 2), cycle_graph(5), 5000, seed=12)
    assert a.config == b.config
    assert a.rng_state() == b.rng_state()
    assert a.rng_state() != c.rng_state()


def test_hardcore_never_violated():
    seen = []
    g = cycle_graph(6)
    glauber_run(TwoSpin.hardcore(3), g, 3000, seed=1, record=lambda cfg: seen.append(all(not (cfg[u] and cfg[v]) for u, v in g.edges)))
    assert all(seen)


def test_infeasible_init_rejected():
    with pytest.raises(ValueError):
        glauber_run(TwoSpin.hardcore(1), K2, 10, init=[1, 1])


def test_single_vertex_hardcore():
    est = mc_estimate(TwoSpin.hardcore(1), Multigraph(1, ()), MAGNETIZATION, 100_000, burn_in=10, thinning=1, seed=3)
    assert abs(est.mean - 0.5) <= 3 * est.std_error


def test_k2_potts_susceptibility():
    est = mc_estimate(Potts(3, 2), K2, None, 100_000, seed=4)
    assert abs(est.mean - 0.5) <= 4 * est.std_error


def test_k2_hardcore_magnetization():
    est = mc_estimate(TwoSpin.hardcore(1), K2, MAGNETIZATION, 100_000, seed=5)
    assert abs(est.mean - 2 / 3) <= 4 * est.std_error


def test_one_sample_has_undefined_error():
    est = mc_estimate(Potts(3, 2), K2, None, 1)
    assert not est.std_error_defined


def test_parallel_is_thread_count_independent():
    a = mc_estimate_parallel(Potts(3, 2), cycle_graph(4), None, 2000, chains=3, seed=9, threads=1)
    b = mc_estimate_parallel(Potts(3, 2), cycle_graph(4), None, 2000, chains=3, seed=9, threads=3)
    assert a == b


def test_standard_error_shrinks_like_root_n():
    g = cycle_graph(4)
    small = mc_estimate(Potts(3, 2), g, None, 4000, seed=21)
    large = mc_estimate(Potts(3, 2), g, None, 64000, seed=21)
    assert 0.5 < (small.std_error / large.std_error) / 4 < 2
