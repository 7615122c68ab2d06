from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinobs.models import Potts, TwoSpin
from spinobs.phase import (PhaseGadget, assess_phase_gadget, ideal_port_distribution, phase_from_counts,
                           read_phase_gadget, sample_phase_gadget, write_phase_gadget)
from spinobs.rational import ParseError


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 6), st.integers(1, 4), st.integers(3, 5), st.integers(0, 10**6))
def test_generated_gadgets_pass_audit(n, t, delta, seed):
    try:
        gad = sample_phase_gadget(n, t, delta, seed)
    except ValueError:
        # only for degree sequences without a simple bipartite realisation
        assert n + t < delta
        return
    gad.audit()
    g = gad.graph
    assert g.is_bipartite() and g.is_simple()
    for side in (gad.left, gad.right):
        degs = sorted(g.degree(v) for v in side)
        assert degs == sorted([delta] * n + [delta - 1] * t)
    assert all(g.degree(v) == delta - 1 for v in gad.ports)


def test_sampling_is_seeded():
    assert sample_phase_gadget(4, 2, 3, 7).graph == sample_phase_gadget(4, 2, 3, 7).graph


def test_tie_breaking_uniform():
    rng = np.random.default_rng(0)
    picks = [phase_from_counts([2, 2, 1], rng) for _ in range(6000)]
    assert phase_from_counts([1, 3, 0]) == 1
    assert abs(picks.count(0) / 6000 - 0.5) < 0.03 and picks.count(2) == 0


def test_ideal_laws():
    law = ideal_port_distribution(Potts(3, 4), 1, [5, 6], Fraction(2, 3))
    assert sum(law.prob(t) for t in law.support()) == 1
    assert law.prob((1, 1)) == Fraction(4, 9)
    two = ideal_port_distribution(TwoSpin.hardcore(6), "-", ([0], [1, 2]), (Fraction(3, 4), Fraction(1, 4)))
    assert sum(two.prob(t) for t in two.support()) == 1
    assert two.prob((1, 0, 0)) == Fraction(1, 4) * Fraction(1, 16)
    with pytest.raises(ValueError):
        ideal_port_distribution(Potts(3, 4), 0, [1], Fraction(1, 3))


def test_ideal_sampler_frequencies():
    law = ideal_port_distribution(Potts(3, 4), 0, [0, 1], Fraction(2, 3))
    draws = law.sample(np.random.default_rng(1), 100_000)
    for tau in law.support():
        p = float(law.prob(tau))
        freq = np.mean(np.all(draws == np.array(tau), axis=1))
        assert abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / 100_000)


def test_exact_potts_balance_is_uniform():
    gad = sample_phase_gadget(2, 1, 3, 5)
    res = assess_phase_gadget(gad, Potts(3, 4), "exact")
    assert res.eps_balance == 0
    assert all(v == Fraction(1, 3) for v in res.phase_probs.values())
    assert 0 < res.eps_port


def test_mc_agrees_with_exact_per_component():
    gad = sample_phase_gadget(2, 1, 3, 5)
    model = Potts(3, 4)
    ex = assess_phase_gadget(gad, model, "exact")
    mc = assess_phase_gadget(gad, model, "mc", samples=20000, seed=3, thinning=30)
    for k, p in ex.phase_probs.items():
        assert abs(mc.phase_probs[k] - float(p)) < 5 * mc.se_balance + 0.02


def test_mc_standard_errors_scale():
    gad = sample_phase_gadget(2, 1, 3, 5)
    model = TwoSpin.ising(Fraction(1, 2))
    a = assess_phase_gadget(gad, model, "mc", samples=2500, seed=1, bias=(Fraction(3, 5), Fraction(2, 5)))
    b = assess_phase_gadget(gad, model, "mc", samples=40000, seed=1, bias=(Fraction(3, 5), Fraction(2, 5)))
    assert abs(a.se_balance / b.se_balance / 4 - 1) <= 0.2


def test_gadget_file_round_trip(tmp_path):
    gad = sample_phase_gadget(3, 2, 3, 2)
    path = tmp_path / "g.el"
    write_phase_gadget(gad, str(path))
    back = read_phase_gadget(str(path))
    assert (back.n, back.t, back.delta) == (3, 2, 3) and back.graph == gad.graph
    bare = tmp_path / "bare.el"
    bare.write_text("2 1\n0 1\n")
    with pytest.raises(ParseError):
        read_phase_gadget(str(bare))
