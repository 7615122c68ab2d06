from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from spinobs import criticality as cr


def test_potts_threshold_closed_form():
    with mpmath.workdps(40):
        assert abs(cr.potts_beta_c(3, 3) - 1 / (mpmath.cbrt(2) - 1)) < mpmath.mpf("1e-30")
    assert abs(float(cr.potts_beta_c(3, 3)) - 3.8473221) < 1e-6


def test_port_bias_rational_root():
    pb = cr.potts_port_bias(3, 3, 4)
    assert pb.exact_x == 4 and pb.exact_p == Fraction(2, 3)
    assert pb.value == Fraction(2, 3)


def test_subcritical_rejected():
    with pytest.raises(cr.SubcriticalError):
        cr.potts_port_bias(3, 3, 3)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 5), st.integers(3, 6), st.fractions(min_value=Fraction(1, 10), max_value=6, max_denominator=10))
def test_port_bias_residual_and_range(q, delta, extra):
    beta = Fraction(int(cr.potts_beta_c(q, delta)) + 1) + extra
    pb = cr.potts_port_bias(q, delta, beta)
    assert pb.residual <= cr.TOL
    assert pb.p > mpmath.mpf(1) / q


@pytest.mark.parametrize("delta", range(3, 9))
def test_hardcore_crossing_matches_formula(delta):
    thr = cr.hardcore_threshold(delta)
    crossing = cr.nonuniqueness_crossing(1, 0, delta, thr / 4, thr * 4)
    assert abs(crossing - mpmath.mpf(thr.numerator) / thr.denominator) < 1e-9


def test_hardcore_lambda_one_classification():
    assert cr.twospin_uniqueness(1, 0, 1, 6).status == "nonuniqueness"
    assert cr.twospin_uniqueness(1, 0, 1, 5).status == "uniqueness"


def test_scan_brackets_one_crossing():
    delta = 4
    lams = [Fraction(k, 8) for k in range(1, 40)]
    flags = [cr.twospin_uniqueness(1, 0, lam, delta).in_nonuniqueness for lam in lams]
    changes = sum(1 for a, b in zip(flags, flags[1:]) if a != b)
    assert changes == 1
    k = flags.index(True)
    assert lams[k - 1] <= cr.hardcore_threshold(delta) <= lams[k]


def test_ising_branches_sum_to_one():
    bm = cr.twospin_branch_marginals(Fraction(1, 10), Fraction(1, 10), 1, 3)
    assert abs(bm.q_plus + bm.q_minus - 1) < 1e-12
    assert abs(bm.x * bm.y - 1) < 1e-12


def test_hardcore_two_cycle_delta6():
    bm = cr.twospin_branch_marginals(1, 0, 1, 6)
    assert bm.q_plus > bm.q_minus
    assert bm.residual <= 1e-10
    f = lambda z: cr.tree_map(z, 1, 0, 1, 6)
    with mpmath.workdps(40):
        assert abs(f(f(bm.x)) - bm.x) < 1e-10


def test_hardcore_lambda6_delta3_closed_form():
    bm = cr.twospin_branch_marginals(1, 0, 6, 3)
    with mpmath.workdps(40):
        s3 = mpmath.sqrt(3)
        assert abs(bm.q_plus - (3 + s3) / 6) < 1e-20
        assert abs(bm.q_minus - (3 - s3) / 6) < 1e-20


def test_uniqueness_degenerate_signal():
    with pytest.raises(cr.UniquenessError):
        cr.twospin_branch_marginals(1, 0, 1, 3)


def test_boundary_reported():
    thr = cr.hardcore_threshold(3)
    assert cr.twospin_uniqueness(1, 0, thr, 3).status == "boundary"


def test_not_antiferromagnetic():
    with pytest.raises(ValueError):
        cr.twospin_uniqueness(2, 1, 1, 3)
