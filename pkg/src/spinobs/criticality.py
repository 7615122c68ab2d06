"""Critical thresholds and tree-recursion fixpoints.

All real computations use mpmath at ``DPS`` decimal digits. Roots are
bracketed, bisected and polished by Newton steps until the residual is below
``TOL``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath
from mpmath import mpf

DPS = 40
TOL = mpf("1e-12")
GUARD = mpf("1e-9")


class SubcriticalError(ValueError):
    pass


class UniquenessError(ValueError):
    """The parameters lie in the uniqueness region; the two-cycle collapses."""


def _mp(x):
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    return mpf(x)


def _bisect(fn, lo, hi, iters=400):
    flo = fn(lo)
    for _ in range(iters):
        mid = (lo + hi) / 2
        fm = fn(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < mpf(10) ** (-DPS + 5) * max(1, abs(lo)):
            break
    return (lo + hi) / 2


def _polish(fn, x, lo, hi, steps=8):
    """Newton refinement that never leaves the bracket."""
    for _ in range(steps):
        fx = fn(x)
        d = mpmath.diff(fn, x)
        if d == 0:
            break
        nx = x - fx / d
        if not lo <= nx <= hi or abs(fn(nx)) >= abs(fx):
            break
        x = nx
    return x


# ------------------------------------------------------------------ Potts

def potts_beta_c(q: int, delta: int):
    if q < 3 or delta < 3:
        raise ValueError("need q >= 3 and delta >= 3")
    with mpmath.workdps(DPS):
        return mpf(q - 2) / (mpf(q - 1) ** (1 - mpf(2) / delta) - 1)


@dataclass(frozen=True)
class PortBias:
    p: object
    x: object
    residual: object
    exact_x: Fraction | None = None
    exact_p: Fraction | None = None

    @property
    def value(self):
        """The exact rational when certified, else the high-precision real."""
        return self.exact_p if self.exact_p is not None else self.p


def _potts_rhs(x, q, delta, beta):
    return ((beta * x + q - 1) / (x + beta + q - 2)) ** (delta - 1)


def potts_port_bias(q: int, delta: int, beta) -> PortBias:
    """Own-colour probability p = x/(x+q-1) of a port in an ordered phase.

    x > 1 is the largest root of x = ((beta x + q - 1)/(x + beta + q - 2))**(delta-1).
    When the root is rational it is recovered and certified exactly.
    """
    with mpmath.workdps(DPS):
        b = _mp(beta)
        if b <= potts_beta_c(q, delta):
            raise SubcriticalError(f"beta={mpmath.nstr(b, 10)} is not above beta_c(q={q}, delta={delta})")
        g = lambda x: _potts_rhs(x, q, delta, b) - x
        # the right-hand side is below beta**(delta-1) for every x > 0
        x_max = b ** (delta - 1) + 1
        lo_edge = 1 + mpf("1e-8")
        grid = [lo_edge + (x_max - lo_edge) * (mpf(k) / 4000) ** 2 for k in range(4001)]
        vals = [g(x) for x in grid]
        bracket = None
        for k in range(len(grid) - 1, 0, -1):
            if vals[k] == 0:
                bracket = (grid[k], grid[k])
                break
            if (vals[k - 1] > 0) != (vals[k] > 0):
                bracket = (grid[k - 1], grid[k])
                break
        if bracket is None:
            raise SubcriticalError("no fixpoint x > 1 found")
        lo, hi = bracket
        x = lo if lo == hi else _bisect(g, lo, hi)
        x = _polish(g, x, lo, hi)
        res = abs(g(x))
        exact = _rational_root(x, q, delta, beta)
        p = x / (x + q - 1)
        exact_p = None if exact is None else exact / (exact + q - 1)
        return PortBias(p=p, x=x, residual=res, exact_x=exact, exact_p=exact_p)


def _rational_root(x, q, delta, beta) -> Fraction | None:
    if not isinstance(beta, (Fraction, int)):
        return None
    beta = Fraction(beta)
    cand = Fraction(str(mpmath.nstr(x, 30))).limit_denominator(10**6)
    if cand > 1 and ((beta * cand + q - 1) / (cand + beta + q - 2)) ** (delta - 1) == cand:
        return cand
    return None


# ------------------------------------------------------------------ 2-spin

@dataclass(frozen=True)
class UniquenessReport:
    x_star: object
    derivative_magnitude: object
    in_nonuniqueness: bool
    boundary: bool
    residual: object

    @property
    def status(self) -> str:
        if self.boundary:
            return "boundary"
        return "nonuniqueness" if self.in_nonuniqueness else "uniqueness"


def _check_af(beta, gamma, lam, allow_flat=False):
    b, g, l = _mp(beta), _mp(gamma), _mp(lam)
    if b < 0 or g < 0 or (b == 0 and g == 0):
        raise ValueError("need beta, gamma >= 0, not both zero")
    # beta*gamma = 1 makes the tree map constant; accepted where harmless
    if not (b * g < 1 or (allow_flat and b * g == 1)):
        raise ValueError("parameters are not antiferromagnetic (need beta*gamma < 1)")
    if l <= 0:
        raise ValueError("lambda must be positive")
    return b, g, l


def tree_map(x, beta, gamma, lam, delta):
    return ((beta * x + 1) / (x + gamma)) ** (delta - 1) / lam


def tree_map_derivative(x, beta, gamma, lam, delta):
    fx = tree_map(x, beta, gamma, lam, delta)
    return (delta - 1) * fx * (beta / (beta * x + 1) - 1 / (x + gamma))


def _fixpoint(b, g, l, delta):
    h = lambda x: x - tree_map(x, b, g, l, delta)
    lo = mpf(10) ** -30
    hi = mpf(1)
    while h(hi) <= 0:
        hi *= 2
    while h(lo) >= 0:
        lo /= 10
    x = _bisect(h, lo, hi)
    return _polish(h, x, lo, hi)


def twospin_uniqueness(beta, gamma, lam, delta: int) -> UniquenessReport:
    with mpmath.workdps(DPS):
        b, g, l = _check_af(beta, gamma, lam, allow_flat=True)
        x = _fixpoint(b, g, l, delta)
        d = abs(tree_map_derivative(x, b, g, l, delta))
        res = abs(x - tree_map(x, b, g, l, delta))
        boundary = abs(d - 1) <= GUARD
        return UniquenessReport(x, d, bool(d > 1 + GUARD), bool(boundary), res)


def hardcore_threshold(delta: int) -> Fraction:
    """(delta-1)^(delta-1) / (delta-2)^delta."""
    return Fraction((delta - 1) ** (delta - 1), (delta - 2) ** delta)


def nonuniqueness_crossing(beta, gamma, delta: int, lo=None, hi=None):
    """The lambda at which |f'(x*)| crosses 1, found by bisection in log(lambda)."""
    with mpmath.workdps(DPS):
        b, g, _ = _check_af(beta, gamma, 1)

        def excess(loglam):
            l = mpmath.e**loglam
            x = _fixpoint(b, g, l, delta)
            return abs(tree_map_derivative(x, b, g, l, delta)) - 1

        a = mpmath.log(_mp(lo)) if lo is not None else mpf(-20)
        c = mpmath.log(_mp(hi)) if hi is not None else mpf(20)
        if (excess(a) > 0) == (excess(c) > 0):
            raise ValueError("no crossing inside the scanned lambda range")
        return mpmath.e ** _bisect(excess, a, c, iters=200)


@dataclass(frozen=True)
class BranchMarginals:
    q_plus: object
    q_minus: object
    x: object
    y: object
    residual: object


def twospin_branch_marginals(beta, gamma, lam, delta: int) -> BranchMarginals:
    """The two-cycle x = f(y), y = f(x) with y > x, and q+- = 1/(1+x), 1/(1+y)."""
    with mpmath.workdps(DPS):
        b, g, l = _check_af(beta, gamma, lam)
        f = lambda z: tree_map(z, b, g, l, delta)
        xs = _fixpoint(b, g, l, delta)
        rep = abs(tree_map_derivative(xs, b, g, l, delta))
        if rep <= 1 + GUARD:
            raise UniquenessError("parameters are in the uniqueness region: the two-cycle is degenerate (x = y)")
        h = lambda z: f(f(z)) - z
        hi = None
        step = mpf("1e-3")
        while step > mpf("1e-20"):
            cand = xs * (1 - step)
            if h(cand) < 0:
                hi = cand
                break
            step /= 4
        if hi is None:
            raise UniquenessError("could not separate the two-cycle from the fixpoint")
        lo = mpf(10) ** -30
        while h(lo) <= 0 and lo > mpf(10) ** -200:
            lo /= 10
        x = _bisect(h, lo, hi)
        x = _polish(h, x, lo, hi)
        y = f(x)
        res = max(abs(x - f(y)), abs(y - f(x)))
        if not y > x:
            raise UniquenessError("two-cycle solver returned y <= x")
        return BranchMarginals(1 / (1 + x), 1 / (1 + y), x, y, res)
