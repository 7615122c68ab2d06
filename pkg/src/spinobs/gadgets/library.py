"""Dense gadget libraries, certified contraction constants, Build-gadget and pair search.

A library is a set of gadgets whose effective values (B for edge gadgets,
R for field gadgets) cover an interval around the two-child fixpoint to a
prescribed mesh. Constants are certified over a hull interval K that
contains the library's contraction interval and the degenerate value 1 and
is closed under every library map, so bounds hold along every chain that
starts from the degenerate gadget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
from mpmath import mpf

from ..models import Potts, TwoSpin, VertexEdgeObservable
from .core import (
    EdgeGadget,
    FieldGadget,
    compose_edge,
    compose_field,
    cycle4_field,
    degenerate_edge,
    degenerate_field,
    single_edge,
)
from .recursion import FieldMaps, PottsHats


class LibraryError(RuntimeError):
    pass


class SearchExhausted(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


def _mp(x):
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    return mpf(x)


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(mpmath.nstr(mpf(x), 40, strip_zeros=False))


class Family:
    """Uniform view of edge gadgets (Potts) and field gadgets (2-spin)."""

    def __init__(self, model, obs: VertexEdgeObservable | None = None):
        self.model = model
        if isinstance(model, Potts):
            self.kind = "potts"
            self.maps = PottsHats.of(model)
            if model.beta <= 1:
                raise ValueError("edge-gadget libraries need a ferromagnetic beta > 1")
        else:
            self.kind = "twospin"
            if obs is None:
                raise ValueError("field gadgets need an observable")
            if not model.antiferromagnetic:
                raise ValueError("field-gadget libraries need beta*gamma < 1")
            self.maps = FieldMaps(model, obs)
        self.obs = obs

    def value(self, g) -> Fraction:
        return g.B if self.kind == "potts" else g.R

    def gap(self, g) -> Fraction:
        return g.S if self.kind == "potts" else g.O

    def compose(self, children, verify=False):
        if self.kind == "potts":
            return compose_edge(children, self.model, verify)[0]
        return compose_field(children, self.model, self.obs, verify)[0]

    def degenerate(self):
        return degenerate_edge() if self.kind == "potts" else degenerate_field()

    def seeds(self):
        if self.kind == "potts":
            return [single_edge(self.model)]
        out = [degenerate_field()]
        m = self.model
        if m.gamma != 1 and m.lam == (1 - m.beta) / (1 - m.gamma):
            out.append(cycle4_field(m, self.obs))
        return out

    def exact(self, g):
        if self.kind == "potts":
            B, S, _ = g.exact_stats(self.model)
            return B, S
        R, O, _ = g.exact_stats(self.model, self.obs)
        return R, O

    def fixpoint(self):
        """Value x* with x* = combine(x*^2)."""
        if self.kind == "potts":
            return Fraction(1)
        m = self.model
        with mpmath.workdps(50):
            lo = _mp(m.gamma)
            hi = 1 / _mp(m.beta) if m.beta > 0 else mpf(10) ** 6
            fn = lambda x: x - self.maps.combine(x * x)
            # fn increases from negative at gamma to positive at 1/beta
            for _ in range(300):
                mid = (lo + hi) / 2
                if fn(mid) > 0:
                    hi = mid
                else:
                    lo = mid
            return _to_fraction((lo + hi) / 2)


# ------------------------------------------------------------------ library

@dataclass
class GadgetLibrary:
    kind: str
    model: object
    obs: VertexEdgeObservable | None
    members: list
    lo: Fraction
    hi: Fraction
    center: Fraction
    tau: Fraction
    delta: Fraction
    largest_gap: Fraction
    rounds: int

    @property
    def values(self) -> list[Fraction]:
        fam = Family(self.model, self.obs)
        return [fam.value(g) for g in self.members]

    def family(self) -> Family:
        return Family(self.model, self.obs)


def _cover_gap(values: Sequence[Fraction], lo: Fraction, hi: Fraction) -> Fraction:
    """Largest distance from a point of [lo, hi] to the nearest value (values sorted, inside)."""
    if not values:
        return hi - lo
    worst = max(values[0] - lo, hi - values[-1])
    for a, b in zip(values, values[1:]):
        worst = max(worst, (b - a) / 2)
    return worst


def _greedy_cover(cands, lo, hi, radius):
    """Sweep left to right picking the furthest value that still covers the frontier."""
    chosen = []
    frontier = lo
    i = 0
    n = len(cands)
    while True:
        best = None
        while i < n and cands[i][0] <= frontier + radius:
            best = cands[i]
            i += 1
        if best is None:
            return None
        chosen.append(best)
        frontier = best[0] + radius
        if frontier >= hi:
            return chosen


def build_dense_library(
    model,
    tau,
    delta,
    obs: VertexEdgeObservable | None = None,
    max_rounds: int = 8,
    bucket_fraction: int = 4,
    pool_cap: int = 600,
    k_max: int = 2,
) -> GadgetLibrary:
    """Compositional search for a tau*delta-dense library around the fixpoint.

    Potts: interval (1, 1 + tau). 2-spin: [x* - tau, x* + tau].
    Candidates are all compositions of up to ``k_max`` pool members; the pool
    keeps the smallest gadget per value bucket so it stays bounded.
    """
    tau, delta = Fraction(tau), Fraction(delta)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if tau <= 0:
        raise ValueError("tau must be positive")
    fam = Family(model, obs)
    center = fam.fixpoint()
    if fam.kind == "potts":
        lo, hi = Fraction(1), 1 + tau
        if hi >= fam.maps.gamma_hat:
            raise ValueError("interval leaves the range (1, gamma_hat) of edge-gadget interactions")
    else:
        lo, hi = center - tau, center + tau
        m = model
        if lo <= m.gamma or (m.beta > 0 and hi >= 1 / m.beta):
            raise ValueError("interval leaves the range (gamma, 1/beta) of field-gadget values")
    radius = tau * delta
    fine = radius / bucket_fraction

    def bucket(v: Fraction):
        if lo - tau <= v <= hi + tau:
            return ("in", math.floor((v - lo) / fine))
        return ("out", round(float(v), 2))

    pool: dict = {}

    def offer(g):
        v = fam.value(g)
        key = bucket(v)
        cur = pool.get(key)
        if cur is None or (g.size, g.recipe) < (cur.size, cur.recipe):
            pool[key] = g

    for g in fam.seeds():
        offer(g)
    rounds = 0
    members = None
    gap = hi - lo
    while rounds < max_rounds:
        rounds += 1
        items = sorted(pool.values(), key=lambda g: (g.size, g.recipe))[:pool_cap]
        for a_idx, a in enumerate(items):
            offer(fam.compose([a]))
            if k_max >= 2:
                for b in items[a_idx:]:
                    offer(fam.compose([a, b]))
        cands = sorted(
            ((fam.value(g), g) for g in pool.values() if lo < fam.value(g) < hi or (fam.kind == "twospin" and lo <= fam.value(g) <= hi)),
            key=lambda t: (t[0], t[1].size, t[1].recipe),
        )
        gap = _cover_gap([v for v, _ in cands], lo, hi)
        if gap <= radius:
            members = _greedy_cover(cands, lo, hi, radius)
            if members is not None:
                break
    if members is None:
        raise LibraryError(f"coverage not achieved after {rounds} rounds; largest uncovered distance {float(gap):.6g} > {float(radius):.6g}")
    chosen = [g for _, g in members]
    vals = [fam.value(g) for g in chosen]
    final_gap = _cover_gap(vals, lo, hi)
    assert final_gap <= radius
    return GadgetLibrary(fam.kind, model, obs, chosen, lo, hi, center, tau, delta, final_gap, rounds)


# ------------------------------------------------------------------ constants

@dataclass(frozen=True)
class Interval:
    lo: object
    hi: object

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    @property
    def width(self):
        return self.hi - self.lo


@dataclass
class RecursionConstants:
    x_star: Fraction
    omega_star: Fraction
    I: Interval
    I_prime: Interval
    hull: Interval
    c_min: object
    c_max: object
    theta_max: object  # T-hat
    gap_bound: object  # T, J = [-T, T]
    envelope_c: Fraction
    kappa: Fraction | None = None

    @property
    def J(self) -> Interval:
        return Interval(-self.gap_bound, self.gap_bound)


# critical points are irrational; evaluating at a 40-digit rational neighbour
# loses at most a second-order amount, covered by this slack
_SLACK = Fraction(1, 10**30)


def _sup_abs(fn, lo, hi, critical=()):
    pts = [lo, hi] + [c for c in critical if lo < c < hi]
    return max(abs(fn(p)) for p in pts)


def recursion_constants(lib: GadgetLibrary) -> RecursionConstants:
    fam = lib.family()
    maps = fam.maps
    xs = lib.center
    w_star = maps.omega(xs)
    aw = abs(w_star)
    if not aw < 1:
        raise LibraryError("|omega(x*)| >= 1: no contraction around the fixpoint")
    I = Interval(xs - lib.tau * aw / 2, xs + lib.tau * aw / 2)
    ext = lib.tau * 2 * aw / (1 - aw)
    Ip = Interval(xs - ext, xs + ext)
    vals = lib.values
    # hull closed under the maps, containing I' and the degenerate value 1
    lo, hi = min(Ip.lo, Fraction(1)), max(Ip.hi, Fraction(1))
    for _ in range(200):
        imgs = []
        for v in vals:
            imgs += [maps.combine(lo * v), maps.combine(hi * v)]
        nlo, nhi = min([lo] + imgs), max([hi] + imgs)
        if (nlo, nhi) == (lo, hi):
            break
        lo, hi = nlo, nhi
    else:
        raise LibraryError("hull of the library maps did not stabilise")
    K = Interval(lo, hi)
    # |phi_i'| decreases in the argument, so its extremes sit at the hull ends
    dmax = max(abs(maps.map_derivative(K.lo, v)) for v in vals)
    dmin = min(abs(maps.map_derivative(Ip.hi, v)) for v in vals)
    crit_w, crit_t = [], []
    if fam.kind == "twospin":
        m, o = fam.model, fam.obs
        with mpmath.workdps(60):
            if m.beta > 0 and m.gamma > 0:
                crit_w = [_to_fraction(mpmath.sqrt(_mp(m.gamma) / _mp(m.beta)))]
            if (o.a - o.b) * m.beta != 0:
                r2 = (o.a + o.c) * m.gamma / ((o.a - o.b) * m.beta)
                if r2 > 0:
                    crit_t = [_to_fraction(mpmath.sqrt(_mp(r2)))]
    wmax = _sup_abs(maps.omega, K.lo, K.hi, crit_w)
    c_max = max(dmax, wmax) + (_SLACK if crit_w else 0)
    if not c_max < 1:
        raise LibraryError(f"certified contraction ratio {float(c_max):.8g} is not below 1")
    t_hat = _sup_abs(maps.theta, K.lo, K.hi, crit_t) + (_SLACK if crit_t else 0)
    gmax = max(abs(fam.gap(g)) for g in lib.members)
    T = (t_hat + gmax) / (1 - c_max)
    env_c = max(abs(1 - I.lo), abs(1 - I.hi))
    kappa = maps.kappa if fam.kind == "potts" else None
    return RecursionConstants(xs, w_star, I, Ip, K, dmin, c_max, t_hat, T, env_c, kappa)


# ------------------------------------------------------------------ Build-gadget

def well_covered(lib: GadgetLibrary, consts: RecursionConstants) -> tuple[bool, Fraction]:
    """Whether the images phi_i(I) cover I; returns (ok, largest uncovered length)."""
    fam = lib.family()
    I = consts.I
    imgs = []
    for v in lib.values:
        a, b = fam.maps.combine(I.lo * v), fam.maps.combine(I.hi * v)
        imgs.append((min(a, b), max(a, b)))
    imgs.sort()
    reach = I.lo
    hole = Fraction(0)
    for a, b in imgs:
        if a > reach:
            hole = max(hole, min(a, I.hi) - reach)
        reach = max(reach, b)
        if reach >= I.hi:
            break
    if reach < I.hi:
        hole = max(hole, I.hi - reach)
    return hole == 0, hole


@dataclass
class BuildResult:
    gadget: object
    target: Fraction
    t: int
    choices: tuple
    preimages: tuple
    error: Fraction
    bound: object


def build_gadget(x, t: int, lib: GadgetLibrary, consts: RecursionConstants | None = None) -> BuildResult:
    """Gadget whose effective value is within envelope_c * c_max**t of ``x``."""
    consts = consts or recursion_constants(lib)
    fam = lib.family()
    x = _to_fraction(x)
    if x not in consts.I:
        raise ValueError(f"target {float(x):.10g} lies outside I = [{float(consts.I.lo):.10g}, {float(consts.I.hi):.10g}]")
    if t < 0:
        raise ValueError("t must be nonnegative")
    vals = lib.values
    y = x
    choices, pre = [], [x]
    for _ in range(t):
        best = None
        for i, v in enumerate(vals):
            z = fam.maps.inverse(y) / v
            if z in consts.I:
                key = (abs(z - consts.x_star), i)
                if best is None or key < best[0]:
                    best = (key, i, z)
        if best is None:
            raise LibraryError(f"no library map covers {float(y):.12g}; library too coarse")
        _, i, y = best
        choices.append(i)
        pre.append(y)
    g = fam.degenerate()
    for i in reversed(choices):
        g = fam.compose([g, lib.members[i]])
    err = abs(fam.value(g) - x)
    bound = consts.envelope_c * consts.c_max**t
    return BuildResult(g, x, t, tuple(choices), tuple(pre), err, bound)


# ------------------------------------------------------------------ pair search

@dataclass
class GadgetPair:
    first: object
    second: object
    value_diff: Fraction
    gap_diff: Fraction
    verified: bool
    explored: int


def search_gadget_pair(
    model,
    r,
    gap_min,
    obs: VertexEdgeObservable | None = None,
    lib: GadgetLibrary | None = None,
    tau=None,
    delta=Fraction(1, 4),
    max_depth: int = 5,
    per_bucket: int = 2,
    verify: bool = True,
) -> GadgetPair:
    """Two gadgets with effective values within 2r and gaps at least ``gap_min`` apart.

    Candidates are chains degenerate -> compose(., member) over library members.
    Per value bucket only the smallest and largest gaps are kept. Every chain
    stays in the certified hull, so gaps lie in J = [-T, T]; a request above 2T is
    rejected up front.
    """
    r, gap_min = Fraction(r), Fraction(gap_min)
    if not 0 < r < Fraction(1, 2):
        raise ValueError("r must lie in (0, 1/2)")
    fam = Family(model, obs)
    if lib is None:
        if tau is None:
            tau = Fraction(1, 10) if fam.kind == "potts" else Fraction(1, 20)
        lib = build_dense_library(model, tau, delta, obs)
    consts = recursion_constants(lib)
    if gap_min > 2 * consts.gap_bound:
        raise ValueError(f"gap_min exceeds 2T = {float(2 * consts.gap_bound):.6g}: impossible for library chains")
    states = [fam.degenerate()]
    kept = []
    explored = 0
    for depth in range(max_depth):
        nxt = {}
        for s in states:
            for m in lib.members:
                g = fam.compose([s, m])
                explored += 1
                v = fam.value(g)
                key = math.floor(v / r)
                slot = nxt.setdefault(key, [])
                slot.append(g)
        states = []
        for key in sorted(nxt):
            slot = sorted(nxt[key], key=lambda g: (fam.gap(g), g.size, g.recipe))
            pick = slot[:per_bucket] + slot[-per_bucket:] if len(slot) > 2 * per_bucket else slot
            states.extend(pick)
        kept.extend(states)
    kept.sort(key=lambda g: (fam.value(g), fam.gap(g), g.recipe))
    best = None
    j0 = 0
    for j, g in enumerate(kept):
        while fam.value(g) - fam.value(kept[j0]) > 2 * r:
            j0 += 1
        for h in kept[j0:j]:
            d = abs(fam.gap(g) - fam.gap(h))
            key = (d, -(g.size + h.size))
            if best is None or key > best[0]:
                best = (key, h, g)
    if best is None:
        raise SearchExhausted("no candidate pair within the interaction tolerance")
    _, g1, g2 = best
    vd = abs(fam.value(g1) - fam.value(g2))
    gd = abs(fam.gap(g1) - fam.gap(g2))
    if gd < gap_min:
        raise SearchExhausted(
            f"best gap difference {float(gd):.6g} below gap_min {float(gap_min):.6g} after {explored} candidates",
            best=GadgetPair(g1, g2, vd, gd, False, explored),
        )
    verified = False
    if verify:
        e1, e2 = fam.exact(g1), fam.exact(g2)
        if e1 != (fam.value(g1), fam.gap(g1)) or e2 != (fam.value(g2), fam.gap(g2)):
            raise AssertionError("pair statistics disagree with exact computation")
        verified = abs(e1[0] - e2[0]) <= 2 * r and abs(e1[1] - e2[1]) >= gap_min
    return GadgetPair(g1, g2, vd, gd, verified, explored)
