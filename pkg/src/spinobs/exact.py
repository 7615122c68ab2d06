"""Exact Gibbs quantities in rational arithmetic.

Two engines compute the same numbers:

* enumeration: every configuration of the free vertices is generated in
  numpy chunks and reduced to a histogram of integer statistics (counts of
  monochromatic edges per activity class, occupied vertices per activity class).
  Weights are then applied to the few distinct histogram rows with Fractions,
  so the result is exact.
* elimination: variable elimination along a greedy min-degree order, carrying
  (weight, weight * observable) pairs. It is exact and cheap on trees,
  series-parallel graphs and anything else of small width.

``method="auto"`` uses elimination when the elimination width is small and falls
back to enumeration otherwise.
"""

from __future__ import annotations

import contextlib
import functools
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .graph import Multigraph, Subgraph
from .models import NO_PINS, PinSet, Potts, TwoSpin, VertexEdgeObservable, check_model_graph


class BudgetExceeded(RuntimeError):
    """The requested exact computation is larger than the configured budget."""


class ZeroWeightError(ValueError):
    """Conditioning on an event of probability zero."""


@dataclass
class Budget:
    twospin_max_configs: int = 2**24
    potts_max_configs: int = 3**15
    max_table: int = 3**9

    def max_configs(self, model) -> int:
        return self.twospin_max_configs if isinstance(model, TwoSpin) else self.potts_max_configs


BUDGET = Budget()


@contextlib.contextmanager
def budget(**overrides):
    """Temporarily override enumeration limits."""
    saved = {k: getattr(BUDGET, k) for k in overrides}
    for k, v in overrides.items():
        setattr(BUDGET, k, v)
    try:
        yield BUDGET
    finally:
        for k, v in saved.items():
            setattr(BUDGET, k, v)


# --------------------------------------------------------------------------
# local factors shared by both engines

class _Spec:
    """Per-vertex and per-edge weights and observable contributions."""

    def __init__(self, g: Multigraph, model, obs, F: Subgraph | None):
        check_model_graph(g, model)
        self.g = g
        self.model = model
        self.s = model.spins
        F = F if F is not None else Subgraph.whole(g)
        F.validate(g)
        self.F = F
        if isinstance(model, Potts):
            if obs not in (None, "susceptibility"):
                raise ValueError("the Potts observable is the susceptibility (expected m_F)")
            self.obs = obs
        else:
            if obs is not None and not isinstance(obs, VertexEdgeObservable):
                raise ValueError("2-spin observables are VertexEdgeObservable(a, b, c)")
            self.obs = obs

    def vertex_weight(self, v: int, s: int) -> Fraction:
        if isinstance(self.model, TwoSpin) and s == 1:
            return self.g.vertex_weight(v, self.model.lam)
        return Fraction(1)

    def vertex_obs(self, v: int, s: int) -> Fraction:
        if isinstance(self.obs, VertexEdgeObservable) and s == 1 and v in self.F.vertices:
            return self.obs.a
        return Fraction(0)

    def edge_weight(self, i: int, su: int, sv: int) -> Fraction:
        if su != sv:
            return Fraction(1)
        if isinstance(self.model, Potts):
            return self.g.edge_weight(i, self.model.beta)
        return self.model.beta if su == 0 else self.model.gamma

    def edge_obs(self, i: int, su: int, sv: int) -> Fraction:
        if su != sv or i not in self.F.edges or self.obs is None:
            return Fraction(0)
        if self.obs == "susceptibility":
            return Fraction(1)
        return self.obs.b if su == 0 else self.obs.c


# --------------------------------------------------------------------------
# elimination engine

def _mul(x, y):
    return (x[0] * y[0], x[0] * y[1] + x[1] * y[0])


_ONE = (Fraction(1), Fraction(0))
_ZERO = (Fraction(0), Fraction(0))


def _elimination_order(n: int, pairs: Iterable[tuple[int, int]], free: Sequence[int]):
    nbrs = {v: set() for v in free}
    for u, v in pairs:
        if u in nbrs and v in nbrs:
            nbrs[u].add(v)
            nbrs[v].add(u)
    order, width = [], 0
    remaining = set(free)
    while remaining:
        v = min(remaining, key=lambda x: (len(nbrs[x]), x))
        width = max(width, len(nbrs[v]))
        for a in nbrs[v]:
            nbrs[a] |= nbrs[v] - {a}
            nbrs[a].discard(v)
        remaining.discard(v)
        order.append(v)
        del nbrs[v]
    return order, width


def elimination_width(g: Multigraph, pins: PinSet = NO_PINS) -> int:
    free = [v for v in range(g.n) if v not in pins.fixed]
    pairs = list(g.edges) + list(pins.equal) + list(pins.distinct)
    return _elimination_order(g.n, pairs, free)[1]


def _eliminate(spec: _Spec, pins: PinSet):
    g, s = spec.g, spec.s
    dom = {v: ([pins.fixed[v]] if v in pins.fixed else list(range(s))) for v in range(g.n)}
    scalar = _ONE
    # unary factors absorb pinned neighbours; pairwise factors are merged per vertex pair
    unary = {v: {x: (spec.vertex_weight(v, x), spec.vertex_weight(v, x) * spec.vertex_obs(v, x)) for x in dom[v]} for v in range(g.n)}
    pair_tables: dict[tuple[int, int], dict] = {}

    def add_pair(u, v, fn):
        key = (u, v) if u < v else (v, u)
        tab = pair_tables.get(key)
        if tab is None:
            tab = {(a, b): _ONE for a in dom[key[0]] for b in dom[key[1]]}
            pair_tables[key] = tab
        for (a, b) in tab:
            su, sv = (a, b) if key == (u, v) else (b, a)
            tab[(a, b)] = _mul(tab[(a, b)], fn(su, sv))

    for i, (u, v) in enumerate(g.edges):
        add_pair(u, v, lambda su, sv, i=i: (spec.edge_weight(i, su, sv), spec.edge_weight(i, su, sv) * spec.edge_obs(i, su, sv)))
    for u, v in pins.equal:
        add_pair(u, v, lambda su, sv: _ONE if su == sv else _ZERO)
    for u, v in pins.distinct:
        add_pair(u, v, lambda su, sv: _ONE if su != sv else _ZERO)

    factors = []  # (scope tuple, dict assignment-tuple -> pair)
    for v in range(g.n):
        factors.append(((v,), {(x,): unary[v][x] for x in dom[v]}))
    for (u, v), tab in pair_tables.items():
        factors.append(((u, v), dict(tab)))

    # pinned vertices have singleton domains, so they can be eliminated anywhere
    free = [v for v in range(g.n) if v not in pins.fixed]
    order, _ = _elimination_order(g.n, pair_tables.keys(), free)
    order = [v for v in range(g.n) if v in pins.fixed] + order
    for x in order:
        touching = [f for f in factors if x in f[0]]
        factors = [f for f in factors if x not in f[0]]
        scope = sorted({y for sc, _ in touching for y in sc if y != x})
        size = math.prod(len(dom[y]) for y in scope) * len(dom[x])
        if size > BUDGET.max_table:
            raise BudgetExceeded(f"elimination table of size {size} exceeds max_table={BUDGET.max_table}")
        table = {}
        for assign in itertools.product(*(dom[y] for y in scope)):
            env = dict(zip(scope, assign))
            acc = _ZERO
            for val in dom[x]:
                env[x] = val
                prod = _ONE
                for sc, tab in touching:
                    prod = _mul(prod, tab[tuple(env[y] for y in sc)])
                    if prod[0] == 0 and prod[1] == 0:
                        break
                acc = (acc[0] + prod[0], acc[1] + prod[1])
            table[assign] = acc
        if scope:
            factors.append((tuple(scope), table))
        else:
            scalar = _mul(scalar, table[()])
    for sc, tab in factors:  # only empty scopes can remain
        scalar = _mul(scalar, tab[()])
    return scalar


# --------------------------------------------------------------------------
# enumeration engine

def _enumerate(spec: _Spec, pins: PinSet, chunk: int = 1 << 17):
    g, s, model = spec.g, spec.s, spec.model
    free = [v for v in range(g.n) if v not in pins.fixed]
    total = s ** len(free)
    if total > BUDGET.max_configs(model):
        raise BudgetExceeded(
            f"{total} configurations exceed the enumeration budget of {BUDGET.max_configs(model)}"
        )
    is_potts = isinstance(model, Potts)
    # activity classes; each class contributes one integer statistic per configuration
    vclass_of, vclasses = {}, []
    if not is_potts:
        for v in range(g.n):
            key = (g.vertex_weight(v, model.lam), v in spec.F.vertices)
            if key not in vclass_of:
                vclass_of[key] = len(vclasses)
                vclasses.append(key)
    eclass_of, eclasses, edge_cls = {}, [], []
    for i in range(g.m):
        key = (g.edge_weight(i, model.beta) if is_potts else None, i in spec.F.edges)
        if key not in eclass_of:
            eclass_of[key] = len(eclasses)
            eclasses.append(key)
        edge_cls.append(eclass_of[key])
    vcls = [vclass_of[(g.vertex_weight(v, model.lam), v in spec.F.vertices)] for v in range(g.n)] if not is_potts else []
    nv, ne = len(vclasses), len(eclasses)
    ncols = ne if is_potts else nv + 2 * ne
    hist: dict[tuple, int] = defaultdict(int)
    eu = np.array([u for u, _ in g.edges], dtype=np.int64)
    ev = np.array([v for _, v in g.edges], dtype=np.int64)
    ecls = np.array(edge_cls, dtype=np.int64)
    powers = np.array([s**j for j in range(len(free))], dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        sig = np.empty((idx.size, g.n), dtype=np.int8)
        for v, x in pins.fixed.items():
            sig[:, v] = x
        for j, v in enumerate(free):
            sig[:, v] = (idx // powers[j]) % s
        keep = np.ones(idx.size, dtype=bool)
        for u, v in pins.equal:
            keep &= sig[:, u] == sig[:, v]
        for u, v in pins.distinct:
            keep &= sig[:, u] != sig[:, v]
        sig = sig[keep]
        if sig.shape[0] == 0:
            continue
        stats = np.zeros((sig.shape[0], ncols), dtype=np.int64)
        if g.m:
            a, b = sig[:, eu], sig[:, ev]
            same = a == b
            if is_potts:
                for k in range(ne):
                    stats[:, k] = same[:, ecls == k].sum(axis=1)
            else:
                z = same & (a == 0)
                o = same & (a == 1)
                for k in range(ne):
                    stats[:, nv + 2 * k] = z[:, ecls == k].sum(axis=1)
                    stats[:, nv + 2 * k + 1] = o[:, ecls == k].sum(axis=1)
        if not is_potts:
            occ = sig == 1
            vc = np.array(vcls, dtype=np.int64)
            for k in range(nv):
                stats[:, k] = occ[:, vc == k].sum(axis=1)
        rows, counts = np.unique(stats, axis=0, return_counts=True)
        for row, c in zip(map(tuple, rows.tolist()), counts.tolist()):
            hist[row] += c
    return hist, vclasses, eclasses


def _reduce_hist(spec: _Spec, hist, vclasses, eclasses):
    model = spec.model
    is_potts = isinstance(model, Potts)
    nv = len(vclasses)
    Z = Fraction(0)
    W = Fraction(0)
    for row in sorted(hist):
        c = hist[row]
        w = Fraction(1)
        o = Fraction(0)
        if is_potts:
            for k, (act, inF) in enumerate(eclasses):
                w *= act ** row[k]
                if inF and spec.obs is not None:
                    o += row[k]
        else:
            for k, (lam, inF) in enumerate(vclasses):
                w *= lam ** row[k]
                if inF and spec.obs is not None:
                    o += spec.obs.a * row[k]
            for k, (_, inF) in enumerate(eclasses):
                m0, m1 = row[nv + 2 * k], row[nv + 2 * k + 1]
                w *= model.beta**m0 * model.gamma**m1
                if inF and spec.obs is not None:
                    o += spec.obs.b * m0 + spec.obs.c * m1
        Z += c * w
        W += c * w * o
    return Z, W


# --------------------------------------------------------------------------
# dispatch

def _choose(g: Multigraph, model, pins: PinSet, method: str) -> str:
    if method in ("enumerate", "eliminate"):
        return method
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    w = elimination_width(g, pins)
    if model.spins ** (w + 1) <= 729:
        return "eliminate"
    free = g.n - len(pins.fixed)
    if model.spins**free <= BUDGET.max_configs(model):
        return "enumerate"
    return "eliminate"


def _moments(g: Multigraph, model, obs, pins: PinSet, F, method: str):
    pins = pins or NO_PINS
    pins.validate(g, model.spins)
    spec = _Spec(g, model, obs, F)
    how = _choose(g, model, pins, method)
    if how == "eliminate":
        return _eliminate(spec, pins)
    return _reduce_hist(spec, *_enumerate(spec, pins))


def partition_function(g: Multigraph, model, pins: PinSet = NO_PINS, method: str = "auto") -> Fraction:
    """Z restricted to the configurations admitted by ``pins``."""
    Z, _ = _moments(g, model, None, pins, None, method)
    return Z


def observable_expectation(
    g: Multigraph,
    model,
    obs=None,
    pins: PinSet = NO_PINS,
    F: Subgraph | None = None,
    method: str = "auto",
) -> Fraction:
    """Exact conditional expectation of the observable given ``pins``.

    Potts: expected number of monochromatic edges of F (``obs`` is None or
    ``"susceptibility"``). 2-spin: E[a|sigma_V(F)| + b m0(F) + c m1(F)].
    """
    if isinstance(model, Potts) and obs is None:
        obs = "susceptibility"
    if isinstance(model, TwoSpin) and obs is None:
        raise ValueError("2-spin expectation needs a VertexEdgeObservable")
    Z, W = _moments(g, model, obs, pins, F, method)
    if Z == 0:
        raise ZeroWeightError("the pinned event has zero total weight")
    return W / Z


def gibbs_probability(g: Multigraph, model, event: PinSet, method: str = "auto") -> Fraction:
    Z = partition_function(g, model, NO_PINS, method)
    return partition_function(g, model, event, method) / Z


def susceptibility(g: Multigraph, model: Potts, F: Subgraph | None = None, **kw) -> Fraction:
    return observable_expectation(g, model, "susceptibility", F=F, **kw)


def magnetization(g: Multigraph, model: TwoSpin, **kw) -> Fraction:
    return observable_expectation(g, model, VertexEdgeObservable(1, 0, 0), **kw)


# --------------------------------------------------------------------------
# partition polynomials for interpolation oracles

@functools.lru_cache(maxsize=32)
def potts_mono_counts(g: Multigraph, q: int) -> tuple[int, ...]:
    """c[k] = number of q-colourings with exactly k monochromatic edges."""
    spec = _Spec(g.with_edge_activity(None), Potts(q, 2), None, None)
    hist, _, eclasses = _enumerate(spec, NO_PINS)
    counts = [0] * (g.m + 1)
    for row, c in hist.items():
        counts[sum(row)] += c
    return tuple(counts)


def twospin_counts(g: Multigraph) -> dict[tuple[int, int, int], int]:
    """Map (|sigma|, m0, m1) -> number of configurations."""
    spec = _Spec(g.with_vertex_activity(None), TwoSpin(1, 1, 1), None, None)
    hist, vclasses, eclasses = _enumerate(spec, NO_PINS)
    out: dict[tuple[int, int, int], int] = defaultdict(int)
    nv = len(vclasses)
    for row, c in hist.items():
        size = sum(row[:nv])
        m0 = sum(row[nv::2])
        m1 = sum(row[nv + 1::2])
        out[(size, m0, m1)] += c
    return dict(out)


def all_configurations(n: int, spins: int):
    return itertools.product(range(spins), repeat=n)
