"""Composite graphs built from phase gadgets, their effective parameters, and the
algebra that turns observable readings on composites back into the target
quantity on the small graph H.

Potts: every vertex of H becomes a phase-gadget copy; every edge of H becomes
``ell`` path-gadget copies plus one edge-gadget copy joining ports of the two
copies. The phase vector then follows a Potts law on H at an effective
interaction ``beta_hat``.

2-spin: every vertex of H becomes a phase-gadget copy carrying one field gadget
T, ``ell_plus`` copies of T+ on its plus ports and ``ell_minus`` copies of T- on
its minus ports; every edge of H joins plus ports and minus ports. The phase
vector follows an antiferromagnetic Ising law with interaction ``alpha`` and
field ``lam_hat``.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath

from .exact import observable_expectation, partition_function, susceptibility
from .gadgets.core import EdgeGadget, FieldGadget
from .graph import Multigraph, Subgraph
from .models import PinSet, Potts, TwoSpin, VertexEdgeObservable
from .phase import PhaseGadget

mpf = mpmath.mpf
DPS = 40


def _precise(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with mpmath.workdps(DPS):
            return fn(*args, **kwargs)

    return wrapper


def _mp(x):
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    return mpf(x)


def _unify(*xs):
    """Keep exact Fractions if all inputs are rational, else lift everything to mpf."""
    if all(isinstance(x, (int, Fraction)) for x in xs):
        return tuple(Fraction(x) for x in xs)
    return tuple(_mp(x) for x in xs)


def _check_host(H: Multigraph, max_degree: int = 3) -> list[int]:
    side = H.bipartition()
    if side is None:
        raise ValueError("H must be bipartite")
    if H.m and max(H.degrees()) > max_degree:
        raise ValueError(f"H must have maximum degree at most {max_degree}")
    return side


# ------------------------------------------------------------------ composites

@dataclass(frozen=True)
class PottsBundle:
    edge: EdgeGadget
    path: EdgeGadget


@dataclass(frozen=True)
class FieldBundle:
    T: FieldGadget
    T_plus: FieldGadget
    T_minus: FieldGadget


@dataclass
class CompositeInstance:
    graph: Multigraph
    kind: str
    H: Multigraph
    copies: tuple  # copies[v][x]: composite id of vertex x of the phase gadget for H-vertex v
    attachments: tuple  # (label, H index, composite ids of the attached gadget copy)
    port_use: dict  # composite port id -> label
    core: Subgraph  # composite minus the edge-gadget copies (Potts) or T interiors (2-spin)
    audit: dict = field(default_factory=dict)


class _Assembler:
    def __init__(self):
        self.n = 0
        self.edges: list[tuple[int, int]] = []

    def add(self, g: Multigraph, fixed: dict[int, int]) -> tuple[int, ...]:
        ids = []
        for x in range(g.n):
            if x in fixed:
                ids.append(fixed[x])
            else:
                ids.append(self.n)
                self.n += 1
        self.edges.extend((ids[u], ids[v]) for u, v in g.edges)
        return tuple(ids)


def build_composite(model, H: Multigraph, gadget: PhaseGadget, bundle, ell, swap: bool = False) -> CompositeInstance:
    """Assemble the composite graph and audit it.

    ``ell`` is an int for Potts and a pair (ell_plus, ell_minus) for 2-spin.
    With ``swap`` the 2-spin roles of T+ and T- are exchanged: T- copies go on
    the plus ports and T+ copies on the minus ports.
    Ports are allocated in increasing H-edge index order.
    """
    _check_host(H)
    asm = _Assembler()
    copies = [asm.add(gadget.graph, {}) for _ in range(H.n)]
    attachments = []
    port_use: dict[int, str] = {}
    excluded_edges: list[range] = []
    excluded_vertices: set[int] = set()
    t = gadget.t
    if isinstance(model, Potts):
        ell = int(ell)
        if ell < 0:
            raise ValueError("ell must be non-negative")
        if t < 3 * (ell + 1):
            raise ValueError(f"port budget violated: t = {t} < 3(ell+1) = {3 * (ell + 1)}")
        free = {v: list(gadget.ports_plus) for v in range(H.n)}
        for e, (u, v) in enumerate(H.edges):
            for k in range(ell + 1):
                pu = copies[u][free[u].pop(0)]
                pv = copies[v][free[v].pop(0)]
                gad = bundle.path if k < ell else bundle.edge
                label = f"path{k}" if k < ell else "edge"
                port_use[pu] = port_use[pv] = f"{label}@e{e}"
                g, (a, b) = gad.graph, gad.ports
                start = len(asm.edges)
                ids = asm.add(g, {a: pu, b: pv})
                if label == "edge":
                    excluded_edges.append(range(start, len(asm.edges)))
                    excluded_vertices.update(x for x in ids if x not in (pu, pv))
                attachments.append((label, e, ids))
        extra = sum(ell * (bundle.path.graph.n - 2) + bundle.edge.graph.n - 2 for _ in H.edges)
    else:
        lp, lm = (int(x) for x in ell)
        if lp < 0 or lm < 0:
            raise ValueError("ell_plus, ell_minus must be non-negative")
        if t < 5 + max(lp, lm):
            raise ValueError(f"port budget violated: t = {t} < 5 + max(ell+, ell-) = {5 + max(lp, lm)}")
        on_plus, on_minus = (bundle.T_minus, bundle.T_plus) if swap else (bundle.T_plus, bundle.T_minus)
        free_p = {v: list(gadget.ports_plus) for v in range(H.n)}
        free_m = {v: list(gadget.ports_minus) for v in range(H.n)}
        for v in range(H.n):
            plan = [("T", bundle.T, free_p)] + [("T+", on_plus, free_p)] * lp + [("T-", on_minus, free_m)] * lm
            for label, fg, pool in plan:
                w = copies[v][pool[v].pop(0)]
                port_use[w] = f"{label}@v{v}"
                start = len(asm.edges)
                ids = asm.add(fg.graph, {fg.root: w})
                if label == "T":
                    excluded_edges.append(range(start, len(asm.edges)))
                    excluded_vertices.update(x for x in ids if x != w)
                attachments.append((label, v, ids))
        for e, (u, v) in enumerate(H.edges):
            for pool, label in ((free_p, "plus"), (free_m, "minus")):
                pu, pv = copies[u][pool[u].pop(0)], copies[v][pool[v].pop(0)]
                port_use[pu] = port_use[pv] = f"{label}@e{e}"
                asm.edges.append((pu, pv))
        extra = H.n * ((bundle.T.graph.n - 1) + lp * (on_plus.graph.n - 1) + lm * (on_minus.graph.n - 1))
    graph = Multigraph(asm.n, tuple(asm.edges))
    dropped = {i for r in excluded_edges for i in r}
    core = Subgraph(frozenset(range(asm.n)) - frozenset(excluded_vertices), frozenset(range(graph.m)) - frozenset(dropped))
    inst = CompositeInstance(graph, "potts" if isinstance(model, Potts) else "twospin", H, tuple(copies), tuple(attachments), port_use, core)
    inst.audit = _audit(inst, gadget, H.n * gadget.graph.n + extra)
    return inst


def _audit(inst: CompositeInstance, gadget: PhaseGadget, expected_n: int) -> dict:
    g = inst.graph
    deg = g.degrees()
    audit = {
        "bipartite": g.is_bipartite(),
        "max_degree": max(deg) if deg else 0,
        "degree_ok": (max(deg) if deg else 0) <= gadget.delta,
        "vertex_count": g.n,
        "vertex_count_ok": g.n == expected_n,
        "ports_used": len(inst.port_use),
    }
    if not audit["bipartite"]:
        raise ValueError("composite is not bipartite: connector ports must lie on opposite colour classes")
    for key in ("degree_ok", "vertex_count_ok"):
        if not audit[key]:
            raise AssertionError(f"composite audit failed: {key} ({audit})")
    return audit


# ------------------------------------------------------------------ effective parameters

@dataclass(frozen=True)
class EffectiveParams:
    kind: str
    values: dict

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None


@_precise
def collision_probabilities(q: int, p):
    """Probability that two independent ports agree: same phase (R0), different phases (R1)."""
    (p,) = _unify(p)
    r0 = p * p + (1 - p) ** 2 / (q - 1)
    r1 = 2 * p * (1 - p) / (q - 1) + (q - 2) * (1 - p) ** 2 / (q - 1) ** 2
    return r0, r1


@_precise
def potts_factor(B, r0, r1):
    B, r0, r1 = _unify(B, r0, r1)
    return (1 + (B - 1) * r0) / (1 + (B - 1) * r1)


@_precise
def potts_effective(q: int, p, B_E, B_P=1, ell: int = 0) -> EffectiveParams:
    r0, r1 = collision_probabilities(q, p)
    if not (1 > r0 > r1 > 0):
        raise ValueError("need 1 > R0 > R1 > 0 (port bias p must exceed 1/q)")
    B_E, B_P, r0, r1 = _unify(B_E, B_P, r0, r1)
    fe, fp = potts_factor(B_E, r0, r1), potts_factor(B_P, r0, r1)
    A = [B_E / (B_E + (1 - r) / r) for r in (r0, r1)]
    return EffectiveParams("potts", {
        "q": q, "p": p, "R0": r0, "R1": r1, "B_E": B_E, "B_P": B_P, "ell": ell,
        "factor_E": fe, "factor_P": fp, "beta_hat": fp**ell * fe, "A0": A[0], "A1": A[1],
    })


@_precise
def interaction_matrix(beta, gamma, q_plus, q_minus):
    """M = A K A^T with A rows (1-q+, q+), (1-q-, q-) and K = [[beta, 1], [1, gamma]]; index 0 is '+'."""
    beta, gamma, qp, qm = _unify(beta, gamma, q_plus, q_minus)
    rows = [(1 - qp, qp), (1 - qm, qm)]
    K = ((beta, 1), (1, gamma))
    return tuple(
        tuple(sum(rows[i][a] * K[a][b] * rows[j][b] for a in range(2) for b in range(2)) for j in range(2))
        for i in range(2)
    )


@_precise
def field_factor(R, q_plus, q_minus):
    R, qp, qm = _unify(R, q_plus, q_minus)
    return (qp * R + 1 - qp) / (qm * R + 1 - qm)


@_precise
def twospin_effective(model: TwoSpin, q_plus, q_minus, R, R_plus=1, R_minus=1, ell_plus=0, ell_minus=0, swap=False) -> EffectiveParams:
    if q_plus == q_minus:
        raise ValueError("degenerate port laws: q+ = q-")
    M = interaction_matrix(model.beta, model.gamma, q_plus, q_minus)
    alpha = M[0][0] * M[1][1] / (M[0][1] * M[1][0])
    fR = field_factor(R, q_plus, q_minus)
    fp, fm = field_factor(R_plus, q_plus, q_minus), field_factor(R_minus, q_plus, q_minus)
    if swap:
        fp, fm = fm, fp
    lam_hat = fR * fp**ell_plus / fm**ell_minus
    return EffectiveParams("twospin", {
        "q_plus": q_plus, "q_minus": q_minus, "M": M, "alpha": alpha, "R": R, "R_plus": R_plus,
        "R_minus": R_minus, "ell_plus": ell_plus, "ell_minus": ell_minus, "swap": swap,
        "factor_T": fR, "factor_plus": fp, "factor_minus": fm, "lam_hat": lam_hat,
        "Lam_hat": lam_hat / fR,
    })


@_precise
def effective_params(model, bundle, ell, bias, swap: bool = False) -> EffectiveParams:
    """Dispatch on the model; ``bias`` is p (Potts) or (q+, q-) (2-spin)."""
    if isinstance(model, Potts):
        return potts_effective(model.q, bias, bundle.edge.B, bundle.path.B, int(ell))
    lp, lm = ell
    return twospin_effective(model, bias[0], bias[1], bundle.T.R, bundle.T_plus.R, bundle.T_minus.R, lp, lm, swap)


# ------------------------------------------------------------------ subtraction

class GapTooSmall(ValueError):
    pass


@_precise
def subtraction_estimate(kind: str, readings: dict, eff: EffectiveParams, size: int, threshold=0):
    """Recover the small-graph quantity from two composite readings.

    Potts readings: S1, S2 (composites), A_E1, A_E2 (gadget conditional
    expectations), S_E1, S_E2 (gadget gaps); ``size`` = |E(H)|.
    2-spin readings: M1, M2, calA1, calA2, O1, O2; ``size`` = |V(H)|.
    """
    r = readings
    if kind == "potts":
        den = r["S_E1"] - r["S_E2"]
        if abs(den) <= threshold:
            raise GapTooSmall("susceptibility gaps of the two edge gadgets coincide")
        core = ((r["S1"] - r["S2"]) - size * (r["A_E1"] - r["A_E2"])) / den
        return (core - eff.A1 * size) / (eff.A0 - eff.A1)
    den = r["O1"] - r["O2"]
    if abs(den) <= threshold:
        raise GapTooSmall("observable gaps of the two field gadgets coincide")
    core = ((r["M1"] - r["M2"]) - size * (r["calA1"] - r["calA2"])) / den
    return (core - eff.q_minus * size) / (eff.q_plus - eff.q_minus)


@_precise
def potts_forward(S_H, eff: EffectiveParams, A_E, S_E, common, n_edges: int):
    """Composite susceptibility predicted with zero gadget error."""
    return A_E * n_edges + common + S_E * ((eff.A0 - eff.A1) * S_H + eff.A1 * n_edges)


@_precise
def twospin_forward(M_H, eff: EffectiveParams, calA, O, common, n_vertices: int):
    return calA * n_vertices + common + O * ((eff.q_plus - eff.q_minus) * M_H + eff.q_minus * n_vertices)


# ------------------------------------------------------------------ idealized phase marginals

@dataclass
class PhaseMarginalCheck:
    deviation: object
    sensitivity_bound: object
    phase_vectors: int
    effective: EffectiveParams

    @property
    def within_bound(self) -> bool:
        with mpmath.workdps(DPS):
            return _mp(self.deviation) <= _mp(self.sensitivity_bound)


def _edge_weight_table(gad: EdgeGadget, model: Potts):
    """Pinned two-port partition functions Z(a, b), normalised by Z(0, 1)."""
    g, (a, b) = gad.graph, gad.ports
    z = [[partition_function(g, model, PinSet({a: i, b: j})) for j in range(model.q)] for i in range(model.q)]
    ref = z[0][1]
    return [[x / ref for x in row] for row in z]


def _root_weight(fg: FieldGadget, model: TwoSpin):
    """Weight of root spin s relative to s = 0, excluding the root's own activity."""
    g, r = fg.graph, fg.root
    z0 = partition_function(g, model, PinSet({r: 0}))
    z1 = partition_function(g, model, PinSet({r: 1}))
    return [Fraction(1), z1 / z0 / model.lam]


def _lift_table(rows, like):
    if all(isinstance(x, Fraction) for x in like):
        return rows
    return [[_mp(x) for x in row] for row in rows]


@_precise
def idealized_phase_marginal_check(model, H: Multigraph, bundle, ell, bias, law_bias=None, swap: bool = False, max_vertices: int = 12) -> PhaseMarginalCheck:
    """Phase-vector law of the composite under ideal product port laws, against the effective model on H.

    Connection factors are summed explicitly over the port laws with the
    gadgets' pinned partition functions. With ``law_bias`` the port laws use a
    perturbed bias while the effective parameters keep ``bias``; the returned
    sensitivity bound then caps the deviation.
    """
    _check_host(H)
    if H.n > max_vertices:
        raise ValueError(f"H has {H.n} vertices; the phase enumeration budget is {max_vertices}")
    law_bias = bias if law_bias is None else law_bias
    eff = effective_params(model, bundle, ell, bias, swap)
    if isinstance(model, Potts):
        q = model.q
        labels = list(range(q))

        def laws(pb):
            (pb,) = _unify(pb)
            return [[pb if a == i else (1 - pb) / (q - 1) for a in range(q)] for i in labels]

        tables = [(_edge_weight_table(bundle.path, model), int(ell)), (_edge_weight_table(bundle.edge, model), 1)]

        def edge_factor(L):
            out = [[1] * q for _ in labels]
            for z, times in tables:
                z = _lift_table(z, L[0])
                for i in labels:
                    for j in labels:
                        s = sum(L[i][a] * L[j][b] * z[a][b] for a in range(q) for b in range(q))
                        out[i][j] = out[i][j] * s**times
            return out

        def vertex_factor(L):
            return [1] * q

        target = lambda Y: eff.beta_hat ** sum(1 for u, v in H.edges if Y[u] == Y[v])
    else:
        labels = [0, 1]  # 0 is '+'
        K = ((model.beta, 1), (1, model.gamma))
        on_plus, on_minus = (bundle.T_minus, bundle.T_plus) if swap else (bundle.T_plus, bundle.T_minus)
        lp, lm = ell
        wT, wp, wm = _root_weight(bundle.T, model), _root_weight(on_plus, model), _root_weight(on_minus, model)

        def laws(qb):
            qp, qm = _unify(*qb)
            plus_side = [(1 - qp, qp), (1 - qm, qm)]  # law of a plus port in phase +, -
            minus_side = [(1 - qm, qm), (1 - qp, qp)]
            return plus_side, minus_side

        def pair(la, lb):
            (k00, k01), (k10, k11) = [_unify(*row) if isinstance(la[0], Fraction) else tuple(_mp(x) for x in row) for row in K]
            return la[0] * lb[0] * k00 + la[0] * lb[1] * k01 + la[1] * lb[0] * k10 + la[1] * lb[1] * k11

        def edge_factor(L):
            ps, ms = L
            return [[pair(ps[i], ps[j]) * pair(ms[i], ms[j]) for j in labels] for i in labels]

        def vertex_factor(L):
            ps, ms = L
            out = []
            for i in labels:
                conv = lambda w: [x if isinstance(ps[i][0], Fraction) else _mp(x) for x in w]
                a, b, c = conv(wT), conv(wp), conv(wm)
                f = (ps[i][0] * a[0] + ps[i][1] * a[1]) * (ps[i][0] * b[0] + ps[i][1] * b[1]) ** lp
                f *= (ms[i][0] * c[0] + ms[i][1] * c[1]) ** lm
                out.append(f)
            return out

        target = lambda Y: eff.alpha ** sum(1 for u, v in H.edges if Y[u] == Y[v]) * eff.lam_hat ** sum(1 for y in Y if y == 0)

    L = laws(law_bias)
    ef, vf = edge_factor(L), vertex_factor(L)
    weights, targets = [], []
    for Y in itertools.product(labels, repeat=H.n):
        w = 1
        for v in range(H.n):
            w = w * vf[Y[v]]
        for u, v in H.edges:
            w = w * ef[Y[u]][Y[v]]
        weights.append(w)
        targets.append(target(Y))
    if any(not isinstance(x, Fraction) for x in weights + targets):
        weights = [_mp(x) for x in weights]
        targets = [_mp(x) for x in targets]
    zw, zt = sum(weights), sum(targets)
    dev = max(abs((w / zw) / (t / zt) - 1) for w, t in zip(weights, targets))
    bound = Fraction(0)
    if law_bias is not bias:
        L0 = laws(bias)
        ef0, vf0 = edge_factor(L0), vertex_factor(L0)
        spread = 1
        cells = [(ef[i][j], ef0[i][j]) for i in labels for j in labels]
        ratios = [_mp(a) / _mp(b) for a, b in cells]
        spread = (max(ratios) / min(ratios)) ** H.m
        vr = [_mp(a) / _mp(b) for a, b in zip(vf, vf0)]
        spread *= (max(vr) / min(vr)) ** H.n
        bound = spread - 1
    return PhaseMarginalCheck(dev, bound, len(weights), eff)


# ------------------------------------------------------------------ perturbation

@dataclass(frozen=True)
class PerturbationResult:
    bound: Fraction
    measured: Fraction

    @property
    def holds(self) -> bool:
        return self.measured <= self.bound


def perturbation_bound(model, H: Multigraph, F: Subgraph | None, pair, S: Sequence[int] = (), obs: VertexEdgeObservable | None = None) -> PerturbationResult:
    """Worst-case change of an observable on F when activities move.

    Potts: edges of F keep the model's beta, edges outside F switch from
    beta0 to beta1 (``pair``). 2-spin: vertices in S switch from lambda1 to
    lambda2, the rest keep the model's lambda; the observable is ``obs`` on F.
    """
    F = F or Subgraph.whole(H)
    if isinstance(model, Potts):
        b0, b1 = (Fraction(x) for x in pair)
        outside = [i for i in range(H.m) if i not in F.edges]
        g0 = H.with_edge_activity({i: b0 for i in outside})
        g1 = H.with_edge_activity({i: b1 for i in outside})
        measured = abs(susceptibility(g0, model, F=F) - susceptibility(g1, model, F=F))
        bound = H.m**2 * abs(b0 - b1)
        return PerturbationResult(bound, measured)
    if obs is None:
        raise ValueError("2-spin perturbation needs an observable")
    l1, l2 = (Fraction(x) for x in pair)
    g1 = H.with_vertex_activity({v: l1 for v in S})
    g2 = H.with_vertex_activity({v: l2 for v in S})
    measured = abs(observable_expectation(g2, model, obs, F=F) - observable_expectation(g1, model, obs, F=F))
    K = abs(obs.a) + abs(obs.b) + abs(obs.c)
    bound = 2 * K * (H.n**2 + H.m**2) * abs(l2 / l1 - 1)
    return PerturbationResult(bound, measured)


# ------------------------------------------------------------------ planning

@dataclass
class ReductionPlan:
    """A concrete desk-scale plan plus the worst-case prescriptions it replaces.

    ``items`` is an ordered record of every choice; ``to_text`` renders it as
    key=value lines, deterministically.
    """

    kind: str
    items: dict
    bundle: object
    pair: tuple
    ell: object
    swap: bool
    effective: EffectiveParams

    def to_text(self) -> str:
        from .rational import fmt_value

        return "".join(f"{k}={fmt_value(v)}\n" for k, v in self.items.items())


def _smallest_ell(base, step, target, at_least: bool, limit: int):
    """Smallest ell >= 1 with base*step^ell crossing target (>, or <= when not at_least)."""
    cross = (lambda v: v > target) if at_least else (lambda v: v <= target)
    val = base
    for ell in range(1, limit + 1):
        val = val * step
        if cross(val):
            return ell, val
    raise ValueError(f"no ell <= {limit} reaches the target")


def _ceil_big(x) -> int:
    return int(mpmath.ceil(x))


@_precise
def plan_potts(
    model: Potts,
    delta: int,
    H: Multigraph,
    target,
    eta=Fraction(1, 10),
    pair=None,
    pair_r=Fraction(1, 100),
    gap_min=Fraction(1, 1000),
    path_r=None,
    tau=None,
    lib_delta=Fraction(1, 4),
    max_extend: int = 60,
    max_ell: int = 100_000,
) -> ReductionPlan:
    """Pick gadgets and ell so that the effective interaction first exceeds ``target``.

    Edge-gadget pairs whose own factor already reaches the target are pushed
    towards interaction 1 by repeated single-child composition.
    """
    from .criticality import potts_port_bias
    from .gadgets.core import build_path, compose_edge
    from .gadgets.library import search_gadget_pair

    target = Fraction(target)
    if target <= 1:
        raise ValueError("target effective interaction must exceed 1")
    _check_host(H)
    bias = potts_port_bias(model.q, delta, model.beta)  # raises below criticality
    p = bias.value
    r0, r1 = collision_probabilities(model.q, p)
    if pair is None:
        found = search_gadget_pair(model, pair_r, gap_min, tau=tau, delta=lib_delta)
        pair = (found.first, found.second)
    e1, e2 = pair
    ext = 0
    while potts_factor(e1.B, r0, r1) >= target:
        if ext >= max_extend:
            raise ValueError("edge gadgets stay too strong for the target after extension")
        e1 = compose_edge([e1], model, verify=False)[0]
        e2 = compose_edge([e2], model, verify=False)[0]
        ext += 1
    if path_r is None:
        path_r = min(Fraction(1, 4), (target - 1) / 2)
    path = build_path(path_r, model).gadget
    fe = potts_factor(e1.B, r0, r1)
    fp = potts_factor(path.B, r0, r1)
    ell, achieved = _smallest_ell(fe, fp, target, True, max_ell)
    prev = fe * fp ** (ell - 1)
    eff1 = potts_effective(model.q, p, e1.B, path.B, ell)
    eff2 = potts_effective(model.q, p, e2.B, path.B, ell)
    nE = H.m
    eps = Fraction(eta) / nE**5
    beta0 = (1 + target) / 2
    delta_c = _mp(beta0 - 1) / (_mp(r0) - _mp(beta0) * _mp(r1))
    B = _mp(e1.B)
    t_prescribed = _ceil_big((nE * mpmath.log(_mp(target)) / (_mp(eps) * delta_c * (B - 1))) ** 4) if B > 1 else None
    r_prescribed = _mp(eps) ** 4 / (10 * delta_c * (_mp(r0) - _mp(r1)) * _mp(beta0))
    items = {
        "kind": "potts", "q": model.q, "Delta": delta, "beta": model.beta, "target": target, "eta": Fraction(eta),
        "H_vertices": H.n, "H_edges": nE,
        "p": p, "R0": r0, "R1": r1,
        "edge1": e1.recipe, "edge2": e2.recipe, "edge_extensions": ext,
        "B_E1": e1.B, "B_E2": e2.B, "S_E1": e1.S, "S_E2": e2.S, "A_E1": e1.A, "A_E2": e2.A,
        "path": path.recipe, "path_edges": path.length, "B_P": path.B,
        "ell": ell, "crossing_value": achieved, "crossing_value_ell_minus_1": prev,
        "ell_minimal": ell == 1 or not prev > target,
        "beta_hat_1": eff1.beta_hat, "beta_hat_2": eff2.beta_hat,
        "A0": eff1.A0, "A1": eff1.A1,
        "t_desk": 3 * (ell + 1),
        "prescribed_eps": eps, "prescribed_beta0": beta0, "prescribed_delta": delta_c,
        "prescribed_t": t_prescribed if t_prescribed is not None else "undefined", "prescribed_r": r_prescribed,
        "oracle_calls": "S(H1);S(H2);S(E1);S(E2);S(E1/ports merged);S(E2/ports merged)",
    }
    return ReductionPlan("potts", items, PottsBundle(e1, path), (e1, e2), ell, False, eff1)


@_precise
def plan_twospin(
    model: TwoSpin,
    delta: int,
    H: Multigraph,
    target,
    obs: VertexEdgeObservable,
    eta=Fraction(1, 10),
    pair=None,
    pm=None,
    pair_r=Fraction(1, 100),
    gap_min=Fraction(1, 1000),
    tau=None,
    lib_delta=Fraction(1, 4),
    max_ell: int = 100_000,
) -> ReductionPlan:
    """Pick field gadgets and ell so that the effective field crosses ``target``.

    T+ and T- default to the library members with the largest and smallest
    effective field. When the observable pair alone overshoots (Lam_hat < 1)
    their roles swap.
    """
    from .criticality import twospin_branch_marginals
    from .gadgets.library import build_dense_library, search_gadget_pair

    target = Fraction(target)
    if target <= 0:
        raise ValueError("target effective field must be positive")
    _check_host(H)
    bm = twospin_branch_marginals(model.beta, model.gamma, model.lam, delta)
    qp, qm = bm.q_plus, bm.q_minus
    lib = None
    if pair is None or pm is None:
        tau_ = Fraction(1, 20) if tau is None else tau
        lib = build_dense_library(model, tau_, lib_delta, obs)
    if pair is None:
        found = search_gadget_pair(model, pair_r, gap_min, obs, lib=lib)
        pair = (found.first, found.second)
    if pm is None:
        members = sorted((m for m in lib.members if m.op != "degenerate"), key=lambda g: (g.R, g.size, g.recipe))
        pm = (members[-1], members[0])
    t1, t2 = pair
    tp, tm = pm
    if not tp.R > tm.R:
        raise ValueError("need R(T+) > R(T-)")
    fR = field_factor(t1.R, qp, qm)
    fp, fm = field_factor(tp.R, qp, qm), field_factor(tm.R, qp, qm)
    Lam = _mp(target) / fR
    swap = Lam < 1
    step = fm / fp if swap else fp / fm
    ell, achieved = _smallest_ell(fR, step, _mp(target), not swap, max_ell)
    prev = fR * step ** (ell - 1)
    tgt = _mp(target)
    minimal = ell == 1 or not (_mp(prev) <= tgt if swap else _mp(prev) > tgt)
    eff1 = twospin_effective(model, qp, qm, t1.R, tp.R, tm.R, ell, ell, swap)
    eff2 = twospin_effective(model, qp, qm, t2.R, tp.R, tm.R, ell, ell, swap)
    nV = H.n
    eps = Fraction(eta) / nV**8
    r_tilde = _mp(tp.R)
    items = {
        "kind": "twospin", "beta": model.beta, "gamma": model.gamma, "lam": model.lam, "Delta": delta,
        "obs": f"{obs.a},{obs.b},{obs.c}", "target": target, "eta": Fraction(eta),
        "H_vertices": nV, "H_edges": H.m,
        "q_plus": qp, "q_minus": qm, "alpha": eff1.alpha,
        "T1": t1.recipe, "T2": t2.recipe, "R1": t1.R, "R2": t2.R, "O1": t1.O, "O2": t2.O,
        "T_plus": tp.recipe, "T_minus": tm.recipe, "R_plus": tp.R, "R_minus": tm.R,
        "Lam_hat": Lam, "swap": swap,
        "ell": ell, "crossing_value": achieved, "crossing_value_ell_minus_1": prev, "ell_minimal": minimal,
        "lam_hat_1": eff1.lam_hat, "lam_hat_2": eff2.lam_hat,
        "t_desk": 5 + ell,
        "prescribed_eps": eps,
        "prescribed_t": _ceil_big((nV**2 * abs(mpmath.log(_mp(target))) / _mp(eps)) ** 6),
        "prescribed_r": abs(r_tilde - 1) * _mp(eps) ** 4 / 10,
        "oracle_calls": "O(H1);O(H2)",
    }
    return ReductionPlan("twospin", items, FieldBundle(t1, tp, tm), (t1, t2), (ell, ell), swap, eff1)


def plan_reduction(model, delta: int, H: Multigraph, target, eta=Fraction(1, 10), obs=None, **kw) -> ReductionPlan:
    if isinstance(model, Potts):
        return plan_potts(model, delta, H, target, eta, **kw)
    if obs is None:
        raise ValueError("2-spin plans need a vertex-edge observable")
    return plan_twospin(model, delta, H, target, obs, eta, **kw)
