"""Near-regular bipartite phase gadgets: generation, phase labels, assessment, ideal port laws.

Vertex layout of a gadget with parameters (n, t, Delta): the left side is
0..n+t-1 and the right side n+t..2(n+t)-1; on each side the first n vertices
are interior (degree Delta) and the last t are ports (degree Delta-1).
For 2-spin models the left side plays the role of the "+" side.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .exact import BUDGET, BudgetExceeded
from .graph import Multigraph
from .models import Potts, TwoSpin
from .samplers import batch_means_se, glauber_run, make_rng, spawn_seeds


@dataclass(frozen=True)
class PhaseGadget:
    graph: Multigraph
    n: int
    t: int
    delta: int

    @property
    def left(self) -> range:
        return range(0, self.n + self.t)

    @property
    def right(self) -> range:
        return range(self.n + self.t, 2 * (self.n + self.t))

    @property
    def interior_plus(self) -> list[int]:
        return list(range(0, self.n))

    @property
    def interior_minus(self) -> list[int]:
        off = self.n + self.t
        return list(range(off, off + self.n))

    @property
    def interior(self) -> list[int]:
        return self.interior_plus + self.interior_minus

    @property
    def ports_plus(self) -> list[int]:
        return list(range(self.n, self.n + self.t))

    @property
    def ports_minus(self) -> list[int]:
        off = self.n + self.t
        return list(range(off + self.n, off + self.n + self.t))

    @property
    def ports(self) -> list[int]:
        return self.ports_plus + self.ports_minus

    def audit(self) -> None:
        g = self.graph
        if not g.is_simple():
            raise AssertionError("phase gadget has parallel edges")
        left = set(self.left)
        for u, v in g.edges:
            if (u in left) == (v in left):
                raise AssertionError("edge inside one side")
        deg = g.degrees()
        for v in self.interior:
            if deg[v] != self.delta:
                raise AssertionError(f"interior vertex {v} has degree {deg[v]}")
        for v in self.ports:
            if deg[v] != self.delta - 1:
                raise AssertionError(f"port {v} has degree {deg[v]}")


def _gale_ryser(a: Sequence[int], b: Sequence[int]) -> bool:
    if sum(a) != sum(b):
        return False
    a = sorted(a, reverse=True)
    for k in range(1, len(a) + 1):
        if sum(a[:k]) > sum(min(x, k) for x in b):
            return False
    return True


def sample_phase_gadget(n: int, t: int, delta: int, seed: int, max_tries: int = 100_000) -> PhaseGadget:
    """Bipartite configuration-model sample, rejected until simple."""
    if n < 0 or t < 0 or delta < 2 or n + t == 0:
        raise ValueError("need n, t >= 0 with n + t > 0 and delta >= 2")
    degs = [delta] * n + [delta - 1] * t
    if not _gale_ryser(degs, degs):
        raise ValueError(f"degree sequence (n={n}, t={t}, delta={delta}) has no simple bipartite realisation")
    side = n + t
    stubs = np.repeat(np.arange(side), degs)
    rng = make_rng(seed)
    for _ in range(max_tries):
        perm = rng.permutation(stubs)
        pairs = set()
        ok = True
        for u, v in zip(stubs.tolist(), perm.tolist()):
            if (u, v) in pairs:
                ok = False
                break
            pairs.add((u, v))
        if ok:
            edges = tuple(sorted((u, side + v) for u, v in pairs))
            gad = PhaseGadget(Multigraph(2 * side, edges), n, t, delta)
            gad.audit()
            return gad
    raise RuntimeError(f"rejection budget of {max_tries} exhausted without a simple sample")


def phase_from_counts(counts: Sequence[int], rng: np.random.Generator | None = None) -> int:
    """argmax with uniform seeded tie-breaking."""
    top = max(counts)
    winners = [i for i, c in enumerate(counts) if c == top]
    if len(winners) == 1:
        return winners[0]
    rng = rng or make_rng(0)
    return winners[int(rng.integers(len(winners)))]


def phase_of(gadget: PhaseGadget, sigma: Sequence[int], model, rng=None):
    """Potts: majority colour on the interior. 2-spin: '+' if the plus interior holds more 1s."""
    if isinstance(model, Potts):
        counts = [0] * model.q
        for v in gadget.interior:
            counts[sigma[v]] += 1
        return phase_from_counts(counts, rng)
    plus = sum(sigma[v] for v in gadget.interior_plus)
    minus = sum(sigma[v] for v in gadget.interior_minus)
    return "+-"[phase_from_counts([plus, minus], rng)]


# ------------------------------------------------------------------ ideal laws

@dataclass(frozen=True)
class ProductLaw:
    """Independent per-port laws; ``marginals[k][s]`` is P(port k has spin s)."""

    ports: tuple[int, ...]
    marginals: tuple[tuple, ...]

    def prob(self, tau: Sequence[int]):
        out = 1
        for m, s in zip(self.marginals, tau):
            out = out * m[s]
        return out

    def support(self):
        return itertools.product(*(range(len(m)) for m in self.marginals))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cols = []
        for m in self.marginals:
            p = np.array([float(x) for x in m])
            cols.append(rng.choice(len(m), size=size, p=p / p.sum()))
        return np.stack(cols, axis=1) if cols else np.zeros((size, 0), dtype=int)


def ideal_port_distribution(model, phase, ports, bias) -> ProductLaw:
    """Product law of the ports in a given phase.

    Potts: ``ports`` is a list, ``bias`` is p; own colour has probability p and
    each other colour (1-p)/(q-1). 2-spin: ``ports`` is (plus_ports,
    minus_ports), ``bias`` is (q_plus, q_minus); in phase '+' plus ports are
    occupied with probability q_plus and minus ports with q_minus, swapped in
    phase '-'.
    """
    if isinstance(model, Potts):
        q = model.q
        p = bias
        if not (Fraction(1, q) < p < 1 if isinstance(p, Fraction) else mpmath.mpf(1) / q < p < 1):
            raise ValueError("port bias p must lie in (1/q, 1)")
        other = (1 - p) / (q - 1)
        law = tuple(p if c == phase else other for c in range(q))
        ports = tuple(ports)
        return ProductLaw(ports, tuple(law for _ in ports))
    qp, qm = bias
    if not (0 < qm < qp < 1):
        raise ValueError("need 0 < q_minus < q_plus < 1")
    plus, minus = ports
    hi, lo = (qp, qm) if phase == "+" else (qm, qp)
    margs = [(1 - hi, hi) for _ in plus] + [(1 - lo, lo) for _ in minus]
    return ProductLaw(tuple(plus) + tuple(minus), tuple(margs))


# ------------------------------------------------------------------ assessment

@dataclass
class PhaseAssessment:
    eps_balance: object
    eps_port: object
    phase_probs: dict
    mode: str
    se_balance: float | None = None
    se_port: float | None = None
    samples: int | None = None


def _labels(model):
    return list(range(model.q)) if isinstance(model, Potts) else ["+", "-"]


def _exact_joint(gadget: PhaseGadget, model):
    """Exact mu(Y = i, sigma_W = tau) with ties split evenly, as Fractions."""
    g = gadget.graph
    s = model.spins
    total = s**g.n
    if total > BUDGET.max_configs(model):
        raise BudgetExceeded(f"{total} configurations exceed the enumeration budget")
    labels = _labels(model)
    ports = gadget.ports
    eu = np.array([u for u, _ in g.edges])
    ev = np.array([v for _, v in g.edges])
    hist = defaultdict(int)
    chunk = 1 << 16
    powers = s ** np.arange(g.n, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        sig = ((idx[:, None] // powers[None, :]) % s).astype(np.int8)
        same = sig[:, eu] == sig[:, ev]
        if isinstance(model, Potts):
            stat = same.sum(axis=1)[:, None]
            counts = np.stack([(sig[:, gadget.interior] == c).sum(axis=1) for c in range(s)], axis=1)
        else:
            a = sig[:, eu]
            stat = np.stack([(sig == 1).sum(axis=1), (same & (a == 0)).sum(axis=1), (same & (a == 1)).sum(axis=1)], axis=1)
            counts = np.stack([sig[:, gadget.interior_plus].sum(axis=1), sig[:, gadget.interior_minus].sum(axis=1)], axis=1)
        top = counts.max(axis=1, keepdims=True)
        mask = (counts == top) @ (1 << np.arange(counts.shape[1]))
        port_code = (sig[:, ports].astype(np.int64) * (s ** np.arange(len(ports), dtype=np.int64))).sum(axis=1) if ports else np.zeros(len(idx), dtype=np.int64)
        key = np.concatenate([stat, mask[:, None], port_code[:, None]], axis=1)
        rows, cnt = np.unique(key, axis=0, return_counts=True)
        for row, c in zip(rows.tolist(), cnt.tolist()):
            hist[tuple(row)] += c
    joint = defaultdict(Fraction)
    Z = Fraction(0)
    for row, c in hist.items():
        if isinstance(model, Potts):
            w = model.beta ** row[0]
            mask, code = row[1], row[2]
        else:
            w = model.lam ** row[0] * model.beta ** row[1] * model.gamma ** row[2]
            mask, code = row[3], row[4]
        w *= c
        Z += w
        winners = [i for i in range(len(labels)) if mask >> i & 1]
        tau = tuple((code // s**k) % s for k in range(len(ports)))
        for i in winners:
            joint[(labels[i], tau)] += w / len(winners)
    return {k: v / Z for k, v in joint.items()}


def _laws(gadget, model, bias):
    if isinstance(model, Potts):
        return {i: ideal_port_distribution(model, i, gadget.ports, bias) for i in _labels(model)}
    return {i: ideal_port_distribution(model, i, (gadget.ports_plus, gadget.ports_minus), bias) for i in _labels(model)}


def _num(x, like):
    if isinstance(x, Fraction) and not isinstance(like, (Fraction, int)):
        return mpmath.mpf(x.numerator) / x.denominator
    return x


def _as_mp(x):
    return mpmath.mpf(x.numerator) / x.denominator if isinstance(x, Fraction) else x


def _eps(joint, labels, laws, spins, nports):
    exact = all(isinstance(v, Fraction) for v in joint.values())
    zero = Fraction(0) if exact else 0.0
    share = Fraction(1, len(labels)) if exact else 1 / len(labels)
    probs = {i: sum((v for (j, _), v in joint.items() if j == i), zero) for i in labels}
    eps_bal = max(abs(probs[i] - share) for i in labels)
    eps_port = zero
    arg = None
    for i in labels:
        if probs[i] == 0:
            continue
        for tau in itertools.product(range(spins), repeat=nports):
            cond = joint.get((i, tau), zero) / probs[i]
            q = laws[i].prob(tau)
            dev = abs(_num(cond, q) / q - 1)
            if _as_mp(dev) > _as_mp(eps_port):
                eps_port, arg = dev, (i, tau)
    return probs, eps_bal, eps_port, arg


def default_bias(model, delta: int):
    from .criticality import potts_port_bias, twospin_branch_marginals

    if isinstance(model, Potts):
        return potts_port_bias(model.q, delta, model.beta).value
    bm = twospin_branch_marginals(model.beta, model.gamma, model.lam, delta)
    return (bm.q_plus, bm.q_minus)


def assess_phase_gadget(
    gadget: PhaseGadget,
    model,
    mode: str = "exact",
    samples: int = 0,
    seed: int = 0,
    burn_in: int = 2000,
    thinning: int | None = None,
    bias=None,
) -> PhaseAssessment:
    """Balance of the phases and closeness of port laws to the ideal product laws."""
    bias = default_bias(model, gadget.delta) if bias is None else bias
    labels = _labels(model)
    laws = _laws(gadget, model, bias)
    nports = len(gadget.ports)
    if mode == "exact":
        joint = _exact_joint(gadget, model)
        probs, eb, ep, _ = _eps(joint, labels, laws, model.spins, nports)
        return PhaseAssessment(eb, ep, probs, "exact")
    if mode != "mc":
        raise ValueError("mode must be 'exact' or 'mc'")
    if samples <= 0:
        raise ValueError("MC assessment needs a positive number of samples")
    chain_seed, tie_seed = spawn_seeds(seed, 2)
    tie_rng = make_rng(tie_seed)
    thinning = thinning or gadget.graph.n
    state = glauber_run(model, gadget.graph, burn_in, seed=chain_seed)
    ys, taus = [], []
    ports = gadget.ports
    for _ in range(samples):
        glauber_run(model, gadget.graph, thinning, state=state)
        ys.append(phase_of(gadget, state.config, model, tie_rng))
        taus.append(tuple(state.config[v] for v in ports))
    joint = defaultdict(float)
    for y, tau in zip(ys, taus):
        joint[(y, tau)] += 1.0 / samples
    probs, eb, ep, arg = _eps(dict(joint), labels, laws, model.spins, nports)
    # standard errors of the maximising components by batch means
    i_bal = max(labels, key=lambda i: abs(probs[i] - 1 / len(labels)))
    se_b = batch_means_se([1.0 if y == i_bal else 0.0 for y in ys])
    se_p = float("nan")
    if arg is not None:
        i, tau = arg
        ind_y = np.array([1.0 if y == i else 0.0 for y in ys])
        ind_both = np.array([1.0 if (y == i and t == tau) else 0.0 for y, t in zip(ys, taus)])
        nb = max(2, min(50, int(math.sqrt(samples))))
        size = samples // nb
        ratios = []
        for k in range(nb):
            sl = slice(k * size, (k + 1) * size)
            den = ind_y[sl].sum()
            if den > 0:
                ratios.append(ind_both[sl].sum() / den)
        if len(ratios) >= 2:
            se_p = float(np.std(ratios, ddof=1) / math.sqrt(len(ratios)) / float(laws[i].prob(tau)))
    return PhaseAssessment(eb, ep, probs, "mc", se_b, se_p, samples)


# ------------------------------------------------------------------ files

_HEADER = "# phase-gadget n={n} t={t} delta={delta}\n"


def write_phase_gadget(gadget: PhaseGadget, path: str) -> None:
    from .graph import write_graph_text

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_HEADER.format(n=gadget.n, t=gadget.t, delta=gadget.delta))
        fh.write(write_graph_text(gadget.graph))


def read_phase_gadget(path: str, n: int | None = None, t: int | None = None, delta: int | None = None) -> PhaseGadget:
    """Read a gadget file; the layout comes from the header comment unless given explicitly."""
    import re

    from .graph import parse_graph_text
    from .rational import ParseError

    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    m = re.match(r"#\s*phase-gadget\s+n=(\d+)\s+t=(\d+)\s+delta=(\d+)", text)
    if m:
        n = int(m.group(1)) if n is None else n
        t = int(m.group(2)) if t is None else t
        delta = int(m.group(3)) if delta is None else delta
    if None in (n, t, delta):
        raise ParseError("phase-gadget layout (n, t, delta) missing from header and arguments", f"{path}:1")
    gad = PhaseGadget(parse_graph_text(text, path), n, t, delta)
    if gad.graph.n != 2 * (n + t):
        raise ParseError(f"graph has {gad.graph.n} vertices, layout needs {2 * (n + t)}", path)
    gad.audit()
    return gad
