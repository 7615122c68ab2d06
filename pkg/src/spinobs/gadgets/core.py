"""Edge-interaction and field gadgets with exact statistics and composition.

Potts colours are 0-based here: "same" means both ports pinned to colour 0,
"different" means ports pinned to colours 0 and 1.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from ..exact import observable_expectation, partition_function
from ..graph import Multigraph, cycle_graph
from ..models import PinSet, Potts, TwoSpin, VertexEdgeObservable
from .recursion import FieldMaps, PottsHats


class RecursionMismatch(AssertionError):
    """Closed-form prediction disagrees with exact computation."""


# ====================================================================== edge gadgets

def edge_gadget_stats(g: Multigraph, port_a: int, port_b: int, model: Potts, allow_isolated: bool = False):
    """(B, S, A) of a two-port graph: interaction ratio, susceptibility gap, E[m | same]."""
    if port_a == port_b:
        raise ValueError("ports must be distinct")
    for p in (port_a, port_b):
        d = g.degree(p)
        if d != 1 and not (allow_isolated and d == 0):
            raise ValueError(f"port {p} has degree {d}, expected 1")
    same = PinSet({port_a: 0, port_b: 0})
    diff = PinSet({port_a: 0, port_b: 1})
    B = partition_function(g, model, same) / partition_function(g, model, diff)
    A = observable_expectation(g, model, "susceptibility", same)
    A_diff = observable_expectation(g, model, "susceptibility", diff)
    return B, A - A_diff, A


@dataclass(frozen=True, eq=False)
class EdgeGadget:
    B: Fraction
    S: Fraction
    A: Fraction
    recipe: str
    op: str  # "edge" | "path" | "compose" | "degenerate" | "graph"
    children: tuple = ()
    length: int = 1
    raw: tuple | None = None  # (graph, port_a, port_b) for op == "graph"

    @functools.cached_property
    def _built(self) -> tuple[Multigraph, int, int]:
        if self.op == "edge":
            return Multigraph(2, ((0, 1),)), 0, 1
        if self.op == "degenerate":
            return Multigraph(2, ()), 0, 1
        if self.op == "path":
            return Multigraph(self.length + 1, tuple((i, i + 1) for i in range(self.length))), 0, self.length
        if self.op == "graph":
            return self.raw
        return _assemble_edge([c._built for c in self.children])

    @property
    def graph(self) -> Multigraph:
        return self._built[0]

    @property
    def ports(self) -> tuple[int, int]:
        return self._built[1], self._built[2]

    @property
    def size(self) -> int:
        return self.graph.n

    def exact_stats(self, model: Potts):
        g, a, b = self._built
        return edge_gadget_stats(g, a, b, model, allow_isolated=self.op == "degenerate")

    def __repr__(self):
        return f"EdgeGadget({self.recipe}, B={self.B})"


def _assemble_edge(parts):
    # rho=0, u=1, v=2, rho'=3; child ports collapse onto u and v
    edges = [(0, 1), (2, 3)]
    n = 4
    for g, pa, pb in parts:
        relabel = {}
        for x in range(g.n):
            if x == pa:
                relabel[x] = 1
            elif x == pb:
                relabel[x] = 2
            else:
                relabel[x] = n
                n += 1
        edges.extend((relabel[u], relabel[v]) for u, v in g.edges)
    return Multigraph(n, tuple(edges)), 0, 3


def single_edge(model: Potts) -> EdgeGadget:
    return EdgeGadget(model.beta, Fraction(1), Fraction(1), "edge", "edge")


def degenerate_edge() -> EdgeGadget:
    """Two isolated ports: B = 1, S = 0. Only meaningful as a composition child."""
    return EdgeGadget(Fraction(1), Fraction(0), Fraction(0), "degenerate", "degenerate")


def edge_from_graph(g: Multigraph, port_a: int, port_b: int, model: Potts, name: str = "graph") -> EdgeGadget:
    B, S, A = edge_gadget_stats(g, port_a, port_b, model)
    return EdgeGadget(B, S, A, name, "graph", raw=(g, port_a, port_b))


def _potts_A(model: Potts, P, children):
    q, b = model.q, model.beta
    sum_same = sum(c.A for c in children)
    sum_diff = sum(c.A - c.S for c in children)
    w1, w2 = b * b * P, (q - 1) * P
    w3, w4 = 2 * (q - 1) * b, (q - 1) * (q - 2)
    num = w1 * (2 + sum_same) + w2 * sum_same + w3 * (1 + sum_diff) + w4 * sum_diff
    return num / (w1 + w2 + w3 + w4)


def compose_edge(children: Sequence[EdgeGadget], model: Potts, verify: bool = True):
    """Join children in parallel between new terminals u, v and add pendant port edges.

    Returns (gadget, (B_predicted, S_predicted)). With ``verify`` the cached
    statistics are recomputed exactly from the assembled graph and must match.
    """
    children = list(children)
    if not children:
        raise ValueError("compose_edge needs at least one child")
    hats = PottsHats.of(model)
    P = Fraction(1)
    for c in children:
        P *= c.B
    B = hats.combine(P)
    S = hats.gap(B, [c.S for c in children])
    A = _potts_A(model, P, children)
    recipe = "composeE(" + ",".join(c.recipe for c in children) + ")"
    out = EdgeGadget(B, S, A, recipe, "compose", tuple(children))
    if verify:
        eB, eS, eA = out.exact_stats(model)
        if (eB, eS, eA) != (B, S, A):
            raise RecursionMismatch(f"{recipe}: predicted {(B, S, A)}, exact {(eB, eS, eA)}")
    return out, (B, S)


def odd_path(length: int, model: Potts) -> EdgeGadget:
    """Path with an odd number of edges, stats from the exact recursion."""
    if length < 1 or length % 2 == 0:
        raise ValueError("path length must be an odd positive integer")
    g = single_edge(model)
    hats = PottsHats.of(model)
    for _ in range((length - 1) // 2):
        g = _extend(g, hats, model)
    return g


@dataclass(frozen=True)
class PathResult:
    gadget: EdgeGadget
    edges: int
    excess: Fraction  # B - 1
    steps: int
    kappa_bound_steps: int
    trace: tuple  # B_l for l = 0..steps


def build_path(r, model: Potts) -> PathResult:
    """Shortest odd path with 0 < B - 1 < r.

    Also reports the step count ceil(log r / log kappa) of the geometric bound.
    """
    import math

    r = Fraction(r)
    if not 0 < r < Fraction(1, 2):
        raise ValueError("r must lie in (0, 1/2)")
    if model.beta <= 1:
        raise ValueError("path construction needs beta > 1")
    hats = PottsHats.of(model)
    g = single_edge(model)
    trace = [g.B]
    steps = 0
    while not (0 < g.B - 1 < r):
        g = _extend(g, hats, model)
        trace.append(g.B)
        steps += 1
        if steps > 10_000:
            raise RuntimeError("path search did not converge")
    kappa = hats.kappa
    bound = math.ceil(math.log(r) / math.log(kappa))
    return PathResult(g, g.length, g.B - 1, steps, bound, tuple(trace))


def _extend(g: EdgeGadget, hats: PottsHats, model: Potts) -> EdgeGadget:
    P = g.B
    B = hats.combine(P)
    return EdgeGadget(B, hats.gap(B, [g.S]), _potts_A(model, P, [g]), f"path {g.length + 2}", "path", length=g.length + 2)


# ====================================================================== field gadgets

def field_gadget_stats(g: Multigraph, root: int, model: TwoSpin, obs: VertexEdgeObservable, allow_isolated: bool = False):
    """(R, O, A): effective field, observable gap (root term removed), E[o | root = 0]."""
    d = g.degree(root)
    if d != 1 and not (allow_isolated and d == 0):
        raise ValueError(f"root {root} has degree {d}, expected 1")
    one, zero = PinSet({root: 1}), PinSet({root: 0})
    lam_root = g.vertex_weight(root, model.lam)
    R = partition_function(g, model, one) / (lam_root * partition_function(g, model, zero))
    A = observable_expectation(g, model, obs, zero)
    A1 = observable_expectation(g, model, obs, one)
    return R, A1 - obs.a - A, A


def _cycle4_ok(model: TwoSpin) -> bool:
    return model.gamma != 1 and model.lam == (1 - model.beta) / (1 - model.gamma)


@dataclass(frozen=True, eq=False)
class FieldGadget:
    R: Fraction
    O: Fraction
    A: Fraction
    recipe: str
    op: str  # "degenerate" | "compose" | "cycle4" | "graph"
    children: tuple = ()
    raw: tuple | None = None

    @functools.cached_property
    def _built(self) -> tuple[Multigraph, int]:
        if self.op == "degenerate":
            return Multigraph(1, ()), 0
        if self.op == "cycle4":
            # root 0 hangs off vertex 1 of the 4-cycle 1-2-3-4
            return Multigraph(5, ((0, 1), (1, 2), (2, 3), (3, 4), (4, 1))), 0
        if self.op == "graph":
            return self.raw
        return _assemble_field([c._built for c in self.children])

    @property
    def graph(self) -> Multigraph:
        return self._built[0]

    @property
    def root(self) -> int:
        return self._built[1]

    @property
    def size(self) -> int:
        return self.graph.n

    def exact_stats(self, model: TwoSpin, obs: VertexEdgeObservable):
        g, r = self._built
        return field_gadget_stats(g, r, model, obs, allow_isolated=self.op == "degenerate")

    def __repr__(self):
        return f"FieldGadget({self.recipe}, R={self.R})"


def _assemble_field(parts):
    # rho=0, u=1; child roots collapse onto u
    edges = [(0, 1)]
    n = 2
    for g, root in parts:
        relabel = {}
        for x in range(g.n):
            if x == root:
                relabel[x] = 1
            else:
                relabel[x] = n
                n += 1
        edges.extend((relabel[a], relabel[b]) for a, b in g.edges)
    return Multigraph(n, tuple(edges)), 0


def degenerate_field() -> FieldGadget:
    return FieldGadget(Fraction(1), Fraction(0), Fraction(0), "degenerate", "degenerate")


def cycle4_field(model: TwoSpin, obs: VertexEdgeObservable) -> FieldGadget:
    """Root attached to a 4-cycle; allowed only when lam = (1 - beta)/(1 - gamma)."""
    if not _cycle4_ok(model):
        raise ValueError("4-cycle leaves are only used when lam = (1-beta)/(1-gamma)")
    proto = FieldGadget(Fraction(0), Fraction(0), Fraction(0), "cycle4", "cycle4")
    R, O, A = proto.exact_stats(model, obs)
    return FieldGadget(R, O, A, "cycle4", "cycle4")


def field_from_graph(g: Multigraph, root: int, model: TwoSpin, obs: VertexEdgeObservable, name="graph") -> FieldGadget:
    R, O, A = field_gadget_stats(g, root, model, obs)
    return FieldGadget(R, O, A, name, "graph", raw=(g, root))


def compose_field(children: Sequence[FieldGadget], model: TwoSpin, obs: VertexEdgeObservable, verify: bool = True):
    """Merge the children's roots into u and hang u below a new root.

    Returns (gadget, (R_predicted, O_predicted)).
    """
    children = list(children)
    if not children:
        raise ValueError("compose_field needs at least one child")
    maps = FieldMaps(model, obs)
    P = Fraction(1)
    for c in children:
        P *= c.R
    R = maps.combine(P)
    O = maps.gap(R, [c.O for c in children])
    den = model.beta + model.lam * P
    A = sum(c.A for c in children) + (model.beta * obs.b + model.lam * P * (obs.a + sum(c.O for c in children))) / den
    recipe = "composeF(" + ",".join(c.recipe for c in children) + ")"
    out = FieldGadget(R, O, A, recipe, "compose", tuple(children))
    if verify:
        exact = out.exact_stats(model, obs)
        if exact != (R, O, A):
            raise RecursionMismatch(f"{recipe}: predicted {(R, O, A)}, exact {exact}")
    return out, (R, O)


# ====================================================================== recipes

_TOKEN = re.compile(r"\s*(composeE|composeF|[A-Za-z_][A-Za-z_0-9]*|\d+|[(),=])")


class RecipeError(ValueError):
    pass


def _tokens(text: str, where: str):
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise RecipeError(f"{where}: unexpected text {text[pos:]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def parse_recipes(text: str, model, obs: VertexEdgeObservable | None = None, verify: bool = True):
    """Evaluate a recipe script; returns (last gadget, dict of named bindings)."""
    env: dict = {}
    last = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        toks = _tokens(line, where)
        name = None
        if len(toks) >= 2 and toks[1] == "=":
            name = toks[0]
            toks = toks[2:]
        val, rest = _parse_expr(toks, env, model, obs, verify, where)
        if rest:
            raise RecipeError(f"{where}: trailing tokens {' '.join(rest)!r}")
        if name:
            env[name] = val
        last = val
    if last is None:
        raise RecipeError("empty recipe")
    return last, env


def _parse_expr(toks, env, model, obs, verify, where):
    if not toks:
        raise RecipeError(f"{where}: expected an expression")
    head, rest = toks[0], toks[1:]
    if head == "edge":
        if not isinstance(model, Potts):
            raise RecipeError(f"{where}: 'edge' is an edge-gadget primitive (Potts)")
        return single_edge(model), rest
    if head == "path":
        if not rest or not rest[0].isdigit():
            raise RecipeError(f"{where}: 'path' needs an odd length")
        k = int(rest[0])
        if k % 2 == 0 or k < 1:
            raise RecipeError(f"{where}: path length must be odd")
        return odd_path(k, model), rest[1:]
    if head == "degenerate":
        return (degenerate_edge() if isinstance(model, Potts) else degenerate_field()), rest
    if head == "cycle4":
        return cycle4_field(model, obs), rest
    if head in ("composeE", "composeF"):
        if not rest or rest[0] != "(":
            raise RecipeError(f"{where}: expected '(' after {head}")
        rest = rest[1:]
        args = []
        while True:
            val, rest = _parse_expr(rest, env, model, obs, verify, where)
            args.append(val)
            if not rest:
                raise RecipeError(f"{where}: unclosed '('")
            if rest[0] == ")":
                rest = rest[1:]
                break
            if rest[0] != ",":
                raise RecipeError(f"{where}: expected ',' or ')'")
            rest = rest[1:]
        if head == "composeE":
            if not isinstance(model, Potts):
                raise RecipeError(f"{where}: composeE needs a Potts model")
            return compose_edge(args, model, verify)[0], rest
        if not isinstance(model, TwoSpin):
            raise RecipeError(f"{where}: composeF needs a 2-spin model")
        return compose_field(args, model, obs, verify)[0], rest
    if head in env:
        return env[head], rest
    raise RecipeError(f"{where}: unknown name {head!r}")
