"""Multigraph container, subgraph selectors, small graph builders and the edge-list file format.

File format: the first line is ``n m``; then ``m`` lines ``u v [activity]`` with
0-based endpoints; then an optional block of ``V u activity`` lines giving
per-vertex activities. Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .rational import ParseError, as_fraction, fmt_rational, parse_rational


@dataclass(frozen=True)
class Multigraph:
    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    edge_activity: Mapping[int, Fraction] | None = None
    vertex_activity: Mapping[int, Fraction] | None = None

    def __post_init__(self):
        n = self.vertex_count
        if n < 0:
            raise ValueError("vertex_count must be nonnegative")
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        for i, (u, v) in enumerate(edges):
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge {i} = ({u},{v}) has an endpoint out of range 0..{n - 1}")
            if u == v:
                raise ValueError(f"edge {i} = ({u},{v}) is a self-loop")
        object.__setattr__(self, "edges", edges)
        if self.edge_activity is not None:
            act = {int(k): as_fraction(x) for k, x in dict(self.edge_activity).items()}
            for k in act:
                if not 0 <= k < len(edges):
                    raise ValueError(f"edge activity given for unknown edge index {k}")
            object.__setattr__(self, "edge_activity", act or None)
        if self.vertex_activity is not None:
            act = {int(k): as_fraction(x) for k, x in dict(self.vertex_activity).items()}
            for k in act:
                if not 0 <= k < n:
                    raise ValueError(f"vertex activity given for unknown vertex {k}")
            object.__setattr__(self, "vertex_activity", act or None)

    @property
    def n(self) -> int:
        return self.vertex_count

    @property
    def m(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return sum((u == v) + (w == v) for u, w in self.edges)

    def degrees(self) -> list[int]:
        deg = [0] * self.vertex_count
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per vertex, the list of (neighbour, edge index) pairs."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.vertex_count)]
        for i, (u, v) in enumerate(self.edges):
            adj[u].append((v, i))
            adj[v].append((u, i))
        return adj

    def to_networkx(self) -> nx.MultiGraph:
        g = nx.MultiGraph()
        g.add_nodes_from(range(self.vertex_count))
        g.add_edges_from(self.edges)
        return g

    def is_connected(self) -> bool:
        return self.vertex_count == 0 or nx.is_connected(self.to_networkx())

    def bipartition(self) -> list[int] | None:
        """A proper 2-colouring (0/1 per vertex) or None if not bipartite."""
        colour = [-1] * self.vertex_count
        adj = self.adjacency()
        for s in range(self.vertex_count):
            if colour[s] >= 0:
                continue
            colour[s] = 0
            stack = [s]
            while stack:
                x = stack.pop()
                for y, _ in adj[x]:
                    if colour[y] < 0:
                        colour[y] = 1 - colour[x]
                        stack.append(y)
                    elif colour[y] == colour[x]:
                        return None
        return colour

    def is_bipartite(self) -> bool:
        return self.bipartition() is not None

    def is_simple(self) -> bool:
        seen = set()
        for u, v in self.edges:
            key = (min(u, v), max(u, v))
            if key in seen:
                return False
            seen.add(key)
        return True

    def edge_weight(self, i: int, default: Fraction) -> Fraction:
        if self.edge_activity and i in self.edge_activity:
            return self.edge_activity[i]
        return default

    def vertex_weight(self, v: int, default: Fraction) -> Fraction:
        if self.vertex_activity and v in self.vertex_activity:
            return self.vertex_activity[v]
        return default

    def with_edge_activity(self, act: Mapping[int, Fraction] | None) -> "Multigraph":
        return Multigraph(self.vertex_count, self.edges, act, self.vertex_activity)

    def with_vertex_activity(self, act: Mapping[int, Fraction] | None) -> "Multigraph":
        return Multigraph(self.vertex_count, self.edges, self.edge_activity, act)

    def canonical_text(self) -> str:
        return write_graph_text(self)


@dataclass(frozen=True)
class Subgraph:
    """A subgraph given by a vertex set and a set of edge indices of the host graph.

    Edges listed must have both endpoints among ``vertices``.
    """

    vertices: frozenset[int]
    edges: frozenset[int]

    @staticmethod
    def whole(g: Multigraph) -> "Subgraph":
        return Subgraph(frozenset(range(g.n)), frozenset(range(g.m)))

    @staticmethod
    def from_edges(g: Multigraph, edge_ids: Iterable[int], spanning: bool = False) -> "Subgraph":
        ids = frozenset(int(i) for i in edge_ids)
        if spanning:
            verts = frozenset(range(g.n))
        else:
            verts = frozenset(x for i in ids for x in g.edges[i])
        return Subgraph(verts, ids)

    def validate(self, g: Multigraph) -> None:
        for v in self.vertices:
            if not 0 <= v < g.n:
                raise ValueError(f"subgraph vertex {v} not in graph")
        for i in self.edges:
            if not 0 <= i < g.m:
                raise ValueError(f"subgraph edge {i} not in graph")
            u, v = g.edges[i]
            if u not in self.vertices or v not in self.vertices:
                raise ValueError(f"subgraph edge {i} has an endpoint outside the vertex set")


# ---------------------------------------------------------------- builders

def path_graph(edges: int) -> Multigraph:
    return Multigraph(edges + 1, tuple((i, i + 1) for i in range(edges)))


def cycle_graph(n: int) -> Multigraph:
    if n < 3:
        raise ValueError("cycle needs at least 3 vertices")
    return Multigraph(n, tuple((i, (i + 1) % n) for i in range(n)))


def complete_graph(n: int) -> Multigraph:
    return Multigraph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def complete_bipartite(a: int, b: int) -> Multigraph:
    return Multigraph(a + b, tuple((i, a + j) for i in range(a) for j in range(b)))


def from_networkx(g: nx.Graph) -> Multigraph:
    nodes = sorted(g.nodes())
    index = {x: i for i, x in enumerate(nodes)}
    edges = tuple(sorted((min(index[u], index[v]), max(index[u], index[v])) for u, v in g.edges()))
    return Multigraph(len(nodes), edges)


def disjoint_union(parts: Sequence[Multigraph]) -> tuple[Multigraph, list[int]]:
    """Union of graphs; returns the union and the vertex offset of each part."""
    offsets, edges, eact, vact = [], [], {}, {}
    off = 0
    for g in parts:
        offsets.append(off)
        base = len(edges)
        edges.extend((u + off, v + off) for u, v in g.edges)
        if g.edge_activity:
            eact.update({base + i: a for i, a in g.edge_activity.items()})
        if g.vertex_activity:
            vact.update({off + v: a for v, a in g.vertex_activity.items()})
        off += g.n
    return Multigraph(off, tuple(edges), eact or None, vact or None), offsets


# ---------------------------------------------------------------- file format

def parse_graph_text(text: str, source: str = "<graph>") -> Multigraph:
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append((lineno, body))
    if not lines:
        raise ParseError("empty graph file", source)
    lineno, head = lines[0]
    parts = head.split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise ParseError(f"expected header 'n m', got {head!r}", f"{source}:{lineno}")
    n, m = int(parts[0]), int(parts[1])
    if len(lines) - 1 < m:
        raise ParseError(f"header declares {m} edges but only {len(lines) - 1} lines follow", f"{source}:{lineno}")
    edges, eact, vact = [], {}, {}
    for k in range(m):
        lineno, body = lines[1 + k]
        where = f"{source}:{lineno}"
        parts = body.split()
        if len(parts) not in (2, 3) or not parts[0].isdigit() or not parts[1].isdigit():
            raise ParseError(f"expected 'u v [activity]', got {body!r}", where)
        u, v = int(parts[0]), int(parts[1])
        if u >= n or v >= n:
            raise ParseError(f"endpoint out of range 0..{n - 1}", where)
        if u == v:
            raise ParseError("self-loops are not allowed", where)
        if len(parts) == 3:
            eact[k] = parse_rational(parts[2], where)
        edges.append((u, v))
    for lineno, body in lines[1 + m:]:
        where = f"{source}:{lineno}"
        parts = body.split()
        if len(parts) != 3 or parts[0] != "V" or not parts[1].isdigit():
            raise ParseError(f"expected 'V u activity', got {body!r}", where)
        u = int(parts[1])
        if u >= n:
            raise ParseError(f"vertex {u} out of range", where)
        if u in vact:
            raise ParseError(f"vertex {u} given two activities", where)
        vact[u] = parse_rational(parts[2], where)
    return Multigraph(n, tuple(edges), eact or None, vact or None)


def read_graph(path: str) -> Multigraph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph_text(fh.read(), source=str(path))


def write_graph_text(g: Multigraph) -> str:
    out = [f"{g.n} {g.m}"]
    for i, (u, v) in enumerate(g.edges):
        if g.edge_activity and i in g.edge_activity:
            out.append(f"{u} {v} {fmt_rational(g.edge_activity[i])}")
        else:
            out.append(f"{u} {v}")
    for v in sorted(g.vertex_activity or {}):
        out.append(f"V {v} {fmt_rational(g.vertex_activity[v])}")
    return "\n".join(out) + "\n"


def write_graph(g: Multigraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_graph_text(g))
