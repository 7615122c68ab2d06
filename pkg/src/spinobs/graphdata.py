"""All connected graphs on up to 8 vertices, up to isomorphism.

Sizes 1..7 come from the networkx graph atlas. Size n+1 is generated from
size n by attaching a new vertex to every nonempty vertex subset (every
connected graph has a non-cut vertex), then deduplicated. Results are cached as
graph6 files under ``data/``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from importlib import resources
from pathlib import Path

import networkx as nx

from .graph import Multigraph, from_networkx

KNOWN_COUNTS = {1: 1, 2: 1, 3: 2, 4: 6, 5: 21, 6: 112, 7: 853, 8: 11117}


def _atlas(n: int) -> list[nx.Graph]:
    return [g for g in nx.graph_atlas_g() if g.number_of_nodes() == n and (n == 0 or nx.is_connected(g))]


def _extend(graphs: list[nx.Graph]) -> list[nx.Graph]:
    buckets: dict[str, list[nx.Graph]] = {}
    out = []
    for g in graphs:
        n = g.number_of_nodes()
        for k in range(1, n + 1):
            for nbrs in itertools.combinations(range(n), k):
                h = g.copy()
                h.add_node(n)
                h.add_edges_from((n, x) for x in nbrs)
                key = nx.weisfeiler_lehman_graph_hash(h, iterations=3) + f":{h.number_of_edges()}"
                slot = buckets.setdefault(key, [])
                if any(nx.is_isomorphic(h, o) for o in slot):
                    continue
                slot.append(h)
                out.append(h)
    return out


def generate_connected(n: int) -> list[nx.Graph]:
    if n <= 7:
        return [nx.convert_node_labels_to_integers(g) for g in _atlas(n)]
    return _extend(generate_connected(n - 1))


def _data_file(n: int) -> Path:
    return Path(str(resources.files("spinobs") / "data" / f"connected{n}.g6"))


def write_cache(n: int) -> Path:
    path = _data_file(n)
    graphs = generate_connected(n)
    with open(path, "wb") as fh:
        for g in graphs:
            fh.write(nx.to_graph6_bytes(g, header=False))
    return path


@lru_cache(maxsize=None)
def connected_graphs(n: int) -> tuple[Multigraph, ...]:
    """Connected simple graphs on n vertices, one per isomorphism class."""
    if n < 1:
        raise ValueError("n must be positive")
    path = _data_file(n)
    if path.exists():
        raws = [nx.from_graph6_bytes(line) for line in path.read_bytes().split(b"\n") if line]
    else:
        raws = generate_connected(n)
    return tuple(from_networkx(g) for g in raws)


def connected_graphs_upto(n: int) -> list[Multigraph]:
    return [g for k in range(1, n + 1) for g in connected_graphs(k)]
