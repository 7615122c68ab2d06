"""Seeded heat-bath Glauber dynamics and Monte Carlo observable estimates.

Randomness comes from numpy's PCG64 generator. Independent chains use
``numpy.random.SeedSequence(seed).spawn`` so that results depend only on the
seed and the chain index.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .graph import Multigraph, Subgraph
from .models import PinSet, Potts, TwoSpin, VertexEdgeObservable, check_model_graph, config_stats


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def spawn_seeds(seed: int, k: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(k)


@dataclass
class ChainState:
    config: list[int]
    step: int
    rng: np.random.Generator

    def rng_state(self) -> dict:
        return self.rng.bit_generator.state


class _Local:
    """Float copies of local weights for fast conditional updates."""

    def __init__(self, g: Multigraph, model):
        check_model_graph(g, model)
        self.n = g.n
        self.s = model.spins
        self.potts = isinstance(model, Potts)
        self.nbrs: list[list[tuple[int, float]]] = [[] for _ in range(g.n)]
        for i, (u, v) in enumerate(g.edges):
            w = float(g.edge_weight(i, model.beta)) if self.potts else 0.0
            self.nbrs[u].append((v, w))
            self.nbrs[v].append((u, w))
        if not self.potts:
            self.beta = float(model.beta)
            self.gamma = float(model.gamma)
            self.lam = [float(g.vertex_weight(v, model.lam)) for v in range(g.n)]

    def conditional(self, cfg: list[int], v: int) -> list[float]:
        if self.potts:
            w = [1.0] * self.s
            for x, b in self.nbrs[v]:
                w[cfg[x]] *= b
            return w
        w0, w1 = 1.0, self.lam[v]
        for x, _ in self.nbrs[v]:
            if cfg[x] == 0:
                w0 *= self.beta
            else:
                w1 *= self.gamma
        return [w0, w1]


def _feasible(g: Multigraph, model, cfg: Sequence[int]) -> bool:
    return config_stats(g, list(cfg), model).weight > 0


def glauber_run(
    model,
    g: Multigraph,
    steps: int,
    seed: int | None = None,
    init: Sequence[int] | None = None,
    state: ChainState | None = None,
    record=None,
) -> ChainState:
    """Heat-bath single-site updates at uniformly random sites.

    Either start fresh from ``init`` with ``seed``, or
    continue ``state``. ``record``, if given, is called after every step.
    """
    local = _Local(g, model)
    if state is None:
        if init is None:
            # all zeros, else all ones (2-spin with beta = 0)
            cfg = [0] * g.n
            if not _feasible(g, model, cfg) and not isinstance(model, Potts):
                cfg = [1] * g.n
        else:
            cfg = list(init)
        if len(cfg) != g.n:
            raise ValueError("initial configuration has the wrong length")
        if not _feasible(g, model, cfg):
            raise ValueError("initial configuration has zero weight")
        state = ChainState(cfg, 0, make_rng(0 if seed is None else seed))
    cfg, rng = state.config, state.rng
    n = g.n
    if n == 0:
        state.step += steps
        return state
    done = 0
    block = 4096
    while done < steps:
        k = min(block, steps - done)
        sites = rng.integers(0, n, size=k).tolist()
        us = rng.random(k).tolist()
        for v, u in zip(sites, us):
            w = local.conditional(cfg, v)
            tot = sum(w)
            acc = 0.0
            target = u * tot
            new = len(w) - 1
            for c, wc in enumerate(w):
                acc += wc
                if target < acc:
                    new = c
                    break
            cfg[v] = new
            if record is not None:
                record(cfg)
        done += k
    state.step += steps
    return state


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    samples: int
    burn_in: int
    seed: int
    thinning: int = 1

    @property
    def std_error_defined(self) -> bool:
        return not math.isnan(self.std_error)


def observable_function(g: Multigraph, model, obs, F: Subgraph | None = None):
    """cfg -> observable value, for the observable specs accepted by the exact engine.

    A PinSet gives the indicator of the pinned event.
    """
    F = F or Subgraph.whole(g)
    if isinstance(obs, PinSet):
        return lambda cfg: 1.0 if obs.admits(cfg) else 0.0
    fedges = [g.edges[i] for i in sorted(F.edges)]
    if isinstance(model, Potts):
        return lambda cfg: float(sum(1 for u, v in fedges if cfg[u] == cfg[v]))
    if not isinstance(obs, VertexEdgeObservable):
        raise ValueError("2-spin observables are VertexEdgeObservable(a, b, c)")
    fverts = sorted(F.vertices)
    a, b, c = float(obs.a), float(obs.b), float(obs.c)

    def fn(cfg):
        tot = a * sum(cfg[v] for v in fverts)
        for u, v in fedges:
            if cfg[u] == cfg[v]:
                tot += b if cfg[u] == 0 else c
        return tot

    return fn


def batch_means_se(xs: Sequence[float]) -> float:
    n = len(xs)
    if n < 2:
        return float("nan")
    nb = max(2, min(50, int(math.sqrt(n))))
    size = n // nb
    arr = np.asarray(xs[: nb * size], dtype=float).reshape(nb, size).mean(axis=1)
    return float(arr.std(ddof=1) / math.sqrt(nb))


def mc_samples(model, g, obs, samples, burn_in, thinning, seed, F=None, init=None) -> list[float]:
    fn = observable_function(g, model, obs, F)
    state = glauber_run(model, g, burn_in, seed=seed, init=init)
    out = []
    for _ in range(samples):
        glauber_run(model, g, thinning, state=state)
        out.append(fn(state.config))
    return out


def mc_estimate(
    model,
    g: Multigraph,
    obs,
    samples: int,
    burn_in: int = 1000,
    thinning: int | None = None,
    seed: int = 0,
    F: Subgraph | None = None,
    init=None,
) -> Estimate:
    """Mean of the observable along one chain, with a batch-means standard error."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    thinning = thinning if thinning is not None else max(1, g.n)
    xs = mc_samples(model, g, obs, samples, burn_in, thinning, seed, F, init)
    mean = float(np.mean(xs))
    return Estimate(mean, batch_means_se(xs), samples, burn_in, seed, thinning)


def mc_estimate_parallel(model, g, obs, samples, chains, burn_in=1000, thinning=None, seed=0, threads=1, F=None) -> Estimate:
    """Pool independent chains with spawned seeds; aggregation is in chain order."""
    seqs = spawn_seeds(seed, chains)
    per = max(1, samples // chains)
    thinning = thinning if thinning is not None else max(1, g.n)

    def run(ss):
        return mc_samples(model, g, obs, per, burn_in, thinning, ss, F)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, seqs))
    else:
        parts = [run(ss) for ss in seqs]
    means = [float(np.mean(p)) for p in parts]
    allx = [x for p in parts for x in p]
    se = float(np.std(means, ddof=1) / math.sqrt(chains)) if chains > 1 else batch_means_se(allx)
    return Estimate(float(np.mean(allx)), se, len(allx), burn_in, seed, thinning)


# ------------------------------------------------------------------ exact kernel

def heat_bath_kernel(g: Multigraph, model) -> tuple[dict, dict]:
    """Exact one-step transition kernel and stationary law on all configurations.

    Returns (P, pi) with P[(x, y)] and pi[x] as Fractions; x, y are tuples.
    """
    import itertools

    configs = list(itertools.product(range(model.spins), repeat=g.n))
    weights = {x: config_stats(g, list(x), model).weight for x in configs}
    Z = sum(weights.values())
    pi = {x: w / Z for x, w in weights.items()}
    P: dict = {}
    for x in configs:
        if weights[x] == 0:
            continue
        for v in range(g.n):
            alts = []
            for c in range(model.spins):
                y = x[:v] + (c,) + x[v + 1:]
                alts.append((y, weights[y]))
            tot = sum(w for _, w in alts)
            for y, w in alts:
                P[(x, y)] = P.get((x, y), Fraction(0)) + Fraction(1, g.n) * w / tot
    return P, pi
