"""Model parameters, observables, pins and per-configuration statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .graph import Multigraph
from .rational import as_fraction


@dataclass(frozen=True)
class Potts:
    """Ferromagnetic-or-not Potts model: weight beta ** (monochromatic edges)."""

    q: int
    beta: Fraction

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError("Potts model needs an integer q >= 2")
        b = as_fraction(self.beta)
        if b <= 0:
            raise ValueError("Potts edge activity must be positive")
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "beta", b)

    @property
    def spins(self) -> int:
        return self.q

    kind = "potts"


@dataclass(frozen=True)
class TwoSpin:
    """2-spin system with weight lam**|sigma| * beta**m0 * gamma**m1 (0**0 = 1)."""

    beta: Fraction
    gamma: Fraction
    lam: Fraction = Fraction(1)

    def __post_init__(self):
        b, g, l = as_fraction(self.beta), as_fraction(self.gamma), as_fraction(self.lam)
        if b < 0 or g < 0:
            raise ValueError("2-spin edge activities must be nonnegative")
        if b == 0 and g == 0:
            raise ValueError("beta and gamma cannot both be zero")
        if l <= 0:
            raise ValueError("2-spin vertex activity must be positive")
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "lam", l)

    spins = 2
    kind = "twospin"

    @property
    def antiferromagnetic(self) -> bool:
        return self.beta * self.gamma < 1

    def with_lam(self, lam) -> "TwoSpin":
        return TwoSpin(self.beta, self.gamma, lam)

    @staticmethod
    def hardcore(lam=1) -> "TwoSpin":
        return TwoSpin(Fraction(1), Fraction(0), as_fraction(lam))

    @staticmethod
    def ising(b, lam=1) -> "TwoSpin":
        b = as_fraction(b)
        return TwoSpin(b, b, as_fraction(lam))


ModelParams = Potts | TwoSpin


@dataclass(frozen=True)
class VertexEdgeObservable:
    """o(sigma) = a|sigma| + b m0(sigma) + c m1(sigma)."""

    a: Fraction = Fraction(0)
    b: Fraction = Fraction(0)
    c: Fraction = Fraction(0)

    def __post_init__(self):
        for name in "abc":
            object.__setattr__(self, name, as_fraction(getattr(self, name)))

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0 and self.c == 0

    def trivial_on_general(self, model: TwoSpin) -> bool:
        a, b, c = self.a, self.b, self.c
        return (
            self.is_zero()
            or (model.beta == 0 and a == 0 and c == 0)
            or (model.gamma == 0 and a == 0 and b == 0)
            or (model.beta == model.gamma and model.lam == 1 and b + c == 0)
        )

    def trivial_on_bipartite(self, model: TwoSpin) -> bool:
        return self.trivial_on_general(model) or (model.beta == model.gamma and model.lam == 1)


MAGNETIZATION = VertexEdgeObservable(1, 0, 0)


@dataclass(frozen=True)
class PinSet:
    """Absolute pins (vertex -> spin) plus relational pins on vertex pairs."""

    fixed: Mapping[int, int] = field(default_factory=dict)
    equal: tuple[tuple[int, int], ...] = ()
    distinct: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        fixed = {int(k): int(v) for k, v in dict(self.fixed).items()}
        object.__setattr__(self, "fixed", fixed)
        for u, v in tuple(self.equal) + tuple(self.distinct):
            if u == v:
                raise ValueError("relational pins need two distinct vertices")
        object.__setattr__(self, "equal", tuple((int(u), int(v)) for u, v in self.equal))
        object.__setattr__(self, "distinct", tuple((int(u), int(v)) for u, v in self.distinct))

    @staticmethod
    def of(**kw) -> "PinSet":
        return PinSet(**kw)

    def is_empty(self) -> bool:
        return not self.fixed and not self.equal and not self.distinct

    def validate(self, g: Multigraph, spins: int) -> None:
        for v, s in self.fixed.items():
            if not 0 <= v < g.n:
                raise ValueError(f"pinned vertex {v} not in graph")
            if not 0 <= s < spins:
                raise ValueError(f"pinned spin {s} out of range 0..{spins - 1}")
        for u, v in self.equal + self.distinct:
            if not (0 <= u < g.n and 0 <= v < g.n):
                raise ValueError(f"relational pin ({u},{v}) not in graph")

    def admits(self, sigma: Sequence[int]) -> bool:
        return (
            all(sigma[v] == s for v, s in self.fixed.items())
            and all(sigma[u] == sigma[v] for u, v in self.equal)
            and all(sigma[u] != sigma[v] for u, v in self.distinct)
        )


NO_PINS = PinSet()


@dataclass(frozen=True)
class ConfigStats:
    size: int
    mono: int
    m0: int
    m1: int
    weight: Fraction


def check_model_graph(g: Multigraph, model) -> None:
    if isinstance(model, Potts) and g.vertex_activity:
        raise ValueError("per-vertex activities are not defined for the Potts model")
    if isinstance(model, TwoSpin) and g.edge_activity:
        raise ValueError("per-edge activities are only supported for the Potts model")


def config_stats(g: Multigraph, sigma: Sequence[int], model) -> ConfigStats:
    """Counts and weight of a single configuration (parallel edges counted with multiplicity).

    Potts spins are 0..q-1; 2-spin spins are 0/1.
    """
    if len(sigma) != g.n:
        raise ValueError(f"configuration has length {len(sigma)}, graph has {g.n} vertices")
    for v, s in enumerate(sigma):
        if not 0 <= s < model.spins:
            raise ValueError(f"spin {s} at vertex {v} out of range 0..{model.spins - 1}")
    check_model_graph(g, model)
    size = sum(1 for s in sigma if s == 1)
    mono = m0 = m1 = 0
    weight = Fraction(1)
    if isinstance(model, Potts):
        for i, (u, v) in enumerate(g.edges):
            if sigma[u] == sigma[v]:
                mono += 1
                weight *= g.edge_weight(i, model.beta)
        m0 = sum(1 for u, v in g.edges if sigma[u] == sigma[v] == 0)
        m1 = sum(1 for u, v in g.edges if sigma[u] == sigma[v] == 1)
    else:
        for v, s in enumerate(sigma):
            if s == 1:
                weight *= g.vertex_weight(v, model.lam)
        for u, v in g.edges:
            if sigma[u] == sigma[v]:
                mono += 1
                if sigma[u] == 0:
                    m0 += 1
                    weight *= model.beta
                else:
                    m1 += 1
                    weight *= model.gamma
    return ConfigStats(size, mono, m0, m1, weight)
