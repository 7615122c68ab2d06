"""Log-partition functions from observable readings along an activity path.

For Potts, d log Z / d beta = S(beta) / beta with S the expected number of
monochromatic edges; for 2-spin, d log Z / d lambda = M(lambda) / lambda with
M the magnetization. Both S and M are nondecreasing along the path (their
derivatives are variances divided by the activity), so on a grid cell
[x_i, x_{i+1}] the integral of f(x)/x lies between f(x_i) log(x_{i+1}/x_i) and
f(x_{i+1}) log(x_{i+1}/x_i). Summing gives a rigorous bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .exact import observable_expectation, partition_function, potts_mono_counts, twospin_counts
from .graph import Multigraph
from .models import MAGNETIZATION, Potts, TwoSpin
from .samplers import make_rng, mc_estimate, spawn_seeds

# outward rounding applied to float brackets
_ROUND = 1e-13


def _log_fraction(x: Fraction) -> float:
    return float(mpmath.log(x.numerator) - mpmath.log(x.denominator))


def _at(model, x):
    x = Fraction(x)
    return Potts(model.q, x) if isinstance(model, Potts) else model.with_lam(x)


# ------------------------------------------------------------------ oracles

@dataclass
class Reading:
    value: float
    lo: float
    hi: float
    exact: Fraction | None = None
    std_error: float | None = None


@dataclass
class OracleHandle:
    """Observable oracle along the path: S(beta) for Potts, M(lambda) for 2-spin.

    kind: ``exact`` (rational readings), ``poly`` (float evaluation of the
    exact partition polynomial; vectorised), ``mc`` (Glauber estimates with
    standard errors, bracketed at ``z`` sigma) or ``noise`` (exact readings
    multiplied by 1 + eps*u with u uniform in [-1, 1], seeded).
    """

    kind: str
    model: object
    graph: Multigraph
    eps: float = 0.0
    seed: int = 0
    samples: int = 10_000
    burn_in: int = 1000
    z: float = 4.0
    calls: int = 0
    _poly: object = field(default=None, repr=False)
    _rng: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("exact", "poly", "mc", "noise"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if self.kind == "poly":
            self._poly = PartitionPolynomial(self.graph, self.model)
        if self.kind == "noise":
            if not 0 <= self.eps < 1:
                raise ValueError("noise level must lie in [0, 1)")
            self._rng = make_rng(self.seed)

    def _exact(self, x) -> Fraction:
        m = _at(self.model, x)
        if isinstance(m, Potts):
            return observable_expectation(self.graph, m, "susceptibility")
        return observable_expectation(self.graph, m, MAGNETIZATION)

    def read(self, x, index: int = 0) -> Reading:
        self.calls += 1
        if self.kind == "exact":
            v = self._exact(x)
            f = float(v)
            return Reading(f, f, f, exact=v)
        if self.kind == "poly":
            f = float(self._poly.observable(np.array([float(x)]))[0])
            return Reading(f, f, f)
        if self.kind == "noise":
            v = float(self._exact(x))
            noisy = v * (1 + self.eps * self._rng.uniform(-1.0, 1.0))
            return Reading(noisy, noisy / (1 + self.eps), noisy / (1 - self.eps) if self.eps < 1 else math.inf)
        est = mc_estimate(_at(self.model, x), self.graph,
                          None if isinstance(self.model, Potts) else MAGNETIZATION,
                          self.samples, self.burn_in, seed=spawn_seeds(self.seed, index + 1)[index])
        se = est.std_error if est.std_error_defined else math.inf
        return Reading(est.mean, est.mean - self.z * se, est.mean + self.z * se, std_error=est.std_error)

    def read_grid(self, xs) -> "GridReadings":
        if self.kind == "poly":
            self.calls += len(xs)
            vals = self._poly.observable(np.asarray(xs, dtype=float))
            return GridReadings(vals, vals, vals)
        rs = [self.read(Fraction(x) if not isinstance(x, Fraction) else x, i) for i, x in enumerate(xs)]
        return GridReadings(
            np.array([r.value for r in rs]), np.array([r.lo for r in rs]), np.array([r.hi for r in rs]),
            [r.exact for r in rs], [r.std_error for r in rs],
        )


@dataclass
class GridReadings:
    value: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    exact: list | None = None
    std_error: list | None = None


def make_oracle(spec: str, model, graph: Multigraph, seed: int = 0) -> OracleHandle:
    """Parse ``exact``, ``poly``, ``mc[:samples=N,burn=B,z=Z]`` or ``noise:eps=E[,seed=S]``."""
    kind, _, rest = spec.partition(":")
    opts = {}
    for part in filter(None, rest.split(",")):
        k, eq, v = part.partition("=")
        if not eq:
            raise ValueError(f"oracle option {part!r} is not key=value")
        opts[k.strip()] = v.strip()
    kw = {"seed": seed}
    for key, name, conv in (("samples", "samples", int), ("burn", "burn_in", int), ("z", "z", float),
                            ("eps", "eps", float), ("seed", "seed", int)):
        if key in opts:
            kw[name] = conv(opts.pop(key))
    if opts:
        raise ValueError(f"unknown oracle options: {', '.join(sorted(opts))}")
    return OracleHandle(kind, model, graph, **kw)


class PartitionPolynomial:
    """Integer-coefficient partition polynomial of a graph, evaluated in floating point."""

    def __init__(self, g: Multigraph, model):
        self.model = model
        if isinstance(model, Potts):
            c = potts_mono_counts(g, model.q)
            self.powers = np.arange(len(c), dtype=float)
            self.coeffs = [int(x) for x in c]
        else:
            self.table = twospin_counts(g)

    def observable(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if isinstance(self.model, Potts):
            c = np.array([float(x) for x in self.coeffs])
            top = self.powers[-1] * np.log(np.max(xs)) if len(xs) else 0.0
            if -600 < top < 600:
                P = xs[:, None] ** self.powers[None, :]
                return (P @ (c * self.powers)) / (P @ c)
            # scale by the top power to keep terms bounded
            logs = np.log(xs)[:, None] * self.powers[None, :]
            logs -= logs.max(axis=1, keepdims=True)
            w = np.exp(logs) * np.array([float(c) for c in self.coeffs])[None, :]
            return (w * self.powers).sum(axis=1) / w.sum(axis=1)
        b, g = float(self.model.beta), float(self.model.gamma)
        keys = np.array(list(self.table.keys()), dtype=float)
        cnt = np.array([float(v) for v in self.table.values()])

        def part(k, a):
            # a**k in log space with 0**0 = 1
            if a > 0:
                return k * math.log(a)
            return np.where(k > 0, -np.inf, 0.0)

        base = np.log(cnt) + part(keys[:, 1], b) + part(keys[:, 2], g)
        logs = base[None, :] + np.log(xs)[:, None] * keys[None, :, 0]
        logs -= logs.max(axis=1, keepdims=True)
        w = np.exp(logs)
        return (w * keys[None, :, 0]).sum(axis=1) / w.sum(axis=1)

    def log_partition(self, x) -> float:
        """Exact log Z at rational activity x (rational sum, then one log)."""
        x = Fraction(x)
        if isinstance(self.model, Potts):
            return _log_fraction(sum((c * x**k for k, c in enumerate(self.coeffs)), Fraction(0)))
        m = self.model
        Z = sum((c * x**s * Fraction(m.beta) ** m0 * Fraction(m.gamma) ** m1 for (s, m0, m1), c in self.table.items()), Fraction(0))
        return _log_fraction(Z)


# ------------------------------------------------------------------ grids and brackets

@dataclass(frozen=True)
class Bracket:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("bracket lower end exceeds upper end")

    @property
    def midpoint(self) -> float:
        return (self.lower + self.upper) / 2

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper


def observable_range(model, g: Multigraph, target) -> float:
    """Upper bound on |f(target) - f(1)| for the path observable f."""
    target = Fraction(target)
    if isinstance(model, Potts):
        # S(1) = m/q exactly, 0 <= S <= m
        return g.m * (1 - 1 / model.q) if target >= 1 else g.m / model.q
    lo_lam = min(Fraction(1), target)
    b, c = Fraction(model.beta), Fraction(model.gamma)
    lower = 0.0
    for v in range(g.n):
        d = g.degree(v)
        lam = g.vertex_weight(v, lo_lam)
        probs = []
        for k in range(d + 1):
            num = lam * c**k
            den = num + b ** (d - k)
            probs.append(num / den if den else Fraction(0))
        lower += float(min(probs))
    return g.n - lower


def grid_for_error(model, g: Multigraph, target, eps, mode: str = "tight") -> int:
    """Number of grid cells M.

    ``paper``: the worst-case rectangle-method size ceil((10 q beta* m / eps)^4)
    for Potts and ceil((10 lambda* n / (eps alpha))^4) for Ising (beta = gamma = alpha).
    ``tight``: smallest uniform M whose bracket width is provably at most eps.
    """
    eps = Fraction(eps) if not isinstance(eps, float) else eps
    if eps <= 0:
        raise ValueError("eps must be positive")
    target = Fraction(target)
    if target <= 0:
        raise ValueError("target activity must be positive")
    if mode == "paper":
        eps = Fraction(eps)
        if isinstance(model, Potts):
            base = 10 * model.q * target * g.m / eps
        else:
            if model.beta != model.gamma or model.beta == 0:
                raise ValueError("the worst-case grid is defined for the Ising case beta = gamma > 0")
            base = 10 * target * g.n / (eps * model.beta)
        return math.ceil(base**4)
    if mode != "tight":
        raise ValueError("mode must be 'paper' or 'tight'")
    if target == 1:
        return 1
    rng = observable_range(model, g, target)
    if rng == 0:
        return 1
    x_min = float(min(Fraction(1), target))
    step = x_min * math.expm1(float(eps) / rng)
    return max(1, math.ceil(float(abs(target - 1)) / step - 1e-12))


@dataclass
class Integration:
    bracket: Bracket
    estimate: float
    base: float
    grid: np.ndarray
    readings: GridReadings
    lower_partial: np.ndarray
    upper_partial: np.ndarray
    non_monotone: int
    calls: int

    def rows(self):
        """(i, x_i, reading, lower partial sum, upper partial sum) per grid point."""
        for i, x in enumerate(self.grid):
            lo = self.lower_partial[i - 1] if i else 0.0
            hi = self.upper_partial[i - 1] if i else 0.0
            yield i, float(x), float(self.readings.value[i]), self.base + lo, self.base + hi


def base_log_partition(model, g: Multigraph) -> float:
    """log Z at the start of the path (activity 1)."""
    if isinstance(model, Potts):
        return g.n * math.log(model.q)
    return _log_fraction(partition_function(g, model.with_lam(Fraction(1))))


def integrate_log_partition(model, g: Multigraph, oracle: OracleHandle, target, M: int) -> Integration:
    """Bracket log Z(target) with M uniform cells from activity 1."""
    if M < 1:
        raise ValueError("M must be at least 1")
    target = Fraction(target)
    if target <= 0:
        raise ValueError("target activity must be positive")
    base = base_log_partition(model, g)
    if target == 1:
        xs = np.array([1.0])
        one = oracle.read(Fraction(1))
        readings = GridReadings(np.array([one.value]), np.array([one.lo]), np.array([one.hi]))
        return Integration(Bracket(base, base), base, base, xs, readings, np.zeros(0), np.zeros(0), 0, oracle.calls)
    if oracle.kind == "poly":
        xs = 1.0 + np.arange(M + 1) * (float(target) - 1.0) / M
        readings = oracle.read_grid(xs)
    else:
        xs_exact = [1 + Fraction(i) * (target - 1) / M for i in range(M + 1)]
        readings = oracle.read_grid(xs_exact)
        xs = np.array([float(x) for x in xs_exact])
    L = np.log(xs[1:] / xs[:-1])
    lo, hi, val = readings.lo, readings.hi, readings.value
    up = L > 0
    lower_terms = np.where(up, lo[:-1] * L, hi[:-1] * L)
    upper_terms = np.where(up, hi[1:] * L, lo[1:] * L)
    lower_partial = np.cumsum(lower_terms)
    upper_partial = np.cumsum(upper_terms)
    pad = _ROUND * (abs(base) + np.abs(lower_terms).sum() + np.abs(upper_terms).sum() + 1)
    lower = base + lower_partial[-1] - pad
    upper = base + upper_partial[-1] + pad
    direction = 1 if target > 1 else -1
    slack = (hi - lo)
    drops = direction * (val[1:] - val[:-1]) < -(slack[1:] + slack[:-1] + 1e-12 * (np.abs(val[1:]) + 1))
    b = Bracket(float(min(lower, upper)), float(max(lower, upper)))
    return Integration(b, b.midpoint, base, xs, readings, lower_partial, upper_partial, int(drops.sum()), oracle.calls)


def exact_log_partition(model, g: Multigraph, target) -> float:
    at = _at(model, target)
    if isinstance(at, Potts) and not g.edge_activity and g.n <= 9:
        # integer count polynomial beats rational elimination on small graphs
        z = 0
        for c in reversed(potts_mono_counts(g, at.q)):
            z = z * at.beta + c
        return _log_fraction(Fraction(z))
    return _log_fraction(partition_function(g, at))
