"""Closed-form composition maps for edge and field gadgets.

Works for any numeric type supporting field operations, so the same code
gives exact Fractions and high-precision reals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..models import Potts, TwoSpin, VertexEdgeObservable


@dataclass(frozen=True)
class PottsHats:
    """Hatted constants of the two-port Potts composition map."""

    q: int
    beta: Fraction
    beta_hat: Fraction
    gamma_hat: Fraction
    lam_hat: Fraction

    @staticmethod
    def of(model: Potts) -> "PottsHats":
        q, b = model.q, model.beta
        d = 2 * b + q - 2
        return PottsHats(
            q, b,
            1 + (b - 1) ** 2 / ((q - 1) * d),
            1 + (b - 1) ** 2 / d,
            Fraction(1, q - 1),
        )

    @property
    def kappa(self) -> Fraction:
        bh, gh = self.beta_hat, self.gamma_hat
        return (bh - 1) * (gh - 1) / (bh * gh - 1)

    def combine(self, product):
        """Effective interaction from the product of the children's interactions."""
        return (1 + self.gamma_hat * self.lam_hat * product) / (self.beta_hat + self.lam_hat * product)

    def inverse(self, value):
        """Product of children's interactions giving ``value``."""
        return (self.beta_hat * value - 1) / (self.lam_hat * (self.gamma_hat - value))

    def omega(self, B):
        bh, gh = self.beta_hat, self.gamma_hat
        return (1 + bh * gh - bh * B - gh / B) / (1 - bh * gh)

    def theta(self, B):
        q, b = self.q, self.beta
        return 2 * b * (B - 1) * (B + q - 1) / (B * (b - 1) * (b + q - 1))

    def gap(self, B, child_gaps):
        return self.theta(B) - self.omega(B) * sum(child_gaps)

    def path_step_ratio(self, B_prev):
        """(B_l - 1)/(B_{l-1} - 1) for one more pair of edges around a path."""
        return self.lam_hat * (self.gamma_hat - 1) / (self.beta_hat + self.lam_hat * B_prev)

    def map_derivative(self, B, B_child):
        """d/dB of combine(B * B_child)."""
        bh, gh, lh = self.beta_hat, self.gamma_hat, self.lam_hat
        return lh * B_child * (bh * gh - 1) / (bh + lh * B * B_child) ** 2


@dataclass(frozen=True)
class FieldMaps:
    """Composition maps of field gadgets for a 2-spin model and observable."""

    model: TwoSpin
    obs: VertexEdgeObservable

    def combine(self, product):
        m = self.model
        return (1 + m.gamma * m.lam * product) / (m.beta + m.lam * product)

    def inverse(self, value):
        m = self.model
        return (1 - m.beta * value) / (m.lam * (value - m.gamma))

    def omega(self, R):
        b, g = self.model.beta, self.model.gamma
        return (1 + b * g - b * R - g / R) / (1 - b * g)

    def theta(self, R):
        b, g = self.model.beta, self.model.gamma
        o = self.obs
        return -o.a * self.omega(R) - o.b * b * (R - g) / (1 - b * g) + o.c * g * (1 / R - b) / (1 - b * g)

    def gap(self, R, child_gaps):
        return self.theta(R) - self.omega(R) * sum(child_gaps)

    def map_derivative(self, R, R_child):
        """d/dR of combine(R * R_child)."""
        m = self.model
        return m.lam * R_child * (m.gamma * m.beta - 1) / (m.beta + m.lam * R * R_child) ** 2

    def fixpoint_equation(self, x):
        """x - combine(x^2): zero at the binary-tree fixpoint."""
        return x - self.combine(x * x)
