from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .coeffs import RationalLike, as_rational, format_rational


class Regime(enum.Enum):
    EXPANDING = "expanding"
    CONTRACTING = "contracting"
    REFLEXIVE = "reflexive"


@dataclass(frozen=True)
class Weights:
    """Positive rational weights ``alpha_1..alpha_n`` (n >= 2)."""

    alphas: tuple[Fraction, ...]

    def __post_init__(self):
        alphas = tuple(as_rational(a) for a in self.alphas)
        if len(alphas) < 2:
            raise ValueError("at least two weights are required")
        if any(a <= 0 for a in alphas):
            raise ValueError(f"weights must be positive, got {[str(a) for a in alphas]}")
        object.__setattr__(self, "alphas", alphas)

    @classmethod
    def of(cls, values: Sequence[RationalLike]) -> "Weights":
        return cls(tuple(as_rational(v) for v in values))

    @property
    def n(self) -> int:
        return len(self.alphas)

    @property
    def lam(self) -> Fraction:
        return sum(self.alphas, Fraction(0))

    @property
    def regime(self) -> Regime:
        lam = self.lam
        if lam > 1:
            return Regime.EXPANDING
        if lam < 1:
            return Regime.CONTRACTING
        return Regime.REFLEXIVE

    @property
    def all_equal(self) -> bool:
        return len(set(self.alphas)) == 1

    @property
    def all_one(self) -> bool:
        return all(a == 1 for a in self.alphas)

    def to_json(self) -> list[str]:
        return [format_rational(a) for a in self.alphas]

    def __str__(self):
        return "(" + ", ".join(str(a) for a in self.alphas) + ")"
