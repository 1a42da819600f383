"""Exact arithmetic substrate.

Rationals are :class:`fractions.Fraction` (always canonical: positive
denominator, reduced).  A :class:`QuadIrr` is ``scale * sqrt(radicand)`` with
squarefree radicand.  Finite rational combinations of such numbers are
ordered by first testing symbolic equality (square roots of distinct
squarefree integers are linearly independent over Q) and only then
separating the real values with decimal enclosures built from integer square
roots.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Union

Rational = Fraction
RationalLike = Union[Fraction, int, str]

LT, EQ, GT = -1, 0, 1

#: Default number of digit doublings allowed in :func:`compare_combinations`.
MAX_PRECISION_DOUBLINGS = 64
_START_DIGITS = 8
_EPS = sys.float_info.epsilon


class PrecisionExceeded(ArithmeticError):
    """Raised when refinement hits the configured precision ceiling."""


def as_rational(value: RationalLike) -> Fraction:
    """Parse ``p/q`` strings, ints and Fractions; floats are refused."""
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(f"exact rational expected, got {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational")


def format_rational(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def is_squarefree(n: int) -> bool:
    if n < 1:
        return False
    if n % 4 == 0:
        return False
    p = 3
    m = n
    if m % 2 == 0:
        m //= 2
    while p * p <= m:
        if m % (p * p) == 0:
            return False
        if m % p == 0:
            m //= p
        p += 2
    return True


@dataclass(frozen=True, order=False)
class QuadIrr:
    """The positive real ``scale * sqrt(radicand)``."""

    scale: Fraction
    radicand: int

    def __post_init__(self):
        object.__setattr__(self, "scale", as_rational(self.scale))
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not is_squarefree(self.radicand):
            raise ValueError(f"radicand {self.radicand} is not a positive squarefree integer")

    @property
    def is_rational(self) -> bool:
        return self.radicand == 1

    def __float__(self) -> float:
        return float(self.scale) * math.sqrt(self.radicand)

    def __str__(self) -> str:
        if self.radicand == 1:
            return str(self.scale)
        if self.scale == 1:
            return f"sqrt({self.radicand})"
        return f"{self.scale}*sqrt({self.radicand})"


UNIT = QuadIrr(Fraction(1), 1)

Combination = Mapping[QuadIrr, Fraction]


def normalize(combo: Combination) -> dict[int, Fraction]:
    """Rewrite a combination in the basis ``{sqrt(d)}`` keyed by radicand."""
    out: dict[int, Fraction] = {}
    for q, c in combo.items():
        if c == 0:
            continue
        out[q.radicand] = out.get(q.radicand, Fraction(0)) + c * q.scale
    return {d: c for d, c in out.items() if c != 0}


def _sqrt_bounds(d: int, digits: int) -> tuple[Fraction, Fraction]:
    if d == 1:
        return Fraction(1), Fraction(1)
    scale = 10 ** digits
    r = math.isqrt(d * scale * scale)
    if r * r == d * scale * scale:
        return Fraction(r, scale), Fraction(r, scale)
    return Fraction(r, scale), Fraction(r + 1, scale)


@dataclass(frozen=True)
class Enclosure:
    """Rational interval ``[lo, hi]`` around the value of ``terms``.

    ``precision_level`` is the number of decimal digits used for every square
    root; ``terms`` is the radicand basis form of the enclosed number.
    """

    lo: Fraction
    hi: Fraction
    precision_level: int
    terms: tuple[tuple[int, Fraction], ...] = field(default=(), repr=False)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi


def _enclose_terms(terms: tuple[tuple[int, Fraction], ...], digits: int) -> Enclosure:
    lo = hi = Fraction(0)
    for d, c in terms:
        a, b = _sqrt_bounds(d, digits)
        if c > 0:
            lo += c * a
            hi += c * b
        else:
            lo += c * b
            hi += c * a
    return Enclosure(lo, hi, digits, terms)


def enclose(value, digits: int = 0) -> Enclosure:
    """Enclosure of a rational, a :class:`QuadIrr` or a combination."""
    if isinstance(value, (int, Fraction)):
        q = Fraction(value)
        return Enclosure(q, q, digits, ((1, q),) if q else ())
    if isinstance(value, QuadIrr):
        value = {value: Fraction(1)}
    terms = tuple(sorted(normalize(value).items()))
    return _enclose_terms(terms, digits)


def _width_at(terms, digits: int) -> Fraction:
    irr = sum((abs(c) for d, c in terms if d != 1), Fraction(0))
    return irr / 10 ** digits


def refine(e: Enclosure, target_width: Fraction) -> Enclosure:
    """Tighten ``e`` until ``hi - lo <= target_width``.

    Each square root is resolved to ``digits`` decimals, so the width is at
    most ``sum(|c|) * 10**-digits`` and refinement always terminates.
    """
    target_width = as_rational(target_width)
    if target_width <= 0:
        raise ValueError("target_width must be positive")
    if e.width <= target_width:
        return e
    digits = e.precision_level + 1
    while _width_at(e.terms, digits) > target_width:
        digits += 1
    out = _enclose_terms(e.terms, digits)
    # nested by construction: isqrt bounds at more digits never widen
    return out


def _float_sign(terms) -> int | None:
    """Sign of a combination from doubles, or None when not certain.

    Each term ``c*sqrt(d)`` is computed with relative error below 4 ulps, and
    summing k terms adds at most k ulps of the absolute sum, so the bound
    below is conservative.
    """
    try:
        parts = [float(c) * math.sqrt(d) for d, c in terms]
    except OverflowError:
        return None
    total = math.fsum(parts)
    mag = math.fsum(abs(p) for p in parts)
    bound = 8.0 * (len(parts) + 2) * _EPS * mag + 1e-300
    if total > bound:
        return GT
    if total < -bound:
        return LT
    return None


def sign_of(terms: tuple[tuple[int, Fraction], ...],
            max_doublings: int = MAX_PRECISION_DOUBLINGS) -> int:
    """Certified sign of a nonzero basis-form combination."""
    if not terms:
        return EQ
    s = _float_sign(terms)
    if s is not None:
        return s
    digits = _START_DIGITS
    for _ in range(max_doublings + 1):
        e = _enclose_terms(terms, digits)
        if e.lo > 0:
            return GT
        if e.hi < 0:
            return LT
        digits *= 2
    raise PrecisionExceeded(f"could not separate combination from 0 after {max_doublings} doublings")


def compare_combinations(x: Combination, y: Combination,
                         max_doublings: int = MAX_PRECISION_DOUBLINGS) -> int:
    """Return LT, EQ or GT comparing the real values of ``x`` and ``y``.

    EQ is decided symbolically; strict order by enclosure refinement.
    """
    if not x and not y:
        raise ValueError("at least one combination must be nonempty")
    diff = dict(normalize(x))
    for d, c in normalize(y).items():
        diff[d] = diff.get(d, Fraction(0)) - c
    terms = tuple(sorted((d, c) for d, c in diff.items() if c != 0))
    return sign_of(terms, max_doublings)
