"""Generator families and breadth-first enumeration of the iterated sumset.

Starting from a finite family ``H0`` of positive reals that are linearly
independent over Q, layer ``i+1`` adds every weighted combination
``sum(alpha_k * x_k)`` of elements of layer ``i``.  Elements are stored as
their (unique) nonnegative rational coefficient vector over ``H0``, so
deduplication is a dictionary lookup and never a numeric test.
"""
from __future__ import annotations

import functools
import json
import logging
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .coeffs import (
    EQ,
    GT,
    LT,
    Enclosure,
    QuadIrr,
    as_rational,
    compare_combinations,
    enclose,
    format_rational,
    refine,
)
from .weights import Weights

log = logging.getLogger(__name__)

ENUMERATION_SCHEMA = "bisym.enumeration"
ENUMERATION_VERSION = 1

DEFAULT_MAX_DEPTH = 12
DEFAULT_MAX_ELEMENTS = 10 ** 6
_FLOAT_MARGIN = 1e-9


def default_max_elements() -> int:
    env = os.environ.get("BISYM_MAX_ELEMENTS")
    if env:
        return int(env)
    return DEFAULT_MAX_ELEMENTS


class FamilyError(ValueError):
    pass


class UnknownGenerator(KeyError):
    pass


class EnumerationCapExceeded(RuntimeError):
    """Raised when an enumeration grows past its element cap.

    ``partial`` holds the enumeration of the last completed layer, flagged
    ``truncated``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class HElem:
    """Element of H as a canonical map ``generator id -> positive Fraction``."""

    __slots__ = ("_items", "_hash")

    def __init__(self, coeffs: Mapping[int, Fraction] | Iterable[tuple[int, Fraction]]):
        pairs = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        items = []
        for gid, c in pairs:
            c = as_rational(c)
            if c <= 0:
                raise ValueError(f"HElem coefficients must be positive, got {c} at generator {gid}")
            items.append((int(gid), c))
        if not items:
            raise ValueError("HElem must have at least one coefficient")
        items.sort()
        for a, b in zip(items, items[1:]):
            if a[0] == b[0]:
                raise ValueError(f"duplicate generator id {a[0]}")
        self._items = tuple(items)
        self._hash = hash(self._items)

    @classmethod
    def unit(cls, gid: int) -> "HElem":
        return cls(((gid, Fraction(1)),))

    @classmethod
    def _trusted(cls, items: tuple) -> "HElem":
        obj = cls.__new__(cls)
        obj._items = items
        obj._hash = hash(items)
        return obj

    @property
    def items(self) -> tuple[tuple[int, Fraction], ...]:
        return self._items

    @property
    def coeffs(self) -> dict[int, Fraction]:
        return dict(self._items)

    def coeff(self, gid: int) -> Fraction:
        for g, c in self._items:
            if g == gid:
                return c
        return Fraction(0)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(g for g, _ in self._items)

    def __eq__(self, other):
        if not isinstance(other, HElem):
            return NotImplemented
        return self._items == other._items

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{g}: {c}" for g, c in self._items)
        return f"HElem({{{inner}}})"

    def to_json(self) -> list[list[int]]:
        return [[g, c.numerator, c.denominator] for g, c in self._items]

    @classmethod
    def from_json(cls, data) -> "HElem":
        return cls((int(g), Fraction(int(p), int(q))) for g, p, q in data)


def combine(alphas: Sequence[Fraction], args: Sequence[HElem]) -> HElem:
    """Coefficient-wise ``sum(alpha_k * coeffs(x_k))``."""
    acc: dict[int, Fraction] = {}
    for a, x in zip(alphas, args):
        for g, c in x._items:
            acc[g] = acc.get(g, 0) + a * c
    return HElem._trusted(tuple(sorted(acc.items())))


@dataclass(frozen=True)
class GeneratorFamily:
    generators: tuple[tuple[int, QuadIrr], ...]
    base_window: tuple[Fraction, Fraction]

    def __post_init__(self):
        object.__setattr__(self, "_by_id", dict(self.generators))
        object.__setattr__(self, "_floats", {g: float(q) for g, q in self.generators})

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(g for g, _ in self.generators)

    def value(self, gid: int) -> QuadIrr:
        try:
            return self._by_id[gid]
        except KeyError:
            raise UnknownGenerator(gid) from None

    def combination(self, x: HElem) -> dict[QuadIrr, Fraction]:
        return {self.value(g): c for g, c in x.items}

    def approx(self, x: HElem) -> float:
        fl = self._floats
        try:
            return math.fsum(float(c) * fl[g] for g, c in x.items)
        except KeyError as exc:
            raise UnknownGenerator(exc.args[0]) from None

    def compare(self, x: HElem, y: HElem) -> int:
        if x == y:
            return EQ
        return compare_combinations(self.combination(x), self.combination(y))

    def compare_rational(self, x: HElem, q: Fraction) -> int:
        other = {QuadIrr(q, 1): Fraction(1)} if q > 0 else {}
        if not other:
            return GT
        return compare_combinations(self.combination(x), other)

    def to_json(self) -> dict:
        return {
            "generators": [
                {"id": g, "scale": [q.scale.numerator, q.scale.denominator], "radicand": q.radicand}
                for g, q in self.generators
            ],
            "base_window": [format_rational(self.base_window[0]), format_rational(self.base_window[1])],
        }

    @classmethod
    def from_json(cls, data) -> "GeneratorFamily":
        gens = tuple(
            (int(d["id"]), QuadIrr(Fraction(int(d["scale"][0]), int(d["scale"][1])), int(d["radicand"])))
            for d in data["generators"]
        )
        lo, hi = (as_rational(v) for v in data["base_window"])
        return cls(gens, (lo, hi))


def make_family(spec: Sequence[tuple], window: tuple) -> GeneratorFamily:
    """Build a family from ``(scale, radicand)`` pairs inside ``window``.

    Ids are assigned in increasing order of value.
    """
    lo, hi = (as_rational(w) for w in window)
    if lo > hi:
        raise FamilyError(f"empty window [{lo}, {hi}]")
    if not spec:
        raise FamilyError("generator family must be nonempty")
    values = []
    seen = set()
    for scale, radicand in spec:
        radicand = int(radicand)
        try:
            q = QuadIrr(as_rational(scale), radicand)
        except ValueError as exc:
            raise FamilyError(str(exc)) from None
        if radicand in seen:
            raise FamilyError(f"duplicate radicand {radicand}")
        seen.add(radicand)
        one = {q: Fraction(1)}
        if lo > 0 and compare_combinations(one, {QuadIrr(lo, 1): Fraction(1)}) == LT:
            raise FamilyError(f"{q} lies below the window [{lo}, {hi}]")
        if hi <= 0 or compare_combinations(one, {QuadIrr(hi, 1): Fraction(1)}) == GT:
            raise FamilyError(f"{q} lies above the window [{lo}, {hi}]")
        values.append(q)
    ordered = sorted(values, key=functools.cmp_to_key(
        lambda a, b: compare_combinations({a: Fraction(1)}, {b: Fraction(1)})))
    return GeneratorFamily(tuple(enumerate(ordered)), (lo, hi))


@dataclass(frozen=True)
class HEnumeration:
    family: GeneratorFamily
    weights: Weights
    depth: int
    window: tuple[Fraction, Fraction]
    elements: tuple[HElem, ...]
    stabilized: bool = False
    depth_certificate: dict | None = None
    truncated: bool = False
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {x: i for i, x in enumerate(self.elements)})

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, x):
        return x in self._index

    def index(self, x: HElem) -> int:
        return self._index[x]

    def approx_values(self) -> np.ndarray:
        return np.array([self.family.approx(x) for x in self.elements])

    def to_json(self) -> dict:
        return {
            "schema": ENUMERATION_SCHEMA,
            "version": ENUMERATION_VERSION,
            "family": self.family.to_json(),
            "weights": [format_rational(a) for a in self.weights.alphas],
            "depth": self.depth,
            "window": [format_rational(self.window[0]), format_rational(self.window[1])],
            "stabilized": self.stabilized,
            "truncated": self.truncated,
            "depth_certificate": self.depth_certificate,
            "elements": [x.to_json() for x in self.elements],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, data) -> "HEnumeration":
        if data.get("schema") != ENUMERATION_SCHEMA:
            raise ValueError("not an enumeration document")
        if int(data.get("version", 0)) > ENUMERATION_VERSION:
            raise ValueError(f"unsupported enumeration version {data['version']}")
        return cls(
            family=GeneratorFamily.from_json(data["family"]),
            weights=Weights.of(data["weights"]),
            depth=int(data["depth"]),
            window=tuple(as_rational(v) for v in data["window"]),
            elements=tuple(HElem.from_json(e) for e in data["elements"]),
            stabilized=bool(data["stabilized"]),
            depth_certificate=data.get("depth_certificate"),
            truncated=bool(data.get("truncated", False)),
        )

    @classmethod
    def loads(cls, text: str) -> "HEnumeration":
        return cls.from_json(json.loads(text))


def value_enclosure(x: HElem, family: GeneratorFamily, width) -> Enclosure:
    """Rational enclosure of the value of ``x`` of width at most ``width``."""
    e = enclose(family.combination(x), 0)
    return refine(e, as_rational(width))


def sort_elements(family: GeneratorFamily, elems: Iterable[HElem]) -> list[HElem]:
    """Sort by value; adjacent pairs are certified with exact comparisons."""
    elems = list(elems)
    keyed = sorted(elems, key=lambda x: (family.approx(x), x.items))
    for a, b in zip(keyed, keyed[1:]):
        if family.compare(a, b) != LT:
            log.debug("float order disagreed with exact order; full exact sort")
            return sorted(elems, key=functools.cmp_to_key(family.compare))
    return keyed


def _in_window(family, x, approx, lo, hi) -> bool:
    # float test is decisive away from the bounds (all terms positive)
    tol = _FLOAT_MARGIN * max(abs(approx), 1.0)
    if approx < float(lo) - tol or approx > float(hi) + tol:
        return False
    if float(lo) + tol < approx < float(hi) - tol:
        return True
    return family.compare_rational(x, lo) != LT and family.compare_rational(x, hi) != GT


def _generator_lower(family: GeneratorFamily) -> Fraction:
    return min(enclose(q, 6).lo for _, q in family.generators)


def stabilization_bound(weights: Weights, family: GeneratorFamily, depth: int):
    """Lower bound on every element that first appears after ``depth`` layers.

    Only meaningful when ``min(alpha) >= 1``; returns None otherwise.  A new
    element of layer i+1 needs one argument new at layer i, so with
    ``g = min generator`` the bound obeys ``L(i+1) = lam*g + a_min*(L(i) - g)``.
    """
    a_min = min(weights.alphas)
    if a_min < 1:
        return None
    g = _generator_lower(family)
    bound = g
    for _ in range(depth + 1):
        bound = weights.lam * g + a_min * (bound - g)
    return g, bound


def enumerate_h(family: GeneratorFamily, weights: Weights, depth: int, window,
                max_elements: int | None = None, max_depth: int = DEFAULT_MAX_DEPTH,
                use_numba: bool | None = None) -> HEnumeration:
    """Breadth-first enumeration of ``H_depth`` restricted to ``window``."""
    lo, hi = (as_rational(w) for w in window)
    if not lo < hi:
        raise ValueError("window.lo must be smaller than window.hi")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth > max_depth:
        raise ValueError(f"depth {depth} exceeds the cap {max_depth}")
    if max_elements is None:
        max_elements = default_max_elements()
    alphas = weights.alphas
    n = len(alphas)
    a_min = float(min(alphas))
    alphas_f = [float(a) for a in alphas]

    def keep_bound(layer: int) -> float:
        # smallest descendant of x is >= a_min**k * x over k <= depth-layer steps
        if a_min >= 1:
            b = float(hi)
        else:
            b = float(hi) / a_min ** (depth - layer)
        return b * (1 + _FLOAT_MARGIN) + 1e-12

    def finish(entries, layers_done, truncated=False):
        inside = [x for x, v, _ in entries if _in_window(family, x, v, lo, hi)]
        elems = tuple(sort_elements(family, inside))
        stabilized = False
        cert = None
        sb = stabilization_bound(weights, family, layers_done)
        if sb is not None and not truncated:
            g, bound = sb
            stabilized = bound > hi
            cert = {
                "min_generator_lower": format_rational(g),
                "new_element_lower_bound": format_rational(bound),
                "window_hi": format_rational(hi),
                "rule": "L(i+1) = lambda*g + min_alpha*(L(i) - g), L(0) = g",
            }
        return HEnumeration(family, weights, layers_done, (lo, hi), elems,
                            stabilized=stabilized, depth_certificate=cert, truncated=truncated)

    seen: set[HElem] = set()
    pool: list[tuple[HElem, float, bool]] = []
    for g in family.ids:
        x = HElem.unit(g)
        seen.add(x)
        v = family.approx(x)
        if v <= keep_bound(0):
            pool.append((x, v, True))

    for layer in range(depth):
        pool.sort(key=lambda t: t[1])
        all_vals = np.array([v for _, v, _ in pool])
        new_idx = np.array([i for i, t in enumerate(pool) if t[2]], dtype=np.int64)
        old_idx = np.array([i for i, t in enumerate(pool) if not t[2]], dtype=np.int64)
        all_idx = np.arange(len(pool), dtype=np.int64)
        bound = keep_bound(layer + 1)
        fresh: list[tuple[HElem, float, bool]] = []
        # split by the position p of the first argument that is new in this layer
        for p in range(n):
            parts = [old_idx] * p + [new_idx] + [all_idx] * (n - p - 1)
            if any(len(ix) == 0 for ix in parts):
                continue
            cols = [all_vals[ix] for ix in parts]
            tuples = kernels.expand_tuples(cols, alphas_f, bound, use_numba=use_numba)
            for row in tuples.tolist():
                x = combine(alphas, [pool[parts[k][row[k]]][0] for k in range(n)])
                if x in seen:
                    continue
                seen.add(x)
                fresh.append((x, family.approx(x), True))
                if len(pool) + len(fresh) > max_elements:
                    partial = finish(pool, layer, truncated=True)
                    raise EnumerationCapExceeded(
                        f"enumeration exceeded {max_elements} elements at layer {layer + 1}", partial)
        log.debug("layer %d: %d new elements", layer + 1, len(fresh))
        pool = [(x, v, False) for x, v, _ in pool if v <= bound] + fresh
    return finish(pool, depth)


def gaps(e: HEnumeration) -> list[tuple[HElem, HElem]]:
    """Consecutive pairs of the sorted enumeration."""
    if len(e.elements) < 2:
        raise ValueError("gaps need at least two elements")
    return list(zip(e.elements, e.elements[1:]))
