"""Discontinuity certificates and escape diagnostics.

A one-variable section ``y -> F(..fixed.., y, ..fixed..)`` has, in
H-coordinates, every image equal to ``sum_j alpha_j * fixed_j + alpha_i * y``.
If some fixed argument has a positive coefficient at generator ``u`` then
every image has u-coefficient at least that positive amount, so any element
of H with zero u-coefficient is never attained, at any depth.  A strictly
increasing map of an interval that skips a value of its order-convex range
jumps there; that last step lives in the continuum and is stated in
``CERTIFICATE_NOTE`` rather than checked.
"""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Sequence

from .coeffs import GT, LT, as_rational, enclose, format_rational
from .genset import (
    GeneratorFamily,
    HElem,
    HEnumeration,
    combine,
    default_max_elements,
    EnumerationCapExceeded,
)
from .quasisum import apply
from .weights import Regime, Weights

CERTIFICATE_SCHEMA = "bisym.certificate"
CERTIFICATE_VERSION = 1

CERTIFICATE_NOTE = (
    "Every image of the section has a coefficient at the forbidden generator of at least "
    "positive_coefficient, while missed_value has coefficient 0 there, so missed_value is "
    "not in the range of the section over all of H. In interval coordinates the section is "
    "strictly increasing and its range skips the conjugate of missed_value, which lies "
    "between attained values; hence the section has a jump discontinuity."
)


class Direction(enum.Enum):
    ABOVE = "above"
    BELOW = "below"


class CertificateNotFound(LookupError):
    pass


def default_direction(w: Weights) -> Direction:
    if w.regime is Regime.EXPANDING:
        return Direction.ABOVE
    if w.regime is Regime.CONTRACTING:
        return Direction.BELOW
    raise ValueError("no default direction in the reflexive regime (lambda = 1)")


def section_args(free_position: int, fixed_args: Sequence[HElem], y: HElem) -> list[HElem]:
    args = list(fixed_args)
    args.insert(free_position, y)
    return args


def _fixed_weights(w: Weights, free_position: int) -> list[Fraction]:
    return [a for k, a in enumerate(w.alphas) if k != free_position]


def section_lower_bound(w: Weights, free_position: int, fixed_args: Sequence[HElem], u: int) -> Fraction:
    """Exact lower bound on the u-coefficient of every section image."""
    return sum((a * x.coeff(u) for a, x in zip(_fixed_weights(w, free_position), fixed_args)),
               Fraction(0))


def _check_section(w, free_position, fixed_args):
    if not 0 <= free_position < w.n:
        raise ValueError(f"free_position must lie in [0, {w.n})")
    if len(fixed_args) != w.n - 1:
        raise ValueError(f"expected {w.n - 1} fixed arguments, got {len(fixed_args)}")


def _generator_preference(fixed_args: Sequence[HElem]) -> list[int]:
    # largest coefficient first, ties to the smaller generator id
    best: dict[int, Fraction] = {}
    for x in fixed_args:
        for g, c in x.items:
            if c > best.get(g, Fraction(0)):
                best[g] = c
    return sorted(best, key=lambda g: (-best[g], g))


@dataclass(frozen=True)
class GapCertificate:
    family: GeneratorFamily
    weights: Weights
    free_position: int
    fixed_args: tuple[HElem, ...]
    forbidden_generator: int
    positive_coefficient: Fraction
    missed_value: HElem
    order_window: tuple[HElem | None, HElem | None]
    direction: Direction

    def to_json(self) -> dict:
        lo, hi = self.order_window
        return {
            "schema": CERTIFICATE_SCHEMA,
            "version": CERTIFICATE_VERSION,
            "family": self.family.to_json(),
            "weights": self.weights.to_json(),
            "free_position": self.free_position,
            "fixed_args": [x.to_json() for x in self.fixed_args],
            "forbidden_generator": self.forbidden_generator,
            "positive_coefficient": format_rational(self.positive_coefficient),
            "missed_value": self.missed_value.to_json(),
            "order_window": [lo.to_json() if lo else None, hi.to_json() if hi else None],
            "direction": self.direction.value,
            "note": CERTIFICATE_NOTE,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"


def _load_v1(data) -> GapCertificate:
    lo, hi = data["order_window"]
    return GapCertificate(
        family=GeneratorFamily.from_json(data["family"]),
        weights=Weights.of(data["weights"]),
        free_position=int(data["free_position"]),
        fixed_args=tuple(HElem.from_json(x) for x in data["fixed_args"]),
        forbidden_generator=int(data["forbidden_generator"]),
        positive_coefficient=as_rational(data["positive_coefficient"]),
        missed_value=HElem.from_json(data["missed_value"]),
        order_window=(HElem.from_json(lo) if lo else None, HElem.from_json(hi) if hi else None),
        direction=Direction(data["direction"]),
    )


_LOADERS = {1: _load_v1}


def certificate_from_json(data) -> GapCertificate:
    """Load a serialized certificate of any schema version up to the current one."""
    if data.get("schema") != CERTIFICATE_SCHEMA:
        raise ValueError("not a certificate document")
    version = int(data.get("version", 1))
    try:
        loader = _LOADERS[version]
    except KeyError:
        raise ValueError(f"unsupported certificate version {version}") from None
    return loader(data)


def _zero_u_candidates(e: HEnumeration, u: int, direction: Direction) -> list[int]:
    idx = [i for i, x in enumerate(e.elements) if x.coeff(u) == 0]
    # farthest first: elements are sorted increasing by value
    return idx[::-1] if direction is Direction.ABOVE else idx


def _certificate(w, free_position, fixed_args, e, u, i, direction) -> GapCertificate:
    elems = e.elements
    lo = elems[i - 1] if i > 0 else None
    hi = elems[i + 1] if i + 1 < len(elems) else None
    return GapCertificate(
        family=e.family,
        weights=w,
        free_position=free_position,
        fixed_args=tuple(fixed_args),
        forbidden_generator=u,
        positive_coefficient=section_lower_bound(w, free_position, fixed_args, u),
        missed_value=elems[i],
        order_window=(lo, hi),
        direction=direction,
    )


def _select(w, free_position, fixed_args, e, direction):
    _check_section(w, free_position, fixed_args)
    if not e.elements:
        raise ValueError("enumeration is empty")
    prefs = [u for u in _generator_preference(fixed_args)
             if section_lower_bound(w, free_position, fixed_args, u) > 0]
    if not prefs:
        raise ValueError("no fixed argument has a positive coefficient")
    for u in prefs:
        cands = _zero_u_candidates(e, u, direction)
        if cands:
            return u, cands
    raise CertificateNotFound(
        "enumeration has no element with a zero coefficient at any usable generator; "
        "raise the depth or add generators")


def find_gap_certificate(w: Weights, free_position: int, fixed_args: Sequence[HElem],
                         e: HEnumeration, direction: Direction | None = None) -> GapCertificate:
    """Certificate that the section misses the farthest zero-u element of ``e``.

    ``free_position`` is the coordinate left free; ``fixed_args`` fill the
    other coordinates in order.
    """
    direction = direction or default_direction(w)
    u, cands = _select(w, free_position, fixed_args, e, direction)
    return _certificate(w, free_position, fixed_args, e, u, cands[0], direction)


@dataclass(frozen=True)
class TailCertificates:
    certificates: tuple[GapCertificate, ...]
    truncated: bool

    def __iter__(self):
        return iter(self.certificates)

    def __len__(self):
        return len(self.certificates)

    def __getitem__(self, i):
        return self.certificates[i]


def tail_certificates(w: Weights, free_position: int, fixed_args: Sequence[HElem],
                      e: HEnumeration, k: int, direction: Direction | None = None) -> TailCertificates:
    """Up to ``k`` certificates for distinct missed values on the far tail.

    Values increase along the list for ABOVE and decrease for BELOW.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0:
        return TailCertificates((), False)
    direction = direction or default_direction(w)
    try:
        u, cands = _select(w, free_position, fixed_args, e, direction)
    except CertificateNotFound:
        return TailCertificates((), True)
    chosen = sorted(cands[:k], reverse=direction is Direction.BELOW)
    certs = tuple(_certificate(w, free_position, fixed_args, e, u, i, direction) for i in chosen)
    return TailCertificates(certs, len(certs) < k)


def verify_certificate(c: GapCertificate, e: HEnumeration) -> bool:
    """Re-derive every fact a certificate claims, exactly."""
    w = c.weights
    try:
        _check_section(w, c.free_position, c.fixed_args)
    except ValueError:
        return False
    if c.family.generators != e.family.generators:
        return False
    u = c.forbidden_generator
    if u not in c.family.ids:
        return False
    bound = section_lower_bound(w, c.free_position, c.fixed_args, u)
    if c.positive_coefficient <= 0 or bound != c.positive_coefficient:
        return False
    if c.missed_value.coeff(u) != 0:
        return False
    for y in e.elements:
        img = apply(w, section_args(c.free_position, c.fixed_args, y))
        if img.coeff(u) < c.positive_coefficient or img == c.missed_value:
            return False
    lo, hi = c.order_window
    fam = c.family
    if lo is not None and fam.compare(lo, c.missed_value) != LT:
        return False
    if hi is not None and fam.compare(hi, c.missed_value) != GT:
        return False
    return True


# ---------------------------------------------------------------------------
# escape diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EscapeReport:
    weights: Weights
    m: int
    base_lower: Fraction
    base_upper: Fraction
    lower: Fraction
    upper: Fraction
    query_bound: Fraction | None = None
    stabilization_depth: int | None = None
    note: str = ""

    def to_json(self) -> dict:
        return {
            "weights": self.weights.to_json(),
            "lambda": format_rational(self.weights.lam),
            "m": self.m,
            "L0": format_rational(self.base_lower),
            "U0": format_rational(self.base_upper),
            "lower": format_rational(self.lower),
            "upper": format_rational(self.upper),
            "M": format_rational(self.query_bound) if self.query_bound is not None else None,
            "stabilization_depth": self.stabilization_depth,
            "note": self.note,
        }


def base_bounds(family: GeneratorFamily, digits: int = 0) -> tuple[Fraction, Fraction]:
    """Outer-rounded rational bounds on the smallest and largest generator."""
    encs = [enclose(q, digits) for _, q in family.generators]
    return min(e.lo for e in encs), max(e.hi for e in encs)


def stabilization_depth(lam: Fraction, L0: Fraction, U0: Fraction, M: Fraction):
    """Least m with ``lam**m * L0 > M`` (lam > 1) or ``lam**m * U0 < M`` (lam < 1)."""
    if lam == 1:
        return None, "undefined: lambda = 1, layers do not escape"
    m = 0
    if lam > 1:
        if L0 <= 0:
            return None, "undefined: L0 <= 0"
        while lam ** m * L0 <= M:
            m += 1
        return m, ""
    if M <= 0:
        return None, "undefined: M <= 0"
    while lam ** m * U0 >= M:
        m += 1
    return m, ""


def escape_bounds(w: Weights, family: GeneratorFamily, m: int, M=None, digits: int = 0) -> EscapeReport:
    """Exact bounds ``[lam^m L0, lam^m U0]`` on the balanced layer ``S_m``.

    ``L0``/``U0`` round the extreme generators outward to ``digits`` decimals.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    if not family.generators:
        raise ValueError("family is empty")
    L0, U0 = base_bounds(family, digits)
    lam = w.lam
    depth = None
    note = ""
    if M is not None:
        M = as_rational(M)
        depth, note = stabilization_depth(lam, L0, U0, M)
    return EscapeReport(w, m, L0, U0, lam ** m * L0, lam ** m * U0, M, depth, note)


def balanced_layer(w: Weights, family: GeneratorFamily, m: int,
                   max_elements: int | None = None) -> set[HElem]:
    """``S_m``: every argument of the top combination sits at depth exactly m-1."""
    if max_elements is None:
        max_elements = default_max_elements()
    layer = {HElem.unit(g) for g in family.ids}
    for step in range(m):
        cur = sorted(layer, key=lambda x: x.items)
        nxt = set()
        for args in itertools.product(cur, repeat=w.n):
            nxt.add(combine(w.alphas, args))
            if len(nxt) > max_elements:
                raise EnumerationCapExceeded(f"balanced layer {step + 1} exceeded {max_elements} elements")
        layer = nxt
    return layer


def balanced_layer_check(w: Weights, family: GeneratorFamily, m: int, digits: int = 0,
                         max_elements: int | None = None) -> bool:
    rep = escape_bounds(w, family, m, digits=digits)
    for x in balanced_layer(w, family, m, max_elements):
        if family.compare_rational(x, rep.lower) == LT:
            return False
        if family.compare_rational(x, rep.upper) == GT:
            return False
    return True


def monomial_layer(w: Weights, family: GeneratorFamily, m: int,
                   max_elements: int | None = None) -> set[HElem]:
    """``K_m``: one free generator per monomial ``alpha^e`` with ``|e| = m``."""
    if max_elements is None:
        max_elements = default_max_elements()
    n = w.n
    exps = [e for e in itertools.product(range(m + 1), repeat=n) if sum(e) == m]
    assert len(exps) == comb(m + n - 1, n - 1)
    monos = []
    for e in exps:
        c = Fraction(1)
        for a, k in zip(w.alphas, e):
            c *= a ** k
        monos.append(c)
    if len(family.ids) ** len(monos) > max_elements:
        raise EnumerationCapExceeded(f"monomial layer {m} has more than {max_elements} assignments")
    out = set()
    units = [HElem.unit(g) for g in family.ids]
    for choice in itertools.product(units, repeat=len(monos)):
        out.add(combine(monos, choice))
    return out


def layer_comparison(w: Weights, family: GeneratorFamily, m: int) -> dict:
    """Sizes of the balanced layer S_m, the monomial layer K_m and their differences."""
    s = balanced_layer(w, family, m)
    k = monomial_layer(w, family, m)
    return {
        "m": m,
        "balanced": len(s),
        "monomial": len(k),
        "balanced_not_monomial": len(s - k),
        "monomial_not_balanced": len(k - s),
    }
