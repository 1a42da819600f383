"""Finite-stage picture of the conjugating bijection and the staircase.

At depth d the enumeration is a finite sorted set, so the strictly increasing
bijection between the interval and H is replaced by an order isomorphism
between an evenly spaced grid and the sorted elements.  The staircase is the
rank CDF of the transported points with linear ramps narrow enough never to
overlap.
"""
from __future__ import annotations

import bisect
import csv
import enum
import io
import json
from dataclasses import dataclass
from decimal import ROUND_CEILING, ROUND_FLOOR, ROUND_UP, Decimal, localcontext
from fractions import Fraction
from typing import Sequence

from . import kernels
from .coeffs import as_rational, format_rational
from .genset import HElem, HEnumeration, value_enclosure
from .quasisum import apply
from .weights import Weights
from .witness import section_args

_POINT_WIDTH = Fraction(1, 10 ** 24)


class IntervalMode(enum.Enum):
    EXPANDING = "expanding"      # I = (1, inf)
    CONTRACTING = "contracting"  # I = (0, 1)


def tau(t) -> Fraction:
    """``1 - 1/t``: increasing bijection of (1, inf) onto (0, 1)."""
    t = as_rational(t)
    if t <= 1:
        raise ValueError(f"tau is defined for t > 1, got {t}")
    return 1 - 1 / t


def tau_inv(s) -> Fraction:
    s = as_rational(s)
    if not 0 < s < 1:
        raise ValueError(f"tau_inv is defined on (0, 1), got {s}")
    return 1 / (1 - s)


@dataclass(frozen=True)
class StageMap:
    enumeration: HEnumeration
    grid: tuple[Fraction, ...]
    interval_mode: IntervalMode
    window: tuple[Fraction, Fraction]

    def element_at(self, i: int) -> HElem:
        return self.enumeration.elements[i]

    def coordinate_of(self, x: HElem) -> Fraction | None:
        try:
            return self.grid[self.enumeration.index(x)]
        except KeyError:
            return None


def build_stage_map(e: HEnumeration, mode: IntervalMode | None = None, window=None) -> StageMap:
    """Assign the i-th smallest element to the midpoint of the i-th grid cell.

    Default window: the enumeration window clipped to (1, inf) in expanding
    mode, (0, 1) in contracting mode.
    """
    n = len(e.elements)
    if n == 0:
        raise ValueError("cannot build a stage map of an empty enumeration")
    if mode is None:
        mode = IntervalMode.CONTRACTING if e.weights.lam < 1 else IntervalMode.EXPANDING
    if window is None:
        if mode is IntervalMode.EXPANDING:
            window = (max(e.window[0], Fraction(1)), e.window[1])
        else:
            window = (Fraction(0), Fraction(1))
    lo, hi = (as_rational(v) for v in window)
    if not lo < hi:
        raise ValueError("stage map window must be nondegenerate")
    step = (hi - lo) / n
    grid = tuple(lo + (2 * i + 1) * step / 2 for i in range(n))
    return StageMap(e, grid, mode, (lo, hi))


@dataclass(frozen=True)
class StaircaseSamples:
    points: tuple[tuple[Fraction, Fraction], ...]
    transported: tuple[Fraction, ...]
    radius: Fraction

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def flat_regions(self) -> int:
        """Maximal runs of positive length on which the staircase is constant."""
        count = 0
        in_flat = False
        for (s0, p0), (s1, p1) in zip(self.points, self.points[1:]):
            flat = p0 == p1 and s1 > s0
            if flat and not in_flat:
                count += 1
            in_flat = flat
        return count


def transported_points(e: HEnumeration) -> list[Fraction]:
    """Rational stand-ins for the images of the elements in (0, 1).

    Values above 1 go through ``tau``; values in (0, 1] are used as they are.
    Each value is replaced by the midpoint of a 1e-24 enclosure, far below
    any spacing that matters at desk scale.
    """
    out = []
    expanding = all(e.family.compare_rational(x, Fraction(1)) > 0 for x in e.elements)
    for x in e.elements:
        enc = value_enclosure(x, e.family, _POINT_WIDTH)
        mid = (enc.lo + enc.hi) / 2
        out.append(tau(mid) if expanding else mid)
    return out


def _phi_exact(points: Sequence[Fraction], radius: Fraction, s: Fraction) -> Fraction:
    n = len(points)
    done = bisect.bisect_right([p + radius for p in points], s)
    val = Fraction(done)
    if done < n and points[done] - radius < s:
        val += (s - (points[done] - radius)) / (2 * radius)
    return val / n


def staircase_samples(e: HEnumeration, resolution: int) -> StaircaseSamples:
    """Exact samples of the rank-CDF staircase on an even grid plus ramp corners."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    pts = transported_points(e)
    if not pts:
        raise ValueError("enumeration is empty")
    radius = min(pts[0], 1 - pts[-1])
    if len(pts) > 1:
        radius = min(radius, min(b - a for a, b in zip(pts, pts[1:])) / 2)
    else:
        radius = radius / 2
    abscissae = {Fraction(k, resolution - 1) for k in range(resolution)}
    for p in pts:
        abscissae.add(p - radius)
        abscissae.add(p + radius)
    samples = tuple((s, _phi_exact(pts, radius, s)) for s in sorted(abscissae))
    return StaircaseSamples(samples, tuple(pts), radius)


def staircase_float(e: HEnumeration, s, use_numba=None):
    """Float evaluation of the same staircase at many abscissae (for plotting)."""
    import numpy as np

    st = staircase_samples(e, 2)
    pts = np.array([float(p) for p in st.transported])
    return kernels.staircase_values(pts, float(st.radius), np.asarray(s, dtype=float), use_numba)


@dataclass(frozen=True)
class SectionSample:
    t: Fraction
    argument: HElem
    image: HElem
    value_t: Fraction | None

    @property
    def in_window(self) -> bool:
        return self.value_t is not None


def section_samples(w: Weights, free_position: int, fixed_args: Sequence[HElem],
                    m: StageMap) -> list[SectionSample]:
    """The section in grid coordinates: t -> grid coordinate of F(.., y(t), ..).

    Images that fall outside the enumeration keep ``value_t = None``.
    """
    out = []
    for t, y in zip(m.grid, m.enumeration.elements):
        img = apply(w, section_args(free_position, fixed_args, y))
        out.append(SectionSample(t, y, img, m.coordinate_of(img)))
    return out


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def decimal_string(q: Fraction, digits: int = 12, rounding=ROUND_UP) -> str:
    """``q`` rounded to ``digits`` significant digits (away from zero by default)."""
    if q == 0:
        return "0"
    with localcontext() as ctx:
        ctx.prec = digits
        ctx.rounding = rounding
        d = Decimal(q.numerator) / Decimal(q.denominator)
    return format(d, "f") if abs(d.adjusted()) < 20 else str(d)


def outward_pair(lo: Fraction, hi: Fraction, digits: int = 12) -> tuple[str, str]:
    return decimal_string(lo, digits, ROUND_FLOOR), decimal_string(hi, digits, ROUND_CEILING)


def write_csv(rows: Sequence[tuple[Fraction, Fraction | None]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "value"])
    for t, v in rows:
        writer.writerow([decimal_string(t), "out_of_window" if v is None else decimal_string(v)])
    return buf.getvalue()


def sidecar_json(rows: Sequence[tuple[Fraction, Fraction | None]], kind: str) -> str:
    doc = {
        "schema": "bisym.samples",
        "version": 1,
        "kind": kind,
        "pairs": [[format_rational(t), None if v is None else format_rational(v)] for t, v in rows],
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def staircase_rows(st: StaircaseSamples):
    return list(st.points)


def section_rows(samples: Sequence[SectionSample]):
    return [(s.t, s.value_t) for s in samples]
