"""Quasi-arithmetic generator recovery from a black-box mean.

Given a mean ``F`` reflexive at two points ``a < b``, words in ``a, b`` fill
``[a, b]`` and the map ``k/2^n -> F-word`` defined by
``f0((r+s)/2) = F(f0(r), f0(s))`` inverts to a sampled generator ``phi``
with ``phi(a) = 0`` and ``phi(b) = 1``.  Black boxes work on rational
enclosures: they receive two intervals and a requested precision and return
an interval containing the exact value.
"""
from __future__ import annotations

import math
import random
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from decimal import ROUND_CEILING, ROUND_FLOOR
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from mpmath import iv, libmp

from .coeffs import as_rational, format_rational

DEFAULT_PRECISION = Fraction(1, 10 ** 12)
DEFAULT_FIT_TOLERANCE = 1e-6
_MAX_REFINES = 6


class ReflexivityError(ValueError):
    def __init__(self, message, defect):
        super().__init__(message)
        self.defect = defect


class MonotonicityError(ValueError):
    def __init__(self, message, pair):
        super().__init__(message)
        self.pair = pair


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class Bounds:
    """Closed rational interval."""

    lo: Fraction
    hi: Fraction

    @classmethod
    def point(cls, x) -> "Bounds":
        x = as_rational(x)
        return cls(x, x)

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def overlaps(self, other: "Bounds") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def distance(self, x: "Bounds") -> Fraction:
        """Largest possible distance between a point of self and one of x."""
        return max(self.hi, x.hi) - min(self.lo, x.lo)

    def __float__(self):
        return float(self.mid)


Evaluator = Callable[[Bounds, Bounds, Fraction], Bounds]


@dataclass
class BlackBoxMean:
    name: str
    evaluator: Evaluator
    domain: tuple[Fraction, Fraction] | None = None
    calls: int = field(default=0, compare=False)

    def __call__(self, x: Bounds, y: Bounds, precision: Fraction = DEFAULT_PRECISION) -> Bounds:
        self.calls += 1
        return self.evaluator(x, y, precision)


# ---------------------------------------------------------------------------
# built-in means, evaluated with mpmath interval arithmetic
# ---------------------------------------------------------------------------

def _bits(precision: Fraction) -> int:
    return max(53, math.ceil(-math.log2(float(precision))) + 40)


def _to_iv(b: Bounds):
    lo = iv.mpf(b.lo.numerator) / b.lo.denominator
    hi = iv.mpf(b.hi.numerator) / b.hi.denominator
    return iv.mpf([lo.a, hi.b])


def _from_iv(v) -> Bounds:
    lo_raw, hi_raw = v._mpi_
    ml, el = libmp.to_man_exp(lo_raw) if lo_raw != libmp.fzero else (0, 0)
    mh, eh = libmp.to_man_exp(hi_raw) if hi_raw != libmp.fzero else (0, 0)
    return Bounds(Fraction(ml) * Fraction(2) ** el, Fraction(mh) * Fraction(2) ** eh)


def _iv_mean(fn) -> Evaluator:
    def evaluate(x: Bounds, y: Bounds, precision: Fraction) -> Bounds:
        saved = iv.prec
        iv.prec = _bits(precision)
        try:
            return _from_iv(fn(_to_iv(x), _to_iv(y)))
        finally:
            iv.prec = saved
    return evaluate


def _arith(x: Bounds, y: Bounds, precision: Fraction) -> Bounds:
    return Bounds((x.lo + y.lo) / 2, (x.hi + y.hi) / 2)


def _power(p: Fraction) -> Evaluator:
    if p == 0:
        return _iv_mean(lambda x, y: iv.sqrt(x * y))
    if p == 1:
        return _arith
    if p.denominator == 1 and p > 0:
        k = int(p)  # integer powers keep enclosures tight

        def fn(x, y):
            return ((x ** k + y ** k) / 2) ** (iv.mpf(1) / k)
    else:
        def fn(x, y):
            pv = iv.mpf(p.numerator) / p.denominator
            return ((x ** pv + y ** pv) / 2) ** (1 / pv)
    return _iv_mean(fn)


def builtin_mean(name: str) -> BlackBoxMean:
    """``arith``, ``geom``, ``power:p``, ``quasi:exp`` or ``quasi:log``."""
    if name == "arith":
        return BlackBoxMean(name, _arith)
    if name in ("geom", "quasi:log"):
        return BlackBoxMean(name, _iv_mean(lambda x, y: iv.sqrt(x * y)), (Fraction(0), None))
    if name == "quasi:exp":
        return BlackBoxMean(name, _iv_mean(lambda x, y: iv.log((iv.exp(x) + iv.exp(y)) / 2)))
    if name.startswith("power:"):
        p = as_rational(name.split(":", 1)[1])
        return BlackBoxMean(name, _power(p), (Fraction(0), None))
    raise ValueError(f"unknown mean {name!r}")


def generator_function(name: str) -> Callable[[float], float]:
    """Closed-form generator of a built-in, for comparisons in tests and reports."""
    if name == "arith":
        return lambda x: x
    if name in ("geom", "quasi:log"):
        return math.log
    if name == "quasi:exp":
        return math.exp
    if name.startswith("power:"):
        p = float(as_rational(name.split(":", 1)[1]))
        return math.log if p == 0 else (lambda x: x ** p)
    raise ValueError(f"unknown mean {name!r}")


def perturbed_arith(shift) -> BlackBoxMean:
    """``(x + y)/2 + shift``: strictly increasing and symmetric, never reflexive."""
    shift = as_rational(shift)

    def ev(x, y, precision):
        return Bounds((x.lo + y.lo) / 2 + shift, (x.hi + y.hi) / 2 + shift)

    return BlackBoxMean(f"arith+{shift}", ev)


# ---------------------------------------------------------------------------
# external process protocol
# ---------------------------------------------------------------------------

def decimal_text(q: Fraction, rounding, digits: int = 40) -> str:
    from .staircase import decimal_string

    if _terminates(q.denominator):
        return _exact_decimal(q)
    return decimal_string(q, digits, rounding)


def _terminates(d: int) -> bool:
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


def _exact_decimal(q: Fraction) -> str:
    num, den = q.numerator, q.denominator
    sign = "-" if num < 0 else ""
    num = abs(num)
    twos = fives = 0
    d = den
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    k = max(twos, fives)
    scaled = num * 10 ** k // den
    s = str(scaled).rjust(k + 1, "0")
    if k == 0:
        return sign + s
    return f"{sign}{s[:-k]}.{s[-k:]}"


class ExternalMean:
    """Mean evaluated by a child process speaking the line protocol.

    Request ``EVAL x_lo x_hi y_lo y_hi prec``, response ``VAL lo hi``; every
    number is a decimal string.  Non-terminating rationals are rounded
    outward before sending.
    """

    def __init__(self, command: str | Sequence[str], name: str | None = None):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.name = name or "external:" + " ".join(self.argv)
        self._proc = None
        self._lock = threading.Lock()

    def _ensure(self):
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                          text=True, bufsize=1)

    def evaluate(self, x: Bounds, y: Bounds, precision: Fraction) -> Bounds:
        fields = [
            decimal_text(x.lo, ROUND_FLOOR), decimal_text(x.hi, ROUND_CEILING),
            decimal_text(y.lo, ROUND_FLOOR), decimal_text(y.hi, ROUND_CEILING),
            decimal_text(precision, ROUND_FLOOR),
        ]
        with self._lock:
            self._ensure()
            self._proc.stdin.write("EVAL " + " ".join(fields) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        parts = line.split()
        if len(parts) != 3 or parts[0] != "VAL":
            raise ProtocolError(f"bad response from {self.name}: {line!r}")
        lo, hi = Fraction(parts[1]), Fraction(parts[2])
        if lo > hi:
            raise ProtocolError(f"inverted enclosure from {self.name}: {line!r}")
        return Bounds(lo, hi)

    def close(self):
        if self._proc is not None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:  # pragma: no cover - best effort shutdown
                self._proc.kill()
            self._proc = None

    def as_mean(self) -> BlackBoxMean:
        return BlackBoxMean(self.name, self.evaluate)

    def __del__(self):
        self.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def resolve_mean(spec: str) -> BlackBoxMean:
    """Built-in name, or ``external:<command line>``."""
    if spec.startswith("external:"):
        return ExternalMean(spec[len("external:"):]).as_mean()
    return builtin_mean(spec)


# ---------------------------------------------------------------------------
# words
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Word:
    value: Bounds
    tree: str


@dataclass(frozen=True)
class WordSet:
    a: Fraction
    b: Fraction
    depth: int
    words: tuple[Word, ...]

    @property
    def values(self) -> list[Bounds]:
        return [w.value for w in self.words]

    def __len__(self):
        return len(self.words)


def endpoint_defects(M: BlackBoxMean, a: Fraction, b: Fraction, precision: Fraction):
    A, B = Bounds.point(a), Bounds.point(b)
    return M(A, A, precision).distance(A), M(B, B, precision).distance(B)


def _dedupe(words: list[Word]) -> list[Word]:
    words.sort(key=lambda w: (w.value.lo, w.value.hi))
    out: list[Word] = []
    for w in words:
        if out and out[-1].value.overlaps(w.value):
            continue
        out.append(w)
    return out


def generate_words(M: BlackBoxMean, a, b, depth: int, precision=DEFAULT_PRECISION,
                   tol=None, check_endpoints: bool = True) -> WordSet:
    """Iterate ``W_{n+1} = W_n + {F(x, y)}`` from ``W_0 = {a, b}``.

    Words whose enclosures overlap at the working precision are merged.
    ``check_endpoints=False`` skips the reflexivity precondition and the
    range check, which is how impostor means are inspected.
    """
    a, b, precision = as_rational(a), as_rational(b), as_rational(precision)
    if not a < b:
        raise ValueError("need a < b")
    tol = 10 * precision if tol is None else as_rational(tol)
    if check_endpoints:
        da, db = endpoint_defects(M, a, b, precision)
        if da > tol or db > tol:
            raise ReflexivityError(f"{M.name} is not reflexive at the endpoints "
                                   f"(defects {float(da):.3g}, {float(db):.3g})", max(da, db))
    words = [Word(Bounds.point(a), "a"), Word(Bounds.point(b), "b")]
    for _ in range(depth):
        new = list(words)
        for x in words:
            for y in words:
                v = M(x.value, y.value, precision)
                new.append(Word(v, f"F({x.tree},{y.tree})"))
        words = _dedupe(new)
    inside = all(w.value.lo >= a - tol and w.value.hi <= b + tol for w in words)
    if check_endpoints and not inside:
        raise ValueError(f"{M.name} produced words outside [{a}, {b}]")
    return WordSet(a, b, depth, tuple(words))


@dataclass(frozen=True)
class ReflexivityReport:
    max_defect: Fraction
    tolerance: Fraction
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures


def check_reflexivity_propagation(M: BlackBoxMean, ws: WordSet, tol=None,
                                  precision=DEFAULT_PRECISION) -> ReflexivityReport:
    precision = as_rational(precision)
    tol = 10 * precision if tol is None else as_rational(tol)
    worst = Fraction(0)
    failures = []
    for w in ws.words:
        d = M(w.value, w.value, precision).distance(w.value)
        worst = max(worst, d)
        if d > tol:
            failures.append(w.tree)
    return ReflexivityReport(worst, tol, tuple(failures))


def density_gap_scan(ws: WordSet) -> Fraction:
    """Largest spacing between consecutive words relative to ``b - a``."""
    if len(ws.words) < 2:
        raise ValueError("need at least two words")
    mids = sorted(w.value.mid for w in ws.words)
    return max(y - x for x, y in zip(mids, mids[1:])) / (ws.b - ws.a)


# ---------------------------------------------------------------------------
# dyadic map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicMap:
    a: Fraction
    b: Fraction
    depth: int
    entries: dict[Fraction, Bounds]
    consistency_residual: Fraction
    precision: Fraction

    def nodes(self) -> list[tuple[Fraction, Bounds]]:
        return sorted(self.entries.items())


def _dyadic_values(M, a, b, depth, precision):
    vals = {Fraction(0): Bounds.point(a), Fraction(1): Bounds.point(b)}
    for level in range(1, depth + 1):
        den = 2 ** level
        for k in range(1, den, 2):
            r, s = Fraction(k - 1, den), Fraction(k + 1, den)
            vals[Fraction(k, den)] = M(vals[r], vals[s], precision)
    return vals


def _check_monotone(vals) -> tuple | None:
    """First inverted consecutive pair, or 'unresolved' when enclosures touch."""
    keys = sorted(vals)
    unresolved = None
    for d0, d1 in zip(keys, keys[1:]):
        v0, v1 = vals[d0], vals[d1]
        if v0.hi < v1.lo:
            continue
        if v0.lo > v1.hi:
            return ("inverted", d0, d1)
        unresolved = unresolved or ("unresolved", d0, d1)
    return unresolved


def build_dyadic_map(M: BlackBoxMean, a, b, depth: int, precision=DEFAULT_PRECISION,
                     tol=None) -> DyadicMap:
    """``f0`` on ``k/2^depth`` plus a second split per interior dyadic.

    The primary split of ``k/2^l`` (k odd) is its two neighbours at level l;
    the alternative uses ``d -+ 2^-(l+1)``, so values are computed one level
    deeper than reported.  Touching enclosures trigger higher precision.
    """
    a, b, precision = as_rational(a), as_rational(b), as_rational(precision)
    if not a < b:
        raise ValueError("need a < b")
    tol = 10 * precision if tol is None else as_rational(tol)
    da, db = endpoint_defects(M, a, b, precision)
    if da > tol or db > tol:
        raise ReflexivityError(f"{M.name} is not reflexive at the endpoints", max(da, db))
    work = precision
    for _ in range(_MAX_REFINES):
        vals = _dyadic_values(M, a, b, depth + 1, work)
        status = _check_monotone(vals)
        if status is None:
            break
        if status[0] == "inverted":
            _, d0, d1 = status
            raise MonotonicityError(f"f0({d0}) > f0({d1}): {M.name} is not strictly increasing",
                                    (d0, d1))
        work = work * work
    else:
        _, d0, d1 = status
        raise MonotonicityError(f"could not separate f0({d0}) and f0({d1})", (d0, d1))
    residual = Fraction(0)
    half = Fraction(1, 2 ** (depth + 1))
    for d in vals:
        if d.denominator > 2 ** depth or d in (0, 1):
            continue
        alt = M(vals[d - half], vals[d + half], work)
        residual = max(residual, alt.distance(vals[d]))
    entries = {d: v for d, v in vals.items() if d.denominator <= 2 ** depth}
    return DyadicMap(a, b, depth, entries, residual, work)


# ---------------------------------------------------------------------------
# generator recovery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Reconstruction:
    name: str
    a: Fraction
    b: Fraction
    depth: int
    node_x: np.ndarray
    node_phi: np.ndarray
    max_residual: float
    fit_tolerance: float
    pairs_checked: int
    consistency_residual: float

    @property
    def ok(self) -> bool:
        return bool(self.max_residual <= self.fit_tolerance)

    def phi(self, x):
        return np.interp(np.asarray(x, dtype=float), self.node_x, self.node_phi)

    def generator_deviation(self, g: Callable[[float], float]) -> float:
        """Max distance between phi and ``g`` normalized to 0 at a, 1 at b."""
        ga, gb = g(float(self.a)), g(float(self.b))
        target = np.array([(g(x) - ga) / (gb - ga) for x in self.node_x])
        return float(np.max(np.abs(target - self.node_phi)))

    def to_json(self) -> dict:
        return {
            "mean": self.name,
            "a": format_rational(self.a),
            "b": format_rational(self.b),
            "depth": self.depth,
            "max_residual": float(self.max_residual),
            "fit_tolerance": self.fit_tolerance,
            "pairs_checked": self.pairs_checked,
            "consistency_residual": self.consistency_residual,
            "quasi_arithmetic": self.ok,
        }


def reconstruct_phi(M: BlackBoxMean, a, b, n: int, precision=DEFAULT_PRECISION,
                    fit_tolerance: float = DEFAULT_FIT_TOLERANCE, pairs: int = 2000,
                    seed: int = 0, dyadic: DyadicMap | None = None) -> Reconstruction:
    """Invert ``f0`` piecewise-linearly and test the quasi-arithmetic identity.

    Residual: ``|phi(F(x, y)) - (phi(x) + phi(y))/2|`` over seeded node pairs.
    """
    dm = dyadic or build_dyadic_map(M, a, b, n, precision)
    nodes = dm.nodes()
    xs = np.array([float(v.mid) for _, v in nodes])
    ph = np.array([float(d) for d, _ in nodes])
    rng = random.Random(seed)
    m = len(nodes)
    idx_pairs = [(rng.randrange(m), rng.randrange(m)) for _ in range(pairs)]
    worst = 0.0
    for i, j in idx_pairs:
        v = M(nodes[i][1], nodes[j][1], dm.precision)
        lhs = float(np.interp(float(v.mid), xs, ph))
        worst = max(worst, abs(lhs - (ph[i] + ph[j]) / 2))
    return Reconstruction(M.name, dm.a, dm.b, dm.depth, xs, ph, float(worst), fit_tolerance,
                          len(idx_pairs), float(dm.consistency_residual))
