"""Weighted quasi-sums in H-coordinates and exact law verifiers.

In H-coordinates the operation ``F(x_1..x_n) = f^-1(sum alpha_i f(x_i))`` is
the linear map on coefficient vectors ``sum alpha_i * coeffs(x_i)``.  Every
algebraic law is therefore decided by comparing coefficient maps, with no
rounding anywhere.
"""
from __future__ import annotations

import enum
import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

from .coeffs import LT, format_rational
from .genset import HElem, HEnumeration, combine
from .weights import Regime, Weights

__all__ = [
    "Weights", "Regime", "Law", "Verdict", "Counterexample", "LawReport", "ZERO",
    "apply", "extended_apply", "verify_bisymmetry", "check_reflexivity", "check_symmetry",
    "check_associativity", "verify_monotonicity", "verify_bisym_from_assoc_sym",
    "extended_reflexive_points", "recheck", "law_sides", "associativity_form",
    "expected_verdicts", "EXHAUSTIVE_LIMIT",
]

#: Pools with at most this many argument tuples are checked exhaustively.
EXHAUSTIVE_LIMIT = 10 ** 4


class Law(enum.Enum):
    BISYMMETRY = "bisymmetry"
    NARY_BISYMMETRY = "nary_bisymmetry"
    SYMMETRY = "symmetry"
    ASSOCIATIVITY = "associativity"
    REFLEXIVITY = "reflexivity"
    MONOTONICITY = "partial_strict_monotonicity"
    EXTENDED_BISYMMETRY = "extended_bisymmetry"


class Verdict(enum.Enum):
    HOLDS = "holds_on_sample"
    VIOLATED = "violated"


class _Zero:
    """The adjoined neutral point, below every element of H."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ZERO"

    def __reduce__(self):
        return (_Zero, ())


ZERO = _Zero()
ExtendedElem = Union[_Zero, HElem]


def apply(w: Weights, args: Sequence[HElem]) -> HElem:
    if len(args) != w.n:
        raise ValueError(f"expected {w.n} arguments, got {len(args)}")
    return combine(w.alphas, args)


def extended_apply(w: Weights, args: Sequence[ExtendedElem]) -> ExtendedElem:
    """Binary sum with ``ZERO`` adjoined as neutral element; only for w = (1, 1)."""
    if w.n != 2 or not w.all_one:
        raise ValueError("the neutral extension is only defined for weights (1, 1)")
    if len(args) != 2:
        raise ValueError(f"expected 2 arguments, got {len(args)}")
    x, y = args
    if x is ZERO:
        return y
    if y is ZERO:
        return x
    return combine(w.alphas, (x, y))


@dataclass(frozen=True)
class Counterexample:
    args: tuple
    lhs: object
    rhs: object
    position: int | None = None
    permutation: tuple[int, ...] | None = None
    detail: str = ""

    def to_json(self) -> dict:
        def enc(x):
            return "zero" if x is ZERO else x.to_json()

        out = {"args": [enc(a) for a in self.args], "lhs": enc(self.lhs), "rhs": enc(self.rhs)}
        if self.position is not None:
            out["position"] = self.position
        if self.permutation is not None:
            out["permutation"] = list(self.permutation)
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass(frozen=True)
class LawReport:
    law: Law
    verdict: Verdict
    weights: Weights
    samples_checked: int
    seed: int
    counterexample: Counterexample | None = None
    exhaustive: bool = False
    notes: tuple[str, ...] = field(default=())

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS

    def to_json(self) -> dict:
        return {
            "law": self.law.value,
            "verdict": self.verdict.value,
            "weights": self.weights.to_json(),
            "samples_checked": self.samples_checked,
            "seed": self.seed,
            "exhaustive": self.exhaustive,
            "counterexample": self.counterexample.to_json() if self.counterexample else None,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# both sides of each identity, shared by the verifiers and by recheck()
# ---------------------------------------------------------------------------

def _bisym_sides(w, args):
    n = w.n
    rows = [args[i * n:(i + 1) * n] for i in range(n)]
    lhs = apply(w, [apply(w, r) for r in rows])
    rhs = apply(w, [apply(w, [rows[i][j] for i in range(n)]) for j in range(n)])
    return lhs, rhs


def _assoc_at(w, args, position):
    n = w.n
    inner = apply(w, args[position:position + n])
    outer = list(args[:position]) + [inner] + list(args[position + n:])
    return apply(w, outer)


def _assoc_sides(w, args, position):
    return _assoc_at(w, args, 0), _assoc_at(w, args, position)


def _ext_chain(w, x, y, u, v):
    F = lambda a, b: extended_apply(w, (a, b))  # noqa: E731
    return [
        F(F(x, y), F(u, v)),
        F(F(F(x, y), u), v),
        F(F(x, F(y, u)), v),
        F(F(x, F(u, y)), v),
        F(F(F(x, u), y), v),
        F(F(x, u), F(y, v)),
    ]


def law_sides(law: Law, w: Weights, cex: Counterexample):
    """Recompute (lhs, rhs) of the identity recorded in ``cex``."""
    args = cex.args
    if law in (Law.BISYMMETRY, Law.NARY_BISYMMETRY):
        return _bisym_sides(w, args)
    if law is Law.SYMMETRY:
        return apply(w, args), apply(w, [args[i] for i in cex.permutation])
    if law is Law.ASSOCIATIVITY:
        return _assoc_sides(w, args, cex.position)
    if law is Law.REFLEXIVITY:
        return apply(w, [args[0]] * w.n), args[0]
    if law is Law.MONOTONICITY:
        i = cex.position
        rest = list(args[2:])
        return apply(w, rest[:i] + [args[0]] + rest[i:]), apply(w, rest[:i] + [args[1]] + rest[i:])
    if law is Law.EXTENDED_BISYMMETRY:
        chain = _ext_chain(w, *args)
        return chain[0], chain[-1]
    raise ValueError(law)


def recheck(report: LawReport, family=None) -> bool:
    """True iff the stored counterexample still witnesses a violation.

    Monotonicity counterexamples are order statements and need ``family``.
    """
    cex = report.counterexample
    if report.verdict is not Verdict.VIOLATED or cex is None:
        return False
    lhs, rhs = law_sides(report.law, report.weights, cex)
    if lhs != cex.lhs or rhs != cex.rhs:
        return False
    if report.law is Law.MONOTONICITY:
        if family is None:
            raise ValueError("monotonicity recheck needs the generator family")
        return family.compare(lhs, rhs) != LT
    return lhs != rhs


def _tuples(pool: Sequence, arity: int, sample_count: int, rng: random.Random):
    """Exhaustive product when small enough, otherwise seeded samples."""
    total = len(pool) ** arity
    if total <= EXHAUSTIVE_LIMIT:
        return True, itertools.product(pool, repeat=arity)
    return False, (tuple(rng.choice(pool) for _ in range(arity)) for _ in range(sample_count))


def _elements(pool) -> list[HElem]:
    elems = list(pool.elements) if isinstance(pool, HEnumeration) else list(pool)
    if not elems:
        raise ValueError("pool is empty")
    return elems


def verify_bisymmetry(w: Weights, sample_count: int, seed: int, pool) -> LawReport:
    elems = _elements(pool)
    law = Law.BISYMMETRY if w.n == 2 else Law.NARY_BISYMMETRY
    rng = random.Random(seed)
    exhaustive, it = _tuples(elems, w.n * w.n, sample_count, rng)
    checked = 0
    for args in it:
        checked += 1
        lhs, rhs = _bisym_sides(w, args)
        if lhs != rhs:
            cex = Counterexample(tuple(args), lhs, rhs)
            return LawReport(law, Verdict.VIOLATED, w, checked, seed, cex, exhaustive)
    return LawReport(law, Verdict.HOLDS, w, checked, seed, exhaustive=exhaustive)


def check_reflexivity(w: Weights, pool, seed: int = 0) -> LawReport:
    elems = _elements(pool)
    if w.lam != 1:
        x = elems[0]
        lhs = apply(w, [x] * w.n)
        cex = Counterexample((x,), lhs, x, detail=f"F(x,...,x) = {w.lam}*x")
        return LawReport(Law.REFLEXIVITY, Verdict.VIOLATED, w, 1, seed, cex)
    for k, x in enumerate(elems, 1):
        lhs = apply(w, [x] * w.n)
        if lhs != x:
            cex = Counterexample((x,), lhs, x)
            return LawReport(Law.REFLEXIVITY, Verdict.VIOLATED, w, k, seed, cex, True)
    return LawReport(Law.REFLEXIVITY, Verdict.HOLDS, w, len(elems), seed, exhaustive=True)


def check_symmetry(w: Weights, pool, sample_count: int = 200, seed: int = 0) -> LawReport:
    elems = _elements(pool)
    n = w.n
    if not w.all_equal:
        if len(elems) < 2:
            raise ValueError("symmetry counterexample needs two distinct pool elements")
        i, j = next((i, j) for i in range(n) for j in range(i + 1, n) if w.alphas[i] != w.alphas[j])
        x, y = elems[0], elems[1]
        args = [x] * n
        args[i] = y
        perm = list(range(n))
        perm[i], perm[j] = j, i
        lhs = apply(w, args)
        rhs = apply(w, [args[k] for k in perm])
        cex = Counterexample(tuple(args), lhs, rhs, permutation=tuple(perm),
                             detail=f"weights {w.alphas[i]} and {w.alphas[j]} swapped")
        return LawReport(Law.SYMMETRY, Verdict.VIOLATED, w, 1, seed, cex)
    if n <= 4:
        perms = [p for p in itertools.permutations(range(n)) if list(p) != list(range(n))]
    else:
        perms = []
        for k in range(n - 1):
            p = list(range(n))
            p[k], p[k + 1] = p[k + 1], p[k]
            perms.append(tuple(p))
    rng = random.Random(seed)
    exhaustive, it = _tuples(elems, n, sample_count, rng)
    checked = 0
    for args in it:
        checked += 1
        base = apply(w, args)
        for p in perms:
            other = apply(w, [args[k] for k in p])
            if other != base:
                cex = Counterexample(tuple(args), base, other, permutation=p)
                return LawReport(Law.SYMMETRY, Verdict.VIOLATED, w, checked, seed, cex, exhaustive)
    return LawReport(Law.SYMMETRY, Verdict.HOLDS, w, checked, seed, exhaustive=exhaustive)


def associativity_form(w: Weights, position: int) -> list[Fraction]:
    """Coefficients of ``lhs - rhs`` in the 2n-1 arguments.

    ``lhs`` nests the inner operation at position 0, ``rhs`` at ``position``.
    For n = 2, position 1 this is ``(a^2 - a, 0, b - b^2)``.
    """
    n = w.n

    def coeffs(pos):
        out = []
        for k in range(2 * n - 1):
            if k < pos:
                out.append(w.alphas[k])
            elif k < pos + n:
                out.append(w.alphas[pos] * w.alphas[k - pos])
            else:
                out.append(w.alphas[k - n + 1])
        return out

    return [a - b for a, b in zip(coeffs(0), coeffs(position))]


def _independent_pair(elems):
    x = elems[0]
    for z in elems[1:]:
        if z.support != x.support:
            return x, z
        ratios = {c / x.coeff(g) for g, c in z.items}
        if len(ratios) > 1:
            return x, z
    return None


def check_associativity(w: Weights, pool, sample_count: int = 200, seed: int = 0) -> LawReport:
    """Checks the (2n-1)-argument identity for every inner position.

    The inner operation at position 0 is compared with the inner operation
    at each position 1..n-1.  Comparing only the first and last positions
    would accept e.g. (1, 2, 1).
    """
    elems = _elements(pool)
    n = w.n
    arity = 2 * n - 1
    if not w.all_one:
        pair = _independent_pair(elems)
        if pair is None:
            raise ValueError("associativity counterexample needs two independent pool elements")
        x, z = pair
        for position in range(1, n):
            form = associativity_form(w, position)
            if not any(form):
                continue
            for j in range(arity):
                args = [x] * arity
                args[j] = z
                lhs, rhs = _assoc_sides(w, args, position)
                if lhs != rhs:
                    detail = "lhs - rhs coefficients: " + ", ".join(str(c) for c in form)
                    cex = Counterexample(tuple(args), lhs, rhs, position=position, detail=detail)
                    return LawReport(Law.ASSOCIATIVITY, Verdict.VIOLATED, w, 1, seed, cex)
        raise AssertionError("nonzero associativity form without a witness")  # pragma: no cover
    rng = random.Random(seed)
    exhaustive, it = _tuples(elems, arity, sample_count, rng)
    checked = 0
    for args in it:
        checked += 1
        for position in range(1, n):
            lhs, rhs = _assoc_sides(w, args, position)
            if lhs != rhs:
                cex = Counterexample(tuple(args), lhs, rhs, position=position)
                return LawReport(Law.ASSOCIATIVITY, Verdict.VIOLATED, w, checked, seed, cex, exhaustive)
    return LawReport(Law.ASSOCIATIVITY, Verdict.HOLDS, w, checked, seed, exhaustive=exhaustive)


def verify_monotonicity(w: Weights, sample_count: int, seed: int, pool: HEnumeration) -> LawReport:
    """Sampled check that each one-variable section is strictly increasing.

    Orders are certified with exact comparisons in the pool's family.
    """
    elems = _elements(pool)
    if len(elems) < 2:
        raise ValueError("monotonicity needs two distinct pool elements")
    family = pool.family
    rng = random.Random(seed)
    n = w.n
    for k in range(sample_count):
        i = rng.randrange(n)
        a, b = sorted(rng.sample(range(len(elems)), 2))
        x, x2 = elems[a], elems[b]
        if family.compare(x, x2) != LT:
            raise AssertionError(f"pool is not sorted at {a}, {b}")
        rest = [rng.choice(elems) for _ in range(n - 1)]
        lo_args = rest[:i] + [x] + rest[i:]
        hi_args = rest[:i] + [x2] + rest[i:]
        lo, hi = apply(w, lo_args), apply(w, hi_args)
        same = apply(w, list(lo_args))
        if same != lo or family.compare(lo, hi) != LT:
            cex = Counterexample(tuple([x, x2] + rest), lo, hi, position=i,
                                 detail="section output not strictly increasing")
            return LawReport(Law.MONOTONICITY, Verdict.VIOLATED, w, k + 1, seed, cex)
    return LawReport(Law.MONOTONICITY, Verdict.HOLDS, w, sample_count, seed)


def verify_bisym_from_assoc_sym(sample_count: int, seed: int, pool) -> LawReport:
    """Bisymmetry of the (1, 1) operation with ``ZERO`` adjoined.

    Every sample walks the rewriting chain that derives bisymmetry from
    associativity and symmetry and requires all six expressions to agree.
    """
    w = Weights.of([1, 1])
    ext = [ZERO] + _elements(pool)
    rng = random.Random(seed)
    exhaustive, it = _tuples(ext, 4, sample_count, rng)
    checked = 0
    for args in it:
        checked += 1
        chain = _ext_chain(w, *args)
        if any(c != chain[0] for c in chain[1:]):
            cex = Counterexample(tuple(args), chain[0], chain[-1],
                                 detail="rewriting chain broke")
            return LawReport(Law.EXTENDED_BISYMMETRY, Verdict.VIOLATED, w, checked, seed, cex, exhaustive)
    return LawReport(Law.EXTENDED_BISYMMETRY, Verdict.HOLDS, w, checked, seed, exhaustive=exhaustive)


def extended_reflexive_points(pool) -> list:
    """Tested points e of the extended domain with F(e, e) = e."""
    w = Weights.of([1, 1])
    return [e for e in [ZERO] + _elements(pool) if extended_apply(w, (e, e)) == e]


def expected_verdicts(w: Weights) -> dict[Law, Verdict]:
    """Truth table for weighted quasi-sums with positive weights."""
    def v(flag):
        return Verdict.HOLDS if flag else Verdict.VIOLATED

    return {
        Law.BISYMMETRY if w.n == 2 else Law.NARY_BISYMMETRY: Verdict.HOLDS,
        Law.MONOTONICITY: Verdict.HOLDS,
        Law.REFLEXIVITY: v(w.lam == 1),
        Law.SYMMETRY: v(w.all_equal),
        Law.ASSOCIATIVITY: v(w.all_one),
    }


def describe_weights(w: Weights) -> dict:
    return {
        "alphas": [format_rational(a) for a in w.alphas],
        "lambda": format_rational(w.lam),
        "regime": w.regime.value,
    }
