import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from bisym.coeffs import GT, LT
from bisym.genset import (EnumerationCapExceeded, FamilyError, HElem, HEnumeration, combine,
                          enumerate_h, gaps, make_family, stabilization_bound, value_enclosure)
from bisym.weights import Regime, Weights

from conftest import h


def test_make_family_examples():
    fam = make_family([(1, 3), (1, 2)], (1, 2))
    assert [q.radicand for _, q in fam.generators] == [2, 3]  # ids follow value order
    fam = make_family([(1, 1), (1, 2)], (1, 2))
    assert [q.radicand for _, q in fam.generators] == [1, 2]
    with pytest.raises(FamilyError):
        make_family([(1, 4), (1, 2)], (1, 2))


@pytest.mark.parametrize("spec, window", [
    ([(1, 2), (1, 2)], (1, 2)),      # duplicate radicand
    ([(1, 5)], (1, 2)),              # above window
    ([(F(1, 2), 2)], (1, 2)),        # below window
    ([], (1, 2)),
])
def test_make_family_rejects(spec, window):
    with pytest.raises(FamilyError):
        make_family(spec, window)


def test_depth1_example(depth1):
    assert list(depth1.elements) == [h(r2=1), h(r3=1), h(r2=2), h(r2=1, r3=1), h(r3=2)]
    assert depth1.stabilized


def test_depth0_and_single_generator(fam23):
    e0 = enumerate_h(fam23, Weights.of([1, 1]), 0, (1, 4))
    assert list(e0.elements) == [h(r2=1), h(r3=1)]
    fam = make_family([(1, 2)], (1, 2))
    e = enumerate_h(fam, Weights.of([1, 2]), 1, (1, 10))
    assert list(e.elements) == [HElem({0: 1}), HElem({0: 3})]


def test_depth3_pinned_count(fam23):
    e = enumerate_h(fam23, Weights.of([1, 1]), 3, (1, 16))
    assert len(e.elements) == 44


def test_elements_strictly_increasing(depth2_pool):
    fam = depth2_pool.family
    els = depth2_pool.elements
    assert all(fam.compare(a, b) == LT for a, b in zip(els, els[1:]))


def test_gaps(fam23, depth1):
    e0 = enumerate_h(fam23, Weights.of([1, 1]), 0, (1, 4))
    assert gaps(e0) == [(h(r2=1), h(r3=1))]
    assert len(gaps(depth1)) == 4


def test_value_enclosure():
    fam = make_family([(1, 2), (1, 3)], (1, 2))
    e = value_enclosure(h(r2=1), fam, F(1, 100))
    assert (e.lo, e.hi) == (F(141, 100), F(142, 100))
    e = value_enclosure(h(r2=1, r3=1), fam, F(1, 10))
    assert e.lo <= F(3146, 1000) <= e.hi


def test_helem_rejects_zero_and_empty():
    with pytest.raises(ValueError):
        HElem({0: 0})
    with pytest.raises(ValueError):
        HElem({})


def test_serialization_roundtrip(depth2_pool):
    text = depth2_pool.dumps()
    back = HEnumeration.loads(text)
    assert back.elements == depth2_pool.elements
    assert back.dumps() == text


def test_cap_exceeded_carries_partial(fam23):
    with pytest.raises(EnumerationCapExceeded) as info:
        enumerate_h(fam23, Weights.of([1, 1]), 3, (1, 16), max_elements=5)
    assert info.value.partial is not None


def test_env_cap(fam23, monkeypatch):
    monkeypatch.setenv("BISYM_MAX_ELEMENTS", "3")
    with pytest.raises(EnumerationCapExceeded):
        enumerate_h(fam23, Weights.of([1, 1]), 2, (1, 16))


def test_stabilization_requires_alpha_min_at_least_one(fam23):
    e = enumerate_h(fam23, Weights.of([F(1, 2), F(1, 2)]), 2, (0, 4))
    assert not e.stabilized


def test_numba_and_numpy_enumerations_agree(fam23):
    w = Weights.of([1, 2])
    a = enumerate_h(fam23, w, 3, (1, 40), use_numba=True)
    b = enumerate_h(fam23, w, 3, (1, 40), use_numba=False)
    assert a.elements == b.elements


def test_weights_regimes():
    assert Weights.of([1, 1]).regime is Regime.EXPANDING
    assert Weights.of(["1/4", "1/4"]).regime is Regime.CONTRACTING
    assert Weights.of(["1/2", "1/2"]).regime is Regime.REFLEXIVE
    with pytest.raises(ValueError):
        Weights.of([1, 0])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.fractions(min_value=F(1, 3), max_value=3, max_denominator=4), min_size=2, max_size=3),
       st.integers(0, 2))
def test_enumeration_matches_brute_force(alphas, depth):
    fam = make_family([(1, 2), (1, 3)], (1, 2))
    w = Weights.of(alphas)
    window = (F(1, 2), F(12))
    e = enumerate_h(fam, w, depth, window)
    level = {HElem.unit(0), HElem.unit(1)}
    for _ in range(depth):
        level |= {combine(w.alphas, t) for t in itertools.product(level, repeat=w.n)}
    lo, hi = window
    expect = {x for x in level
              if fam.compare_rational(x, lo) != LT and fam.compare_rational(x, hi) != GT}
    assert set(e.elements) == expect


def test_stabilization_bound_grows(fam23):
    w = Weights.of([1, 1])
    bounds = [stabilization_bound(w, fam23, d) for d in range(4)]
    assert all(a < b for a, b in zip(bounds, bounds[1:]))
