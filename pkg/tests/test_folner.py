from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainrebuild.equivariant import FreeAbelian, koszul_resolution
from chainrebuild.folner import (
    KoszulContraction,
    amenable_weak_rebuilding,
    folner_box,
    generating_set,
    interior,
    interior_subcomplex,
    koszul_nullhomotopy,
    maximal_T,
    word_ball,
)
from chainrebuild.htpy import Subcomplex, augment, verify_retract
from chainrebuild.rebuild import Kind, QualityError
from chainrebuild.zchain import ComplexError, GradedMap, homotopy_defects


def test_boxes():
    assert folner_box(1, 4).points.ravel().tolist() == [0, 1, 2, 3]
    assert folner_box(2, 4).size == 16
    assert folner_box(1, 16).boundary_ratio(1) == Fraction(1, 8)
    with pytest.raises(ValueError):
        folner_box(1, 0)


def test_interiors():
    F = folner_box(1, 16)
    one = interior(F, 1)
    assert one.interior.ravel().tolist() == list(range(1, 15))
    assert one.boundary.ravel().tolist() == [0, 15]
    assert len(interior(F, 2).interior) == 12
    assert len(interior(folner_box(1, 4), 2).interior) == 0
    with pytest.raises(ValueError):
        interior(F, -1)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(1, 9), st.integers(0, 4))
def test_interior_is_a_product_of_intervals(n, d, r):
    data = interior(folner_box(n, d), r)
    P = folner_box(n, d).points
    expected = np.all((P >= r) & (P < d - r), axis=1)
    assert np.array_equal(data.mask, expected)
    assert len(data.interior) + len(data.boundary) == d ** n


def test_word_ball():
    ball = word_ball(FreeAbelian(2).generators(), 2)
    assert len(ball) == 13
    assert np.abs(ball).sum(axis=1).max() == 2


@pytest.mark.parametrize("n,d,ranks", [
    (1, 16, {0: 14, 1: 12}),
    (1, 4, {0: 2, 1: 0}),
    (2, 8, {0: 36, 1: 32, 2: 4}),
])
def test_interior_subcomplex_ranks(n, d, ranks):
    sub = interior_subcomplex(koszul_resolution(FreeAbelian(n)), d, n)
    assert {j: len(sub.indices[j]) for j in ranks} == ranks
    Subcomplex(sub.ambient, sub.indices)


def test_generating_set_must_cover_supports():
    X = koszul_resolution(FreeAbelian(1))
    assert generating_set(X) == [(-1,), (1,)]
    with pytest.raises(ComplexError, match="misses"):
        interior_subcomplex(X, 8, generators=[(-1,)])
    interior_subcomplex(X, 8, generators=[(1,)])


def test_line_contraction_formula():
    K = KoszulContraction(1)
    assert K.unit() == {((), (0,)): 1}
    for k in range(1, 6):
        assert K.apply((), (k,)) == {((0,), (i,)): 1 for i in range(k)}
        assert K.apply((), (-k,)) == {((0,), (i,)): -1 for i in range(-k, 0)}
    assert K.apply((), (0,)) == {}
    assert K.apply((0,), (3,)) == {}


@pytest.mark.parametrize("n,d", [(1, 8), (1, 16), (2, 6), (2, 8), (3, 6)])
def test_koszul_nullhomotopy_identity(n, d):
    X = koszul_resolution(FreeAbelian(n))
    sub = interior_subcomplex(X, d, n)
    Xe = augment(sub.ambient)
    idx = {-1: [0], **{j: sub.indices.get(j, []) for j in sub.ambient.degrees}}
    Ae = Subcomplex(Xe, idx).complex()
    N = koszul_nullhomotopy(n, d, Xe, Ae, idx)
    inc = Subcomplex(Xe, idx)
    from chainrebuild.intmat import IntMatrix

    f = GradedMap(Ae, Xe, {j: IntMatrix.from_coo(Xe.rank(j), len(inc.indices[j]), inc.indices[j],
                                                  range(len(inc.indices[j])), [1] * len(inc.indices[j]))
                           for j in Ae.degrees})
    assert not homotopy_defects(N, f, GradedMap.zero(Ae, Xe))


def test_line_rebuilding_examples():
    reb = amenable_weak_rebuilding(1, 16)
    assert reb.T_max == 4 and reb.kappa == 1.0
    assert reb.certificate.kind == Kind.WEAK and reb.certificate.T == 4
    assert reb.quotient_ranks == {0: 3, 1: 4}
    small = amenable_weak_rebuilding(1, 4)
    assert small.quotient_ranks == {0: 3, 1: 4} and small.T_max == 1


def test_plane_rebuilding_example():
    reb = amenable_weak_rebuilding(2, 8)
    assert reb.quotient_ranks == {0: 29, 1: 96, 2: 60}
    assert reb.T_max == min(Fraction(64, 29), Fraction(128, 96), Fraction(64, 60)) == Fraction(16, 15)
    assert reb.T_max == maximal_T(2, 8)


def test_scale_above_maximum_is_rejected():
    with pytest.raises(QualityError, match="T' = 4"):
        amenable_weak_rebuilding(1, 16, T=5)
    assert amenable_weak_rebuilding(1, 16, T=3).certificate.T == 3


@pytest.mark.parametrize("n,d", [(1, 12), (2, 8)])
def test_routes_agree(n, d):
    a = amenable_weak_rebuilding(n, d, route="direct")
    b = amenable_weak_rebuilding(n, d, route="cone")
    assert verify_retract(b.quotient.retract) == []
    assert a.quotient_ranks == b.quotient_ranks
    assert a.certificate.retract.forward == b.certificate.retract.forward
    assert a.T_max == b.T_max


def test_maximal_T_matches_pipeline():
    for n, d in ((1, 8), (1, 32), (2, 16)):
        assert maximal_T(n, d) == amenable_weak_rebuilding(n, d).T_max


def test_boundary_fraction_shrinks():
    fracs = [amenable_weak_rebuilding(2, 2 ** i).boundary_fraction for i in range(3, 6)]
    for a, b in zip(fracs, fracs[1:]):
        assert all(b[j] < a[j] for j in a)
    assert fracs[-1][0] < Fraction(1, 4)


def test_plane_at_unit_scale_is_indeterminate():
    from chainrebuild.rebuild import IndeterminateQuality

    with pytest.raises(IndeterminateQuality):
        amenable_weak_rebuilding(2, 6)
