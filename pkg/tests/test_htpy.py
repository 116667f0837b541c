import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from chainrebuild.folner import amenable_weak_rebuilding
from chainrebuild.homology import integer_homology, is_acyclic
from chainrebuild.htpy import (
    HomotopyRetract,
    augment,
    augmented_retract,
    contract_acyclic,
    homotopy_inverse,
    identity_retract,
    plus_construction,
    quality_from_quotient,
    verify_retract,
)
from chainrebuild.intmat import IntMatrix
from chainrebuild.randomgen import random_complex, random_retract, random_weak_equivalence
from chainrebuild.rebuild import circle_complex, coarse_circle_retract
from chainrebuild.zchain import (
    BasedComplex,
    ComplexError,
    GradedMap,
    chain_map_defects,
    cone,
    direct_sum,
    homotopy_defects,
    zero_complex,
)

seeds = st.integers(0, 2 ** 32 - 1)


def is_contraction(s, X):
    return not homotopy_defects(s, GradedMap.identity(X), GradedMap.zero(X, X))


def test_identity_retract():
    assert verify_retract(identity_retract(circle_complex(5))) == []


def test_coarse_circle_retract():
    for d in (1, 2, 5, 16):
        R = coarse_circle_retract(d)
        assert verify_retract(R) == []
        assert R.target.ranks() == {0: 1, 1: 1}


def test_perturbed_homotopy_rejected():
    R = coarse_circle_retract(6)
    X = R.source
    bump = GradedMap(X, X, {0: IntMatrix.from_entries(6, 6, [(2, 3, 1)])}, 1)
    bad = HomotopyRetract(X, R.target, R.forward, R.backward, R.homotopy + bump)
    msgs = verify_retract(bad)
    assert msgs and "degrees [0" in msgs[0]


def test_contraction_of_identity_cone():
    Z = BasedComplex({0: ("a",), 1: ("b",)}, {1: IntMatrix.identity(1)})
    s = contract_acyclic(Z)
    assert s[0].to_dense() == [[1]]
    with pytest.raises(ComplexError):
        contract_acyclic(circle_complex(3))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_cones_of_identities_contract(seed):
    X = random_complex(random.Random(seed))
    C = cone(GradedMap.identity(X)).complex
    assert is_contraction(contract_acyclic(C), C)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_random_acyclic_contract(seed):
    X = random_complex(random.Random(seed), acyclic=True)
    assert is_acyclic(X)
    assert is_contraction(contract_acyclic(X), X)


def test_homotopy_inverse_of_identity():
    X = circle_complex(4)
    r, Hs, Ht = homotopy_inverse(GradedMap.identity(X))
    assert r == GradedMap.identity(X) and Hs.is_zero() and Ht.is_zero()


def test_homotopy_inverse_of_collapse():
    X = cone(GradedMap.identity(circle_complex(3))).complex
    zero = BasedComplex({j: () for j in X.degrees})
    r, Hs, _ = homotopy_inverse(GradedMap.zero(X, zero))
    assert r.is_zero()
    assert is_contraction(Hs, X)


def test_homotopy_inverse_rejects_non_equivalence():
    X = circle_complex(3)
    with pytest.raises(ComplexError):
        homotopy_inverse(GradedMap(X, X, {j: IntMatrix.identity(3).scale(2) for j in X.degrees}))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_homotopy_inverse_identities(seed):
    q, X, Y = random_weak_equivalence(random.Random(seed))
    r, Hs, Ht = homotopy_inverse(q)
    assert not chain_map_defects(r)
    assert not homotopy_defects(Hs, GradedMap.identity(X), r @ q)
    assert not homotopy_defects(Ht, GradedMap.identity(Y), q @ r)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_random_retracts_verify(seed):
    R = random_retract(random.Random(seed))
    assert verify_retract(R) == []
    for j in R.source.degrees:
        assert integer_homology(R.source, j) == integer_homology(R.target, j)


def test_augment():
    assert is_acyclic(augment(BasedComplex({0: ("p",)})))
    A = augment(circle_complex(4))
    assert A.d(0).to_dense() == [[1, 1, 1, 1]]
    assert integer_homology(A, 1).betti == 1
    with pytest.raises(ComplexError):
        augment(BasedComplex({-1: ("x",)}))


def test_plus_construction():
    assert plus_construction(zero_complex()).ranks() == {0: 1}
    Y = circle_complex(3)
    Yp = plus_construction(Y)
    assert Yp.rank(0) == 4 and Yp.rank(1) == 3
    assert Yp.d(1).l1_norm() == Y.d(1).l1_norm()


def _check_plus_norms(qr):
    fwd = qr.retract.forward
    assert fwd.norm(0) <= 2
    assert all(fwd.norm(j) <= 1 for j in fwd.nonzero_degrees() if j >= 1)


def test_quotient_by_everything():
    X = BasedComplex({0: ("p",)})
    qr = augmented_retract(X, {0: [0]})
    assert qr.retract.target.ranks() == {0: 1}
    _check_plus_norms(qr)


def test_quotient_by_nothing():
    X = circle_complex(3)
    qr = augmented_retract(X, {})
    assert qr.retract.target.rank(0) == 4 and qr.retract.target.rank(1) == 3
    _check_plus_norms(qr)


@pytest.mark.parametrize("route", ["direct", "cone"])
@pytest.mark.parametrize("d,cut", [(5, 3), (8, 5), (12, 2)])
def test_quotient_of_circle_arc(route, d, cut):
    # the arc v_0 .. v_cut with the edges between them is contractible
    X = circle_complex(d)
    qr = augmented_retract(X, {0: range(cut + 1), 1: range(cut)}, route=route)
    assert verify_retract(qr.retract) == []
    Yp = qr.retract.target
    assert Yp.rank(0) == d - cut and Yp.rank(1) == d - cut
    _check_plus_norms(qr)


def test_routes_agree_on_ranks():
    X = circle_complex(9)
    a = augmented_retract(X, {0: range(4), 1: range(3)}, route="direct")
    b = augmented_retract(X, {0: range(4), 1: range(3)}, route="cone")
    assert a.retract.target.ranks() == b.retract.target.ranks()
    assert a.retract.forward == b.retract.forward


def test_rejects_bad_inputs():
    X = circle_complex(4)
    with pytest.raises(ComplexError, match="not closed"):
        augmented_retract(X, {0: [0, 1], 1: [0, 1]})
    good = augmented_retract(X, {0: [0, 1], 1: [0]})
    A, Xe = good.nullhomotopy.source, good.nullhomotopy.target
    with pytest.raises(ComplexError):
        augmented_retract(X, {0: [0, 1], 1: [0]}, nullhomotopy=GradedMap.zero(A, Xe, 1))
    with pytest.raises(ValueError):
        augmented_retract(X, {0: [0]}, route="sideways")


def test_folner_quotient_quality():
    reb = amenable_weak_rebuilding(1, 16)
    Yp = reb.quotient.retract.target
    assert (Yp.rank(0), Yp.rank(1)) == (3, 4)
    qq = quality_from_quotient(reb.quotient.retract.source, Yp, 1)
    assert qq.T == 4 and qq.kappa == 1.0
    _check_plus_norms(reb.quotient)


def test_quotient_quality_without_compression():
    X = circle_complex(4)
    Yp = direct_sum(X, BasedComplex({0: ("pt",)}))
    assert quality_from_quotient(X, Yp, 1).T <= 1
    assert quality_from_quotient(X, zero_complex(), 1).T == Fraction(4)
