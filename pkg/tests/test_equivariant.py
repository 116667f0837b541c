import json
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from chainrebuild.equivariant import (
    EquivariantComplex,
    EquivariantMap,
    EquivariantRetract,
    FiniteCyclic,
    FreeAbelian,
    GroupRingMatrix,
    NormCheck,
    ResidualChain,
    coinvariant_map,
    coinvariant_matrix,
    coinvariant_norm_check,
    coinvariants,
    cosets,
    descend_retract,
    equivariant_cone,
    induce,
    induced_splitting,
    koszul_resolution,
    line_retract,
    restrict,
)
from chainrebuild.homology import homology, integer_homology, is_acyclic
from chainrebuild.intmat import IntMatrix
from chainrebuild.rebuild import QualityError, check_quality, circle_complex, coarse_circle_retract
from chainrebuild.zchain import cone, direct_sum, validate

Z1, Z2 = FreeAbelian(1), FreeAbelian(2)


def random_ring_matrix(rng, G, nrows, ncols, spread=2):
    entries = {}
    for r in range(nrows):
        for c in range(ncols):
            if rng.random() < 0.6:
                terms = [(tuple(rng.randint(-spread, spread) for _ in range(G.rank)), rng.randint(-3, 3))
                         for _ in range(rng.randint(1, 3))]
                entries[(r, c)] = terms
    return GroupRingMatrix(G, nrows, ncols, entries)


def test_koszul_ranks_and_norms():
    K1 = koszul_resolution(Z1)
    assert K1.ranks() == {0: 1, 1: 1}
    assert K1.d(1).entries == {(0, 0): {(1,): 1, (0,): -1}}
    K2 = koszul_resolution(Z2)
    assert K2.ranks() == {0: 1, 1: 2, 2: 1}
    assert K2.d(1).norm() == 2 and K2.d(2).norm() == 4
    K3 = koszul_resolution(FreeAbelian(3))
    assert K3.ranks() == {0: 1, 1: 3, 2: 3, 3: 1}
    assert all(K.validate() == [] for K in (K1, K2, K3))


def test_cyclic_resolution():
    K = koszul_resolution(FiniteCyclic(3), 4)
    assert K.ranks() == {j: 1 for j in range(5)}
    assert [K.d(j).norm() for j in range(1, 5)] == [2, 3, 2, 3]
    assert K.validate() == []
    # integral homology of Z/3 below the truncation
    C = coinvariants(K, 1)
    assert integer_homology(C, 0).betti == 1
    assert integer_homology(C, 1).torsion == (3,)
    assert integer_homology(C, 2).torsion == ()
    assert integer_homology(C, 3).torsion == (3,)


@pytest.mark.parametrize("d", [1, 2, 3, 7, 20])
def test_line_coinvariants_are_circles(d):
    C, S = coinvariants(koszul_resolution(Z1), d), circle_complex(d)
    assert C.d(1) == S.d(1)


@pytest.mark.parametrize("d", [1, 2, 3, 5, 8, 16, 32])
def test_torus_coinvariants(d):
    C = coinvariants(koszul_resolution(Z2), d)
    assert validate(C) == []
    hs = homology(C)
    assert [hs[j].betti for j in (0, 1, 2)] == [1, 2, 1]
    assert all(not h.torsion for h in hs.values())


def test_full_collapse_and_rank_scaling():
    for G, X in ((Z2, koszul_resolution(Z2)), (FiniteCyclic(6), koszul_resolution(FiniteCyclic(6), 3))):
        assert coinvariants(X, 1).ranks() == X.ranks()
        for moduli in ((2, 3) if G.is_free else (2,), (4, 4) if G.is_free else (6,)):
            C = coinvariants(X, moduli)
            assert all(C.rank(j) == G.index(moduli) * X.rank(j) for j in X.degrees)


def test_cosets_lexicographic():
    assert cosets((2, 3)).tolist() == [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]


def test_norm_check_examples():
    K1 = koszul_resolution(Z1)
    for d in (2, 5, 9):
        assert coinvariant_norm_check(K1.d(1), d) == NormCheck(2, 2, True)
    # t - 1 vanishes on the full quotient
    assert coinvariant_norm_check(K1.d(1), 1) == NormCheck(0, 2, True)
    assert coinvariant_norm_check(GroupRingMatrix(Z2, 2, 3), 4) == NormCheck(0, 0, True)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([2, 4, 8]))
def test_norm_check_property(seed, d):
    rng = random.Random(seed)
    M = random_ring_matrix(rng, Z2, rng.randint(1, 3), rng.randint(1, 3))
    assert coinvariant_norm_check(M, d).holds


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([(2, 2), (3, 1), (2, 4)]))
def test_coinvariants_are_functorial(seed, moduli):
    rng = random.Random(seed)
    A = random_ring_matrix(rng, Z2, 2, 3)
    B = random_ring_matrix(rng, Z2, 3, 2)
    assert coinvariant_matrix(A @ B, moduli) == coinvariant_matrix(A, moduli) @ coinvariant_matrix(B, moduli)
    assert coinvariant_matrix(A + A, moduli) == coinvariant_matrix(A, moduli).scale(2)


def _multiplication_map(X, element):
    G = X.group
    blocks = {j: GroupRingMatrix(G, X.rank(j), X.rank(j), {(i, i): element for i in range(X.rank(j))})
              for j in X.degrees}
    return EquivariantMap(X, X, blocks)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_coinvariants_commute_with_cones(d):
    X = koszul_resolution(Z2)
    f = _multiplication_map(X, [((0, 1), 1), ((0, 0), -1)])
    assert f.boundary().nonzero_degrees() == []
    lhs = coinvariants(equivariant_cone(f), d)
    rhs = cone(coinvariant_map(f, d)).complex
    assert lhs.ranks() == rhs.ranks()
    assert all(lhs.d(j) == rhs.d(j) for j in lhs.degrees)
    assert all(lhs.basis(j) == rhs.basis(j) for j in lhs.degrees)


def test_coinvariants_commute_with_sums():
    t_minus_1 = koszul_resolution(Z1).d(1).entries[(0, 0)]
    both = EquivariantComplex(Z1, {0: ["a", "b"], 1: ["c", "d"]},
                              {1: GroupRingMatrix(Z1, 2, 2, {(0, 0): t_minus_1, (1, 1): t_minus_1})})
    for d in (1, 4, 5):
        assert coinvariants(both, d).d(1) == direct_sum(circle_complex(d), circle_complex(d)).d(1)


def test_induce_line_into_plane():
    P = induce(koszul_resolution(Z1), Z2, (0,))
    assert P.ranks() == {0: 1, 1: 1}
    assert P.d(1).entries == {(0, 0): {(1, 0): 1, (0, 0): -1}}
    same = induce(koszul_resolution(Z2), Z2)
    assert same.d(2) == koszul_resolution(Z2).d(2)
    with pytest.raises(ValueError):
        induce(koszul_resolution(Z1), FiniteCyclic(4))
    with pytest.raises(ValueError):
        induce(koszul_resolution(FiniteCyclic(4), 2), FiniteCyclic(6))


@pytest.mark.parametrize("moduli", [(6, 6), (4, 2), (3, 5)])
def test_induced_splitting(moduli):
    sp = induced_splitting(koszul_resolution(Z1), Z2, (0,), moduli)
    assert sp.copies == math.prod(moduli) // moduli[0]
    assert sp.piece.d(1) == circle_complex(moduli[0]).d(1)
    for j in sp.induced.degrees:
        assert (sp.inverse @ sp.iso)[j] == IntMatrix.identity(sp.induced.rank(j))
    assert sp.iso[0] @ sp.induced.d(1) == sp.total.d(1) @ sp.iso[1]


def test_cyclic_induction():
    X = induce(koszul_resolution(FiniteCyclic(3), 2), FiniteCyclic(6))
    assert X.validate() == []
    assert X.d(1).support() == {(0,), (2,)}


def test_restriction_keeps_homology():
    X = restrict(koszul_resolution(Z2), (2, 3))
    assert X.ranks() == {0: 6, 1: 12, 2: 6}
    assert X.validate() == []
    C = coinvariants(X, 1)
    assert [integer_homology(C, j).betti for j in (0, 1, 2)] == [1, 2, 1]


def test_complex_json_round_trip():
    for X in (koszul_resolution(Z2), koszul_resolution(FiniteCyclic(5), 3)):
        Y = EquivariantComplex.from_json(json.loads(json.dumps(X.to_json())))
        assert Y == X and Y.top == X.top


def test_descend_identity():
    K = koszul_resolution(Z1)
    ident = EquivariantMap.identity(K)
    R = EquivariantRetract(K, K, ident, ident, EquivariantMap(K, K, {}, 1))
    cert = descend_retract(R, 7, 1, 1, 1)
    assert cert.retract.source.rank(0) == 7


@pytest.mark.parametrize("d", [3, 8, 13])
def test_descended_line_retract_matches_coarse_circle(d):
    cert = descend_retract(line_retract(d), 1, 1, d, 1)
    coarse = check_quality(coarse_circle_retract(d), 1, d, 1)
    assert cert.ledger == coarse.ledger


def test_descend_rejects_large_differential():
    K = koszul_resolution(Z2)
    ident = EquivariantMap.identity(K)
    R = EquivariantRetract(K, K, ident, ident, EquivariantMap(K, K, {}, 1))
    with pytest.raises(QualityError, match="d_target"):
        descend_retract(R, 4, 2, 1, 1)
    descend_retract(R, 4, 2, 1, math.log(4) + 1e-6)


def test_residual_chains():
    ch = ResidualChain.powers_of_two(Z2, 4)
    assert [ch.index(i) for i in range(4)] == [1, 4, 16, 64]
    with pytest.raises(ValueError):
        ResidualChain.from_moduli(Z1, [1, 3, 4])
    with pytest.raises(ValueError):
        ResidualChain.from_moduli(Z1, [2, 4])
    with pytest.raises(ValueError):
        ResidualChain.from_moduli(Z1, [1, 2, 2])
    six = ResidualChain.from_moduli(FiniteCyclic(6), [1, 6, 6])
    assert [six.index(i) for i in range(3)] == [1, 6, 6]
    with pytest.raises(ValueError):
        ResidualChain.from_moduli(FiniteCyclic(6), [1, 3])


def test_cyclic_acyclic_above_trivial_level():
    K = koszul_resolution(FiniteCyclic(6), 4)
    C = coinvariants(K, 6)
    hs = homology(C)
    assert hs[0].betti == 1
    assert all(h.betti == 0 and not h.torsion for j, h in hs.items() if 0 < j < 4)
    assert is_acyclic(coinvariants(koszul_resolution(Z1), 1)) is False
