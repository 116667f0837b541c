import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from chainrebuild.homology import field_betti, homology, integer_homology, is_acyclic
from chainrebuild.intmat import IntMatrix
from chainrebuild.randomgen import random_complex, random_cube, random_map, random_square
from chainrebuild.rebuild import circle_complex
from chainrebuild.zchain import (
    BasedComplex,
    ComplexError,
    GradedMap,
    HomotopySquare,
    chain_map_defects,
    cone,
    cone_map,
    cube_fill_square,
    direct_sum,
    homotopy_defects,
    log_plus,
    projective_replacement,
    skeleton,
    suspend,
    truncate_below,
    validate,
    zero_complex,
)

seeds = st.integers(0, 2 ** 32 - 1)


def point(m=1):
    """``Z --m--> Z`` in degrees 1 and 0."""
    return BasedComplex({0: ("a",), 1: ("b",)}, {1: IntMatrix.from_dense([[m]])})


def scalar_map(X, Y, k):
    return GradedMap(X, Y, {j: IntMatrix.identity(X.rank(j)).scale(k) for j in X.degrees})


def test_validate_reports_bad_square():
    one = IntMatrix.identity(1)
    X = BasedComplex({0: ("a",), 1: ("b",), 2: ("c",)}, {1: one, 2: one})
    assert validate(X)
    assert validate(circle_complex(3)) == []
    assert validate(zero_complex()) == []


def test_constructor_rejects_shape_and_labels():
    with pytest.raises(ComplexError):
        BasedComplex({0: ("a", "a")})
    with pytest.raises(ComplexError):
        BasedComplex({0: ("a",), 1: ("b",)}, {1: IntMatrix.identity(2)})


def test_suspension():
    S = circle_complex(3)
    T = suspend(S, 1)
    assert T.ranks() == {1: 3, 2: 3}
    assert T.d(2) == -S.d(1)
    back = suspend(T, -1)
    assert back.ranks() == S.ranks() and back.d(1) == S.d(1)
    assert suspend(zero_complex(), 5).is_zero()


def test_cone_examples():
    Z = BasedComplex({0: ("a",)})
    C = cone(scalar_map(Z, Z, 1)).complex
    assert C.ranks() == {0: 1, 1: 1} and C.d(1).to_dense() == [[1]]
    assert is_acyclic(C)
    C3 = cone(scalar_map(Z, Z, 3)).complex
    assert integer_homology(C3, 0).torsion == (3,)
    assert integer_homology(C3, 1).betti == 0


def test_cone_structure_maps():
    rng = random.Random(11)
    X, Y = random_complex(rng), random_complex(rng)
    f = random_map(rng, X, Y)
    f = f if not chain_map_defects(f) else GradedMap.zero(X, Y)
    c = cone(f)
    assert not chain_map_defects(c.inclusion)
    assert (c.projection @ c.inclusion).is_zero()
    sec = c.section @ c.inclusion
    assert all(sec[j] == IntMatrix.identity(Y.rank(j)) for j in Y.degrees)
    labels = c.complex.basis(1)
    assert all(s.startswith("cx:") for s in labels[:X.rank(0)])


def test_cone_of_zero_is_sum():
    X, Y = circle_complex(2), circle_complex(3)
    C = cone(GradedMap.zero(suspend(X, -1), Y)).complex
    S = direct_sum(X, Y)
    assert C.ranks() == S.ranks()
    assert {j: str(h) for j, h in homology(C).items()} == {j: str(h) for j, h in homology(S).items()}


def test_direct_sum():
    S = direct_sum(circle_complex(2), circle_complex(3))
    assert S.ranks() == {0: 5, 1: 5}
    assert integer_homology(S, 1).betti == 2
    X = circle_complex(4)
    assert direct_sum(X, zero_complex()).d(1) == X.d(1)


def test_identity_cone_map():
    X = circle_complex(3)
    f = GradedMap.identity(X)
    ident = GradedMap.identity(X)
    m = cone_map(HomotopySquare(f, f, ident, ident, GradedMap.zero(X, X, 1)))
    C = cone(f).complex
    assert m == GradedMap.identity(C)


def test_strict_square_commutes_with_structure_maps():
    X = circle_complex(4)
    f = scalar_map(X, X, 2)
    a = scalar_map(X, X, -1)
    sq = HomotopySquare(f, f, a, a, GradedMap.zero(X, X, 1))
    cf = cone(f)
    m = cone_map(sq, cf, cf)
    assert m @ cf.inclusion == cf.inclusion @ a
    Sa = GradedMap(cf.suspended_source, cf.suspended_source, {j + 1: a[j] for j in X.degrees})
    assert cf.projection @ m == Sa @ cf.projection


def test_cone_map_rejects_bad_square():
    X = circle_complex(3)
    f = GradedMap.identity(X)
    with pytest.raises(ComplexError):
        cone_map(HomotopySquare(f, f, f, scalar_map(X, X, 2), GradedMap.zero(X, X, 1)))


def test_trivial_cube_filler():
    X = circle_complex(3)
    i, z = GradedMap.identity(X), GradedMap.zero(X, X, 1)
    from chainrebuild.zchain import HomotopyCube

    cube = HomotopyCube(f=i, g=i, a=i, b=i, H=z, f2=i, g2=i, a2=i, b2=i, H2=z,
                        xi=i, upsilon=i, zeta=i, omega=i, A=z, B=z, F=z, G=z,
                        Phi=GradedMap.zero(X, X, 2))
    sq = cube_fill_square(cube)
    assert sq.H.is_zero()


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_cube_filler_identity(seed):
    sq = cube_fill_square(random_cube(random.Random(seed)))
    assert not homotopy_defects(sq.H, sq.g @ sq.a, sq.b @ sq.f)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_cube_rejects_broken_filler(seed):
    rng = random.Random(seed)
    cube = random_cube(rng)
    X, W2 = cube.f.source, cube.g2.target
    degs = [j for j in X.degrees if X.rank(j) and W2.rank(j + 2)]
    if not degs:
        return
    j = rng.choice(degs)
    bump = GradedMap(X, W2, {j: IntMatrix.from_entries(W2.rank(j + 2), X.rank(j), [(0, 0, 1)])}, 2)
    cube.Phi = cube.Phi + bump
    if cube.defects():
        with pytest.raises(ComplexError):
            cube_fill_square(cube)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_constructors_preserve_dd(seed):
    rng = random.Random(seed)
    X, Y = random_complex(rng), random_complex(rng)
    sq = random_square(rng)
    built = [suspend(X, rng.randint(-2, 2)), direct_sum(X, Y), cone(sq.f).complex,
             truncate_below(X, rng.randint(X.lo, X.hi)), skeleton(X, rng.randint(X.lo, X.hi))]
    for Z in built:
        assert validate(Z) == []


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_cone_rank_inequality(seed):
    rng = random.Random(seed)
    f = random_square(rng).f
    C = cone(f).complex
    for j in C.degrees:
        bound = integer_homology(f.target, j).betti + integer_homology(f.source, j - 1).betti
        assert integer_homology(C, j).betti <= bound


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_truncation_keeps_low_homology(seed):
    rng = random.Random(seed)
    Y = random_complex(rng, lo=0)
    n = rng.randint(Y.lo, Y.hi)
    tau = truncate_below(Y, n)
    for j in tau.degrees:
        h = integer_homology(tau, j)
        if j >= n:
            assert h.betti == 0 and not h.torsion
        else:
            assert h == integer_homology(Y, j)
    for j in range(Y.lo, n + 1):
        assert tau.rank(j) == Y.rank(j)


def test_truncation_examples():
    tau = truncate_below(circle_complex(3), 1)
    assert integer_homology(tau, 1).betti == 0
    assert integer_homology(tau, 0).betti == 1
    assert is_acyclic(truncate_below(BasedComplex({0: ("a",)}), 0))


def test_skeleton():
    S = circle_complex(3)
    sk = skeleton(S, 0)
    assert sk.ranks() == {0: 3} and integer_homology(sk, 0).betti == 3
    assert skeleton(S, 1).d(1) == S.d(1)


def test_l1_norm():
    assert circle_complex(7).d(1).l1_norm() == 2
    assert IntMatrix.from_dense([[3], [-4]]).l1_norm() == 7
    assert IntMatrix.zeros(2, 3).l1_norm() == 0
    assert log_plus(0) == 0


def _trivial_resolutions(X):
    return [(BasedComplex({0: X.basis(k)}), IntMatrix.identity(X.rank(k))) for k in range(X.hi + 1)]


def test_replacement_with_identity_resolutions():
    X = point(2)
    rep = projective_replacement(X, _trivial_resolutions(X))
    assert rep.complex.ranks() == X.ranks()
    assert rep.complex.d(1) == X.d(1)
    assert all(rep.q[j] == IntMatrix.identity(X.rank(j)) for j in X.degrees)


def test_replacement_with_thick_resolution():
    # X_0 = Z^2 resolved by Z --(1,-1,0)--> Z^3 --eps--> Z^2
    X = circle_complex(2)
    eps = IntMatrix.from_dense([[1, 1, 0], [0, 0, 1]], 3)
    P = BasedComplex({0: ("p", "q", "s"), 1: ("r",)}, {1: IntMatrix.from_dense([[1], [-1], [0]])})
    rep = projective_replacement(X, [(P, eps), (BasedComplex({0: X.basis(1)}), IntMatrix.identity(2))])
    assert validate(rep.complex) == []
    for j in X.degrees:
        assert integer_homology(rep.complex, j) == integer_homology(X, j)
    assert rep.complex.ranks() == {0: 3, 1: 3}


def test_replacement_rejects_non_resolution():
    X = point(2)
    bad = [(BasedComplex({0: ("a",)}), IntMatrix.from_dense([[2]])),
           (BasedComplex({0: ("b",)}), IntMatrix.identity(1))]
    with pytest.raises(ComplexError):
        projective_replacement(X, bad)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_replacement_preserves_homology(seed):
    rng = random.Random(seed)
    X = random_complex(rng, lo=0, max_degree=3, max_rank=4)
    res = []
    for k in range(X.hi + 1):
        # a free summand Z --1--> Z added to each module keeps it a resolution
        r = X.rank(k)
        P = BasedComplex({0: tuple(f"p{i}" for i in range(r + 1)), 1: ("z",)},
                         {1: IntMatrix.from_entries(r + 1, 1, [(r, 0, 1)])})
        eps = IntMatrix.block([r], [r, 1], {(0, 0): IntMatrix.identity(r)})
        res.append((P, eps))
    rep = projective_replacement(X, res)
    assert not chain_map_defects(rep.q)
    for j in X.degrees:
        assert integer_homology(rep.complex, j) == integer_homology(X, j)
        assert field_betti(rep.complex, j, 2) == field_betti(X, j, 2)


def test_json_round_trip():
    rng = random.Random(7)
    for _ in range(20):
        X = random_complex(rng)
        Y = BasedComplex.from_json(json.loads(json.dumps(X.to_json())))
        assert Y.ranks() == X.ranks()
        assert all(Y.basis(j) == X.basis(j) for j in X.degrees)
        assert all(Y.d(j) == X.d(j) for j in X.degrees)
