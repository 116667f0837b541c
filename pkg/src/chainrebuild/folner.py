"""Følner boxes in Z^n and the weak rebuildings they produce.

The box ``F = [0, d)^n`` is a transversal of ``(dZ)^n``.  Degree ``j`` of
the interior subcomplex is spanned by basis elements over the points of
``F`` whose ``(j+1)``-ball stays inside ``F``; everything else survives to
the quotient, so small boundaries mean strong rank compression.

The nullhomotopy of the augmented inclusion is obtained lazily from an
explicit contraction of the Koszul complex, evaluated only on the finitely
many basis elements that occur.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .equivariant import EquivariantComplex, FreeAbelian, coinvariants, cosets, koszul_resolution
from .htpy import QuotientRetract, Subcomplex, augment, augmented_retract, quality_from_quotient
from .intmat import IntMatrix
from .rebuild import CertifiedRebuilding, Kind, QualityError, check_quality
from .zchain import BasedComplex, ComplexError, GradedMap


@dataclass(frozen=True)
class FolnerBox:
    n: int
    d: int

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("boxes need n >= 1 and d >= 1")

    @property
    def points(self) -> np.ndarray:
        return cosets((self.d,) * self.n)

    @property
    def size(self) -> int:
        return self.d ** self.n

    def boundary_ratio(self, r: int = 1) -> Fraction:
        data = interior(self, r)
        return Fraction(len(data.boundary), self.size)


def folner_box(n: int, d: int) -> FolnerBox:
    return FolnerBox(n, d)


def word_ball(generators: Iterable[tuple], r: int) -> np.ndarray:
    """All products of at most ``r`` generators, as rows."""
    gens = [tuple(g) for g in generators]
    dim = len(gens[0]) if gens else 0
    ball = {(0,) * dim}
    frontier = set(ball)
    for _ in range(r):
        frontier = {tuple(a + b for a, b in zip(p, g)) for p in frontier for g in gens} - ball
        ball |= frontier
    return np.array(sorted(ball), dtype=np.int64).reshape(len(ball), dim)


@dataclass(frozen=True)
class InteriorData:
    r: int
    interior: np.ndarray
    boundary: np.ndarray
    mask: np.ndarray


def interior(F: FolnerBox, r: int, generators: Iterable[tuple] | None = None) -> InteriorData:
    """Points ``g`` of ``F`` with ``g s`` in ``F`` for every word ``s`` of length ``<= r``."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    gens = FreeAbelian(F.n).generators() if generators is None else list(generators)
    P = F.points
    mask = np.ones(P.shape[0], dtype=bool)
    for b in word_ball(gens, r):
        moved = P + b
        mask &= np.all((moved >= 0) & (moved < F.d), axis=1)
    return InteriorData(r, P[mask], P[~mask], mask)


def generating_set(X: EquivariantComplex) -> list[tuple]:
    """Standard generators, their inverses and every element in a differential, closed under inverses."""
    G = X.group
    S = set(G.generators())
    for j in range(X.lo + 1, X.hi + 1):
        S |= X.d(j).support()
    S |= {G.inverse(g) for g in S}
    S.discard(G.identity())
    return sorted(S)


@dataclass(eq=False)
class InteriorSubcomplex:
    ambient: BasedComplex
    indices: dict
    interiors: dict
    generators: list


def interior_subcomplex(X: EquivariantComplex, d: int, n_max: int | None = None,
                        generators: Sequence[tuple] | None = None) -> InteriorSubcomplex:
    """Subcomplex of the ``(dZ)^n``-coinvariants on ``I_j x int_{S^{j+1}}(F)``, ``j <= n_max``."""
    G = X.group
    if not G.is_free:
        raise ValueError("interior subcomplexes are defined for Z^n")
    needed = generating_set(X)
    if generators is None:
        S = needed
    else:
        S = sorted({tuple(g) for g in generators})
        support = {g for j in range(X.lo + 1, X.hi + 1) for g in X.d(j).support()} - {G.identity()}
        missing = support - set(S)
        if missing:
            raise ComplexError(f"generating set misses differential support {sorted(missing)}")
    n_max = X.hi if n_max is None else n_max
    F = FolnerBox(G.rank, d)
    C = coinvariants(X, d)
    q = F.size
    indices, interiors = {}, {}
    for j in C.degrees:
        if j > n_max or j < 0:
            indices[j] = []
            continue
        data = interior(F, j + 1, S)
        interiors[j] = data
        inner = np.flatnonzero(data.mask)
        indices[j] = [int(k * q + p) for k in range(X.rank(j)) for p in inner]
    Subcomplex(C, indices)
    return InteriorSubcomplex(C, indices, interiors, S)


class KoszulContraction:
    """Contraction of the augmented Koszul complex of ``Z^n`` over ``Z``.

    In rank one, the augmentation generator goes to ``1`` in degree 0,
    ``t^k -> sum_{0<=i<k} t^i e``
    (``-sum_{k<=i<0} t^i e`` for ``k < 0``), zero on degree 1.  For several
    coordinates the contraction of a tensor product applies this on the
    first coordinate and, after collapsing that coordinate to the identity,
    recurses on the rest.
    """

    def __init__(self, n: int):
        self.n = n
        self.subsets = {j: list(itertools.combinations(range(n), j)) for j in range(n + 1)}
        self.position = {S: i for j in self.subsets for i, S in enumerate(self.subsets[j])}

    def unit(self) -> dict:
        """Image of the augmentation generator."""
        return {((), (0,) * self.n): 1}

    def apply(self, S: tuple, g: Sequence[int]) -> dict:
        """Image of the basis element ``e_S`` translated by ``g``."""
        out: dict = {}
        g = [int(x) for x in g]
        for p in range(self.n):
            if p in S:
                break
            k = g[p]
            span, sign = (range(0, k), 1) if k > 0 else (range(k, 0), -1)
            S2 = (p,) + tuple(S)
            for i in span:
                g2 = list(g)
                g2[p] = i
                key = (S2, tuple(g2))
                out[key] = out.get(key, 0) + sign
            g[p] = 0
        return {key: c for key, c in out.items() if c}


def koszul_nullhomotopy(n: int, d: int, Xe: BasedComplex, Ae: BasedComplex, sub_indices: dict) -> GradedMap:
    """``N = pi s iota`` for the augmented inclusion ``A^e -> X^e`` of coinvariants."""
    K = KoszulContraction(n)
    q = d ** n
    moduli = (d,) * n
    blocks = {}
    rows, cols, vals = [0], [0], [1]
    blocks[-1] = IntMatrix.from_coo(Xe.rank(0), Ae.rank(-1), rows, cols, vals)
    for j in Ae.degrees:
        if j < 0 or Ae.rank(j) == 0:
            continue
        rows, cols, vals = [], [], []
        for col, idx in enumerate(sub_indices[j]):
            k, p = divmod(idx, q)
            f = np.unravel_index(p, moduli)
            for (S2, g2), c in K.apply(K.subsets[j][k], f).items():
                r = K.position[S2] * q + int(np.ravel_multi_index(tuple(x % d for x in g2), moduli))
                rows.append(r)
                cols.append(col)
                vals.append(c)
        blocks[j] = IntMatrix.from_coo(Xe.rank(j + 1), Ae.rank(j), rows, cols, vals)
    return GradedMap(Ae, Xe, blocks, 1)


@dataclass(eq=False)
class AmenableRebuilding:
    certificate: CertifiedRebuilding
    quotient: QuotientRetract
    T_max: Fraction
    kappa: float
    sub_ranks: dict
    ambient_ranks: dict
    quotient_ranks: dict

    @property
    def boundary_fraction(self) -> dict:
        return {j: Fraction(self.ambient_ranks[j] - self.sub_ranks.get(j, 0), self.ambient_ranks[j])
                for j in self.ambient_ranks if self.ambient_ranks[j]}


def maximal_T(n: int, d: int) -> Fraction:
    """Largest scale the interior construction certifies, from ranks alone."""
    X = koszul_resolution(FreeAbelian(n))
    F = FolnerBox(n, d)
    best = None
    for j in range(n + 1):
        inner = int(interior(F, j + 1).mask.sum()) if j <= n else 0
        rk = X.rank(j) * F.size
        yp = rk - X.rank(j) * inner + (1 if j == 0 else 0)
        if yp:
            ratio = Fraction(rk, yp)
            best = ratio if best is None else min(best, ratio)
    return best


def amenable_weak_rebuilding(n: int, d: int, T=None, route: str = "direct") -> AmenableRebuilding:
    """Weak ``n``-rebuilding of the ``(dZ)^n``-coinvariants of the Koszul complex.

    ``T`` defaults to the largest certified scale ``T'``; a larger request
    raises :class:`QualityError` naming ``T'``.
    """
    X = koszul_resolution(FreeAbelian(n))
    sub = interior_subcomplex(X, d, n)
    C = sub.ambient
    Xe = augment(C)
    A_idx = {-1: [0]}
    A_idx.update({j: sub.indices.get(j, []) for j in C.degrees})
    Ae = Subcomplex(Xe, A_idx).complex()
    N = koszul_nullhomotopy(n, d, Xe, Ae, A_idx)
    qr = augmented_retract(C, sub.indices, nullhomotopy=N, route=route)
    Yp = qr.retract.target
    qq = quality_from_quotient(C, Yp, n)
    T_max = qq.T
    if T_max < 1:
        raise QualityError(f"interior too small: T' = {T_max} < 1")
    T = T_max if T is None else Fraction(T)
    if T > T_max:
        raise QualityError(f"T = {T} exceeds the largest certified scale T' = {T_max}")
    kappa = qq.kappa
    cert = check_quality(qr.retract, n, T, 1 if kappa == 1.0 else kappa, Kind.WEAK)
    return AmenableRebuilding(cert, qr, T_max, kappa,
                              {j: len(sub.indices.get(j, [])) for j in C.degrees},
                              C.ranks(), Yp.ranks())


__all__ = [
    "FolnerBox", "folner_box", "word_ball", "interior", "InteriorData", "interior_subcomplex",
    "InteriorSubcomplex", "KoszulContraction", "koszul_nullhomotopy", "amenable_weak_rebuilding",
    "AmenableRebuilding", "maximal_T", "generating_set",
]
