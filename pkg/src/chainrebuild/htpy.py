"""Homotopy retracts, contractions and quotient retracts.

A homotopy retract ``(X, X', xi, xi', Xi)`` consists of chain maps
``xi: X -> X'`` and ``xi': X' -> X`` with ``Xi: id_X ~ xi' xi``.  The
quotient retract here turns a contractible based subcomplex ``A`` of an
augmented complex into a retract of ``X`` onto the quotient ``X / A`` with
one extra free generator in degree 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .homology import NoSolution, is_acyclic, preimage_matrix, smith_normal_form
from .intmat import IntMatrix
from .zchain import (
    BasedComplex,
    ComplexError,
    GradedMap,
    HomotopySquare,
    chain_map_defects,
    cone,
    cone_map,
    homotopy_defects,
    log_plus,
    require_chain_map,
    require_homotopy,
)


@dataclass(eq=False)
class HomotopyRetract:
    """``forward: X -> X'``, ``backward: X' -> X``, ``homotopy: id ~ backward o forward``."""

    source: BasedComplex
    target: BasedComplex
    forward: GradedMap
    backward: GradedMap
    homotopy: GradedMap

    def defects(self) -> list[str]:
        out = []
        if self.forward.shift or self.backward.shift or self.homotopy.shift != 1:
            return ["maps have the wrong degree shifts"]
        for name, m in (("forward", self.forward), ("backward", self.backward)):
            bad = chain_map_defects(m)
            if bad:
                out.append(f"{name} map is not a chain map in degrees {bad}")
        bad = homotopy_defects(self.homotopy, GradedMap.identity(self.source), self.backward @ self.forward)
        if bad:
            out.append(f"homotopy identity fails in degrees {bad}")
        return out


def verify_retract(R: HomotopyRetract) -> list[str]:
    """All failed retract identities; empty when ``R`` is a homotopy retract."""
    return R.defects()


def require_retract(R: HomotopyRetract, name: str = "retract") -> None:
    bad = R.defects()
    if bad:
        raise ComplexError(f"{name}: " + "; ".join(bad))


def identity_retract(X: BasedComplex) -> HomotopyRetract:
    one = GradedMap.identity(X)
    return HomotopyRetract(X, X, one, one, GradedMap.zero(X, X, 1))


def transport_retract(R: HomotopyRetract, iso: GradedMap, inverse: GradedMap) -> HomotopyRetract:
    """Move ``R`` along an isomorphism ``iso: Z -> X`` with the given inverse."""
    Z = iso.source
    return HomotopyRetract(Z, R.target, R.forward @ iso, inverse @ R.backward, inverse @ R.homotopy @ iso)


# contractions -----------------------------------------------------------


def solve_nullhomotopy(f: GradedMap) -> GradedMap:
    """Some ``N`` with ``d N + N d = f``, built from the bottom degree up.

    Raises :class:`ComplexError` when a degree has no solution; this cannot
    happen when the target of ``f`` is acyclic.
    """
    A, X = f.source, f.target
    blocks = {}
    for j in A.degrees:
        rhs = f[j]
        if (j - 1) in blocks:
            rhs = rhs - blocks[j - 1] @ A.d(j)
        if rhs.is_zero():
            continue
        try:
            blocks[j] = preimage_matrix(X.d(j + 1), rhs)
        except NoSolution as exc:
            raise ComplexError(f"no nullhomotopy in degree {j}: {exc}") from exc
    N = GradedMap(A, X, blocks, 1)
    require_homotopy(N, f, GradedMap.zero(A, X), "nullhomotopy")
    return N


def contract_acyclic(X: BasedComplex) -> GradedMap:
    """Contraction ``s`` with ``d s + s d = id`` of a bounded acyclic complex."""
    if not is_acyclic(X):
        raise ComplexError("complex is not acyclic")
    return solve_nullhomotopy(GradedMap.identity(X))


def _unimodular_inverse(m: IntMatrix) -> IntMatrix | None:
    if m.nrows != m.ncols:
        return None
    snf = smith_normal_form(m)
    if snf.rank != m.nrows or any(d != 1 for d in snf.diagonal):
        return None
    return snf.V @ snf.U


def homotopy_inverse(q: GradedMap) -> tuple[GradedMap, GradedMap, GradedMap]:
    """Inverse ``r`` of a weak equivalence ``q: X -> Y`` with homotopies
    ``H_src: id_X ~ r q`` and ``H_tgt: id_Y ~ q r``.

    Isomorphisms are inverted directly with zero homotopies.  Otherwise the
    three maps are read off a contraction ``s`` of ``Cone(q)``: with
    ``s(x, y) = (a x + b y, c x + e y)`` one has ``r = b``, ``H_tgt = e`` and
    ``H_src = -a``.
    """
    require_chain_map(q, "weak equivalence")
    X, Y = q.source, q.target
    inverses = {}
    degrees = set(X.degrees) | set(Y.degrees)
    for j in degrees:
        if X.rank(j) == 0 and Y.rank(j) == 0:
            continue
        inv = _unimodular_inverse(q[j])
        if inv is None:
            break
        inverses[j] = inv
    else:
        r = GradedMap(Y, X, inverses)
        return r, GradedMap.zero(X, X, 1), GradedMap.zero(Y, Y, 1)

    C = cone(q, check=False).complex
    try:
        s = contract_acyclic(C)
    except ComplexError as exc:
        raise ComplexError("map is not a weak equivalence") from exc
    r_blocks, src_blocks, tgt_blocks = {}, {}, {}
    for j in C.degrees:
        sj = s[j]
        a, b = X.rank(j - 1), Y.rank(j)
        top = list(range(X.rank(j)))
        bottom = list(range(X.rank(j), X.rank(j) + Y.rank(j + 1)))
        xcols = list(range(a))
        ycols = list(range(a, a + b))
        r_blocks[j] = sj.take(top, ycols)
        tgt_blocks[j] = sj.take(bottom, ycols)
        src_blocks[j - 1] = -sj.take(top, xcols)
    r = GradedMap(Y, X, r_blocks)
    H_src = GradedMap(X, X, src_blocks, 1)
    H_tgt = GradedMap(Y, Y, tgt_blocks, 1)
    require_chain_map(r, "homotopy inverse")
    require_homotopy(H_src, GradedMap.identity(X), r @ q, "source homotopy")
    require_homotopy(H_tgt, GradedMap.identity(Y), q @ r, "target homotopy")
    return r, H_src, H_tgt


# augmentation -----------------------------------------------------------

AUG_LABEL = "*"
PLUS_LABEL = "+"


def augment(X: BasedComplex) -> BasedComplex:
    """``X`` with ``Z`` in degree -1 and every degree-0 generator sent to 1."""
    if X.lo < 0:
        raise ComplexError("augmentation needs a complex in degrees >= 0")
    bases = {-1: (AUG_LABEL,)}
    bases.update({j: X.basis(j) for j in range(0, X.hi + 1)})
    diffs = {j: X.d(j) for j in range(1, X.hi + 1)}
    diffs[0] = IntMatrix.from_coo(1, X.rank(0), [0] * X.rank(0), range(X.rank(0)), [1] * X.rank(0))
    return BasedComplex(bases, diffs)


def plus_construction(Y: BasedComplex) -> BasedComplex:
    """``Y`` with an extra generator in degree 0 that no differential hits."""
    lo = min(Y.lo, 0)
    bases = {j: Y.basis(j) for j in range(lo, Y.hi + 1)}
    label = PLUS_LABEL
    while label in bases[0]:
        label += PLUS_LABEL
    bases[0] = bases[0] + (label,)
    diffs = {j: Y.d(j) for j in range(lo + 1, Y.hi + 1)}
    if Y.hi >= 1:
        d1 = Y.d(1)
        diffs[1] = IntMatrix.block([d1.nrows, 1], [d1.ncols], {(0, 0): d1})
    return BasedComplex(bases, diffs)


@dataclass(eq=False)
class Subcomplex:
    """Based subcomplex of ``ambient`` spanned by the listed basis positions."""

    ambient: BasedComplex
    indices: Mapping[int, Sequence[int]]

    def __post_init__(self):
        X = self.ambient
        self.indices = {j: sorted(set(self.indices.get(j, ()))) for j in X.degrees}
        self.complement = {j: sorted(set(range(X.rank(j))) - set(self.indices[j])) for j in X.degrees}
        for j in X.degrees:
            sub = X.d(j).take(self.complement.get(j - 1, []), self.indices[j])
            if not sub.is_zero():
                raise ComplexError(f"basis subset is not closed under the differential in degree {j}")

    def complex(self) -> BasedComplex:
        X = self.ambient
        bases = {j: tuple(X.basis(j)[i] for i in self.indices[j]) for j in X.degrees}
        diffs = {j: X.d(j).take(self.indices[j - 1], self.indices[j]) for j in range(X.lo + 1, X.hi + 1)}
        return BasedComplex(bases, diffs)

    def quotient(self) -> BasedComplex:
        X = self.ambient
        bases = {j: tuple(X.basis(j)[i] for i in self.complement[j]) for j in X.degrees}
        diffs = {j: X.d(j).take(self.complement[j - 1], self.complement[j]) for j in range(X.lo + 1, X.hi + 1)}
        return BasedComplex(bases, diffs)


def _selection(n: int, picks: Sequence[int]) -> IntMatrix:
    """Matrix of the coordinate inclusion ``Z^len(picks) -> Z^n``."""
    return IntMatrix.from_coo(n, len(picks), picks, range(len(picks)), [1] * len(picks))


@dataclass(eq=False)
class QuotientRetract:
    """Retract of ``X`` onto ``Y+ = (X / A)+`` produced by :func:`augmented_retract`."""

    retract: HomotopyRetract
    sub: BasedComplex
    quotient: BasedComplex
    nullhomotopy: GradedMap


def _direct_inverse(Xe, A_idx, Y_idx, Ae, Y, N):
    """``h = s - N p d s`` and ``K = N p`` for the split based sequence."""
    p = GradedMap(Xe, Ae, {j: _selection(Xe.rank(j), A_idx[j]).T for j in Xe.degrees})
    sec = GradedMap(Y, Xe, {j: _selection(Xe.rank(j), Y_idx[j]) for j in Y.degrees})
    dsec = GradedMap(Y, Xe, {j: Xe.d(j) @ sec[j] for j in Y.degrees}, -1)
    h = sec - N @ p @ dsec
    K = N @ p
    return h, K


def _cone_inverse(Xe, A_idx, Y_idx, Ae, Y, N):
    """Same data through the mapping cone of the inclusion, inverting
    ``Cone(A -> X) -> X / A`` up to homotopy."""
    f = GradedMap(Ae, Xe, {j: _selection(Xe.rank(j), A_idx[j]) for j in Ae.degrees})
    g = GradedMap(Xe, Y, {j: _selection(Xe.rank(j), Y_idx[j]).T for j in Y.degrees})
    cf = cone(f, check=False)
    C = cf.complex
    q = g @ cf.section
    q = GradedMap(C, Y, {j: q[j] for j in C.degrees})
    r, H_src, _ = homotopy_inverse(q)
    # (id, id; -N): Cone(f) -> Cone(0) followed by the projection to X
    phi = GradedMap(C, Xe, {
        j: IntMatrix.block([Xe.rank(j)], [Ae.rank(j - 1), Xe.rank(j)],
                           {(0, 0): N[j - 1], (0, 1): IntMatrix.identity(Xe.rank(j))})
        for j in C.degrees})
    h = phi @ r
    K = phi @ H_src @ cf.inclusion
    return h, K


def augmented_retract(X: BasedComplex, sub_indices: Mapping[int, Sequence[int]],
                      nullhomotopy: GradedMap | None = None, route: str = "direct") -> QuotientRetract:
    """Retract of ``X`` onto ``(X / A)+`` for a based subcomplex ``A``.

    ``nullhomotopy`` must satisfy ``d N + N d = f`` for the augmented
    inclusion ``f: A^e -> X^e``; when omitted it is solved for degree by
    degree.  ``route`` picks the closed formula (``"direct"``) or the
    mapping-cone construction (``"cone"``); both are verified exactly.
    """
    Xe = augment(X)
    A_idx = {-1: [0]}
    A_idx.update({j: sorted(set(sub_indices.get(j, ()))) for j in X.degrees})
    sub = Subcomplex(Xe, A_idx)
    Ae = sub.complex()
    Y = sub.quotient()
    Y = BasedComplex({j: Y.basis(j) for j in range(0, Y.hi + 1)}, {j: Y.d(j) for j in range(1, Y.hi + 1)})
    Y_idx = sub.complement
    f = GradedMap(Ae, Xe, {j: _selection(Xe.rank(j), sub.indices[j]) for j in Ae.degrees})
    if nullhomotopy is None:
        N = solve_nullhomotopy(f)
    else:
        N = nullhomotopy
        require_homotopy(N, f, GradedMap.zero(Ae, Xe), "augmented nullhomotopy")
    if route == "direct":
        h, K = _direct_inverse(Xe, sub.indices, Y_idx, Ae, Y, N)
    elif route == "cone":
        h, K = _cone_inverse(Xe, sub.indices, Y_idx, Ae, Y, N)
    else:
        raise ValueError(f"unknown route {route!r}")

    Yp = plus_construction(Y)
    n0 = X.rank(0)
    fwd, back, hom = {}, {}, {}
    for j in X.degrees:
        proj = _selection(X.rank(j), Y_idx[j]).T
        if j == 0:
            fwd[0] = IntMatrix.block([proj.nrows, 1], [n0],
                                     {(0, 0): proj, (1, 0): Xe.d(0)})
            back[0] = IntMatrix.block([n0], [Y.rank(0), 1], {(0, 0): h[0], (0, 1): K[-1]})
        else:
            fwd[j] = proj
            back[j] = h[j]
        hom[j] = K[j]
    retract = HomotopyRetract(X, Yp, GradedMap(X, Yp, fwd), GradedMap(Yp, X, back), GradedMap(X, X, hom, 1))
    require_retract(retract, "quotient retract")
    return QuotientRetract(retract, Ae, Y, N)


@dataclass(frozen=True)
class QuotientQuality:
    """Largest admissible scale ``T`` and the exponent ``kappa``."""

    T: Fraction | None
    kappa: float
    ratios: dict

    @property
    def T_report(self) -> Fraction | None:
        return self.T


def quality_from_quotient(X: BasedComplex, Yp: BasedComplex, n: int) -> QuotientQuality:
    """``T' = min rk X_j / rk Y+_j`` and ``kappa = max(1, log_+ ||d^X_j||)`` for ``j <= n``.

    Degrees where ``Y+`` vanishes impose no constraint; when every degree
    vanishes ``T'`` is reported as ``rk X_0``.
    """
    ratios = {j: Fraction(X.rank(j), Yp.rank(j)) for j in range(0, n + 1) if Yp.rank(j)}
    T = min(ratios.values()) if ratios else Fraction(max(X.rank(0), 1))
    kappa = max([1.0] + [log_plus(X.d(j).l1_norm()) for j in range(0, n + 1)])
    return QuotientQuality(T, kappa, ratios)


def retract_norm(m: GradedMap, upto: int) -> int:
    return max((m.norm(j) for j in m.nonzero_degrees() if j <= upto), default=0)


__all__ = [
    "HomotopyRetract", "verify_retract", "identity_retract", "transport_retract", "contract_acyclic",
    "solve_nullhomotopy", "homotopy_inverse", "augment", "plus_construction", "Subcomplex",
    "augmented_retract", "QuotientRetract", "quality_from_quotient", "QuotientQuality",
]
