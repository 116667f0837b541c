"""Bounded based free chain complexes over the integers.

A :class:`BasedComplex` stores, for every degree in an explicit range, an
ordered list of basis labels and the differential leaving that degree as an
:class:`~chainrebuild.intmat.IntMatrix` (columns indexed by the degree ``j``
basis, rows by the degree ``j - 1`` basis).  :class:`GradedMap` covers chain
maps, homotopies and fillers alike; the only difference is the degree shift.

Sign conventions used throughout:

* ``H: f ~ g`` means ``d H + H d = f - g``.
* The suspension negates the differential: ``d^{SX}_j = -d^X_{j-1}``.
* ``Cone(f)_j = X_{j-1} (+) Y_j`` with the ``X`` part first and
  ``d(x, y) = (-dx, dy + f x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .intmat import IntMatrix, residual_is_zero


class ComplexError(ValueError):
    """Raised for malformed complexes, maps or failed exact identities."""


def numbered(prefix: str, n: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i}" for i in range(n))


class BasedComplex:
    """Bounded chain complex of finitely generated free abelian groups.

    Parameters
    ----------
    bases : mapping of int to sequence of str
        Basis labels per degree.  The degree range runs from the smallest to
        the largest key; missing degrees in between have rank 0.
    differentials : mapping of int to IntMatrix, optional
        ``differentials[j]`` is the matrix of ``d_j: X_j -> X_{j-1}``.
        Missing entries are zero.
    """

    __slots__ = ("lo", "hi", "_bases", "_ranks", "_diffs", "_cache")

    def __init__(self, bases: Mapping[int, Sequence[str]],
                 differentials: Mapping[int, IntMatrix] | None = None):
        if not bases:
            bases = {0: ()}
        self.lo = min(bases)
        self.hi = max(bases)
        self._bases = {j: tuple(bases.get(j, ())) for j in range(self.lo, self.hi + 1)}
        self._ranks = {j: len(labels) for j, labels in self._bases.items() if labels}
        for j, labels in self._bases.items():
            if len(set(labels)) != len(labels):
                raise ComplexError(f"duplicate basis labels in degree {j}")
        self._diffs: dict[int, IntMatrix] = {}
        for j, m in (differentials or {}).items():
            shape = (self.rank(j - 1), self.rank(j))
            if m.shape != shape:
                raise ComplexError(f"differential in degree {j} has shape {m.shape}, expected {shape}")
            if not (self.lo < j <= self.hi):
                if not m.is_zero():
                    raise ComplexError(f"nonzero differential in degree {j} outside the range")
                continue
            if not m.is_zero():
                self._diffs[j] = m
        self._cache: dict[Any, Any] = {}

    # access -----------------------------------------------------------

    @property
    def degrees(self) -> range:
        return range(self.lo, self.hi + 1)

    def rank(self, j: int) -> int:
        return self._ranks.get(j, 0)

    def ranks(self) -> dict[int, int]:
        return {j: self.rank(j) for j in self.degrees}

    def basis(self, j: int) -> tuple[str, ...]:
        return self._bases.get(j, ())

    def d(self, j: int) -> IntMatrix:
        m = self._diffs.get(j)
        if m is None:
            return IntMatrix.zeros(self.rank(j - 1), self.rank(j))
        return m

    def is_zero(self) -> bool:
        return all(self.rank(j) == 0 for j in self.degrees)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BasedComplex):
            return NotImplemented
        if self is other:
            return True
        degs = set(self.degrees) | set(other.degrees)
        return all(self.basis(j) == other.basis(j) and self.d(j) == other.d(j) for j in degs)

    __hash__ = object.__hash__

    def __repr__(self) -> str:
        ranks = ", ".join(f"{j}:{self.rank(j)}" for j in self.degrees)
        return f"BasedComplex({{{ranks}}})"

    @classmethod
    def from_ranks(cls, ranks: Mapping[int, int], differentials: Mapping[int, IntMatrix] | None = None,
                   prefix: str = "b") -> "BasedComplex":
        bases = {j: numbered(f"{prefix}{j}_", r) for j, r in ranks.items()}
        return cls(bases, differentials)

    # serialization ----------------------------------------------------

    def to_json(self) -> dict:
        degrees = []
        for j in self.degrees:
            degrees.append({
                "degree": j,
                "rank": self.rank(j),
                "basis": list(self.basis(j)),
                "differential": [[i, k, str(v)] for i, k, v in self.d(j).entries()],
            })
        return {"degrees": degrees}

    @classmethod
    def from_json(cls, obj: Mapping) -> "BasedComplex":
        try:
            entries = obj["degrees"]
            bases: dict[int, tuple[str, ...]] = {}
            raw: dict[int, list] = {}
            for item in entries:
                j = int(item["degree"])
                labels = tuple(str(s) for s in item["basis"])
                if len(labels) != int(item["rank"]):
                    raise ComplexError(f"degree {j}: rank {item['rank']} but {len(labels)} labels")
                if j in bases:
                    raise ComplexError(f"degree {j} listed twice")
                bases[j] = labels
                raw[j] = item.get("differential", [])
        except (KeyError, TypeError) as exc:
            raise ComplexError(f"malformed complex JSON: {exc}") from exc
        if not bases:
            return cls({})
        lo, hi = min(bases), max(bases)
        diffs = {}
        for j, triples in raw.items():
            rows = len(bases.get(j - 1, ())) if j > lo else 0
            if triples and j == lo:
                raise ComplexError(f"degree {j} is the bottom degree but has a differential")
            try:
                diffs[j] = IntMatrix.from_entries(rows, len(bases[j]),
                                                  ((int(r), int(c), int(v)) for r, c, v in triples))
            except (IndexError, ValueError) as exc:
                raise ComplexError(f"degree {j}: {exc}") from exc
        full = {j: bases.get(j, ()) for j in range(lo, hi + 1)}
        return cls(full, diffs)


def validate(X: BasedComplex) -> list[str]:
    """Every violated invariant of ``X``; empty when ``X`` is a chain complex."""
    problems = []
    for j in X.degrees:
        if len(set(X.basis(j))) != X.rank(j):
            problems.append(f"degree {j}: duplicate basis labels")
    for j in range(X.lo + 2, X.hi + 1):
        if not (X.d(j - 1) @ X.d(j)).is_zero():
            problems.append(f"degree {j}: d_{j - 1} d_{j} != 0")
    return problems


def zero_complex(degree: int = 0) -> BasedComplex:
    return BasedComplex({degree: ()})


def _label_prefixes(parts: Sequence[BasedComplex]) -> list[str]:
    for j in set().union(*(set(p.degrees) for p in parts)):
        seen: set[str] = set()
        for p in parts:
            labels = p.basis(j)
            if seen.intersection(labels):
                return [f"s{i}:" for i in range(len(parts))]
            seen.update(labels)
    return [""] * len(parts)


# graded maps ----------------------------------------------------------


class GradedMap:
    """Family of matrices ``M_j: X_j -> Y_{j + shift}``.

    Chain maps have shift 0, homotopies shift 1 and cube fillers shift 2.
    Blocks between zero modules are never stored.
    """

    __slots__ = ("source", "target", "shift", "_blocks")

    def __init__(self, source: BasedComplex, target: BasedComplex,
                 blocks: Mapping[int, IntMatrix] | None = None, shift: int = 0):
        self.source = source
        self.target = target
        self.shift = shift
        self._blocks: dict[int, IntMatrix] = {}
        for j, m in (blocks or {}).items():
            shape = (target.rank(j + shift), source.rank(j))
            if m.shape != shape:
                raise ComplexError(f"map block in degree {j} has shape {m.shape}, expected {shape}")
            if not m.is_zero():
                self._blocks[j] = m

    def __getitem__(self, j: int) -> IntMatrix:
        m = self._blocks.get(j)
        if m is None:
            return IntMatrix.zeros(self.target.rank(j + self.shift), self.source.rank(j))
        return m

    def __repr__(self) -> str:
        return f"GradedMap(shift={self.shift}, degrees={sorted(self._blocks)})"

    @classmethod
    def identity(cls, X: BasedComplex) -> "GradedMap":
        return cls(X, X, {j: IntMatrix.identity(X.rank(j)) for j in X.degrees})

    @classmethod
    def zero(cls, X: BasedComplex, Y: BasedComplex, shift: int = 0) -> "GradedMap":
        return cls(X, Y, {}, shift)

    def nonzero_degrees(self) -> list[int]:
        return sorted(self._blocks)

    def is_zero(self) -> bool:
        return not self._blocks

    def _check_parallel(self, other: "GradedMap") -> None:
        if self.shift != other.shift or not same_complex(self.source, other.source) \
                or not same_complex(self.target, other.target):
            raise ComplexError("graded maps are not parallel")

    def __add__(self, other: "GradedMap") -> "GradedMap":
        self._check_parallel(other)
        degs = set(self._blocks) | set(other._blocks)
        return GradedMap(self.source, self.target, {j: self[j] + other[j] for j in degs}, self.shift)

    def __sub__(self, other: "GradedMap") -> "GradedMap":
        self._check_parallel(other)
        degs = set(self._blocks) | set(other._blocks)
        return GradedMap(self.source, self.target, {j: self[j] - other[j] for j in degs}, self.shift)

    def __neg__(self) -> "GradedMap":
        return GradedMap(self.source, self.target, {j: -m for j, m in self._blocks.items()}, self.shift)

    def scale(self, k: int) -> "GradedMap":
        return GradedMap(self.source, self.target, {j: m.scale(k) for j, m in self._blocks.items()}, self.shift)

    def __matmul__(self, other: "GradedMap") -> "GradedMap":
        """Composite ``self o other`` (apply ``other`` first)."""
        if not same_complex(other.target, self.source):
            raise ComplexError("composition of maps with mismatched complexes")
        blocks = {}
        for j, m in other._blocks.items():
            k = j + other.shift
            if k in self._blocks:
                blocks[j] = self._blocks[k] @ m
        return GradedMap(other.source, self.target, blocks, self.shift + other.shift)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GradedMap):
            return NotImplemented
        if self.shift != other.shift:
            return False
        degs = set(self._blocks) | set(other._blocks)
        return all(self[j] == other[j] for j in degs)

    __hash__ = None

    def norm(self, j: int) -> int:
        m = self._blocks.get(j)
        return m.l1_norm() if m is not None else 0

    def max_norm(self, upto: int | None = None) -> int:
        vals = [m.l1_norm() for j, m in self._blocks.items() if upto is None or j <= upto]
        return max(vals, default=0)

    def boundary(self) -> "GradedMap":
        """Graded commutator ``d M - (-1)^shift M d`` of shift ``shift - 1``.

        Zero exactly when ``M`` is a chain map (shift 0); for a homotopy it
        is ``d H + H d``, and for a filler ``d Phi - Phi d``.
        """
        X, Y, k = self.source, self.target, self.shift
        sign = -1 if k % 2 else 1
        lo = min(X.lo, Y.lo - k)
        hi = max(X.hi, Y.hi - k) + 1
        blocks = {}
        for j in range(lo, hi + 1):
            left = Y.d(j + k) @ self[j] if j in self._blocks else None
            right = self[j - 1] @ X.d(j) if (j - 1) in self._blocks else None
            if left is None and right is None:
                continue
            if left is None:
                blocks[j] = right.scale(-sign)
            elif right is None:
                blocks[j] = left
            else:
                blocks[j] = left - right if sign == 1 else left + right
        return GradedMap(X, Y, blocks, k - 1)


ChainMap = GradedMap


def same_complex(a: BasedComplex, b: BasedComplex) -> bool:
    return a is b or a == b


def _commutator_defects(M: GradedMap, plain: list[GradedMap], signs: list[int]) -> list[int]:
    """Degrees where ``d M - (-1)^shift M d + sum s P`` is nonzero."""
    X, Y, k = M.source, M.target, M.shift
    sign = -1 if k % 2 else 1
    degrees = set()
    for j in M.nonzero_degrees():
        degrees.update((j, j + 1))
    for P in plain:
        degrees.update(P.nonzero_degrees())
    bad = []
    for j in sorted(degrees):
        shape = (Y.rank(j + k - 1), X.rank(j))
        if shape[0] == 0 or shape[1] == 0:
            continue
        products = [(1, Y.d(j + k), M[j]), (-sign, M[j - 1], X.d(j))]
        terms = [(s, P[j]) for s, P in zip(signs, plain)]
        if not residual_is_zero(shape, products, terms):
            bad.append(j)
    return bad


def chain_map_defects(f: GradedMap) -> list[int]:
    """Degrees where ``d f != f d``."""
    if f.shift != 0:
        raise ComplexError("chain maps have shift 0")
    return _commutator_defects(f, [], [])


def homotopy_defects(H: GradedMap, f: GradedMap, g: GradedMap) -> list[int]:
    """Degrees where ``d H + H d != f - g``."""
    if H.shift != 1:
        raise ComplexError("homotopies have shift 1")
    f._check_parallel(g)
    if not (same_complex(H.source, f.source) and same_complex(H.target, f.target)):
        raise ComplexError("homotopy and maps have different ends")
    return _commutator_defects(H, [f, g], [-1, 1])


def require_chain_map(f: GradedMap, name: str = "map") -> None:
    bad = chain_map_defects(f)
    if bad:
        raise ComplexError(f"{name} is not a chain map in degrees {bad}")


def require_homotopy(H: GradedMap, f: GradedMap, g: GradedMap, name: str = "homotopy") -> None:
    bad = homotopy_defects(H, f, g)
    if bad:
        raise ComplexError(f"{name} fails the homotopy identity in degrees {bad}")


@dataclass(eq=False)
class ChainHomotopy:
    """``H: start ~ end``, that is ``d H + H d = start - end``."""

    map: GradedMap
    start: GradedMap
    end: GradedMap

    def defects(self) -> list[int]:
        return homotopy_defects(self.map, self.start, self.end)


# suspension and sums ----------------------------------------------------


def suspend(X: BasedComplex, k: int = 1) -> BasedComplex:
    sign = -1 if k % 2 else 1
    bases = {j + k: X.basis(j) for j in X.degrees}
    diffs = {j + k: X.d(j).scale(sign) for j in X.degrees}
    return BasedComplex(bases, diffs)


def suspend_map(f: GradedMap, k: int, source: BasedComplex | None = None,
                target: BasedComplex | None = None) -> GradedMap:
    """``(S^k f)_j = f_{j-k}`` between the suspended complexes."""
    source = source or suspend(f.source, k)
    target = target or suspend(f.target, k)
    return GradedMap(source, target, {j + k: f[j] for j in f.nonzero_degrees()}, f.shift)


def direct_sum(*parts: BasedComplex) -> BasedComplex:
    """Degreewise block sum, earlier summands first.

    Labels are kept as they are unless two summands share a label in some
    degree, in which case every label gets an ``s<i>:`` prefix.
    """
    if not parts:
        return zero_complex()
    prefixes = _label_prefixes(parts)
    lo = min(p.lo for p in parts)
    hi = max(p.hi for p in parts)
    bases, diffs = {}, {}
    for j in range(lo, hi + 1):
        bases[j] = tuple(pre + s for pre, p in zip(prefixes, parts) for s in p.basis(j))
        if j > lo:
            diffs[j] = IntMatrix.block_diag([p.d(j) for p in parts])
    return BasedComplex(bases, diffs)


def sum_maps(maps: Sequence[GradedMap], source: BasedComplex, target: BasedComplex) -> GradedMap:
    """Block-diagonal sum of maps between the given sum complexes."""
    shift = maps[0].shift
    if any(m.shift != shift for m in maps):
        raise ComplexError("summands must share a shift")
    blocks = {}
    for j in source.degrees:
        parts = [m[j] for m in maps]
        if any(not p.is_zero() for p in parts):
            blocks[j] = IntMatrix.block_diag(parts)
    return GradedMap(source, target, blocks, shift)


# cones ----------------------------------------------------------------


@dataclass(eq=False)
class Cone:
    """Mapping cone of ``f: X -> Y`` with its structure maps.

    ``inclusion`` is ``y -> (0, y)``, ``projection`` is ``(x, y) -> x`` into
    the suspension of ``X`` and ``section`` is the degreewise splitting
    ``(x, y) -> y`` (not a chain map in general).
    """

    complex: BasedComplex
    map: GradedMap
    inclusion: GradedMap
    projection: GradedMap
    section: GradedMap
    suspended_source: BasedComplex

    def split(self, j: int) -> tuple[int, int]:
        """Sizes of the ``X_{j-1}`` and ``Y_j`` parts of degree ``j``."""
        return self.map.source.rank(j - 1), self.map.target.rank(j)


def cone(f: GradedMap, check: bool = True) -> Cone:
    if f.shift != 0:
        raise ComplexError("cone needs a chain map")
    if check:
        require_chain_map(f, "cone input")
    X, Y = f.source, f.target
    lo = min(X.lo + 1, Y.lo)
    hi = max(X.hi + 1, Y.hi)
    bases, diffs = {}, {}
    for j in range(lo, hi + 1):
        bases[j] = tuple("cx:" + s for s in X.basis(j - 1)) + tuple("cy:" + s for s in Y.basis(j))
        if j > lo:
            diffs[j] = IntMatrix.block(
                [X.rank(j - 2), Y.rank(j - 1)], [X.rank(j - 1), Y.rank(j)],
                {(0, 0): -X.d(j - 1), (1, 0): f[j - 1], (1, 1): Y.d(j)})
    C = BasedComplex(bases, diffs)
    SX = suspend(X, 1)
    inc, proj, sec = {}, {}, {}
    for j in range(lo, hi + 1):
        a, b = X.rank(j - 1), Y.rank(j)
        if b:
            inc[j] = IntMatrix.block([a, b], [b], {(1, 0): IntMatrix.identity(b)})
            sec[j] = IntMatrix.block([b], [a, b], {(0, 1): IntMatrix.identity(b)})
        if a:
            proj[j] = IntMatrix.block([a], [a, b], {(0, 0): IntMatrix.identity(a)})
    return Cone(C, f, GradedMap(Y, C, inc), GradedMap(C, SX, proj), GradedMap(C, Y, sec), SX)


@dataclass(eq=False)
class HomotopySquare:
    """Square ``f: X -> Y`` (top), ``g: Z -> W`` (bottom), ``a: X -> Z``
    (left), ``b: Y -> W`` (right) with ``H: g a ~ b f``."""

    f: GradedMap
    g: GradedMap
    a: GradedMap
    b: GradedMap
    H: GradedMap

    def defects(self) -> list[str]:
        out = []
        for name in ("f", "g", "a", "b"):
            bad = chain_map_defects(getattr(self, name))
            if bad:
                out.append(f"{name} not a chain map in degrees {bad}")
        bad = homotopy_defects(self.H, self.g @ self.a, self.b @ self.f)
        if bad:
            out.append(f"H fails g a ~ b f in degrees {bad}")
        return out


def cone_map(square: HomotopySquare, source: Cone | None = None, target: Cone | None = None,
             check: bool = True) -> GradedMap:
    """Induced map ``(a, b; H): Cone(f) -> Cone(g)``, ``(x, y) -> (a x, b y - H x)``."""
    if check:
        bad = square.defects()
        if bad:
            raise ComplexError("invalid square: " + "; ".join(bad))
    source = source or cone(square.f, check=False)
    target = target or cone(square.g, check=False)
    a, b, H = square.a, square.b, square.H
    X, Y = square.f.source, square.f.target
    Z, W = square.g.source, square.g.target
    blocks = {}
    for j in source.complex.degrees:
        blocks[j] = IntMatrix.block([Z.rank(j - 1), W.rank(j)], [X.rank(j - 1), Y.rank(j)],
                                    {(0, 0): a[j - 1], (1, 0): -H[j - 1], (1, 1): b[j]})
    out = GradedMap(source.complex, target.complex, blocks)
    if check:
        require_chain_map(out, "cone map")
    return out


@dataclass(eq=False)
class HomotopyCube:
    """Homotopy commutative cube with filler ``Phi``.

    Back face ``H: g a ~ b f`` over ``f: X -> Y``, ``g: Z -> W``; front face
    ``H2: g2 a2 ~ b2 f2`` over ``f2: X2 -> Y2``, ``g2: Z2 -> W2``; connecting
    maps ``xi: X -> X2``, ``upsilon: Y -> Y2``, ``zeta: Z -> Z2``,
    ``omega: W -> W2`` with ``A: zeta a ~ a2 xi``, ``B: omega b ~ b2 upsilon``,
    ``F: f2 xi ~ upsilon f`` and ``G: g2 zeta ~ omega g``.  The filler
    satisfies ``d Phi - Phi d = omega H - H2 xi + B f - g2 A + G a - b2 F``.
    """

    f: GradedMap
    g: GradedMap
    a: GradedMap
    b: GradedMap
    H: GradedMap
    f2: GradedMap
    g2: GradedMap
    a2: GradedMap
    b2: GradedMap
    H2: GradedMap
    xi: GradedMap
    upsilon: GradedMap
    zeta: GradedMap
    omega: GradedMap
    A: GradedMap
    B: GradedMap
    F: GradedMap
    G: GradedMap
    Phi: GradedMap

    def filler_rhs(self) -> GradedMap:
        return (self.omega @ self.H - self.H2 @ self.xi + self.B @ self.f
                - self.g2 @ self.A + self.G @ self.a - self.b2 @ self.F)

    def defects(self) -> list[str]:
        out = []
        faces = {
            "back": HomotopySquare(self.f, self.g, self.a, self.b, self.H),
            "front": HomotopySquare(self.f2, self.g2, self.a2, self.b2, self.H2),
            "left": HomotopySquare(self.xi, self.zeta, self.a, self.a2, self.A),
            "right": HomotopySquare(self.upsilon, self.omega, self.b, self.b2, self.B),
            "top": HomotopySquare(self.f, self.f2, self.xi, self.upsilon, self.F),
            "bottom": HomotopySquare(self.g, self.g2, self.zeta, self.omega, self.G),
        }
        for name, sq in faces.items():
            out.extend(f"{name}: {msg}" for msg in sq.defects())
        if self.Phi.shift != 2:
            out.append("filler must have shift 2")
        elif (self.Phi.boundary() - self.filler_rhs()).nonzero_degrees():
            out.append("filler identity fails in degrees "
                       f"{(self.Phi.boundary() - self.filler_rhs()).nonzero_degrees()}")
        return out


def cube_fill_square(cube: HomotopyCube, check: bool = True) -> HomotopySquare:
    """Square of induced cone maps with homotopy
    ``Psi(x, y) = (-A x, B y - Phi x)`` from ``(zeta, omega; G)(a, b; H)``
    to ``(a2, b2; H2)(xi, upsilon; F)``."""
    if check:
        bad = cube.defects()
        if bad:
            raise ComplexError("invalid cube: " + "; ".join(bad))
    cf, cg = cone(cube.f, check=False), cone(cube.g, check=False)
    cf2, cg2 = cone(cube.f2, check=False), cone(cube.g2, check=False)
    top = cone_map(HomotopySquare(cube.f, cube.f2, cube.xi, cube.upsilon, cube.F), cf, cf2, check=False)
    left = cone_map(HomotopySquare(cube.f, cube.g, cube.a, cube.b, cube.H), cf, cg, check=False)
    right = cone_map(HomotopySquare(cube.f2, cube.g2, cube.a2, cube.b2, cube.H2), cf2, cg2, check=False)
    bottom = cone_map(HomotopySquare(cube.g, cube.g2, cube.zeta, cube.omega, cube.G), cg, cg2, check=False)
    X, Y = cube.f.source, cube.f.target
    Z2, W2 = cube.g2.source, cube.g2.target
    blocks = {}
    for j in cf.complex.degrees:
        blocks[j] = IntMatrix.block([Z2.rank(j), W2.rank(j + 1)], [X.rank(j - 1), Y.rank(j)],
                                    {(0, 0): -cube.A[j - 1], (1, 0): -cube.Phi[j - 1], (1, 1): cube.B[j]})
    Psi = GradedMap(cf.complex, cg2.complex, blocks, 1)
    square = HomotopySquare(top, bottom, left, right, Psi)
    if check:
        require_homotopy(Psi, bottom @ left, right @ top, "cube square homotopy")
    return square


# truncation and skeleta -------------------------------------------------


def truncate_below(Y: BasedComplex, n: int) -> BasedComplex:
    """``Cone(Y^n -> Y)`` where ``Y^n`` is ``ker d_n`` in degree ``n`` and
    ``Y`` above it; homology survives only below ``n``."""
    from .homology import kernel_basis, preimage_matrix

    K = kernel_basis(Y.d(n)) if Y.rank(n) else IntMatrix.zeros(0, 0)
    top = max(n, Y.hi)
    bases = {n: numbered("ker", K.ncols)}
    diffs = {}
    for j in range(n + 1, top + 1):
        bases[j] = Y.basis(j)
        if j == n + 1:
            diffs[j] = preimage_matrix(K, Y.d(j)) if K.ncols else IntMatrix.zeros(0, Y.rank(j))
        else:
            diffs[j] = Y.d(j)
    sub = BasedComplex(bases, diffs)
    inc = {n: K} if K.ncols else {}
    for j in range(n + 1, top + 1):
        inc[j] = IntMatrix.identity(Y.rank(j))
    return cone(GradedMap(sub, Y, inc)).complex


def skeleton(X: BasedComplex, k: int) -> BasedComplex:
    if k < X.lo:
        return zero_complex(X.lo)
    top = min(k, X.hi)
    return BasedComplex({j: X.basis(j) for j in range(X.lo, top + 1)},
                        {j: X.d(j) for j in range(X.lo + 1, top + 1)})


def log_plus(x: float) -> float:
    import math

    return math.log(x) if x > 1 else 0.0


# projective replacement -------------------------------------------------


@dataclass(eq=False)
class Replacement:
    """Result of :func:`projective_replacement`.

    ``stages[k]`` records the complex after ``k + 1`` resolutions have been
    glued in, the lift ``lift`` from the suspended resolution into the
    previous stage and the homotopy ``square`` certifying that the lift
    covers ``d_k`` up to homotopy.
    """

    complex: BasedComplex
    q: GradedMap
    stages: list[dict] = field(default_factory=list)


def projective_replacement(X: BasedComplex,
                           resolutions: Sequence[tuple[BasedComplex, IntMatrix]]) -> Replacement:
    """Replace each ``X_k`` by a free resolution ``P^k -> X_k`` and glue.

    ``resolutions[k]`` is the pair ``(P^k, eps_k)`` with ``eps_k`` the
    augmentation ``P^k_0 -> X_k``.  The result has
    ``Xhat_m = sum_{k+i=m} P^k_i`` and a weak equivalence ``q: Xhat -> X``.
    """
    from .homology import is_acyclic
    from .htpy import homotopy_inverse

    if X.lo < 0:
        raise ComplexError("projective replacement needs a complex in degrees >= 0")
    top = X.hi
    if len(resolutions) != top + 1:
        raise ComplexError(f"need {top + 1} resolutions, got {len(resolutions)}")
    for k, (P, eps) in enumerate(resolutions):
        if P.lo < 0:
            raise ComplexError(f"resolution {k} has negative degrees")
        if eps.shape != (X.rank(k), P.rank(0)):
            raise ComplexError(f"augmentation {k} has the wrong shape")
        target = BasedComplex({0: X.basis(k)})
        aug = GradedMap(P, target, {0: eps})
        if chain_map_defects(aug) or not is_acyclic(cone(aug, check=False).complex):
            raise ComplexError(f"resolution {k} is not a resolution of X_{k}")

    stages = []
    P0, eps0 = resolutions[0]
    cur = P0
    q = GradedMap(P0, skeleton(X, 0), {0: eps0})
    for k in range(1, top + 1):
        P, eps = resolutions[k]
        SP = suspend(P, k - 1)
        Xk = BasedComplex({k - 1: X.basis(k)})
        skel_prev = skeleton(X, k - 1)
        skel = skeleton(X, k)
        # d_k viewed as a chain map from the suspended module into the skeleton
        dk = GradedMap(Xk, skel_prev, {k - 1: X.d(k)})
        aug = GradedMap(SP, Xk, {k - 1: eps})
        phi = dk @ aug
        r, _, h_tgt = homotopy_inverse(q)
        lift = r @ phi
        H = h_tgt @ phi
        square = HomotopySquare(lift, dk, aug, q, H)
        c_lift = cone(lift, check=False)
        c_dk = cone(dk, check=False)
        qk = cone_map(square, c_lift, c_dk)
        # Cone(d_k) is the k-skeleton with relabelled bases
        relabel = GradedMap(c_dk.complex, skel, {j: IntMatrix.identity(skel.rank(j)) for j in skel.degrees})
        require_chain_map(relabel, "skeleton identification")
        cur = c_lift.complex
        q = relabel @ qk
        stages.append({"degree": k, "lift": lift, "square": square, "stage": cur})
    q = GradedMap(cur, X, {j: q[j] for j in cur.degrees})
    require_chain_map(q, "replacement map")
    if not is_acyclic(cone(q, check=False).complex):
        raise ComplexError("replacement map is not a weak equivalence")
    return Replacement(cur, q, stages)
