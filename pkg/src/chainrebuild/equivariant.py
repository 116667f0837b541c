"""Free chain complexes over group rings of Z^n and Z/m.

Group elements are integer tuples: coordinates for ``Z^n``, a single residue
for ``Z/m``.  Group ring elements are dicts ``{element: coefficient}`` with
no zero coefficients.  A quotient ``Gamma / Lambda`` is described by one
modulus per coordinate, and cosets are enumerated in mixed-radix order, so
the coinvariant basis of a module with basis ``I_j`` is ``I_j x cosets``,
label-major.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .htpy import HomotopyRetract
from .intmat import IntMatrix
from .rebuild import CertifiedRebuilding, Kind, Quality, QualityError, _norm_verdict, _rank_verdict, check_quality
from .zchain import BasedComplex, ComplexError, GradedMap, direct_sum

Element = tuple
RingElement = dict


# groups ---------------------------------------------------------------


@dataclass(frozen=True)
class GroupSpec:
    """``Z^n`` (``order is None``) or ``Z/m`` (``rank == 1``)."""

    rank: int
    order: int | None = None

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.order is not None and (self.order < 1 or self.rank != 1):
            raise ValueError("finite cyclic groups have one generator and order >= 1")

    @property
    def is_free(self) -> bool:
        return self.order is None

    @property
    def name(self) -> str:
        return f"Z^{self.rank}" if self.is_free else f"Z/{self.order}"

    def identity(self) -> Element:
        return (0,) * self.rank

    def reduce(self, g: Iterable[int]) -> Element:
        g = tuple(int(x) for x in g)
        if len(g) != self.rank:
            raise ValueError(f"{g} is not an element of {self.name}")
        return g if self.is_free else (g[0] % self.order,)

    def mul(self, a: Element, b: Element) -> Element:
        return self.reduce(x + y for x, y in zip(a, b))

    def inverse(self, a: Element) -> Element:
        return self.reduce(-x for x in a)

    def generators(self) -> list[Element]:
        """Standard generators and their inverses."""
        out = []
        for i in range(self.rank):
            e = [0] * self.rank
            e[i] = 1
            out.append(self.reduce(e))
            out.append(self.inverse(self.reduce(e)))
        return sorted(set(out) - ({self.identity()} if not self.is_free else set()))

    def check_moduli(self, moduli) -> tuple[int, ...]:
        """Normalize a quotient description; an int means the same modulus everywhere."""
        if isinstance(moduli, (int, np.integer)):
            moduli = (int(moduli),) * self.rank
        moduli = tuple(int(m) for m in moduli)
        if len(moduli) != self.rank or any(m < 1 for m in moduli):
            raise ValueError(f"moduli {moduli} do not describe a finite quotient of {self.name}")
        if not self.is_free and self.order % moduli[0]:
            raise ValueError(f"{moduli[0]} does not divide {self.order}")
        return moduli

    def index(self, moduli) -> int:
        return math.prod(self.check_moduli(moduli))

    def to_json(self) -> dict:
        return {"kind": "free", "rank": self.rank} if self.is_free else {"kind": "cyclic", "order": self.order}

    @classmethod
    def from_json(cls, obj: Mapping) -> "GroupSpec":
        if obj["kind"] == "free":
            return FreeAbelian(int(obj["rank"]))
        if obj["kind"] == "cyclic":
            return FiniteCyclic(int(obj["order"]))
        raise ValueError(f"unknown group kind {obj['kind']!r}")


def FreeAbelian(n: int) -> GroupSpec:
    return GroupSpec(n)


def FiniteCyclic(m: int) -> GroupSpec:
    return GroupSpec(1, m)


def cosets(moduli: Sequence[int]) -> np.ndarray:
    """All residues in mixed-radix (lexicographic) order, one row each."""
    if not moduli:
        return np.zeros((1, 0), np.int64)
    grids = np.indices(tuple(moduli), dtype=np.int64)
    return grids.reshape(len(moduli), -1).T.copy()


def coset_label(f: Iterable[int]) -> str:
    return ",".join(str(int(x)) for x in f)


# group ring arithmetic ---------------------------------------------------


def ring_element(terms: Mapping | Iterable, group: GroupSpec) -> RingElement:
    out: dict = {}
    items = terms.items() if isinstance(terms, Mapping) else terms
    for g, c in items:
        g = group.reduce(g if isinstance(g, tuple) else (g,))
        out[g] = out.get(g, 0) + int(c)
    return {g: c for g, c in out.items() if c}


def ring_add(a: RingElement, b: RingElement, sign: int = 1) -> RingElement:
    out = dict(a)
    for g, c in b.items():
        out[g] = out.get(g, 0) + sign * c
    return {g: c for g, c in out.items() if c}


def ring_mul(a: RingElement, b: RingElement, group: GroupSpec) -> RingElement:
    out: dict = {}
    for g, c in a.items():
        for h, e in b.items():
            k = group.mul(g, h)
            out[k] = out.get(k, 0) + c * e
    return {g: c for g, c in out.items() if c}


def ring_norm(a: RingElement) -> int:
    return sum(abs(c) for c in a.values())


def monomial(group: GroupSpec, g: Iterable[int], c: int = 1) -> RingElement:
    return {group.reduce(tuple(g)): c} if c else {}


def t_minus_one(group: GroupSpec, i: int) -> RingElement:
    e = [0] * group.rank
    e[i] = 1
    return ring_add(monomial(group, e), monomial(group, group.identity()), -1)


def norm_element(group: GroupSpec) -> RingElement:
    """``1 + t + ... + t^{m-1}`` in ``Z[Z/m]``."""
    return {(k,): 1 for k in range(group.order)}


class GroupRingMatrix:
    """Sparse matrix with entries in the group ring; column ``c``, row ``r``."""

    __slots__ = ("group", "nrows", "ncols", "entries")

    def __init__(self, group: GroupSpec, nrows: int, ncols: int, entries: Mapping | None = None):
        self.group = group
        self.nrows = nrows
        self.ncols = ncols
        self.entries: dict[tuple[int, int], RingElement] = {}
        for (r, c), x in (entries or {}).items():
            if not (0 <= r < nrows and 0 <= c < ncols):
                raise IndexError(f"entry ({r}, {c}) outside a {nrows}x{ncols} matrix")
            x = ring_element(x, group)
            if x:
                self.entries[(r, c)] = x

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def is_zero(self) -> bool:
        return not self.entries

    @classmethod
    def identity(cls, group: GroupSpec, n: int) -> "GroupRingMatrix":
        return cls(group, n, n, {(i, i): {group.identity(): 1} for i in range(n)})

    def __eq__(self, other) -> bool:
        return (isinstance(other, GroupRingMatrix) and self.group == other.group
                and self.shape == other.shape and self.entries == other.entries)

    __hash__ = None

    def __repr__(self) -> str:
        return f"GroupRingMatrix({self.nrows}x{self.ncols}, {len(self.entries)} entries over {self.group.name})"

    def __matmul__(self, other: "GroupRingMatrix") -> "GroupRingMatrix":
        if self.ncols != other.nrows or self.group != other.group:
            raise ValueError("incompatible group ring matrices")
        by_row: dict[int, list] = {}
        for (k, c), x in other.entries.items():
            by_row.setdefault(k, []).append((c, x))
        out: dict = {}
        for (r, k), x in self.entries.items():
            for c, y in by_row.get(k, ()):
                out[(r, c)] = ring_add(out.get((r, c), {}), ring_mul(x, y, self.group))
        return GroupRingMatrix(self.group, self.nrows, other.ncols, out)

    def _combine(self, other: "GroupRingMatrix", sign: int) -> "GroupRingMatrix":
        if self.shape != other.shape or self.group != other.group:
            raise ValueError("incompatible group ring matrices")
        out = dict(self.entries)
        for key, x in other.entries.items():
            out[key] = ring_add(out.get(key, {}), x, sign)
        return GroupRingMatrix(self.group, self.nrows, self.ncols, out)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, k: int) -> "GroupRingMatrix":
        return GroupRingMatrix(self.group, self.nrows, self.ncols,
                               {key: {g: k * c for g, c in x.items()} for key, x in self.entries.items()})

    def norm(self) -> int:
        """l1 operator norm: largest column sum of entry norms."""
        cols = [0] * self.ncols
        for (_, c), x in self.entries.items():
            cols[c] += ring_norm(x)
        return max(cols, default=0)

    def support(self) -> set:
        return {g for x in self.entries.values() for g in x}

    def map_elements(self, fn: Callable[[Element], Element], group: GroupSpec) -> "GroupRingMatrix":
        return GroupRingMatrix(group, self.nrows, self.ncols,
                               {key: [(fn(g), c) for g, c in x.items()] for key, x in self.entries.items()})

    def to_json(self) -> list:
        def enc(g):
            return g[0] if not self.group.is_free else list(g)
        return [{"row": r, "col": c, "terms": [{"element": enc(g), "coeff": str(v)} for g, v in sorted(x.items())]}
                for (r, c), x in sorted(self.entries.items())]

    @classmethod
    def from_json(cls, group: GroupSpec, nrows: int, ncols: int, items: list) -> "GroupRingMatrix":
        entries = {}
        for item in items:
            terms = []
            for t in item["terms"]:
                g = t["element"]
                terms.append((tuple(g) if isinstance(g, list) else (int(g),), int(t["coeff"])))
            entries[(int(item["row"]), int(item["col"]))] = terms
        return cls(group, nrows, ncols, entries)


def coinvariant_matrix(M: GroupRingMatrix, moduli) -> IntMatrix:
    """Integer matrix of ``M`` on ``Lambda``-coinvariants.

    Basis element ``(k, f)`` goes to ``sum_l sum_s M[l, k](s) (l, f s)``.
    """
    moduli = M.group.check_moduli(moduli)
    F = cosets(moduli)
    q = F.shape[0]
    mod = np.array(moduli, np.int64)
    base = np.arange(q, dtype=np.int64)
    rows, cols, vals = [], [], []
    for (r, c), x in M.entries.items():
        for g, coef in x.items():
            shifted = (F + np.array(g, np.int64)) % mod
            idx = np.ravel_multi_index(tuple(shifted.T), moduli) if moduli else np.zeros(q, np.int64)
            rows.append(r * q + idx)
            cols.append(c * q + base)
            vals.append(np.full(q, coef, np.int64))
    if not rows:
        return IntMatrix.zeros(M.nrows * q, M.ncols * q)
    return IntMatrix.from_coo(M.nrows * q, M.ncols * q, np.concatenate(rows), np.concatenate(cols),
                              np.concatenate(vals))


# complexes and maps -----------------------------------------------------


class EquivariantComplex:
    """Bounded free ``Z[Gamma]``-complex with labelled bases.

    ``top`` records the truncation degree of an infinite resolution; it is
    ``None`` for complexes that are genuinely bounded.
    """

    def __init__(self, group: GroupSpec, bases: Mapping[int, Sequence[str]],
                 differentials: Mapping[int, GroupRingMatrix] | None = None, top: int | None = None):
        self.group = group
        if not bases:
            bases = {0: ()}
        self.lo, self.hi = min(bases), max(bases)
        self._bases = {j: tuple(bases.get(j, ())) for j in range(self.lo, self.hi + 1)}
        self._diffs: dict[int, GroupRingMatrix] = {}
        for j, m in (differentials or {}).items():
            if m.group != group:
                raise ComplexError("differential over the wrong group")
            if m.shape != (self.rank(j - 1), self.rank(j)):
                raise ComplexError(f"differential in degree {j} has the wrong shape")
            if not m.is_zero():
                self._diffs[j] = m
        self.top = top

    @property
    def degrees(self) -> range:
        return range(self.lo, self.hi + 1)

    def rank(self, j: int) -> int:
        return len(self._bases.get(j, ()))

    def ranks(self) -> dict[int, int]:
        return {j: self.rank(j) for j in self.degrees}

    def basis(self, j: int) -> tuple[str, ...]:
        return self._bases.get(j, ())

    def d(self, j: int) -> GroupRingMatrix:
        m = self._diffs.get(j)
        return m if m is not None else GroupRingMatrix(self.group, self.rank(j - 1), self.rank(j))

    def validate(self) -> list[int]:
        """Degrees where ``d d`` is not formally zero."""
        return [j for j in self.degrees if not (self.d(j - 1) @ self.d(j)).is_zero()]

    def __eq__(self, other) -> bool:
        return (isinstance(other, EquivariantComplex) and self.group == other.group
                and self._bases == other._bases and self._diffs.keys() == other._diffs.keys()
                and all(self._diffs[j] == other._diffs[j] for j in self._diffs))

    __hash__ = None

    def to_json(self) -> dict:
        return {
            "group": self.group.to_json(),
            "top": self.top,
            "degrees": [{"degree": j, "basis": list(self.basis(j)), "differential": self.d(j).to_json()}
                        for j in self.degrees],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "EquivariantComplex":
        group = GroupSpec.from_json(obj["group"])
        bases = {int(e["degree"]): tuple(e["basis"]) for e in obj["degrees"]}
        diffs = {}
        for e in obj["degrees"]:
            j = int(e["degree"])
            if e.get("differential"):
                diffs[j] = GroupRingMatrix.from_json(group, len(bases.get(j - 1, ())), len(bases[j]),
                                                     e["differential"])
        return cls(group, bases, diffs, obj.get("top"))


class EquivariantMap:
    """Graded ``Z[Gamma]``-linear map of the given degree shift."""

    def __init__(self, source: EquivariantComplex, target: EquivariantComplex,
                 blocks: Mapping[int, GroupRingMatrix] | None = None, shift: int = 0):
        self.source, self.target, self.shift = source, target, shift
        self._blocks = {}
        for j, m in (blocks or {}).items():
            if m.shape != (target.rank(j + shift), source.rank(j)):
                raise ComplexError(f"map block in degree {j} has the wrong shape")
            if not m.is_zero():
                self._blocks[j] = m

    def __getitem__(self, j: int) -> GroupRingMatrix:
        m = self._blocks.get(j)
        if m is None:
            return GroupRingMatrix(self.source.group, self.target.rank(j + self.shift), self.source.rank(j))
        return m

    def nonzero_degrees(self) -> list[int]:
        return sorted(self._blocks)

    @classmethod
    def identity(cls, X: EquivariantComplex) -> "EquivariantMap":
        return cls(X, X, {j: GroupRingMatrix.identity(X.group, X.rank(j)) for j in X.degrees})

    def __matmul__(self, other: "EquivariantMap") -> "EquivariantMap":
        blocks = {j: self[j + other.shift] @ other[j] for j in other.nonzero_degrees()}
        return EquivariantMap(other.source, self.target, blocks, self.shift + other.shift)

    def _combine(self, other: "EquivariantMap", sign: int) -> "EquivariantMap":
        if self.shift != other.shift:
            raise ComplexError("maps have different shifts")
        degs = set(self._blocks) | set(other._blocks)
        return EquivariantMap(self.source, self.target,
                              {j: self[j] + other[j].scale(sign) for j in degs}, self.shift)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return EquivariantMap(self.source, self.target, {j: -m for j, m in self._blocks.items()}, self.shift)

    def boundary(self) -> "EquivariantMap":
        """``d M - (-1)^shift M d``."""
        X, Y, k = self.source, self.target, self.shift
        sign = -1 if k % 2 else 1
        blocks = {}
        for j in range(min(X.lo, Y.lo - k), max(X.hi, Y.hi - k) + 2):
            blocks[j] = Y.d(j + k) @ self[j] - (self[j - 1] @ X.d(j)).scale(sign)
        return EquivariantMap(X, Y, {j: m for j, m in blocks.items() if m.shape[0] and m.shape[1]}, k - 1)

    def norm(self, upto: int | None = None) -> int:
        return max((m.norm() for j, m in self._blocks.items() if upto is None or j <= upto), default=0)


@dataclass(eq=False)
class EquivariantRetract:
    """Group-ring level retract ``(X, X', xi, xi', Xi)``."""

    source: EquivariantComplex
    target: EquivariantComplex
    forward: EquivariantMap
    backward: EquivariantMap
    homotopy: EquivariantMap

    def defects(self) -> list[str]:
        out = []
        for name, m in (("forward", self.forward), ("backward", self.backward)):
            bad = m.boundary().nonzero_degrees()
            if bad:
                out.append(f"{name} map is not a chain map in degrees {bad}")
        lhs = self.homotopy.boundary()
        rhs = EquivariantMap.identity(self.source) - self.backward @ self.forward
        bad = (lhs - rhs).nonzero_degrees()
        if bad:
            out.append(f"homotopy identity fails in degrees {bad}")
        return out


# resolutions ------------------------------------------------------------


def koszul_label(subset: Sequence[int]) -> str:
    return "e" + "".join(str(i + 1) for i in subset)


def koszul_resolution(group: GroupSpec, top: int | None = None) -> EquivariantComplex:
    """Free resolution of the trivial module.

    For ``Z^n`` the Koszul complex, ``d e_S = sum_k (-1)^k (t_{s_k} - 1) e_{S - s_k}``
    (``k`` counted from 0).  For ``Z/m`` the periodic resolution with
    differentials alternating ``t - 1`` and ``1 + t + ... + t^{m-1}``, cut off
    at degree ``top`` (default 3).
    """
    if group.is_free:
        n = group.rank
        subsets = {j: list(itertools.combinations(range(n), j)) for j in range(n + 1)}
        bases = {j: [koszul_label(S) for S in subsets[j]] for j in subsets}
        diffs = {}
        for j in range(1, n + 1):
            pos = {S: i for i, S in enumerate(subsets[j - 1])}
            entries = {}
            for c, S in enumerate(subsets[j]):
                for k, s in enumerate(S):
                    face = S[:k] + S[k + 1:]
                    x = t_minus_one(group, s)
                    entries[(pos[face], c)] = x if k % 2 == 0 else {g: -v for g, v in x.items()}
            diffs[j] = GroupRingMatrix(group, len(subsets[j - 1]), len(subsets[j]), entries)
        return EquivariantComplex(group, bases, diffs)
    top = 3 if top is None else top
    if top < 0:
        raise ValueError("top degree must be nonnegative")
    bases = {j: [f"c{j}"] for j in range(top + 1)}
    diffs = {}
    for j in range(1, top + 1):
        x = t_minus_one(group, 0) if j % 2 else norm_element(group)
        diffs[j] = GroupRingMatrix(group, 1, 1, {(0, 0): x})
    return EquivariantComplex(group, bases, diffs, top)


# coinvariants -------------------------------------------------------------


def coinvariant_basis(labels: Sequence[str], moduli: Sequence[int]) -> list[str]:
    F = cosets(moduli)
    names = [coset_label(f) for f in F]
    return [f"{label}@{name}" for label in labels for name in names]


def coinvariants(X: EquivariantComplex, moduli) -> BasedComplex:
    """``Z (x)_{Z Lambda} X`` with basis ``I_j x Gamma / Lambda``."""
    moduli = X.group.check_moduli(moduli)
    bases = {j: coinvariant_basis(X.basis(j), moduli) for j in X.degrees}
    diffs = {j: coinvariant_matrix(X.d(j), moduli) for j in range(X.lo + 1, X.hi + 1)}
    return BasedComplex(bases, diffs)


def coinvariant_map(f: EquivariantMap, moduli, source: BasedComplex | None = None,
                    target: BasedComplex | None = None) -> GradedMap:
    source = coinvariants(f.source, moduli) if source is None else source
    target = coinvariants(f.target, moduli) if target is None else target
    return GradedMap(source, target, {j: coinvariant_matrix(f[j], moduli) for j in f.nonzero_degrees()}, f.shift)


@dataclass(frozen=True)
class NormCheck:
    coinvariant: int
    formal: int
    holds: bool


def coinvariant_norm_check(f: GroupRingMatrix | EquivariantMap, moduli) -> NormCheck:
    """Compare the norm on coinvariants with the group-ring norm (never larger)."""
    if isinstance(f, EquivariantMap):
        blocks = [f[j] for j in f.nonzero_degrees()]
    else:
        blocks = [f]
    co = max((coinvariant_matrix(m, moduli).l1_norm() for m in blocks), default=0)
    formal = max((m.norm() for m in blocks), default=0)
    return NormCheck(co, formal, co <= formal)


# change of group ------------------------------------------------------------


def induce(X: EquivariantComplex, ambient: GroupSpec, coords: Sequence[int] | None = None) -> EquivariantComplex:
    """``Z[Gamma] (x)_{Z[Delta]} X`` for a coordinate sublattice or a subgroup of ``Z/m``.

    For ``Z^k`` inside ``Z^n`` the ``i``-th coordinate of ``X`` becomes
    coordinate ``coords[i]``.  For ``Z/q`` inside ``Z/m`` the generator maps
    to ``m/q``.
    """
    G = X.group
    if G.is_free and ambient.is_free:
        coords = tuple(range(G.rank)) if coords is None else tuple(coords)
        if len(coords) != G.rank or len(set(coords)) != len(coords) or not all(0 <= c < ambient.rank for c in coords):
            raise ValueError("coords must pick distinct ambient coordinates, one per subgroup coordinate")

        def fn(g):
            out = [0] * ambient.rank
            for c, x in zip(coords, g):
                out[c] = x
            return tuple(out)
    elif not G.is_free and not ambient.is_free:
        if ambient.order % G.order:
            raise ValueError(f"Z/{G.order} is not a subgroup of Z/{ambient.order}")
        step = ambient.order // G.order

        def fn(g):
            return ((g[0] * step) % ambient.order,)
    else:
        raise ValueError("unsupported subgroup shape")
    diffs = {j: X.d(j).map_elements(fn, ambient) for j in range(X.lo + 1, X.hi + 1)}
    return EquivariantComplex(ambient, X._bases, diffs, X.top)


def induce_map(f: EquivariantMap, source: EquivariantComplex, target: EquivariantComplex,
               coords: Sequence[int] | None = None) -> EquivariantMap:
    G, ambient = f.source.group, source.group
    coords = tuple(range(G.rank)) if coords is None else tuple(coords)

    def fn(g):
        out = [0] * ambient.rank
        for c, x in zip(coords, g):
            out[c] = x
        return tuple(out)
    return EquivariantMap(source, target, {j: f[j].map_elements(fn, ambient) for j in f.nonzero_degrees()}, f.shift)


def restrict(X: EquivariantComplex, moduli) -> EquivariantComplex:
    """``X`` as a complex over ``Lambda = prod m_i Z``, identified with ``Z^n``.

    Basis ``(k, f)`` for ``f`` in the box of residues; ``e_k f s`` is written as
    ``e_l r`` times the lattice element ``(f + s - r) / m``.
    """
    G = X.group
    if not G.is_free:
        raise ValueError("restriction is implemented for Z^n")
    moduli = G.check_moduli(moduli)
    F = [tuple(int(x) for x in f) for f in cosets(moduli)]
    q = len(F)
    pos = {f: i for i, f in enumerate(F)}
    bases = {j: coinvariant_basis(X.basis(j), moduli) for j in X.degrees}
    diffs = {}
    for j in range(X.lo + 1, X.hi + 1):
        entries: dict = {}
        for (l, k), x in X.d(j).entries.items():
            for fi, f in enumerate(F):
                for g, c in x.items():
                    s = [a + b for a, b in zip(f, g)]
                    r = tuple(v % m for v, m in zip(s, moduli))
                    lam = tuple((v - w) // m for v, w, m in zip(s, r, moduli))
                    key = (l * q + pos[r], k * q + fi)
                    entries.setdefault(key, []).append((lam, c))
        diffs[j] = GroupRingMatrix(G, X.rank(j - 1) * q, X.rank(j) * q, entries)
    return EquivariantComplex(G, bases, diffs, X.top)


def equivariant_cone(f: EquivariantMap) -> EquivariantComplex:
    """``Cone(f)_j = X_{j-1} (+) Y_j`` with ``d(x, y) = (-dx, dy + f x)``."""
    if f.shift != 0:
        raise ComplexError("cones need a chain map")
    X, Y, G = f.source, f.target, f.source.group
    lo, hi = min(X.lo + 1, Y.lo), max(X.hi + 1, Y.hi)
    bases = {j: ["cx:" + s for s in X.basis(j - 1)] + ["cy:" + s for s in Y.basis(j)] for j in range(lo, hi + 1)}
    diffs = {}
    for j in range(lo + 1, hi + 1):
        a, b = X.rank(j - 1), X.rank(j - 2)
        entries = {}
        for (r, c), x in X.d(j - 1).entries.items():
            entries[(r, c)] = {g: -v for g, v in x.items()}
        for (r, c), x in f[j - 1].entries.items():
            entries[(b + r, c)] = x
        for (r, c), x in Y.d(j).entries.items():
            entries[(b + r, a + c)] = x
        diffs[j] = GroupRingMatrix(G, b + Y.rank(j - 1), a + Y.rank(j), entries)
    return EquivariantComplex(G, bases, diffs)


@dataclass(eq=False)
class InducedSplitting:
    """Coinvariants of an induced complex as a sum of copies.

    ``iso`` maps the coinvariants of the induced complex to the direct sum
    of ``copies`` identical complexes; ``inverse`` undoes it.
    """

    induced: BasedComplex
    piece: BasedComplex
    total: BasedComplex
    copies: int
    iso: GradedMap
    inverse: GradedMap


def induced_splitting(X: EquivariantComplex, ambient: GroupSpec, coords: Sequence[int], moduli) -> InducedSplitting:
    """Basis bijection ``(ind X)_Lambda ~ (+)_{copies} X_{Lambda cap Delta}``.

    Ambient coset ``f`` lands in copy ``f`` restricted to the other
    coordinates, at position ``(k, f restricted to coords)``.  The matrices
    are compared exactly, so the bijection is a chain isomorphism.
    """
    moduli = ambient.check_moduli(moduli)
    coords = tuple(coords)
    rest = tuple(c for c in range(ambient.rank) if c not in coords)
    sub_moduli = tuple(moduli[c] for c in coords)
    rest_moduli = tuple(moduli[c] for c in rest)
    induced = coinvariants(induce(X, ambient, coords), moduli)
    piece = coinvariants(X, sub_moduli)
    copies = math.prod(rest_moduli)
    total = direct_sum(*([piece] * copies))
    F = cosets(moduli)
    q = F.shape[0]
    qs = math.prod(sub_moduli)
    inner = np.ravel_multi_index(tuple(F[:, list(coords)].T), sub_moduli) if coords else np.zeros(q, np.int64)
    outer = np.ravel_multi_index(tuple(F[:, list(rest)].T), rest_moduli) if rest else np.zeros(q, np.int64)
    fwd, back = {}, {}
    for j in X.degrees:
        r = X.rank(j)
        k = np.repeat(np.arange(r, dtype=np.int64), q)
        src = np.arange(r * q, dtype=np.int64)
        dst = outer[src % q] * (r * qs) + k * qs + inner[src % q]
        P = IntMatrix.from_coo(r * q, r * q, dst, src, np.ones(r * q, np.int64))
        fwd[j], back[j] = P, P.T
    iso = GradedMap(induced, total, fwd)
    inverse = GradedMap(total, induced, back)
    for j in range(X.lo + 1, X.hi + 1):
        if fwd[j - 1] @ induced.d(j) != total.d(j) @ fwd[j]:
            raise ComplexError(f"coset bijection does not commute with the differential in degree {j}")
    return InducedSplitting(induced, piece, total, copies, iso, inverse)


# descent --------------------------------------------------------------------


def descend_retract(R: EquivariantRetract, moduli, n: int, T, kappa, kind: Kind | str = Kind.FULL) -> CertifiedRebuilding:
    """Certify a group-ring retract at the group-ring level, then on coinvariants.

    The group-ring ledger uses ranks over ``Z[Gamma]`` and group-ring norms;
    since coinvariant norms never exceed them and ranks scale by the index,
    the coinvariant retract then meets the same quality.
    """
    kind = Kind.parse(kind)
    q = Quality.of(T, kappa)
    bad = R.defects()
    if bad:
        raise QualityError("group ring retract fails: " + "; ".join(bad))
    X, Xp = R.source, R.target
    for j in range(min(X.lo, Xp.lo), n + 1):
        verdict, rhs = _rank_verdict(Xp.rank(j), X.rank(j), q)
        if verdict != "pass":
            raise QualityError(f"degree {j}: group ring rank {Xp.rank(j)} exceeds {rhs}", j)
        checks = []
        if kind >= Kind.WEAK:
            checks += [("d_target", Xp.d(j)), ("forward", R.forward[j])]
        if kind >= Kind.FULL:
            checks += [("backward", R.backward[j]), ("homotopy", R.homotopy[j])]
        for name, m in checks:
            value = m.norm()
            verdict = _norm_verdict(value, q)
            if verdict != "pass":
                raise QualityError(f"degree {j}: group ring norm of {name} is {value}, {verdict}", j)
            nc = coinvariant_norm_check(m, moduli)
            if not nc.holds:
                raise QualityError(f"degree {j}: coinvariant norm of {name} exceeds the group ring norm", j)
    C, Cp = coinvariants(X, moduli), coinvariants(Xp, moduli)
    retract = HomotopyRetract(C, Cp, coinvariant_map(R.forward, moduli, C, Cp),
                              coinvariant_map(R.backward, moduli, Cp, C),
                              coinvariant_map(R.homotopy, moduli, C, C))
    return check_quality(retract, n, q.T, q.kappa_exact if q.kappa_exact is not None else q.kappa, kind)


def line_retract(d: int) -> EquivariantRetract:
    """Koszul(1) restricted to ``dZ``, retracted onto Koszul(1) over ``dZ``.

    ``v_s -> e``, ``f_{d-1} -> f`` forwards; ``f -> sum f_s`` and ``e -> v_0``
    backwards; the homotopy sends ``v_i`` to ``f_0 + ... + f_{i-1}``.
    """
    Z = FreeAbelian(1)
    X = restrict(koszul_resolution(Z), d)
    K = koszul_resolution(Z)
    one = {(0,): 1}
    fwd = {0: GroupRingMatrix(Z, 1, d, {(0, s): one for s in range(d)}),
           1: GroupRingMatrix(Z, 1, d, {(0, d - 1): one})}
    back = {0: GroupRingMatrix(Z, d, 1, {(0, 0): one}),
            1: GroupRingMatrix(Z, d, 1, {(s, 0): one for s in range(d)})}
    hom = {0: GroupRingMatrix(Z, d, d, {(s, i): one for i in range(d) for s in range(i)})}
    return EquivariantRetract(X, K, EquivariantMap(X, K, fwd), EquivariantMap(K, X, back),
                              EquivariantMap(X, X, hom, 1))


# residual chains ------------------------------------------------------------


@dataclass(frozen=True)
class ResidualChain:
    """Finite prefix of a nested chain of finite-index subgroups.

    Each level is a moduli tuple.  Level 0 is the whole group.  For ``Z^n``
    the moduli divide each other coordinatewise and the index grows
    strictly; for ``Z/m`` the index may repeat once the trivial subgroup is
    reached, and the last level must be trivial.
    """

    group: GroupSpec
    levels: tuple

    def __post_init__(self):
        G = self.group
        levels = tuple(G.check_moduli(m) for m in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ValueError("a residual chain needs at least one level")
        if any(m != 1 for m in levels[0]):
            raise ValueError("level 0 must be the whole group")
        for a, b in zip(levels, levels[1:]):
            if any(y % x for x, y in zip(a, b)):
                raise ValueError(f"levels {a} and {b} are not nested")
            if G.is_free and G.index(b) <= G.index(a):
                raise ValueError("indices must increase strictly")
        if not G.is_free and levels[-1][0] != G.order:
            raise ValueError("a chain in a finite group must end at the trivial subgroup")

    def __len__(self) -> int:
        return len(self.levels)

    def index(self, i: int) -> int:
        return self.group.index(self.levels[i])

    @classmethod
    def from_moduli(cls, group: GroupSpec, moduli: Iterable) -> "ResidualChain":
        return cls(group, tuple(group.check_moduli(m) for m in moduli))

    @classmethod
    def powers_of_two(cls, group: GroupSpec, count: int) -> "ResidualChain":
        return cls.from_moduli(group, [2 ** i for i in range(count)])


__all__ = [
    "GroupSpec", "FreeAbelian", "FiniteCyclic", "GroupRingMatrix", "EquivariantComplex", "EquivariantMap",
    "EquivariantRetract", "ResidualChain", "koszul_resolution", "coinvariants", "coinvariant_matrix",
    "coinvariant_map", "coinvariant_norm_check", "induce", "induce_map", "restrict", "equivariant_cone",
    "induced_splitting", "InducedSplitting", "descend_retract", "line_retract", "cosets", "NormCheck",
]
