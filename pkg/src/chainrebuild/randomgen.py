"""Random small complexes, maps and homotopy data, plus the identity suite.

Complexes are assembled from elementary pieces (a free generator, or two
generators joined by multiplication by a small integer) and then mixed by
elementary basis changes, so their homology is known by construction.
Every map that has to be a chain map is built as ``d K + K d``, which keeps
the homotopies between composites explicit.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .htpy import HomotopyRetract, contract_acyclic, homotopy_inverse, transport_retract
from .intmat import IntMatrix
from .zchain import (
    BasedComplex,
    GradedMap,
    HomotopyCube,
    HomotopySquare,
    cone,
    cone_map,
    cube_fill_square,
    direct_sum,
    sum_maps,
    validate,
)


def _elementary(rng: random.Random, n: int, steps: int) -> tuple[list[list[int]], list[list[int]]]:
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    V = [row[:] for row in U]
    for _ in range(steps if n > 1 else 0):
        i, k = rng.sample(range(n), 2)
        c = rng.choice((-1, 1))
        for col in range(n):
            U[i][col] += c * U[k][col]
        for row in range(n):
            V[row][k] -= c * V[row][i]
    return U, V


def random_complex(rng: random.Random, max_degree: int = 4, max_rank: int = 6, bound: int = 3,
                   acyclic: bool = False, lo: int = 0) -> BasedComplex:
    """Random complex in degrees ``lo .. lo + max_degree`` with entries in ``[-bound, bound]``."""
    hi = lo + rng.randint(1 if acyclic else 0, max_degree)
    ranks = {j: 0 for j in range(lo, hi + 1)}
    pairs = []
    for j in range(lo, hi + 1):
        for _ in range(rng.randint(0, 3)):
            if j > lo and (acyclic or rng.random() < 0.6):
                if ranks[j] < max_rank and ranks[j - 1] < max_rank:
                    c = rng.choice((-1, 1)) if acyclic else rng.choice((-3, -2, -1, 1, 2, 3))
                    pairs.append((j, ranks[j], ranks[j - 1], c))
                    ranks[j] += 1
                    ranks[j - 1] += 1
            elif not acyclic and ranks[j] < max_rank:
                ranks[j] += 1
    base = {j: IntMatrix.from_entries(ranks[j - 1], ranks[j], [(r, c, v) for (jj, c, r, v) in pairs if jj == j])
            for j in range(lo + 1, hi + 1)}
    for _ in range(8):
        changes = {j: _elementary(rng, ranks[j], rng.randint(0, 3)) for j in ranks}
        diffs = {}
        for j in range(lo + 1, hi + 1):
            U = IntMatrix.from_dense(changes[j - 1][0], ranks[j - 1])
            Vinv = IntMatrix.from_dense(changes[j][1], ranks[j])
            diffs[j] = U @ base[j] @ Vinv
        if all(m.max_abs() <= bound for m in diffs.values()):
            return BasedComplex.from_ranks(ranks, diffs)
    return BasedComplex.from_ranks(ranks, base)


def random_map(rng: random.Random, X: BasedComplex, Y: BasedComplex, shift: int = 0,
               bound: int = 1, density: float = 0.4) -> GradedMap:
    blocks = {}
    for j in X.degrees:
        rows, cols = Y.rank(j + shift), X.rank(j)
        entries = [(r, c, rng.randint(-bound, bound)) for r in range(rows) for c in range(cols)
                   if rng.random() < density]
        if entries:
            blocks[j] = IntMatrix.from_entries(rows, cols, entries)
    return GradedMap(X, Y, blocks, shift)


def random_nullhomotopic(rng: random.Random, X: BasedComplex, Y: BasedComplex) -> tuple[GradedMap, GradedMap]:
    """A chain map ``d K + K d`` together with ``K``."""
    K = random_map(rng, X, Y, 1)
    return K.boundary(), K


def random_square(rng: random.Random) -> HomotopySquare:
    X, Y, Z, W = (random_complex(rng) for _ in range(4))
    f, Kf = random_nullhomotopic(rng, X, Y)
    g, _ = random_nullhomotopic(rng, Z, W)
    a, Ka = random_nullhomotopic(rng, X, Z)
    b, _ = random_nullhomotopic(rng, Y, W)
    return HomotopySquare(f, g, a, b, g @ Ka - b @ Kf)


def random_cube(rng: random.Random) -> HomotopyCube:
    """Cube with ``xi = id``; the front homotopy is solved from a random filler."""
    X, Y, Z, W = (random_complex(rng) for _ in range(4))
    Y2, Z2, W2 = (random_complex(rng) for _ in range(3))
    f, Kf = random_nullhomotopic(rng, X, Y)
    g, Kg = random_nullhomotopic(rng, Z, W)
    a, Ka = random_nullhomotopic(rng, X, Z)
    b, Kb = random_nullhomotopic(rng, Y, W)
    f2, Kf2 = random_nullhomotopic(rng, X, Y2)
    g2, Kg2 = random_nullhomotopic(rng, Z2, W2)
    a2, Ka2 = random_nullhomotopic(rng, X, Z2)
    b2, Kb2 = random_nullhomotopic(rng, Y2, W2)
    xi = GradedMap.identity(X)
    upsilon, Ku = random_nullhomotopic(rng, Y, Y2)
    zeta, Kz = random_nullhomotopic(rng, Z, Z2)
    omega, Kw = random_nullhomotopic(rng, W, W2)
    H = g @ Ka - b @ Kf
    A = zeta @ Ka - Ka2
    B = omega @ Kb - b2 @ Ku
    F = Kf2 - upsilon @ Kf
    G = g2 @ Kz - omega @ Kg
    Phi = random_map(rng, X, W2, 2)
    rest = omega @ H + B @ f - g2 @ A + G @ a - b2 @ F
    H2 = rest - Phi.boundary()
    return HomotopyCube(f, g, a, b, H, f2, g2, a2, b2, H2, xi, upsilon, zeta, omega, A, B, F, G, Phi)


def random_weak_equivalence(rng: random.Random) -> tuple[GradedMap, BasedComplex, BasedComplex]:
    """Projection ``Y (+) E -> Y`` twisted by a chain automorphism; ``E`` is contractible."""
    Y = random_complex(rng)
    E = random_complex(rng, acyclic=True)
    X = direct_sum(Y, E)
    proj = GradedMap(X, Y, {j: IntMatrix.block([Y.rank(j)], [Y.rank(j), E.rank(j)],
                                               {(0, 0): IntMatrix.identity(Y.rank(j))}) for j in X.degrees})
    twist, inv = _twist(rng, Y, E, X)
    return proj @ inv, X, Y


def _twist(rng, Y, E, X):
    g, _ = random_nullhomotopic(rng, Y, E)
    blocks, inv = {}, {}
    for j in X.degrees:
        sizes = [Y.rank(j), E.rank(j)]
        eye = {(0, 0): IntMatrix.identity(sizes[0]), (1, 1): IntMatrix.identity(sizes[1])}
        blocks[j] = IntMatrix.block(sizes, sizes, {**eye, (1, 0): g[j]})
        inv[j] = IntMatrix.block(sizes, sizes, {**eye, (1, 0): -g[j]})
    return GradedMap(X, X, blocks), GradedMap(X, X, inv)


def random_retract(rng: random.Random) -> HomotopyRetract:
    """``Y (+) E`` onto ``Y`` through a contraction of ``E``, moved along a twist."""
    Y = random_complex(rng)
    E = random_complex(rng, acyclic=True)
    X = direct_sum(Y, E)
    s = contract_acyclic(E)
    fwd = {j: IntMatrix.block([Y.rank(j)], [Y.rank(j), E.rank(j)], {(0, 0): IntMatrix.identity(Y.rank(j))})
           for j in X.degrees}
    back = {j: m.T for j, m in fwd.items()}
    R = HomotopyRetract(X, Y, GradedMap(X, Y, fwd), GradedMap(Y, X, back),
                        sum_maps([GradedMap.zero(Y, Y, 1), s], X, X))
    twist, inv = _twist(rng, Y, E, X)
    return transport_retract(R, twist, inv)


# identity suite -------------------------------------------------------------


def _dense_mul(a: IntMatrix, b: IntMatrix) -> list[list[int]]:
    A, B = a.to_dense(), b.to_dense()
    return [[sum(A[i][k] * B[k][j] for k in range(a.ncols)) for j in range(b.ncols)] for i in range(a.nrows)]


def dense_commutator_zero(M: GradedMap, plain: list[GradedMap], signs: list[int]) -> bool:
    """``d M - (-1)^shift M d + sum s P == 0`` with schoolbook arithmetic on lists."""
    X, Y, k = M.source, M.target, M.shift
    sign = -1 if k % 2 else 1
    for j in range(min(X.lo, Y.lo - k) - 1, max(X.hi, Y.hi - k) + 2):
        rows, cols = Y.rank(j + k - 1), X.rank(j)
        if rows == 0 or cols == 0:
            continue
        total = [[0] * cols for _ in range(rows)]
        terms = [(1, _dense_mul(Y.d(j + k), M[j])), (-sign, _dense_mul(M[j - 1], X.d(j)))]
        terms += [(s, P[j].to_dense()) for s, P in zip(signs, plain)]
        for s, t in terms:
            for r in range(rows):
                for c in range(cols):
                    total[r][c] += s * t[r][c]
        if any(any(row) for row in total):
            return False
    return True


def _dense_homotopy(H, f, g) -> bool:
    return dense_commutator_zero(H, [f, g], [-1, 1])


def _dense_chain_map(f) -> bool:
    return dense_commutator_zero(f, [], [])


KINDS = ("cone", "cone_map", "cube", "retract", "contraction", "homotopy_inverse")


@dataclass
class SuiteReport:
    counts: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_case(rng: random.Random, kind: str) -> list[str]:
    """Build one random object of the given kind and return failed identities."""
    bad = []
    if kind == "cone":
        X, Y = random_complex(rng), random_complex(rng)
        f, _ = random_nullhomotopic(rng, X, Y)
        c = cone(f)
        bad += validate(c.complex)
        if not (_dense_chain_map(c.inclusion) and _dense_chain_map(c.projection)):
            bad.append("cone structure maps are not chain maps")
    elif kind == "cone_map":
        sq = random_square(rng)
        m = cone_map(sq)
        if m.boundary().nonzero_degrees() or not _dense_chain_map(m):
            bad.append("induced cone map is not a chain map")
    elif kind == "cube":
        cube = random_cube(rng)
        bad += cube.defects()
        sq = cube_fill_square(cube, check=False)
        if not _dense_homotopy(sq.H, sq.g @ sq.a, sq.b @ sq.f):
            bad.append("cube square homotopy fails")
    elif kind == "retract":
        R = random_retract(rng)
        bad += R.defects()
        if not (_dense_chain_map(R.forward) and _dense_chain_map(R.backward)
                and _dense_homotopy(R.homotopy, GradedMap.identity(R.source), R.backward @ R.forward)):
            bad.append("retract identities fail")
    elif kind == "contraction":
        if rng.random() < 0.5:
            C = random_complex(rng, acyclic=True)
        else:
            X = random_complex(rng)
            C = cone(GradedMap.identity(X)).complex
        s = contract_acyclic(C)
        if not _dense_homotopy(s, GradedMap.identity(C), GradedMap.zero(C, C)):
            bad.append("contraction identity fails")
    elif kind == "homotopy_inverse":
        q, X, Y = random_weak_equivalence(rng)
        r, Hs, Ht = homotopy_inverse(q)
        if not (_dense_chain_map(r) and _dense_homotopy(Hs, GradedMap.identity(X), r @ q)
                and _dense_homotopy(Ht, GradedMap.identity(Y), q @ r)):
            bad.append("homotopy inverse identities fail")
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return bad


def identity_suite(seed: int = 0, cases: int = 1000) -> SuiteReport:
    """Run ``cases`` random constructions, cycling through :data:`KINDS`."""
    rng = random.Random(seed)
    report = SuiteReport({k: 0 for k in KINDS})
    for i in range(cases):
        kind = KINDS[i % len(KINDS)]
        report.counts[kind] += 1
        for msg in run_case(rng, kind):
            report.failures.append((i, kind, msg))
    return report


__all__ = [
    "random_complex", "random_map", "random_nullhomotopic", "random_square", "random_cube",
    "random_retract", "random_weak_equivalence", "identity_suite", "run_case", "SuiteReport", "KINDS",
    "dense_commutator_zero",
]
