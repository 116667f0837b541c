"""Quality certificates for homotopy retracts and the ways to combine them.

A retract ``(X, X', xi, xi', Xi)`` has quality ``(T, kappa)`` up to degree
``n`` when, for every ``j <= n``,

* ``rk X'_j <= kappa / T * rk X_j`` (domination),
* ``||d^{X'}_j||`` and ``||xi_j||`` are at most ``exp(kappa) T^kappa`` (weak),
* ``||xi'_j||`` and ``||Xi_j||`` obey the same bound (full).

:func:`check_quality` is the only place a :class:`CertifiedRebuilding` is
made, so every constructor below is re-checked from scratch.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .htpy import HomotopyRetract, identity_retract
from .intmat import IntMatrix
from .zchain import (
    BasedComplex,
    ComplexError,
    GradedMap,
    HomotopyCube,
    cone,
    cube_fill_square,
    direct_sum,
    log_plus,
    numbered,
    require_chain_map,
    same_complex,
    sum_maps,
)

GUARD = 1e-9


class Kind(enum.IntEnum):
    DOMINATION = 0
    WEAK = 1
    FULL = 2

    def __str__(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: "Kind | str") -> "Kind":
        if isinstance(value, Kind):
            return value
        return cls[str(value).upper()]


class QualityError(ComplexError):
    """The retract does not meet the requested quality."""

    def __init__(self, message: str, degree: int | None = None, inequality: str = "",
                 lhs: object = None, rhs: object = None):
        super().__init__(message)
        self.degree = degree
        self.inequality = inequality
        self.lhs = lhs
        self.rhs = rhs


class IndeterminateQuality(QualityError):
    """A norm or rank comparison fell inside the floating-point guard band."""


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x).limit_denominator(10 ** 12) if not float(x).is_integer() else Fraction(int(x))


@dataclass(frozen=True)
class Quality:
    """Scale ``T >= 1`` (exact rational) and exponent ``kappa >= 1``.

    ``kappa_exact`` is kept when the exponent is a known rational, which
    makes the rank inequality an exact comparison.
    """

    T: Fraction
    kappa: float
    kappa_exact: Fraction | None = None

    @classmethod
    def of(cls, T, kappa) -> "Quality":
        T = _as_fraction(T)
        exact = None
        if isinstance(kappa, (int, Fraction)):
            exact = Fraction(kappa)
        elif float(kappa).is_integer():
            exact = Fraction(int(kappa))
        q = cls(T, float(kappa), exact)
        if q.T < 1:
            raise QualityError(f"T = {q.T} is below 1")
        if q.kappa < 1:
            raise QualityError(f"kappa = {q.kappa} is below 1")
        return q

    @property
    def log_bound(self) -> float:
        """Natural log of ``exp(kappa) * T**kappa``."""
        value = self.__dict__.get("_log_bound")
        if value is None:
            logT = math.log(self.T.numerator) - math.log(self.T.denominator)
            value = self.kappa * (1.0 + logT)
            object.__setattr__(self, "_log_bound", value)
        return value

    def bound(self) -> float:
        return math.exp(self.log_bound)


def _norm_verdict(value: int, q: Quality) -> str:
    if value == 0:
        return "pass"
    delta = math.log(value) - q.log_bound
    if delta < -GUARD:
        return "pass"
    if delta > GUARD:
        return "fail"
    return "indeterminate"


def _rank_verdict(small: int, big: int, q: Quality) -> tuple[str, str]:
    """Compare ``small <= kappa / T * big``; returns verdict and the bound as text."""
    if q.kappa_exact is not None:
        rhs = q.kappa_exact * big / q.T
        return ("pass" if small <= rhs else "fail"), str(rhs)
    rhs = q.kappa * big * q.T.denominator / q.T.numerator
    text = repr(rhs)
    if small == 0:
        return "pass", text
    if small <= rhs * (1 - GUARD):
        return "pass", text
    if small > rhs * (1 + GUARD):
        return "fail", text
    return "indeterminate", text


@dataclass(eq=False)
class CertifiedRebuilding:
    """A verified retract together with its quality ledger."""

    retract: HomotopyRetract
    n: int
    kind: Kind
    quality: Quality
    ledger: list[dict] = field(default_factory=list)

    @property
    def T(self) -> Fraction:
        return self.quality.T

    @property
    def kappa(self) -> float:
        return self.quality.kappa

    def recheck(self, kind: Kind | str | None = None) -> "CertifiedRebuilding":
        return check_quality(self.retract, self.n, self.quality.T,
                             self.quality.kappa_exact if self.quality.kappa_exact is not None else self.quality.kappa,
                             self.kind if kind is None else kind)

    def ledger_lines(self) -> list[str]:
        lines = [f"n={self.n} kind={self.kind} T={self.T} kappa={self.kappa!r} "
                 f"bound=exp(kappa)*T^kappa={self.quality.bound():.12g}"]
        for e in self.ledger:
            norms = " ".join(f"{k}={v['value']}" for k, v in e["norms"].items())
            lines.append(f"  j={e['degree']}: rank {e['rank_lhs']} <= {e['rank_rhs']} "
                         f"({e['rank_status']}) {norms} -> {e['status']}")
        return lines

    def to_json(self) -> dict:
        R = self.retract
        return {
            "n": self.n,
            "kind": str(self.kind),
            "T": str(self.T),
            "kappa": repr(self.kappa),
            "kappa_exact": None if self.quality.kappa_exact is None else str(self.quality.kappa_exact),
            "ledger": self.ledger,
            "retract": {
                "source": R.source.to_json(),
                "target": R.target.to_json(),
                "forward": map_to_json(R.forward),
                "backward": map_to_json(R.backward),
                "homotopy": map_to_json(R.homotopy),
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def map_to_json(m: GradedMap) -> dict:
    return {"shift": m.shift,
            "blocks": [{"degree": j, "entries": [[r, c, str(v)] for r, c, v in m[j].entries()]}
                       for j in m.nonzero_degrees()]}


def map_from_json(obj: dict, source: BasedComplex, target: BasedComplex) -> GradedMap:
    shift = int(obj["shift"])
    blocks = {}
    for b in obj["blocks"]:
        j = int(b["degree"])
        blocks[j] = IntMatrix.from_entries(target.rank(j + shift), source.rank(j),
                                           ((int(r), int(c), int(v)) for r, c, v in b["entries"]))
    return GradedMap(source, target, blocks, shift)


def load_certificate(obj: dict) -> CertifiedRebuilding:
    """Rebuild a certificate from JSON and re-verify it from scratch."""
    r = obj["retract"]
    X = BasedComplex.from_json(r["source"])
    Xp = BasedComplex.from_json(r["target"])
    R = HomotopyRetract(X, Xp, map_from_json(r["forward"], X, Xp), map_from_json(r["backward"], Xp, X),
                        map_from_json(r["homotopy"], X, X))
    kappa = Fraction(obj["kappa_exact"]) if obj.get("kappa_exact") else float(obj["kappa"])
    return check_quality(R, int(obj["n"]), Fraction(obj["T"]), kappa, obj["kind"])


def check_quality(retract: HomotopyRetract, n: int, T, kappa, kind: Kind | str = Kind.FULL,
                  verify: bool = True) -> CertifiedRebuilding:
    """Certify ``retract`` as an ``n``-rebuilding of the given kind and quality.

    Raises :class:`QualityError` naming the first violated inequality, or
    :class:`IndeterminateQuality` when a comparison is too close to call.
    """
    kind = Kind.parse(kind)
    q = Quality.of(T, kappa)
    if verify:
        bad = retract.defects()
        if bad:
            raise QualityError("retract identities fail: " + "; ".join(bad))
    X, Xp = retract.source, retract.target
    lo = min(X.lo, Xp.lo)
    ledger = []
    for j in range(lo, n + 1):
        small, big = Xp.rank(j), X.rank(j)
        verdict, rhs = _rank_verdict(small, big, q)
        entry = {"degree": j, "rank_lhs": small, "rank_rhs": rhs, "rank_status": verdict, "norms": {}}
        if verdict != "pass":
            _raise(verdict, j, f"rk X'_{j} <= kappa/T rk X_{j}", small, rhs)
        names = []
        if kind >= Kind.WEAK:
            names += [("d_target", Xp.d(j)), ("forward", retract.forward[j])]
        if kind >= Kind.FULL:
            names += [("backward", retract.backward[j]), ("homotopy", retract.homotopy[j])]
        for name, m in names:
            value = m.l1_norm()
            verdict = _norm_verdict(value, q)
            entry["norms"][name] = {"value": value, "bound": q.bound(), "status": verdict}
            if verdict != "pass":
                _raise(verdict, j, f"||{name}_{j}|| <= exp(kappa) T^kappa", value, q.bound())
        entry["status"] = "pass"
        ledger.append(entry)
    return CertifiedRebuilding(retract, n, kind, q, ledger)


def _raise(verdict, j, inequality, lhs, rhs):
    cls = IndeterminateQuality if verdict == "indeterminate" else QualityError
    raise cls(f"degree {j}: {inequality} {verdict}: lhs={lhs} rhs={rhs}", j, inequality, lhs, rhs)


# circles --------------------------------------------------------------


@lru_cache(maxsize=1024)
def circle_complex(d: int) -> BasedComplex:
    """Cellular chains of a circle cut into ``d`` edges: ``d e_i = v_{i+1} - v_i``."""
    if d < 1:
        raise ValueError("a circle needs at least one vertex")
    i = np.arange(d)
    rows = np.concatenate(((i + 1) % d, i))
    cols = np.concatenate((i, i))
    vals = np.concatenate((np.ones(d, np.int64), -np.ones(d, np.int64)))
    d1 = IntMatrix.from_coo(d, d, rows, cols, vals)
    return BasedComplex({0: numbered("v", d), 1: numbered("e", d)}, {1: d1})


def circle_cuts(d: int, T) -> list[int]:
    """Cut points ``0 = a_0 < ... < a_m = d`` with gaps between ``T/2`` and ``T``.

    Chunks have length ``c = ceil(T/2)``; a short final chunk is merged into
    the previous one when the result stays within ``floor(T)``, and the last
    two chunks are rebalanced otherwise.  For non-integral ``T`` where that
    fails, the remainder is spread one unit at a time from the end.
    """
    T = _as_fraction(T)
    if T < 1:
        raise ValueError("T must be at least 1")
    if T > d:
        raise ValueError(f"T = {T} exceeds d = {d}")
    lo = math.ceil(T / 2)
    hi = math.floor(T)
    k, r = divmod(d, lo)
    lengths = [lo] * k
    if r:
        if lo + r <= hi:
            lengths[-1] += r
        else:
            total = lengths.pop() + r
            lengths += [total - total // 2, total // 2]
    if not all(lo <= x <= hi for x in lengths):
        lengths = [lo] * k
        for i in range(r):
            lengths[-1 - (i % k)] += 1
        if not all(lo <= x <= hi for x in lengths):
            raise ValueError(f"no cut sequence for d = {d}, T = {T}")
    return [0] + list(np.cumsum(lengths).tolist())


def circle_retract(d: int, cuts: Iterable[int]) -> HomotopyRetract:
    """Retract of the ``d``-gon onto the ``m``-gon that collapses each chunk.

    Vertex ``v_i`` with ``a_{k-1} < i <= a_k`` goes to ``v_k`` (indices mod
    ``m``); edge ``e_{a_k}`` goes to ``e_k`` and the others die.  Backwards,
    ``v_k -> v_{a_k}`` and ``e_k`` becomes the path through its chunk.  The
    homotopy sends ``v_i`` to minus the path from ``v_i`` to the next cut.
    """
    a = np.asarray(list(cuts), dtype=np.int64)
    if a[0] != 0 or a[-1] != d or np.any(np.diff(a) <= 0):
        raise ValueError("cuts must increase from 0 to d")
    m = len(a) - 1
    X, Xp = circle_complex(d), circle_complex(m)
    i = np.arange(d, dtype=np.int64)
    k = np.arange(m, dtype=np.int64)
    ones_d, ones_m = np.ones(d, np.int64), np.ones(m, np.int64)
    chunk_end = np.searchsorted(a, i, side="left")
    xi0 = IntMatrix(m, d, np.arange(d + 1, dtype=np.int64), chunk_end % m, ones_d)
    hit = np.zeros(d + 1, np.int64)
    hit[a[:-1] + 1] = 1
    xi1 = IntMatrix(m, d, np.cumsum(hit), k, ones_m)
    back0 = IntMatrix(d, m, np.arange(m + 1, dtype=np.int64), a[:-1].copy(), ones_m)
    back1 = IntMatrix(d, m, a.copy(), i, ones_d)
    lengths = a[chunk_end] - i
    lengths[0] = 0
    Xi0 = IntMatrix.from_column_ranges(d, i, lengths, -1)
    return HomotopyRetract(X, Xp, GradedMap(X, Xp, {0: xi0, 1: xi1}), GradedMap(Xp, X, {0: back0, 1: back1}),
                           GradedMap(X, X, {0: Xi0}, 1))


def coarse_circle_retract(d: int) -> HomotopyRetract:
    """Collapse the whole ``d``-gon onto a single vertex and loop."""
    return circle_retract(d, [0, d])


def circle_rebuild(d: int, T, n: int = 1) -> CertifiedRebuilding:
    """Full ``n``-rebuilding of the ``d``-gon of quality ``(T, 2)``."""
    T = _as_fraction(T)
    if T > d:
        raise ValueError(f"T = {T} exceeds d = {d}")
    return check_quality(circle_retract(d, circle_cuts(d, T)), n, T, 2, Kind.FULL)


# combinations -----------------------------------------------------------


def _kappa_value(R: CertifiedRebuilding):
    q = R.quality
    return q.kappa_exact if q.kappa_exact is not None else q.kappa


def sum_retracts(parts: list[HomotopyRetract]) -> HomotopyRetract:
    X = direct_sum(*[p.source for p in parts])
    Xp = direct_sum(*[p.target for p in parts])
    return HomotopyRetract(X, Xp, sum_maps([p.forward for p in parts], X, Xp),
                           sum_maps([p.backward for p in parts], Xp, X),
                           sum_maps([p.homotopy for p in parts], X, X))


def sum_rebuild(*parts: CertifiedRebuilding) -> CertifiedRebuilding:
    """Direct sum of rebuildings sharing ``n``, ``T`` and kind; ``kappa`` is the max."""
    if len(parts) < 2:
        raise ValueError("need at least two rebuildings")
    first = parts[0]
    for p in parts[1:]:
        if p.n != first.n or p.T != first.T or p.kind != first.kind:
            raise QualityError("summands must share n, T and kind")
    kappa = max((_kappa_value(p) for p in parts), key=float)
    return check_quality(sum_retracts([p.retract for p in parts]), first.n, first.T, kappa, first.kind)


def cone_rebuild(RX: CertifiedRebuilding, RY: CertifiedRebuilding, f: GradedMap,
                 n: int | None = None) -> CertifiedRebuilding:
    """Rebuild ``Cone(f)`` from rebuildings of the source and target of ``f``.

    The target is ``Cone(f')`` with ``f' = upsilon f xi'``; the homotopy comes
    from the filled cube whose filler is ``-Upsilon f Xi``.  The exponent is
    ``kappa_X + kappa_Y + log 3 + max_{j<=n} log_+ ||f_j||``.
    """
    n = RY.n if n is None else n
    if RX.T != RY.T:
        raise QualityError("cone_rebuild needs equal T")
    kind = RY.kind
    if kind >= Kind.WEAK and RX.kind != Kind.FULL:
        raise QualityError("the source rebuilding must be full")
    if RX.n < n - 1 or RY.n < n:
        raise QualityError("rebuildings do not reach the requested degree")
    X, Y = RX.retract.source, RY.retract.source
    if not (same_complex(f.source, X) and same_complex(f.target, Y)):
        raise ComplexError("map does not match the rebuildings")
    require_chain_map(f, "cone_rebuild map")
    xi, xib, Xi = RX.retract.forward, RX.retract.backward, RX.retract.homotopy
    up, upb, Up = RY.retract.forward, RY.retract.backward, RY.retract.homotopy
    idX, idY = GradedMap.identity(X), GradedMap.identity(Y)
    f2 = up @ f @ xib
    cube = HomotopyCube(
        f=f, g=f, a=idX, b=idY, H=GradedMap.zero(X, Y, 1),
        f2=f2, g2=f, a2=xib, b2=upb, H2=Up @ f @ xib,
        xi=xi, upsilon=up, zeta=idX, omega=idY,
        A=Xi, B=Up, F=-(up @ f @ Xi), G=GradedMap.zero(X, Y, 1),
        Phi=-(Up @ f @ Xi),
    )
    square = cube_fill_square(cube)
    C, C2 = square.f.source, square.f.target
    R = HomotopyRetract(C, C2, square.f, square.b, square.H)
    fnorm = max([f.norm(j) for j in f.nonzero_degrees() if j <= n], default=0)
    kappa = float(_kappa_value(RX)) + float(_kappa_value(RY)) + math.log(3) + log_plus(fnorm)
    return check_quality(R, n, RX.T, kappa, kind)


def compose_rebuild(R1: CertifiedRebuilding, R2: CertifiedRebuilding) -> CertifiedRebuilding:
    """Composite of ``X -> X'`` and ``X' -> X''``: quality ``(S T, 2 kappa_2 kappa_1)``, weak."""
    if R1.kind < Kind.WEAK or R2.kind < Kind.WEAK:
        raise QualityError("composition needs weak rebuildings")
    A, B = R1.retract, R2.retract
    if not same_complex(A.target, B.source):
        raise ComplexError("the first target is not the second source")
    xi, xib, Xi = A.forward, A.backward, A.homotopy
    up, upb, Up = B.forward, B.backward, B.homotopy
    R = HomotopyRetract(A.source, B.target, up @ xi, xib @ upb, Xi + xib @ Up @ xi)
    k1, k2 = _kappa_value(R1), _kappa_value(R2)
    kappa = 2 * k2 * k1 if not isinstance(k1, float) and not isinstance(k2, float) else 2.0 * float(k2) * float(k1)
    return check_quality(R, min(R1.n, R2.n), R1.T * R2.T, kappa, Kind.WEAK)


def identity_rebuild(X: BasedComplex, n: int, kappa=1) -> CertifiedRebuilding:
    return check_quality(identity_retract(X), n, 1, kappa, Kind.FULL)


__all__ = [
    "Kind", "Quality", "QualityError", "IndeterminateQuality", "CertifiedRebuilding", "check_quality",
    "circle_complex", "circle_cuts", "circle_retract", "coarse_circle_retract", "circle_rebuild",
    "sum_rebuild", "cone_rebuild", "compose_rebuild", "identity_rebuild", "load_certificate",
]
