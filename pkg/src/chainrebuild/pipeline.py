"""Experiments: homology gradients, torsion bound curves and the bootstrap demo.

Every experiment writes a CSV (the product) and a JSON sidecar.  Residual
chains are finite prefixes, so the last row of a gradient report is a
sample, never a limit.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .equivariant import (
    EquivariantMap,
    FiniteCyclic,
    FreeAbelian,
    GroupRingMatrix,
    GroupSpec,
    ResidualChain,
    coinvariant_map,
    coinvariants,
    equivariant_cone,
    induce,
    induced_splitting,
    koszul_resolution,
    t_minus_one,
)
from .folner import amenable_weak_rebuilding
from .homology import field_betti, integer_homology, is_prime
from .htpy import transport_retract
from .intmat import IntMatrix
from .rebuild import (
    CertifiedRebuilding,
    IndeterminateQuality,
    Kind,
    QualityError,
    check_quality,
    circle_complex,
    circle_rebuild,
    cone_rebuild,
    load_certificate,
    sum_rebuild,
)
from .zchain import ComplexError, GradedMap

CSV_HEADER = ["group", "j", "i", "index", "field", "betti", "log_tors", "betti_per_index", "log_tors_per_index"]
PREFIX_NOTE = ("finite prefix of a residual chain: rows are samples; "
               "the final row is the last sample, not a limit")


class TruncationError(ValueError):
    """The stored resolution stops too early for the requested degrees."""


def fmt(x) -> str:
    return f"{float(x):.12g}"


def field_name(p: int) -> str:
    return "Q" if p == 0 else f"F{p}"


def parse_field(name) -> int:
    s = str(name).strip()
    if s.upper() in ("Q", "0"):
        return 0
    p = int(s.upper().lstrip("F"))
    if not is_prime(p):
        raise ValueError(f"{name!r} is not a prime field")
    return p


def parse_group(name: str) -> GroupSpec:
    """``Z``, ``Z^n`` or ``Z/m``."""
    s = name.strip().replace(" ", "")
    if s == "Z":
        return FreeAbelian(1)
    if s.startswith("Z^"):
        return FreeAbelian(int(s[2:]))
    if s.startswith("Z/"):
        return FiniteCyclic(int(s[2:]))
    raise ValueError(f"unknown group {name!r}")


# gradients ------------------------------------------------------------------


@dataclass
class GradientReport:
    group: str
    degrees: list
    fields: list
    levels: list
    top: int | None
    rows: list = field(default_factory=list)

    def csv_rows(self) -> list[list[str]]:
        out = []
        for r in self.rows:
            out.append([r["group"], str(r["j"]), str(r["i"]), str(r["index"]), r["field"], str(r["betti"]),
                        fmt(r["log_tors"]), fmt(r["betti_per_index"]), fmt(r["log_tors_per_index"])])
        return out

    def last_sample(self) -> list[dict]:
        last = max(r["i"] for r in self.rows)
        return [self._jsonable(r) for r in self.rows if r["i"] == last]

    @staticmethod
    def _jsonable(r: dict) -> dict:
        out = dict(r)
        out["betti_per_index"] = str(r["betti_per_index"])
        out["log_tors_per_index"] = fmt(r["log_tors_per_index"])
        out["log_tors"] = fmt(r["log_tors"])
        return out

    def to_json(self) -> dict:
        return {"group": self.group, "degrees": self.degrees, "fields": self.fields,
                "levels": [list(m) for m in self.levels], "resolution_top": self.top,
                "note": PREFIX_NOTE, "rows": [self._jsonable(r) for r in self.rows],
                "last_sample": self.last_sample()}

    def write(self, out: str | Path, stem: str = "gradient") -> tuple[Path, Path]:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        cpath, jpath = out / f"{stem}.csv", out / f"{stem}.json"
        with cpath.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            w.writerows(self.csv_rows())
        jpath.write_text(json.dumps(self.to_json(), indent=2) + "\n")
        return cpath, jpath


def _level_rows(args) -> list[dict]:
    group, X, i, moduli, degrees, fields = args
    C = coinvariants(X, moduli)
    index = group.index(moduli)
    rows = []
    for j in degrees:
        H = integer_homology(C, j)
        lt = H.log_torsion
        for p in fields:
            b = field_betti(C, j, p)
            rows.append({"group": group.name, "j": j, "i": i, "index": index, "field": field_name(p),
                         "betti": b, "log_tors": lt, "betti_per_index": Fraction(b, index),
                         "log_tors_per_index": lt / index})
    return rows


def _run(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]


def gradient_experiment(group: GroupSpec, chain: ResidualChain, degrees: Sequence[int],
                        fields: Sequence = (0,), out: str | Path | None = None, top: int | None = None,
                        workers: int = 1) -> GradientReport:
    """Betti numbers and log torsion of coinvariants along ``chain``.

    ``top`` is the last degree of the stored resolution; it must reach
    ``max(degrees) + 1`` (free abelian resolutions are finite and need none).
    """
    if chain.group != group:
        raise ValueError("chain belongs to a different group")
    degrees = sorted({int(j) for j in degrees})
    fields = [parse_field(p) for p in fields]
    need = max(degrees) + 1
    if group.is_free:
        X = koszul_resolution(group)
    else:
        top = need if top is None else top
        if top < need:
            raise TruncationError(f"resolution stops at degree {top}; degree {max(degrees)} needs {need}")
        X = koszul_resolution(group, top)
    jobs = [(group, X, i, m, degrees, fields) for i, m in enumerate(chain.levels)]
    report = GradientReport(group.name, degrees, [field_name(p) for p in fields], list(chain.levels),
                            None if group.is_free else top)
    for rows in _run(_level_rows, jobs, workers):
        report.rows.extend(rows)
    order = {name: k for k, name in enumerate(report.fields)}
    report.rows.sort(key=lambda r: (r["j"], order[r["field"]], r["i"]))
    if out is not None:
        report.write(out)
    return report


# torsion bound curves ---------------------------------------------------------


CURVE_HEADER = ["group", "j", "i", "index", "T", "T_max", "kappa", "bound", "measured", "status", "certificate"]


def cwr_bound(kappa: float, T, rank: int) -> float:
    """``kappa^2 / T * rank * (1 + ln T)``."""
    T = Fraction(T)
    return kappa * kappa * rank * (1.0 + math.log(T)) / float(T)


@dataclass
class BoundCurve:
    group: str
    rows: list = field(default_factory=list)

    def write(self, out: str | Path, stem: str = "cwr_curve") -> tuple[Path, Path]:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        cpath, jpath = out / f"{stem}.csv", out / f"{stem}.json"
        with cpath.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CURVE_HEADER)
            for r in self.rows:
                w.writerow([r["group"], r["j"], r["i"], r["index"], str(r["T"]), str(r["T_max"]),
                            fmt(r["kappa"]), fmt(r["bound"]), fmt(r["measured"]), r["status"],
                            r["certificate"] or ""])
        jpath.write_text(json.dumps({"group": self.group, "note": PREFIX_NOTE, "rows": [
            {**r, "T": str(r["T"]), "T_max": str(r["T_max"])} for r in self.rows]}, indent=2) + "\n")
        return cpath, jpath


def _curve_level(args):
    n, i, d = args
    try:
        reb = amenable_weak_rebuilding(n, d)
    except QualityError:
        return i, d, None
    return i, d, reb


def cwr_bound_curve(n: int, degrees: Sequence[int], Ts: Sequence, chain: Sequence[int],
                    out: str | Path | None = None, workers: int = 1) -> BoundCurve:
    """Gabber-type torsion bound from weak rebuildings of ``Z^n`` coinvariants.

    ``chain`` lists box sizes ``d_i``; level ``i`` is ``(d_i Z)^n``.  Pairs
    with ``T`` above the certified maximum are kept and marked
    ``uncertified``.  Certificates are written under ``out/certificates`` and
    re-loaded before they are referenced.
    """
    G = FreeAbelian(n)
    chain = [int(d) for d in chain]
    ResidualChain.from_moduli(G, chain if chain[:1] == [1] else [1] + chain)
    degrees = sorted({int(j) for j in degrees})
    if any(j < 0 or j >= n for j in degrees):
        raise ValueError(f"degrees must lie in 0..{n - 1}: the bound uses the differential one degree up")
    Ts = [Fraction(T) for T in Ts]
    X = koszul_resolution(G)
    curve = BoundCurve(G.name)
    certdir = Path(out) / "certificates" if out is not None else None
    for i, d, reb in _run(_curve_level, [(n, i, d) for i, d in enumerate(chain)], workers):
        C = coinvariants(X, d)
        index = d ** n
        for T in Ts:
            status, path, kappa, T_max = "uncertified", None, float("nan"), Fraction(0)
            if reb is not None:
                T_max, kappa = reb.T_max, reb.kappa
                if 1 <= T <= T_max:
                    try:
                        cert = check_quality(reb.certificate.retract, n, T, 1 if kappa == 1.0 else kappa, Kind.WEAK)
                        status = "certified"
                    except IndeterminateQuality:
                        status = "indeterminate"
                    if status == "certified" and certdir is not None:
                        certdir.mkdir(parents=True, exist_ok=True)
                        p = certdir / f"Z{n}_d{d}_T{str(T).replace('/', '_')}.json"
                        p.write_text(cert.dumps())
                        load_certificate(json.loads(p.read_text()))
                        path = str(p.relative_to(out))
            for j in degrees:
                measured = integer_homology(C, j).log_torsion / index
                bound = cwr_bound(kappa, T, X.rank(j)) if status == "certified" else float("nan")
                if status == "certified" and measured > bound:
                    raise QualityError(f"measured torsion {measured} exceeds the bound {bound} at d={d}, T={T}")
                curve.rows.append({"group": G.name, "j": j, "i": i, "index": index, "T": T, "T_max": T_max,
                                   "kappa": kappa, "bound": bound, "measured": measured, "status": status,
                                   "certificate": path})
    if out is not None:
        curve.write(out)
    return curve


# circle demo ------------------------------------------------------------------


def circle_demo(d: int, T, n: int = 1) -> CertifiedRebuilding:
    return circle_rebuild(d, T, n)


# bootstrap ----------------------------------------------------------------------


@dataclass
class BootstrapReport:
    d: int
    T: Fraction
    ranks: dict
    coinvariant_ranks: dict
    homology: dict
    copies: int
    certificate: CertifiedRebuilding
    expected_kappa: float
    certificate_path: str | None = None

    def to_json(self) -> dict:
        return {"d": self.d, "T": str(self.T), "group_ring_ranks": self.ranks,
                "coinvariant_ranks": self.coinvariant_ranks,
                "homology": {j: {"betti": h.betti, "torsion": list(h.torsion)} for j, h in self.homology.items()},
                "copies": self.copies, "kappa": self.certificate.kappa, "expected_kappa": self.expected_kappa,
                "certificate": self.certificate_path, "ledger": self.certificate.ledger_lines()}


def line_complex_lift(G: GroupSpec | None = None):
    """Free replacement of ``Z[G/D] --(t_2 - 1)--> Z[G/D]`` for ``D = Z x 0`` in ``Z^2``.

    Both modules become the Koszul resolution of ``Z`` induced from ``D``;
    the differential lifts to multiplication by ``t_2 - 1`` on each degree,
    which commutes with everything, so the lift needs no homotopy.
    """
    G = G or FreeAbelian(2)
    P = induce(koszul_resolution(FreeAbelian(1)), G, (0,))
    u = t_minus_one(G, 1)
    phi = EquivariantMap(P, P, {j: GroupRingMatrix(G, 1, 1, {(0, 0): u}) for j in P.degrees})
    if phi.boundary().nonzero_degrees():
        raise ComplexError("lifted differential is not a chain map")
    Q = equivariant_cone(phi)
    bad = Q.validate()
    if bad:
        raise ComplexError(f"replacement fails d^2 = 0 in degrees {bad}")
    return P, phi, Q


def bootstrap_demo(d: int, T, out: str | Path | None = None) -> BootstrapReport:
    """Rebuild the ``(dZ)^2``-coinvariants of the line-complex replacement.

    The induced pieces split into ``d`` circles, each rebuilt at scale ``T``;
    the sum is moved back along the splitting and the cone over the lifted
    differential is rebuilt from two copies of it.
    """
    T = Fraction(T)
    if T > d:
        raise ValueError(f"T = {T} exceeds d = {d}")
    G = FreeAbelian(2)
    K1 = koszul_resolution(FreeAbelian(1))
    P, phi, Q = line_complex_lift(G)
    target = coinvariants(Q, d)
    homology = {j: integer_homology(target, j) for j in target.degrees}
    reference = coinvariants(koszul_resolution(G), d)
    for j in target.degrees:
        if homology[j] != integer_homology(reference, j):
            raise ComplexError(f"degree {j}: coinvariant homology differs from the torus")

    sp = induced_splitting(K1, G, (0,), (d, d))
    if sp.copies != d:
        raise ComplexError(f"expected {d} copies, found {sp.copies}")
    circle = circle_complex(d)
    if any(sp.piece.d(j) != circle.d(j) for j in (1,)) or sp.piece.ranks() != circle.ranks():
        raise ComplexError("piece is not the circle complex")
    R = circle_rebuild(d, T, n=2)
    relabel = GradedMap(sp.piece, circle, {j: IntMatrix.identity(circle.rank(j)) for j in circle.degrees})
    back = GradedMap(circle, sp.piece, {j: IntMatrix.identity(circle.rank(j)) for j in circle.degrees})
    piece_cert = check_quality(transport_retract(R.retract, relabel, back), 2, T, 2, Kind.FULL)
    total = sum_rebuild(*([piece_cert] * d)) if d > 1 else piece_cert
    RP = check_quality(transport_retract(total.retract, sp.iso, sp.inverse), 2, T, 2, Kind.FULL)
    f = coinvariant_map(phi, d, sp.induced, sp.induced)
    cert = cone_rebuild(RP, RP, f, n=2)
    if cert.retract.source != target:
        raise ComplexError("rebuilt cone is not the coinvariant complex of the replacement")
    fnorm = max(f.norm(j) for j in f.nonzero_degrees()) if f.nonzero_degrees() else 0
    expected = 4 + math.log(3) + (math.log(fnorm) if fnorm > 1 else 0.0)
    if abs(cert.kappa - expected) > 1e-9 * expected:
        raise QualityError(f"kappa {cert.kappa} differs from {expected}")
    again = load_certificate(json.loads(cert.dumps()))
    report = BootstrapReport(d, T, Q.ranks(), target.ranks(), homology, sp.copies, again, expected)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        cpath = out / f"bootstrap_d{d}_T{str(T).replace('/', '_')}_certificate.json"
        cpath.write_text(cert.dumps())
        load_certificate(json.loads(cpath.read_text()))
        report.certificate_path = cpath.name
        (out / f"bootstrap_d{d}_T{str(T).replace('/', '_')}.json").write_text(
            json.dumps(report.to_json(), indent=2) + "\n")
    return report


__all__ = [
    "gradient_experiment", "GradientReport", "cwr_bound_curve", "cwr_bound", "BoundCurve", "bootstrap_demo",
    "BootstrapReport", "line_complex_lift", "circle_demo", "parse_group", "parse_field", "TruncationError",
    "CSV_HEADER",
]
