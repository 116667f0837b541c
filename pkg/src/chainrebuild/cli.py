"""Command line entry point.

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .equivariant import EquivariantComplex, ResidualChain
from .homology import homology
from .pipeline import bootstrap_demo, cwr_bound_curve, gradient_experiment, parse_group
from .randomgen import identity_suite
from .rebuild import circle_rebuild, load_certificate
from .zchain import BasedComplex, ComplexError, validate

OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _fractions(text: str) -> list[Fraction]:
    try:
        return [Fraction(x.strip()) for x in text.split(",") if x.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"expected comma-separated rationals, got {text!r}") from exc


def _chain(group, text: str) -> ResidualChain:
    """``pow2:K`` for ``1, 2, ..., 2^(K-1)``; otherwise comma-separated moduli."""
    if text.startswith("pow2:"):
        return ResidualChain.powers_of_two(group, int(text[5:]))
    return ResidualChain.from_moduli(group, _ints(text))


def cmd_verify(args) -> int:
    obj = json.loads(Path(args.path).read_text())
    if "retract" in obj:
        cert = load_certificate(obj)
        print("\n".join(cert.ledger_lines()))
        print("certificate verified")
        return OK
    if "group" in obj:
        X = EquivariantComplex.from_json(obj)
        bad = X.validate()
        if bad:
            for j in bad:
                print(f"degree {j}: d_{j - 1} d_{j} != 0")
            return FAILED
        print(f"equivariant complex over {X.group.name} with ranks {X.ranks()}: ok")
        return OK
    X = BasedComplex.from_json(obj)
    bad = validate(X)
    if bad:
        print("\n".join(bad))
        return FAILED
    for j, h in homology(X).items():
        print(f"H_{j} = {h}")
    print("complex verified")
    return OK


def cmd_circle(args) -> int:
    cert = circle_rebuild(args.d, args.T, args.n)
    print("\n".join(cert.ledger_lines()))
    if args.out:
        Path(args.out).write_text(cert.dumps())
    return OK


def cmd_gradient(args) -> int:
    G = parse_group(args.group)
    rep = gradient_experiment(G, _chain(G, args.chain), _ints(args.degrees), args.fields.split(","),
                              args.out, top=args.top, workers=args.workers)
    print(f"{len(rep.rows)} rows written to {args.out}")
    return OK


def cmd_cwr(args) -> int:
    curve = cwr_bound_curve(args.n, _ints(args.degrees), _fractions(args.T), _ints(args.chain), args.out,
                            workers=args.workers)
    certified = sum(r["status"] == "certified" for r in curve.rows)
    print(f"{len(curve.rows)} rows ({certified} certified) written to {args.out}")
    return OK


def cmd_bootstrap(args) -> int:
    rep = bootstrap_demo(args.d, args.T, args.out)
    print("\n".join(rep.certificate.ledger_lines()))
    print("homology: " + ", ".join(f"H_{j} = {h}" for j, h in rep.homology.items()))
    return OK


def cmd_selftest(args) -> int:
    rep = identity_suite(args.seed, args.cases)
    print(" ".join(f"{k}={v}" for k, v in rep.counts.items()))
    for i, kind, msg in rep.failures:
        print(f"case {i} ({kind}): {msg}")
    print("all identities hold" if rep.ok else f"{len(rep.failures)} failures")
    return OK if rep.ok else FAILED


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chainrebuild", description="Exact chain complex rebuildings and homology gradients.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("verify", help="check a complex or certificate JSON file")
    s.add_argument("path")
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("circle", help="certify a circle rebuilding")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--T", type=Fraction, required=True)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_circle)

    s = sub.add_parser("gradient", help="Betti and torsion samples along a residual chain")
    s.add_argument("--group", required=True, help="Z, Z^n or Z/m")
    s.add_argument("--chain", default="pow2:6", help="pow2:K or comma-separated moduli")
    s.add_argument("--degrees", required=True)
    s.add_argument("--fields", default="Q", help="comma-separated: Q, F2, F3, ...")
    s.add_argument("--out", required=True)
    s.add_argument("--top", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(fn=cmd_gradient)

    s = sub.add_parser("cwr-curve", help="torsion bound curve from weak rebuildings of Z^n")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--degrees", default="0")
    s.add_argument("--T", required=True, help="comma-separated scales")
    s.add_argument("--chain", required=True, help="comma-separated box sizes")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(fn=cmd_cwr)

    s = sub.add_parser("bootstrap-demo", help="rebuild the Z^2 line complex replacement")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--T", type=Fraction, required=True)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_bootstrap)

    s = sub.add_parser("selftest", help="randomized exact identity suite")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cases", type=int, default=1000)
    s.set_defaults(fn=cmd_selftest)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return USAGE
    except ComplexError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return FAILED
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
