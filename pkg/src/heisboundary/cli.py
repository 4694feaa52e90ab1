"""Command-line front end.  Every command prints one JSON report on stdout.

Exit codes: 0 success, 1 bad input (including usage errors), 2 numeric failure.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import __version__
from .classify import (
    almost_similarity_fit,
    build_isometry,
    classify,
    distortion_probe,
    qi_invariants,
    verify_isometry,
)
from .core import LieElement, bch_mul
from .cosets import CosetSpec, coset_dist_H, dist_DA, hausdorff_profile
from .derivation import decompose, flow, leibniz_defect, verify_structure, DEFAULT_TOL
from .errors import DimensionError, HeisError, InputError, NumericError
from .metric import NetConfig, QuasimetricParams, chain_dist, dist_0, dist_A, norm_A, regularity_estimate
from .specio import dumps, parse_spec, spec_to_dict


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _load(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_spec(text)


def _point(gs, values, name) -> LieElement:
    if len(values) != gs.dim:
        raise DimensionError(f"--{name}: expected {gs.dim} coordinates, got {len(values)}")
    return LieElement(gs.n, np.array(values))


def _structure(args, key="spec"):
    spec = _load(getattr(args, key))
    return spec, decompose(spec, tol=args.tol)


def cmd_validate(args):
    spec, gs = _structure(args)
    report = verify_structure(gs, tol=args.tol)
    inputs = {"spec": spec_to_dict(spec), "tol": args.tol}
    return inputs, {
        "passed": report.passed,
        "max_defect": report.max_defect,
        "checks": report.to_dict(),
        "leibniz_defect": leibniz_defect(spec.to_matrix()),
        "alphas": gs.alphas,
        "dims": gs.dims,
        "k": gs.k,
        "adapted_basis": gs.basis_matrix,
        "invariants": qi_invariants(gs).to_dict(),
    }


def cmd_classify(args):
    sa, a = _structure(args, "spec_a")
    sb, b = _structure(args, "spec_b")
    verdict = classify(a, b, tol=args.ratio_tol)
    inputs = {"spec_a": spec_to_dict(sa), "spec_b": spec_to_dict(sb), "tol": args.tol, "ratio_tol": args.ratio_tol}
    return inputs, {
        "equivalent": verdict.equivalent,
        "lambda": verdict.lam,
        "reason": verdict.reason,
        "invariants_a": qi_invariants(a).to_dict(),
        "invariants_b": qi_invariants(b).to_dict(),
    }


def cmd_isometry(args):
    sa, a = _structure(args, "spec_a")
    sb, b = _structure(args, "spec_b")
    F = build_isometry(a, b, tol=args.ratio_tol)
    check = verify_isometry(F, pairs=args.pairs, seed=args.seed)
    inputs = {"spec_a": spec_to_dict(sa), "spec_b": spec_to_dict(sb), "pairs": args.pairs, "tol": args.tol}
    return inputs, {"map": F.matrix, "lambda": F.lam, "source_scale": F.source_scale, **check.to_dict()}


def cmd_dist(args):
    spec, gs = _structure(args)
    qp = QuasimetricParams(gs, args.scale)
    p, q = _point(gs, args.p, "p"), _point(gs, args.q, "q")
    out = {
        "dist_A": dist_A(qp, p, q),
        "dist_0": dist_0(gs, p, q),
        "norm_A_p": norm_A(qp, p),
        "norm_A_q": norm_A(qp, q),
        "product": bch_mul(-p, q).coords,
    }
    if gs.k >= 2:
        out["dist_DA"] = dist_DA(qp, p, q)
    inputs = {"spec": spec_to_dict(spec), "p": args.p, "q": args.q, "scale": args.scale}
    return inputs, out


def cmd_chain(args):
    spec, gs = _structure(args)
    qp = QuasimetricParams(gs, args.scale)
    p, q = _point(gs, args.p, "p"), _point(gs, args.q, "q")
    net = NetConfig(args.samples, box_radius=args.box, neighbor_count=args.neighbors, seed=args.seed)
    d = dist_A(qp, p, q)
    c = chain_dist(qp, p, q, net)
    inputs = {
        "spec": spec_to_dict(spec), "p": args.p, "q": args.q, "scale": args.scale,
        "samples": args.samples, "box": args.box, "neighbors": args.neighbors,
    }
    return inputs, {
        "chain_dist": c,
        "dist_A": d,
        "ratio": c / d if d > 0 else None,
        "graph": "complete" if net.neighbors is None else f"knn-{net.neighbors}",
    }


def cmd_regularity(args):
    spec, gs = _structure(args)
    qp = QuasimetricParams(gs, args.scale)
    report = regularity_estimate(qp, args.radii, samples=args.samples, seed=args.seed)
    inputs = {"spec": spec_to_dict(spec), "radii": args.radii, "samples": args.samples, "scale": args.scale}
    return inputs, report.to_dict()


def cmd_cosets(args):
    spec, gs = _structure(args)
    g1, g2 = _point(gs, args.g1, "g1"), _point(gs, args.g2, "g2")
    L1, L2 = CosetSpec(gs, "U1", g1), CosetSpec(gs, "U1", g2)
    profile = hausdorff_profile(gs, L1, L2, radii=args.radii, scale=args.scale)
    value, _ = coset_dist_H(gs, gs.component(g1, gs.k), gs.component(g2, gs.k))
    inputs = {"spec": spec_to_dict(spec), "g1": args.g1, "g2": args.g2, "radii": args.radii, "scale": args.scale}
    return inputs, {"hausdorff": profile.to_dict(), "H_coset_distance": value}


def cmd_distort(args):
    spec, gs = _structure(args)
    src = QuasimetricParams(gs, args.scale)
    x = _point(gs, args.x, "x") if args.x is not None else LieElement.zero(gs.n)
    if args.map == "flow":
        fmap = lambda v: flow(gs, args.t, v)  # noqa: E731
        inverse = lambda v: flow(gs, -args.t, v)  # noqa: E731
        params = {"t": args.t}
    else:
        g = _point(gs, args.g, "g") if args.g is not None else LieElement.zero(gs.n)

        def fmap(v):
            return bch_mul(LieElement(g.n, np.broadcast_to(g.coords, v.coords.shape)), v)

        def inverse(v):
            return bch_mul(LieElement(g.n, np.broadcast_to(-g.coords, v.coords.shape)), v)

        params = {"g": args.g}
    probe = distortion_probe(fmap, src, src, x, radii=args.radii, samples=args.samples, seed=args.seed, inverse=inverse)
    L, C, rms = almost_similarity_fit(fmap, src, src, pairs=args.pairs, seed=args.seed)
    inputs = {
        "spec": spec_to_dict(spec), "map": args.map, **params, "x": args.x, "radii": args.radii,
        "samples": args.samples, "pairs": args.pairs, "scale": args.scale,
    }
    return inputs, {"distortion": probe.to_dict(), "almost_similarity": {"L": L, "C": C, "rms": rms}}


COMMANDS = {
    "validate": cmd_validate,
    "classify": cmd_classify,
    "isometry": cmd_isometry,
    "dist": cmd_dist,
    "chain": cmd_chain,
    "regularity": cmd_regularity,
    "cosets": cmd_cosets,
    "distort": cmd_distort,
}

RANDOMIZED = {"isometry", "chain", "regularity", "distort"}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL)
    common.add_argument("--scale", type=float, default=1.0)
    common.add_argument("--timing", action="store_true", help="add wall time to the report (breaks byte identity)")

    parser = _Parser(prog="heisboundary", description="Heisenberg boundary geometry toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("validate", parents=[common], help="decompose and check a derivation")
    p.add_argument("spec")

    for name, help_ in (("classify", "compare QI invariants"), ("isometry", "build and check the boundary isometry")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("spec_a")
        p.add_argument("spec_b")
        p.add_argument("--ratio-tol", type=float, default=1e-9)
        if name == "isometry":
            p.add_argument("--pairs", type=int, default=10_000)

    p = sub.add_parser("dist", parents=[common], help="quasimetric distance between two points")
    p.add_argument("spec")
    p.add_argument("--p", type=_floats, required=True)
    p.add_argument("--q", type=_floats, required=True)

    p = sub.add_parser("chain", parents=[common], help="net approximation of the chain metric")
    p.add_argument("spec")
    p.add_argument("--p", type=_floats, required=True)
    p.add_argument("--q", type=_floats, required=True)
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--box", type=float, default=1.0)
    p.add_argument("--neighbors", type=int, default=None)

    p = sub.add_parser("regularity", parents=[common], help="Monte-Carlo Ahlfors exponent")
    p.add_argument("spec")
    p.add_argument("--radii", type=_floats, default=[0.25, 0.5, 1.0, 2.0, 4.0])
    p.add_argument("--samples", type=int, default=1_000_000)

    p = sub.add_parser("cosets", parents=[common], help="Hausdorff profile of two U_1 cosets")
    p.add_argument("spec")
    p.add_argument("--g1", type=_floats, required=True)
    p.add_argument("--g2", type=_floats, required=True)
    p.add_argument("--radii", type=_floats, default=[1.0, 10.0, 100.0, 1000.0])

    p = sub.add_parser("distort", parents=[common], help="distortion of a flow or left translation")
    p.add_argument("spec")
    p.add_argument("--map", choices=["flow", "translate"], default="flow")
    p.add_argument("--t", type=float, default=float(np.log(2.0)))
    p.add_argument("--g", type=_floats, default=None)
    p.add_argument("--x", type=_floats, default=None)
    p.add_argument("--radii", type=_floats, default=[2.0 ** -j for j in range(6, -1, -1)])
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--pairs", type=int, default=10_000)
    return parser


def _error_report(command, exc, kind):
    err = {"type": type(exc).__name__, "kind": kind, "message": str(exc)}
    field = getattr(exc, "field", None)
    if field is not None:
        err["field"] = field
    return {"command": command, "error": err, "version": __version__}


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    start = time.perf_counter()
    try:
        inputs, results = COMMANDS[args.command](args)
    except (InputError, ValueError) as exc:
        print(dumps(_error_report(args.command, exc, "input")), file=stdout)
        return 1
    except (NumericError, np.linalg.LinAlgError, ArithmeticError, HeisError) as exc:
        print(dumps(_error_report(args.command, exc, "numeric")), file=stdout)
        return 2
    report = {
        "command": args.command,
        "inputs": inputs,
        "seed": args.seed if args.command in RANDOMIZED else None,
        "results": results,
        "version": __version__,
    }
    if args.timing:
        report["wall_time_s"] = time.perf_counter() - start
    print(dumps(report), file=stdout)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
