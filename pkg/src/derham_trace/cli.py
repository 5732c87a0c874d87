"""Command-line driver.

Exit codes: 0 when every check passes, 1 when a check fails or a check run
raises, 2 for usage and input errors.
"""
import argparse
import sys

import numpy as np

from . import checks as C
from .errors import DerhamTraceError, ParseError
from .mesh import gen_cube_with_hole, gen_structured_cube, parse_mesh, write_mesh
from .report import build_report, write_report

COMMANDS = ("gen-mesh", "check-mesh", "check-complex", "check-surface", "check-weights",
            "check-projections", "lift-demo", "minmin-demo", "scaling-study")


class UsageError(Exception):
    pass


def _csv_ints(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _override(text):
    key, sep, val = text.partition("=")
    try:
        v = float(val)
    except ValueError:
        v = None
    if not sep or not key or v is None or v < 0:
        raise argparse.ArgumentTypeError(f"expected ID=VALUE with VALUE >= 0, got {text!r}")
    return key, v


def _positive(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("n must be at least 1")
    return n


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--mesh", help="mesh file (text format)")
    src.add_argument("--n", type=_positive, help="structured cube with n^3 subcubes")
    common.add_argument("--levels", type=_csv_ints, default=None, help="levels, e.g. 0,1,2")
    common.add_argument("--tol-override", type=_override, action="append", default=[],
                        metavar="ID=VAL", help="override a tolerance (id or id prefix)")
    common.add_argument("--report", default="-", help="report path ('-' for stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--timings", action="store_true",
                        help="record wall-clock seconds (reports are then not reproducible)")

    p = argparse.ArgumentParser(prog="derham-trace", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gen-mesh", help="write a structured cube mesh")
    g.add_argument("--n", type=_positive, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--hole", type=_csv_ints, default=None,
                   help="remove subcubes with index range lo,hi in every direction")
    sub.add_parser("check-mesh", parents=[common], help="mesh tables and partitions")
    sub.add_parser("check-complex", parents=[common], help="incidence, d of d, Whitney duality")
    s = sub.add_parser("check-surface", parents=[common],
                       help="surface identities, local exactness, Poincare constants")
    s.add_argument("--ns", type=_csv_ints, default=(1, 2, 3), help="refinements for Poincare")
    sub.add_parser("check-weights", parents=[common], help="boundary weight identities")
    q = sub.add_parser("check-projections", parents=[common], help="boundary and composed projections")
    q.add_argument("--locality-n", type=_positive, default=None,
                   help="cube size for the locality test (far cells first appear at n=7)")
    sub.add_parser("lift-demo", parents=[common], help="discrete liftings")
    sub.add_parser("minmin-demo", parents=[common], help="discrete vs enriched minimal extensions")
    t = sub.add_parser("scaling-study", parents=[common], help="measured constants across refinements")
    t.add_argument("--ns", type=_csv_ints, default=(1, 2, 3))
    return p


def _mesh(args):
    if getattr(args, "mesh", None):
        try:
            return parse_mesh(args.mesh)
        except OSError as exc:
            raise UsageError(f"cannot read mesh: {exc}") from None
        except DerhamTraceError as exc:
            raise UsageError(f"{args.mesh}: {exc}") from None
    return gen_structured_cube(args.n or 2)


def _levels(args, default):
    levels = args.levels if args.levels is not None else default
    bad = [l for l in levels if l not in default]
    if bad:
        raise UsageError(f"levels {bad} not available for {args.command} (allowed {default})")
    return tuple(levels)


def run_command(argv):
    """Run one subcommand; returns ``(exit_code, report or None)``."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (2 if exc.code else 0), None
    try:
        return _run(args)
    except UsageError as exc:
        print(f"derham-trace: error: {exc}", file=sys.stderr)
        return 2, None


def _run(args):
    if args.command == "gen-mesh":
        if args.hole:
            if len(args.hole) != 2:
                raise UsageError("--hole needs lo,hi")
            mesh = gen_cube_with_hole(args.n, args.hole)
        else:
            mesh = gen_structured_cube(args.n)
        write_mesh(mesh, args.out)
        return 0, None

    suite = C.Suite(dict(args.tol_override))
    rng = np.random.default_rng(args.seed)
    cmd = args.command
    config = {"mesh": args.mesh, "n": args.n, "levels": args.levels, "seed": args.seed,
              "tol_override": dict(args.tol_override)}
    code = 0
    try:
        if cmd == "scaling-study":
            C.check_scaling(suite, ns=args.ns, levels=_levels(args, (0, 1, 2)))
        else:
            mesh = _mesh(args)
            if cmd == "check-mesh":
                C.check_mesh(suite, mesh)
            elif cmd == "check-complex":
                C.check_complex(suite, mesh, rng, _levels(args, (0, 1, 2, 3)))
            elif cmd == "check-surface":
                C.check_surface(suite, mesh, ns=args.ns)
            elif cmd == "check-weights":
                C.check_weights(suite, mesh)
            else:
                from .projections import BoundaryProjector, CommutingProjection
                from .weights import WeightSet
                bp = BoundaryProjector(mesh, WeightSet(mesh))
                pi = CommutingProjection(mesh, boundary=bp)
                if cmd == "check-projections":
                    levels = _levels(args, (0, 1, 2, 3))
                    far = gen_structured_cube(args.locality_n) if args.locality_n else None
                    C.check_boundary_projector(suite, bp, levels)
                    C.check_projection(suite, pi, rng, levels, locality_mesh=far)
                elif cmd == "lift-demo":
                    from .applications import lift_constant
                    levels = _levels(args, (0, 1, 2))
                    C.check_lift(suite, pi, rng, levels)
                    suite.constants["lift_constant"] = {l: lift_constant(pi, l) for l in levels}
                elif cmd == "minmin-demo":
                    from .applications import min_min_constant
                    levels = _levels(args, (0, 1, 2))
                    C.check_minmin(suite, mesh, rng, levels)
                    suite.constants["minmin_constant"] = {l: min_min_constant(mesh, l) for l in levels}
    except UsageError:
        raise
    except ParseError:
        raise
    except DerhamTraceError as exc:
        suite.add(f"{cmd}.error", type(exc).__name__, np.inf, 0.0)
        print(f"derham-trace: {type(exc).__name__}: {exc}", file=sys.stderr)
    report = build_report(suite, cmd, config, timings=args.timings)
    write_report(report, args.report, args.format)
    if not suite.ok:
        code = 1
    return code, report


def main(argv=None):
    code, _ = run_command(sys.argv[1:] if argv is None else argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
