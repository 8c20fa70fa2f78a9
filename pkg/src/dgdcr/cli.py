"""``dgsolve`` command-line driver.

Builds (or reads) a mesh, refines it, assembles the DG system for a registered
problem, solves it and prints ``DoFs h_max L2-error #it`` per refinement level.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .assembly import set_parameters
from .errors import DgError
from .mesh import paper_unit_square_mesh, read_mesh, uniform_refine
from .nonlinear import NewtonConfig
from .postprocess import TableRow, export_vtk, fill_rates, format_table, write_csv
from .problems import list_problems, registry_get
from .solver import solve
from .sparse import dump_matrix_market

log = logging.getLogger("dgdcr")

LEGACY_STOP = 1e-20


def parse_sweep(text: str) -> range:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    if lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid level range {text!r}")
    return range(lo, hi + 1)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dgsolve",
        description="Interior-penalty DG solver for steady diffusion-convection-reaction problems.",
    )
    p.add_argument("--config", type=Path, help="key=value file mapping to long flags; flags win")
    p.add_argument("--problem", default="paper-boundary-layer")
    p.add_argument("--list-problems", action="store_true", help="print the problem registry and exit")
    p.add_argument("--method", default="sipg", type=str.lower, choices=["sipg", "nipg", "iipg"])
    p.add_argument("--degree", type=int, default=1)
    levels = p.add_mutually_exclusive_group()
    levels.add_argument("--refine", type=int, default=2, help="uniform refinements of the initial mesh")
    levels.add_argument("--refine-sweep", type=parse_sweep, metavar="LO:HI", help="solve on every level LO..HI")
    p.add_argument("--penalty", type=float, help="interior penalty override (boundary uses twice this)")
    p.add_argument("--kappa", type=float, help="symmetrization parameter override")
    p.add_argument("--quad-order", type=int, help="volume quadrature exactness (default 2k+2)")
    p.add_argument("--newton-max-it", type=int, default=50)
    p.add_argument("--newton-tol", type=float, default=1e-10)
    p.add_argument(
        "--newton-legacy-stop",
        nargs="?",
        type=float,
        const=LEGACY_STOP,
        default=None,
        metavar="TOL",
        help=f"also stop when ||J w + Res|| < TOL (default {LEGACY_STOP:g})",
    )
    p.add_argument("--mesh", type=Path, help="initial mesh file (default: built-in unit square)")
    p.add_argument("--csv", type=Path, help="write the convergence table as CSV")
    p.add_argument("--vtk", type=Path, help="write the finest solution as legacy VTK")
    p.add_argument("--plot-subdiv", type=int, default=1, help="VTK subdivisions per element")
    p.add_argument("--dump-matrix", type=Path, metavar="PREFIX", help="write D, C, R, Stiff as MatrixMarket")
    p.add_argument("--threads", type=int, default=1, help="assembly worker cap")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def read_config(path: Path, parser: argparse.ArgumentParser) -> list[str]:
    """Turn ``key = value`` lines into long-flag arguments."""
    known = {a.dest: a for a in parser._actions}
    args = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DgError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        dest = key.lstrip("-").replace("-", "_")
        action = known.get(dest)
        if action is None or dest in ("config", "help", "version"):
            raise DgError(f"{path}:{lineno}: unknown key {key!r}")
        flag = action.option_strings[-1]
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                args.append(flag)
            elif value.lower() not in ("0", "false", "no", "off"):
                raise DgError(f"{path}:{lineno}: {key} expects a boolean")
        else:
            args += [flag, value]
    return args


def _initial_mesh(args, problem):
    if args.mesh is not None:
        return read_mesh(args.mesh)
    return paper_unit_square_mesh(problem.neumann_marker)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            from_file = read_config(args.config, parser)
        except (OSError, DgError) as exc:
            print(f"dgsolve: config: {exc}", file=sys.stderr)
            return 2
        # re-parse so that explicit flags override the file
        args = parser.parse_args(from_file + list(sys.argv[1:] if argv is None else argv))

    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.list_problems:
        for name, desc in list_problems():
            print(f"{name:<28} {desc}")
        return 0

    if args.threads < 1 or args.plot_subdiv < 1:
        parser.error("--threads and --plot-subdiv must be >= 1")

    try:
        problem = registry_get(args.problem)
        params = set_parameters(args.method, args.degree, penalty=args.penalty, kappa=args.kappa)
        newton = NewtonConfig(
            max_iterations=args.newton_max_it,
            residual_tolerance=args.newton_tol,
            legacy_check=args.newton_legacy_stop,
        )
        levels = args.refine_sweep if args.refine_sweep is not None else range(args.refine, args.refine + 1)
        mesh = _initial_mesh(args, problem)
        for _ in range(levels[0]):
            mesh = uniform_refine(mesh)

        rows, last = [], None
        for i, level in enumerate(levels):
            if i:
                mesh = uniform_refine(mesh)
            last = solve(problem, params, mesh, args.quad_order, newton, args.threads)
            if last.newton is not None and not last.newton.converged:
                log.warning("level %d: Newton did not converge (|Res|=%.3e)", level, last.newton.final_residual)
            err = math.nan if last.l2err is None else last.l2err
            rows.append(TableRow(level, last.dofs, last.hmax, err, last.iterations))
        fill_rates(rows)
        print(format_table(rows, with_rate=len(rows) > 1))

        if args.csv is not None:
            write_csv(rows, args.csv)
        if args.vtk is not None:
            export_vtk(last.coef, mesh, last.ref, args.vtk, args.plot_subdiv, title=f"{problem.name} {params.method.value}")
        if args.dump_matrix is not None:
            sysm = last.system
            for tag, A in (("D", sysm.D), ("C", sysm.C), ("R", sysm.R), ("Stiff", sysm.stiffness)):
                dump_matrix_market(A, f"{args.dump_matrix}_{tag}.mtx")
    except DgError as exc:
        print(f"dgsolve: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"dgsolve: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
