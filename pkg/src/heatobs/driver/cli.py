"""Command line entry point: ``heatobs <subcommand> --config FILE [--set key=value ...]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..assembly import EmptyRegionError
from ..forward import GammaMismatchError, IncompatibleDataError
from ..geometry import InvalidCurveError, hausdorff_curves, read_polygons
from ..linsolve import NotSpdError
from ..mesh import EdgeTag, MeshingError
from .config import ConfigError, load_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

NUMERICAL_ERRORS = (NotSpdError, np.linalg.LinAlgError, MeshingError, EmptyRegionError,
                    GammaMismatchError, IncompatibleDataError, FloatingPointError)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heatobs", description="Obstacle reconstruction from lateral heat data.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("generate-data", "forward solve and write noisy Cauchy data"),
                        ("qr-solve", "one iterated quasi-reversibility solve outside the initial guess"),
                        ("reconstruct", "full reconstruction loop with report and figures"),
                        ("mesh-info", "print statistics of the inversion and forward meshes")]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
        if name == "reconstruct":
            sp.add_argument("--no-figures", action="store_true")
    m = sub.add_parser("metrics", help="Hausdorff distance between two polygon CSV files")
    m.add_argument("--a", required=True, type=Path)
    m.add_argument("--b", required=True, type=Path)
    return p


def _mesh_stats(name, mesh) -> str:
    return (f"{name}: vertices={mesh.n_vertices} triangles={mesh.n_triangles} edges={mesh.n_edges} "
            f"boundary={len(mesh.boundary_edges)} measured={len(mesh.edges_with_tag(EdgeTag.GAMMA_MEASURED))} "
            f"obstacle_front={len(mesh.edges_with_tag(EdgeTag.OBSTACLE_FRONT))} "
            f"h={mesh.h:.4g} min_angle={mesh.min_angles().min():.2f}")


def _run(args) -> int:
    from . import run as runmod

    if args.command == "metrics":
        try:
            a, b = read_polygons(args.a), read_polygons(args.b)
        except (OSError, ValueError, IndexError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"{hausdorff_curves(a, b):.10g}")
        return EXIT_OK

    cfg = load_config(args.config, args.overrides)
    if args.command == "mesh-info":
        setup = runmod.build_setup(cfg)
        print(_mesh_stats("inversion", setup.inv_mesh))
        print(_mesh_stats("forward", setup.fwd_mesh))
        print(f"time: T={cfg.T:g} inversion_intervals={setup.inv_grid.n_intervals} "
              f"forward_intervals={setup.fwd_grid.n_intervals}")
        return EXIT_OK

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "generate-data":
        setup = runmod.build_setup(cfg)
        _, data = runmod.generate_data(cfg, setup)
        data.to_csv(out / "cauchy.csv")
        setup.inv_mesh.write(out / "mesh_inv.txt")
        setup.fwd_mesh.write(out / "mesh_fwd.txt")
        print(f"wrote {out / 'cauchy.csv'} ({len(data.gamma_edges)} measured edges, "
              f"{data.g1.shape[1]} intervals, delta={data.delta:g})")
        return EXIT_OK
    if args.command == "qr-solve":
        from ..levelset import initial_state
        from ..qr import QrParams, solve_qr
        from ..spaces import write_field_csv, write_field_vtk

        setup = runmod.build_setup(cfg)
        _, data = runmod.generate_data(cfg, setup)
        state = initial_state(setup.inv_mesh, cfg.init_center, cfg.init_radius)
        sol = solve_qr(state.exterior(), setup.inv_grid, data, QrParams(cfg.epsilon, cfg.M))
        sol.write_diagnostics(out / "qr_diagnostics.csv")
        write_field_csv(out / "qr_temperature.csv", sol.scalar)
        N = setup.inv_grid.n_intervals
        write_field_vtk(out / "qr_temperature.vtk", sol.scalar, sorted({N // 4, N // 2, N}))
        print(f"M={sol.iterations} misfit={sol.misfit[-1]:.6g} residual={sol.residual[-1]:.6g}")
        return EXIT_OK
    if args.command == "reconstruct":
        rep = runmod.run_reconstruction(cfg, figures=not args.no_figures)
        print(f"{rep.stop_reason} after {rep.iterations} iterations; "
              f"final hausdorff={rep.final_hausdorff:.6g}; report in {out / 'report.csv'}")
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    from .run import ReconstructionFailed

    try:
        return _run(args)
    except (ConfigError, InvalidCurveError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReconstructionFailed as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc.cause, NUMERICAL_ERRORS) else 1
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
