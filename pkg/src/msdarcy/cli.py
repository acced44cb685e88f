"""Command line driver.

Verbs: ``run`` (full sweep), ``offline`` (build caches only), ``mesh-gen``
(write a mesh/coefficient file pair) and ``export`` (field and eigenvalue
artifacts for one run). Any config key can be overridden on the command
line as ``--set section.key=value``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config
from .fine import SolveError
from .mesh import MeshError, save_coefficient, save_mesh
from .snapshots import SnapshotError
from .spectral import SpectralError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _add_common(sub):
    sub.add_argument("config", help="experiment config file")
    sub.add_argument(
        "--set", dest="overrides", action="append", default=[],
        metavar="SECTION.KEY=VALUE", help="override a config value",
    )
    sub.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="msdarcy",
        description="Multiscale mixed finite element experiments for Darcy "
        "flow in thin domains",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "run the configured error sweep"),
        ("offline", "build and persist the offline snapshot/basis cache"),
        ("mesh-gen", "write the configured geometry as a mesh text file"),
        ("export", "run once and write VTK fields plus eigenvalue tables"),
    ):
        s = sub.add_parser(name, help=help_)
        _add_common(s)
        if name == "mesh-gen":
            s.add_argument("--mesh-out", default="mesh.txt")
            s.add_argument(
                "--kappa-out", default=None,
                help="also write the coefficient field to this file",
            )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return _dispatch(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolveError, SnapshotError, SpectralError, MeshError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _dispatch(args, cfg):
    from . import runner
    from .config import build_coefficient, build_geometry

    if args.command == "run":
        result = runner.run_experiment(cfg, verbose=args.verbose)
        print(f"wrote {result.csv_path}")
        return EXIT_OK

    if args.command == "offline":
        runner.run_offline_only(cfg, verbose=args.verbose)
        return EXIT_OK

    if args.command == "mesh-gen":
        mesh, partition = build_geometry(cfg)
        save_mesh(args.mesh_out, mesh, partition)
        print(f"wrote {args.mesh_out}")
        if args.kappa_out:
            kappa = build_coefficient(cfg, mesh)
            save_coefficient(args.kappa_out, kappa)
            print(f"wrote {args.kappa_out}")
        return EXIT_OK

    if args.command == "export":
        cfg.write_vtk = True
        result = runner.run_experiment(cfg, verbose=args.verbose)
        print(f"wrote fields and tables under {cfg.output_dir}")
        return EXIT_OK

    raise ConfigError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
