"""Command-line front end.

Subcommands::

    defectscan simulate   --config cfg.toml --out data/          # forward data
    defectscan image      --config cfg.toml --data data/ --out run/
    defectscan verify     [--level fast|full]                    # oracle suite
    defectscan sweep-alpha --config cfg.toml --data data/ --out run/ \
                           --point X Y [--point X Y ...]

Exit codes: 0 success, 2 configuration error, 3 consistency error (data does
not match the configuration), 4 I/O error, 5 solver failure.  The number of
worker threads for the forward solves is taken from the environment variable
``DEFECTSCAN_THREADS`` (default 1).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, LoadedConfig, load_config
from .dataio import (
    load_near_field,
    near_field_filename,
    save_indicator_csv,
    save_indicator_pgm,
    save_near_field,
    sha256_file,
    write_manifest,
)
from .imaging import GlsmOptions, SideSolver, image
from .operators import add_noise, assemble_near_field_all
from .solver import SolverError, SolverGrid
from .verify import run_checks

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONSISTENCY = 3
EXIT_IO = 4
EXIT_SOLVER = 5


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _load(config_path) -> LoadedConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None


def _glsm_options(loaded: LoadedConfig, args) -> GlsmOptions:
    base = loaded.imaging
    try:
        return GlsmOptions(
            alpha0=base.alpha0 if args.alpha0 is None else args.alpha0,
            alpha_rule=base.alpha_rule,
            delta=base.delta if args.delta is None else args.delta,
            q=base.q if args.q is None else args.q,
            sampling_spacing=(
                base.sampling_spacing if args.sampling_res is None else args.sampling_res
            ),
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None


def _manifest_core(loaded: LoadedConfig, config_path, out_dir) -> dict:
    import hashlib

    return {
        "tool": "defectscan",
        "version": __version__,
        "config_path": os.path.abspath(os.fspath(config_path)),
        "config_sha256": hashlib.sha256(loaded.text.encode("utf-8")).hexdigest(),
        "out_dir": os.path.abspath(os.fspath(out_dir)),
    }


def cmd_simulate(args) -> int:
    loaded = _load(args.config)
    cfg = loaded.media
    nx, ny = (args.grid if args.grid else (loaded.solver.nx, loaded.solver.ny))
    tol = loaded.solver.tol if args.tol is None else args.tol
    try:
        grid = SolverGrid(cfg.wave, nx, ny)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    os.makedirs(args.out, exist_ok=True)

    variants = ["perturbed"] + (["periodic"] if args.include_periodic else [])
    files = {}
    for variant in variants:
        try:
            data = assemble_near_field_all(
                cfg, variant, grid, tol=tol, max_iter=loaded.solver.max_iter
            )
        except SolverError as exc:
            raise CliError(str(exc), EXIT_SOLVER) from None
        for (direction, side), matrix in data.items():
            name = near_field_filename(direction, side, variant)
            path = os.path.join(args.out, name)
            save_near_field(path, matrix)
            files[name] = sha256_file(path)
            print(f"wrote {path}")

    manifest = _manifest_core(loaded, args.config, args.out)
    manifest.update(
        {
            "command": "simulate",
            "solver": {"nx": nx, "ny": ny, "tol": tol, "max_iter": loaded.solver.max_iter},
            "variants": variants,
            "files": files,
        }
    )
    write_manifest(os.path.join(args.out, "manifest.json"), manifest)
    return EXIT_OK


def _load_data_pair(data_dir, loaded: LoadedConfig, delta, seed):
    """The two imaging data sets (noise applied), checked against the config."""
    pair = []
    for direction, side in (("+", "+"), ("-", "-")):
        path = os.path.join(data_dir, near_field_filename(direction, side))
        if not os.path.exists(path):
            raise CliError(f"missing data file {path}", EXIT_IO)
        try:
            data = load_near_field(path)
        except (OSError, ValueError) as exc:
            raise CliError(str(exc), EXIT_IO) from None
        if not np.array_equal(data.indices, loaded.media.wave.indices):
            raise CliError(
                f"{path}: mode truncation [{-data.wave.n_min}, {data.wave.n_max}] does "
                f"not match the configuration "
                f"[{-loaded.media.wave.n_min}, {loaded.media.wave.n_max}]",
                EXIT_CONSISTENCY,
            )
        for field in ("k", "L", "M", "h"):
            if getattr(data.wave, field) != getattr(loaded.media.wave, field):
                raise CliError(
                    f"{path}: {field} = {getattr(data.wave, field)} does not match "
                    f"the configuration value {getattr(loaded.media.wave, field)}",
                    EXIT_CONSISTENCY,
                )
        pair.append(add_noise(data, delta, seed))
    return pair


def cmd_image(args) -> int:
    loaded = _load(args.config)
    opts = _glsm_options(loaded, args)
    seed = loaded.seed if args.seed is None else args.seed
    data_plus, data_minus = _load_data_pair(args.data, loaded, opts.delta, seed)
    os.makedirs(args.out, exist_ok=True)
    imap = image(loaded.media, data_plus, data_minus, opts)

    csv_path = os.path.join(args.out, "indicator.csv")
    pgm_path = os.path.join(args.out, "indicator.pgm")
    save_indicator_csv(csv_path, imap)
    save_indicator_pgm(pgm_path, imap)
    manifest = _manifest_core(loaded, args.config, args.out)
    manifest.update(
        {
            "command": "image",
            "data_dir": os.path.abspath(args.data),
            "noise": {"delta": opts.delta, "seed": seed},
            "glsm": {
                "alpha0": opts.alpha0,
                "alpha_rule": opts.alpha_rule,
                "q": opts.q,
                "sampling_spacing": opts.sampling_spacing,
            },
            "files": {
                "indicator.csv": sha256_file(csv_path),
                "indicator.pgm": sha256_file(pgm_path),
            },
        }
    )
    write_manifest(os.path.join(args.out, "manifest.json"), manifest)
    x, y = imap.argmax_point()
    print(f"wrote {csv_path}")
    print(f"wrote {pgm_path}")
    print(f"indicator max {imap.values.max():.6e} at ({x:.4f}, {y:.4f})")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_checks(args.level)
    failed = 0
    for res in results:
        print(res.line())
        failed += not res.passed
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_SOLVER


def cmd_sweep_alpha(args) -> int:
    loaded = _load(args.config)
    seed = loaded.seed if args.seed is None else args.seed
    delta = loaded.imaging.delta if args.delta is None else args.delta
    data_pair = _load_data_pair(args.data, loaded, delta, seed)
    points = args.point or [[0.0, 0.0]]
    os.makedirs(args.out, exist_ok=True)

    lines = ["alpha0,x,y,cost_full,cost_q,dterm,indicator"]
    for alpha0 in args.alpha0s:
        try:
            opts = GlsmOptions(
                alpha0=alpha0,
                alpha_rule=loaded.imaging.alpha_rule,
                delta=delta,
                q=loaded.imaging.q if args.q is None else args.q,
            )
        except ValueError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from None
        solvers = [SideSolver(d, opts) for d in data_pair]
        for zx, zy in points:
            value = g = cq = dt = 0.0
            for solver in solvers:
                v, gg, cc, dd = solver.indicator([zx], [zy])
                value += float(v[0])
                g += float(gg[0])
                cq += float(cc[0])
                dt += float(dd[0])
            lines.append(
                f"{alpha0:.17g},{zx:.17g},{zy:.17g},{g:.17g},{cq:.17g},{dt:.17g},{value:.17g}"
            )
    out_path = os.path.join(args.out, "alpha_sweep.csv")
    from .dataio import atomic_write_text

    atomic_write_text(out_path, "\n".join(lines) + "\n")
    print(f"wrote {out_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="defectscan",
        description="Simulate scattering by a locally perturbed periodic layer "
        "and image the local defect from near-field data.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate near-field data matrices")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--grid", nargs=2, type=int, metavar=("NX", "NY"))
    sim.add_argument("--tol", type=float)
    sim.add_argument(
        "--include-periodic",
        action="store_true",
        help="also write the defect-free (periodic) data for diagnostics",
    )
    sim.set_defaults(func=cmd_simulate)

    img = sub.add_parser("image", help="compute the differential indicator map")
    img.add_argument("--config", required=True)
    img.add_argument("--data", required=True, help="directory with simulate outputs")
    img.add_argument("--out", required=True)
    img.add_argument("--delta", type=float, help="relative noise level")
    img.add_argument("--seed", type=int)
    img.add_argument("--alpha0", type=float)
    img.add_argument("--q", type=int)
    img.add_argument("--sampling-res", type=float, dest="sampling_res")
    img.set_defaults(func=cmd_image)

    ver = sub.add_parser("verify", help="run the built-in oracle checks")
    ver.add_argument("--level", choices=("fast", "full"), default="fast")
    ver.set_defaults(func=cmd_verify)

    swp = sub.add_parser(
        "sweep-alpha", help="evaluate the regularized costs over a range of alpha0"
    )
    swp.add_argument("--config", required=True)
    swp.add_argument("--data", required=True)
    swp.add_argument("--out", required=True)
    swp.add_argument(
        "--alpha0s",
        nargs="+",
        type=float,
        default=[1e-2, 1e-3, 1e-4],
        help="alpha0 values to sweep",
    )
    swp.add_argument(
        "--point",
        nargs=2,
        type=float,
        action="append",
        metavar=("X", "Y"),
        help="sampling point; repeatable",
    )
    swp.add_argument("--delta", type=float)
    swp.add_argument("--seed", type=int)
    swp.add_argument("--q", type=int)
    swp.set_defaults(func=cmd_sweep_alpha)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
