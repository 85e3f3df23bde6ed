import argparse
import os
import sys
from typing import List, Union

import numpy as np
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from penningtools.couplings import (
    DriveParams,
    coupling_matrix,
    detuning_sweep,
    fit_power_law,
)
from penningtools.equilibrium import MinimizerSettings, minimize
from penningtools.exceptions import ConfigInvalid, InsufficientPairs, PenningError
from penningtools.figures import FIGURE_IDS, emit_figure_data
from penningtools.lattice import build_seed, default_spacing
from penningtools.log import loggers
from penningtools.persistence import read_crystal, write_crystal, write_frame
from penningtools.phonons import build_stiffness, scan_stability, solve_modes
from penningtools.pipeline import RunManifest, run_pipeline
from penningtools.potential import PotentialParams, separatrix_contour
from penningtools.units import DEFAULT_DETUNING_GRID, RMSD_SPACES, TrapConfig
from penningtools.utils import default_out_dir, parse_grid

console = Console()
error_console = Console(stderr=True)

DEFAULT_SCAN_GRID = "0.19:0.27:0.002"


def _summary(title, rows):
    table = Table(title=title)
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", justify="right")
    for key, value in rows:
        if isinstance(value, float):
            value = f"{value:.10g}"
        table.add_row(key, str(value))
    console.print(table)


def _config(args, required=True):
    if args.config is None:
        if required:
            raise ConfigInvalid("--config is required for this command")
        return None
    return TrapConfig.read_json(args.config)


def _require_crystal(args):
    if args.crystal is None:
        raise ConfigInvalid("--crystal is required for this command")
    return read_crystal(args.crystal)


def _out_path(args, name):
    return os.path.join(default_out_dir(args.out_dir), name)


def _common_arguments():
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", type=str, default=None, help="Trap configuration JSON.")
    parser.add_argument(
        "--out-dir",
        type=str,
        default=None,
        help="Output directory. Defaults to `PENNINGTOOLS_OUT_DIR`, then the working directory.",
    )
    parser.add_argument(
        "--threads", type=int, default=None, help="Worker threads for scans and sweeps."
    )
    parser.add_argument(
        "--seed-spacing",
        type=float,
        default=None,
        help="Seed lattice spacing in units of l0.",
    )
    return parser


def _equilibrate_arguments(parser):
    parser.add_argument(
        "--out", type=str, default=None, help="Crystal CSV. Defaults to `<out-dir>/crystal.csv`."
    )


def _run_equilibrate(args):
    """Minimize the potential from the closed-shell seed and write the crystal."""
    config = _config(args)
    params = config.potential_params()
    spacing = (
        args.seed_spacing or config.seed_spacing or default_spacing(config.N, params.omega_eff)
    )
    seed = build_seed(config.N, spacing, params)
    crystal = minimize(params, seed, MinimizerSettings.from_dict(config.minimizer))
    path = write_crystal(crystal, args.out or _out_path(args, "crystal.csv"))
    _summary(
        "Equilibrium",
        [
            ("ions", crystal.N),
            ("energy / E0", crystal.energy),
            ("gradient norm", crystal.gradient_norm),
            ("converged", crystal.converged),
            ("iterations", crystal.iterations),
            ("max rho / l0", float(np.max(crystal.rho))),
            ("crystal", path),
        ],
    )
    return 0 if crystal.converged else 1


def _crystal_arguments(parser):
    parser.add_argument("--crystal", type=str, default=None, help="Crystal CSV.")


def _run_phonons(args):
    """Axial mode spectrum and eigenvectors of an equilibrium crystal."""
    crystal = _require_crystal(args)
    modes = solve_modes(build_stiffness(crystal))
    spectrum = write_frame(modes.spectrum_frame(), _out_path(args, "spectrum.csv"))
    write_frame(modes.eigenvector_frame(), _out_path(args, "eigenvectors.csv"))
    rows = [("stable", modes.stable), ("min eigenvalue", float(modes.eigenvalues[0]))]
    rows += [
        (f"mode {nu}", float(modes.frequencies[nu]))
        for nu in range(modes.N - 1, max(modes.N - 4, -1), -1)
    ]
    _summary(f"Axial modes ({spectrum})", rows)
    return 0


def _couplings_arguments(parser):
    _crystal_arguments(parser)
    parser.add_argument(
        "--delta", type=float, required=True, help="Detuning above the COM mode (units omega_z)."
    )


def _run_couplings(args):
    """Time-averaged Ising couplings at one detuning."""
    crystal = _require_crystal(args)
    modes = solve_modes(build_stiffness(crystal))
    J = coupling_matrix(modes, DriveParams.from_delta(args.delta))
    path = write_frame(J.to_frame(crystal), _out_path(args, f"couplings_delta_{args.delta:g}.csv"))
    rows = [("delta", args.delta), ("couplings", path)]
    try:
        fit = fit_power_law(crystal, J)
        rows += [("alpha", fit.alpha), ("pairs excluded", fit.pairs_excluded)]
    except InsufficientPairs as e:
        rows.append(("alpha", f"n/a ({e})"))
    _summary("Couplings", rows)
    return 0


def _sweep_arguments(parser):
    _crystal_arguments(parser)
    parser.add_argument(
        "--grid", type=str, default=None, help=f"Detuning grid. Defaults to `{DEFAULT_DETUNING_GRID}`."
    )
    parser.add_argument(
        "--rmsd-space", type=str, choices=RMSD_SPACES, default=None, help="Residual space."
    )


def _run_sweep(args):
    """Power-law exponent and normalized residual over a detuning grid."""
    crystal = _require_crystal(args)
    config = _config(args, required=False)
    grid = args.grid or (config.detuning_grid if config else DEFAULT_DETUNING_GRID)
    space = args.rmsd_space or (config.rmsd_space if config else "log")
    threads = args.threads or (config.threads if config else 1)
    modes = solve_modes(build_stiffness(crystal))
    sweep = detuning_sweep(modes, crystal, grid, residual_space=space, threads=threads)
    path = write_frame(sweep.to_frame(), _out_path(args, "sweep.csv"))
    peak = int(np.argmax(sweep.normalized_rmsd))
    _summary(
        "Detuning sweep",
        [
            ("points", len(sweep.fits)),
            ("alpha (first)", float(sweep.alphas[0])),
            ("alpha (last)", float(sweep.alphas[-1])),
            ("peak residual at delta", float(sweep.deltas[peak])),
            ("sweep", path),
        ],
    )
    return 0


def _scan_arguments(parser):
    parser.add_argument(
        "--omega-eff",
        type=str,
        default=DEFAULT_SCAN_GRID,
        help=f"omega_eff grid. Defaults to `{DEFAULT_SCAN_GRID}`.",
    )


def _run_scan(args):
    """Axial stability across a grid of effective trapping frequencies."""
    config = _config(args)
    scan = scan_stability(
        config.potential_params(),
        parse_grid(args.omega_eff),
        config.N,
        args.seed_spacing or config.seed_spacing,
        MinimizerSettings.from_dict(config.minimizer),
        threads=args.threads or config.threads,
    )
    path = write_frame(scan.to_frame(), _out_path(args, "scan.csv"))
    write_frame(scan.spectrum_frame(), _out_path(args, "scan_spectrum.csv"))
    band = scan.band()
    _summary(
        "Stability scan",
        [
            ("points", len(scan.points)),
            ("stable points", sum(point.stable for point in scan.points)),
            ("band", "none" if band is None else f"{band.omega_low:g} - {band.omega_high:g}"),
            ("scan", path),
        ],
    )
    return 0


def _separatrix_arguments(parser):
    parser.add_argument(
        "--samples", type=int, default=720, help="Number of sampled bearings."
    )
    parser.add_argument(
        "--strength",
        type=float,
        default=None,
        help="Wall strength as 3 V_W / omega_eff^2, overriding the configured V_W.",
    )


def _run_separatrix(args):
    """Zero radial-force contour of the trap potential."""
    config = _config(args)
    params = config.potential_params()
    if args.strength is not None:
        params = PotentialParams(
            omega_eff=params.omega_eff,
            C4=params.C4,
            V_W=args.strength * params.omega_eff**2 / 3,
            wall_order=params.wall_order,
        )
    contour = separatrix_contour(params, args.samples)
    path = write_frame(contour.to_frame(), _out_path(args, "separatrix.csv"))
    _summary(
        "Separatrix",
        [
            ("bearings with a root", len(contour.theta)),
            ("separatrix radius / l0", contour.radius),
            ("contour", path),
        ],
    )
    return 0


def _figure_arguments(parser):
    parser.add_argument(
        "--manifest",
        type=str,
        default=None,
        help="Run manifest, or the directory holding it. Defaults to the output directory.",
    )
    parser.add_argument(
        "--figure",
        type=str,
        nargs="+",
        default=["all"],
        help=f"Figure ids ({', '.join(FIGURE_IDS)}) or `all`.",
    )


def _run_figure(args):
    """Plot-ready data files for the standard figures."""
    manifest = RunManifest.read_json(args.manifest or default_out_dir(args.out_dir))
    figure_ids = FIGURE_IDS if args.figure == ["all"] else args.figure
    rows = []
    for figure_id in figure_ids:
        written = emit_figure_data(manifest, figure_id, threads=args.threads)
        rows.append((figure_id, f"{len(written)} file(s)"))
    _summary("Figure data", rows)
    return 0


def _run_pipeline(args):
    """Seed, equilibrium, modes, couplings and detuning sweep for one configuration."""
    if args.config is None:
        raise ConfigInvalid("--config is required for this command")
    manifest = run_pipeline(
        args.config, args.out_dir, threads=args.threads, seed_spacing=args.seed_spacing
    )
    _summary(
        "Pipeline",
        [(stage, status) for stage, status in manifest.statuses.items()]
        + [("manifest", manifest.path("manifest.json"))],
    )
    return 0


COMMANDS = {
    "equilibrate": (_equilibrate_arguments, _run_equilibrate),
    "phonons": (_crystal_arguments, _run_phonons),
    "couplings": (_couplings_arguments, _run_couplings),
    "sweep": (_sweep_arguments, _run_sweep),
    "scan": (_scan_arguments, _run_scan),
    "separatrix": (_separatrix_arguments, _run_separatrix),
    "figure": (_figure_arguments, _run_figure),
    "pipeline": (lambda parser: None, _run_pipeline),
}


def _execute(command, args):
    try:
        return COMMANDS[command][1](args)
    except PenningError as e:
        loggers.current.exception(e)
        message = str(e) if str(e).startswith("[") else f"[{command}] {type(e).__name__}: {e}"
        error_console.print(
            f"[bold red]error[/bold red] {escape(message)}", markup=True, highlight=False
        )
        return 1


def _command(name, argv: Union[List[str], None] = None):
    os.environ["PENNINGTOOLS_PROG"] = name
    add_arguments, run = COMMANDS[name]
    parser = argparse.ArgumentParser(
        prog=name, description=run.__doc__, parents=[_common_arguments()]
    )
    add_arguments(parser)
    return _execute(name, parser.parse_args(argv))


def equilibrate(argv=None):
    return _command("equilibrate", argv)


def phonons(argv=None):
    return _command("phonons", argv)


def couplings(argv=None):
    return _command("couplings", argv)


def sweep(argv=None):
    return _command("sweep", argv)


def scan(argv=None):
    return _command("scan", argv)


def separatrix(argv=None):
    return _command("separatrix", argv)


def figure(argv=None):
    return _command("figure", argv)


def pipeline(argv=None):
    return _command("pipeline", argv)


def main(argv: Union[List[str], None] = None):
    """Planar Penning-trap crystals: equilibria, axial modes and Ising couplings."""
    parser = argparse.ArgumentParser(prog="penning-tools", description=main.__doc__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_arguments()
    for name, (add_arguments, run) in COMMANDS.items():
        subparser = subparsers.add_parser(
            name, help=run.__doc__, description=run.__doc__, parents=[common]
        )
        add_arguments(subparser)
    args = parser.parse_args(argv)
    os.environ["PENNINGTOOLS_PROG"] = args.command
    return _execute(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
