"""Plot-ready data for the eight standard figures.

Every figure reads what it needs from a pipeline run's manifest and writes CSV files
into `<out_dir>/figures`. Nothing is plotted here.
"""
import itertools
import os
from typing import List, Union

import numpy as np
import pandas as pd
from scipy import stats

from penningtools.couplings import detuning_sweep
from penningtools.equilibrium import (
    MinimizerSettings,
    minimize,
    nearest_neighbor_distances,
    quadrupole_comparison,
)
from penningtools.exceptions import MissingUpstream, NoRoot, PenningError, UnknownFigure
from penningtools.lattice import build_seed, default_spacing
from penningtools.log import loggers
from penningtools.persistence import read_crystal, read_frame, write_frame
from penningtools.phonons import (
    build_stiffness,
    mode_displacement_map,
    scan_stability,
    solve_modes,
)
from penningtools.potential import PotentialParams, separatrix_contour
from penningtools.utils import parse_grid

FIGURE_IDS = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8")
SEPARATRIX_STRENGTHS = (0.508, 0.608, 0.908)
WALL_STRENGTHS = (0.0025, 0.0040)
STRUCTURE_OMEGA_EFF = (0.20, 0.22, 0.24, 0.26)
SCAN_GRID = "0.19:0.27:0.002"
SPECTRUM_OMEGA_EFF = (0.20, 0.26)
EIGENVECTOR_OMEGA_EFF = (0.21, 0.24)
TOP_MODES = 3


def _figure_dir(manifest):
    path = manifest.path("figures")
    os.makedirs(path, exist_ok=True)
    return path


def _require(manifest, stage, key=None):
    path = manifest.output(stage, key)
    if path is None or not os.path.exists(path):
        raise MissingUpstream(
            f"Output of stage '{stage}'{'' if key is None else f' ({key})'} is missing; "
            "run the pipeline first"
        )
    return path


def _equilibrium(params, config, settings, logger):
    spacing = config.seed_spacing or default_spacing(config.N, params.omega_eff)
    seed = build_seed(config.N, spacing, params, logger=logger)
    return minimize(params, seed, settings, logger=logger)


def _fig1(manifest, out, threads, logger):
    config = manifest.trap_config
    omega_eff = config.omega_eff
    written = []
    for strength in SEPARATRIX_STRENGTHS:
        params = PotentialParams(
            omega_eff=omega_eff, C4=config.C4, V_W=strength * omega_eff**2 / 3
        )
        try:
            contour = separatrix_contour(params)
        except NoRoot:
            logger.warning(f"No separatrix at strength {strength:g}")
            continue
        written.append(
            write_frame(contour.to_frame(), os.path.join(out, f"fig1_strength_{strength:g}.csv"))
        )
    return written


def _fig2(manifest, out, threads, logger):
    config = manifest.trap_config
    settings = MinimizerSettings.from_dict(config.minimizer)
    written, rows = [], []
    for V_W, omega_eff in itertools.product(WALL_STRENGTHS, STRUCTURE_OMEGA_EFF):
        params = PotentialParams(omega_eff=omega_eff, C4=config.C4, V_W=V_W)
        try:
            crystal = _equilibrium(params, config, settings, logger)
            status = "ok" if crystal.converged else "not converged"
        except PenningError as e:
            rows.append((V_W, omega_eff, f"{type(e).__name__}: {e}", ""))
            continue
        name = f"fig2_vw_{V_W:g}_omega_{omega_eff:g}.csv"
        written.append(write_frame(crystal.to_frame(), os.path.join(out, name)))
        rows.append((V_W, omega_eff, status, name))
    written.append(
        write_frame(
            pd.DataFrame(
                rows, columns=["V_W_over_omega_z2", "omega_eff_over_omega_z", "status", "file"]
            ),
            os.path.join(out, "fig2_index.csv"),
        )
    )
    return written


def _fig3(manifest, out, threads, logger):
    crystal = read_crystal(_require(manifest, "crystal"))
    config = manifest.trap_config
    settings = MinimizerSettings.from_dict(config.minimizer)
    comparison = quadrupole_comparison(config.N, settings=settings, logger=logger)
    columns = ["rho_over_l0", "distance_over_l0"]
    written = []
    for label, configuration in (("triangular", crystal), ("quadrupole", comparison)):
        frame = nearest_neighbor_distances(configuration).frame
        written.append(write_frame(frame[columns], os.path.join(out, f"fig3_{label}.csv")))
        written.append(
            write_frame(configuration.to_frame(), os.path.join(out, f"fig3_{label}_crystal.csv"))
        )
    return written


def _fig4(manifest, out, threads, logger):
    config = manifest.trap_config
    settings = MinimizerSettings.from_dict(config.minimizer)
    grid = parse_grid(SCAN_GRID)
    written, bands = [], []
    for V_W in WALL_STRENGTHS:
        params = PotentialParams(omega_eff=grid[0], C4=config.C4, V_W=V_W)
        scan = scan_stability(
            params, grid, config.N, config.seed_spacing, settings, threads, logger
        )
        written.append(
            write_frame(scan.spectrum_frame(), os.path.join(out, f"fig4_vw_{V_W:g}_spectrum.csv"))
        )
        written.append(
            write_frame(scan.to_frame(), os.path.join(out, f"fig4_vw_{V_W:g}_stability.csv"))
        )
        band = scan.band()
        bands.append(
            (V_W, np.nan, np.nan) if band is None else (V_W, band.omega_low, band.omega_high)
        )
    written.append(
        write_frame(
            pd.DataFrame(
                bands,
                columns=["V_W_over_omega_z2", "band_low_over_omega_z", "band_high_over_omega_z"],
            ),
            os.path.join(out, "fig4_bands.csv"),
        )
    )
    return written


def _modes_at(V_W, omega_eff, config, settings, logger):
    params = PotentialParams(omega_eff=omega_eff, C4=config.C4, V_W=V_W)
    crystal = _equilibrium(params, config, settings, logger)
    return crystal, solve_modes(build_stiffness(crystal))


def _fig5(manifest, out, threads, logger):
    config = manifest.trap_config
    settings = MinimizerSettings.from_dict(config.minimizer)
    written = []
    for V_W, omega_eff in itertools.product(WALL_STRENGTHS, SPECTRUM_OMEGA_EFF):
        try:
            _, modes = _modes_at(V_W, omega_eff, config, settings, logger)
        except PenningError as e:
            logger.warning(f"No spectrum for V_W = {V_W:g}, omega_eff = {omega_eff:g}: {e}")
            continue
        name = f"fig5_spectrum_vw_{V_W:g}_omega_{omega_eff:g}.csv"
        written.append(write_frame(modes.spectrum_frame(), os.path.join(out, name)))
    for V_W, omega_eff in itertools.product(WALL_STRENGTHS, EIGENVECTOR_OMEGA_EFF):
        try:
            crystal, modes = _modes_at(V_W, omega_eff, config, settings, logger)
        except PenningError as e:
            logger.warning(
                f"No eigenvectors for V_W = {V_W:g}, omega_eff = {omega_eff:g}: {e}"
            )
            continue
        frame = crystal.to_frame()
        for rank in range(min(TOP_MODES, modes.N)):
            nu = modes.N - 1 - rank
            frame[f"mode_{nu}_amplitude"] = mode_displacement_map(modes, nu)
        name = f"fig5_eigenvectors_vw_{V_W:g}_omega_{omega_eff:g}.csv"
        written.append(write_frame(frame, os.path.join(out, name)))
    return written


def _fig6(manifest, out, threads, logger):
    couplings = manifest.outputs.get("couplings") or {}
    if not couplings:
        raise MissingUpstream("No coupling outputs recorded; run the pipeline first")
    written, fits = [], []
    for key in couplings:
        frame = read_frame(_require(manifest, "couplings", key))
        frame = frame[frame.J_over_Junit > 0]
        log_r, log_J = np.log(frame.r_ij_over_l0), np.log(frame.J_over_Junit)
        scatter = pd.DataFrame({"log_r": log_r, "log_J": log_J})
        written.append(write_frame(scatter, os.path.join(out, f"fig6_delta_{key}.csv")))
        if len(frame) >= 2 and np.ptp(log_r) > 0:
            regression = stats.linregress(log_r, log_J)
            fits.append((float(key), -regression.slope, regression.intercept, len(frame)))
        else:
            fits.append((float(key), np.nan, np.nan, len(frame)))
    written.append(
        write_frame(
            pd.DataFrame(
                fits, columns=["delta_over_omega_z", "alpha", "logJ0", "pairs_used"]
            ),
            os.path.join(out, "fig6_fits.csv"),
        )
    )
    return written


def _fig7(manifest, out, threads, logger):
    config = manifest.trap_config
    settings = MinimizerSettings.from_dict(config.minimizer)
    grid = config.delta_grid()
    written, rows = [], []
    for V_W, omega_eff in itertools.product(WALL_STRENGTHS, SPECTRUM_OMEGA_EFF):
        try:
            crystal, modes = _modes_at(V_W, omega_eff, config, settings, logger)
            sweep = detuning_sweep(
                modes, crystal, grid, config.rmsd_space, threads=threads, logger=logger
            )
        except PenningError as e:
            logger.warning(
                f"No alpha curve for V_W = {V_W:g}, omega_eff = {omega_eff:g}: {e}"
            )
            rows.append((V_W, omega_eff, f"{type(e).__name__}: {e}", ""))
            continue
        name = f"fig7_vw_{V_W:g}_omega_{omega_eff:g}.csv"
        frame = pd.DataFrame({"delta_over_omega_z": sweep.deltas, "alpha": sweep.alphas})
        written.append(write_frame(frame, os.path.join(out, name)))
        rows.append((V_W, omega_eff, "ok", name))
    written.append(
        write_frame(
            pd.DataFrame(
                rows, columns=["V_W_over_omega_z2", "omega_eff_over_omega_z", "status", "file"]
            ),
            os.path.join(out, "fig7_index.csv"),
        )
    )
    return written


def _fig8(manifest, out, threads, logger):
    sweep = read_frame(_require(manifest, "sweep"))
    columns = ["delta_over_omega_z", "normalized_rmsd"]
    return [write_frame(sweep[columns], os.path.join(out, "fig8.csv"))]


_FIGURES = {
    "fig1": _fig1,
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8": _fig8,
}


def emit_figure_data(
    manifest, figure_id: str, threads: Union[int, None] = None, logger=None
) -> List[str]:
    """Write the data files for one figure and return their paths.

    Raises:
        UnknownFigure: `figure_id` is not one of `FIGURE_IDS`.
        MissingUpstream: a pipeline output the figure reads is missing.
    """
    logger = logger or loggers.current
    if figure_id not in _FIGURES:
        raise UnknownFigure(
            f"Unknown figure '{figure_id}', expected one of {', '.join(FIGURE_IDS)}"
        )
    threads = threads or manifest.config.get("threads", 1)
    written = _FIGURES[figure_id](manifest, _figure_dir(manifest), threads, logger)
    logger.info(f"{figure_id}: wrote {len(written)} file(s)")
    return written
