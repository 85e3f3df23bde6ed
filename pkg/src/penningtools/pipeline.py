"""End-to-end run: seed, equilibrium, modes, couplings and detuning sweep."""
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Union

import numpy as np
import pandas as pd

from penningtools import __version__
from penningtools.couplings import (
    DriveParams,
    coupling_matrix,
    detuning_sweep,
)
from penningtools.equilibrium import (
    MinimizerSettings,
    minimize,
    nearest_neighbor_distances,
)
from penningtools.exceptions import NoRoot, StageFailed
from penningtools.lattice import build_seed, default_spacing
from penningtools.log import loggers
from penningtools.persistence import (
    read_json,
    write_crystal,
    write_frame,
    write_json,
    write_seed,
)
from penningtools.phonons import build_stiffness, com_residual, solve_modes
from penningtools.potential import separatrix_contour
from penningtools.units import TrapConfig, check_planarity
from penningtools.utils import default_out_dir

MANIFEST_NAME = "manifest.json"
COUPLING_COLUMNS = ["i", "j", "r_ij_over_l0", "J_over_Junit"]
SWEEP_COLUMNS = [
    "delta_over_omega_z",
    "alpha",
    "logJ0",
    "pairs_used",
    "pairs_excluded",
    "rmsd",
    "linear_rmsd",
    "normalized_rmsd",
]


@dataclass
class RunManifest:
    """Record of one pipeline run.

    `outputs` maps each stage to the file(s) it wrote, relative to `out_dir`.
    """

    config: Dict[str, Any]
    out_dir: str
    version: str = __version__
    outputs: Dict[str, Any] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    statuses: Dict[str, str] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def trap_config(self):
        return TrapConfig.from_dict(self.config)

    def path(self, relative):
        return os.path.join(self.out_dir, relative)

    def output(self, stage, key=None):
        """Absolute path of a recorded output."""
        entry = self.outputs.get(stage)
        if key is not None and isinstance(entry, dict):
            entry = entry.get(key)
        return None if entry is None else self.path(entry)

    @contextmanager
    def stage(self, name, logger):
        """Time a stage and record its status; failures are re-raised as
        `StageFailed` tagged with the stage name."""
        start = time.perf_counter()
        logger.info(f"Stage '{name}' started")
        try:
            yield
        except Exception as e:
            self.timings[name] = time.perf_counter() - start
            self.statuses[name] = f"failed: {type(e).__name__}: {e}"
            logger.exception(e)
            raise StageFailed(name, e) from e
        self.timings[name] = time.perf_counter() - start
        self.statuses.setdefault(name, "ok")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, document):
        return cls(**document)

    def to_json(self, file=None):
        return write_json(self.to_dict(), file or self.path(MANIFEST_NAME))

    @classmethod
    def read_json(cls, file):
        if os.path.isdir(file):
            file = os.path.join(file, MANIFEST_NAME)
        manifest = cls.from_dict(read_json(file))
        manifest.out_dir = os.path.dirname(os.path.abspath(file))
        return manifest


def _coupling_name(delta):
    return f"couplings_delta_{delta:g}.csv"


def run_pipeline(
    config_path: Union[str, TrapConfig],
    out_dir: Union[str, None] = None,
    threads: Union[int, None] = None,
    seed_spacing: Union[float, None] = None,
    logger=None,
) -> RunManifest:
    """Run every stage for one trap configuration and write the manifest.

    Args:
        config_path: JSON configuration file, or an already parsed configuration.
        out_dir: Output directory. Defaults to `PENNINGTOOLS_OUT_DIR`, then the
            working directory.
        threads: Worker threads for the detuning sweep. Defaults to the config value.
        seed_spacing: Seed lattice spacing (l0). Defaults to the config value, then
            to the mean-field estimate.
        logger: Logger. Defaults to `loggers.current`.

    Raises:
        ConfigInvalid: the configuration does not validate.
        StageFailed: a stage raised; the manifest written so far records which.
    """
    logger = logger or loggers.current
    try:
        config = (
            config_path
            if isinstance(config_path, TrapConfig)
            else TrapConfig.read_json(config_path)
        )
    except Exception as e:
        logger.exception(e)
        raise e
    out_dir = os.path.abspath(default_out_dir(out_dir))
    threads = threads or config.threads
    manifest = RunManifest(config=config.to_dict(), out_dir=out_dir)
    try:
        _run_stages(manifest, config, threads, seed_spacing, logger)
    finally:
        manifest.to_json()
    logger.info(f"Pipeline finished; manifest at {manifest.path(MANIFEST_NAME)}")
    return manifest


def _run_stages(manifest, config, threads, seed_spacing, logger):
    params = config.potential_params()
    settings = MinimizerSettings.from_dict(config.minimizer)
    N = config.N

    with manifest.stage("config", logger):
        manifest.diagnostics["omega_eff"] = params.omega_eff
        manifest.diagnostics["planar_confinement_ratio"] = check_planarity(
            config, logger=logger
        )

    with manifest.stage("seed", logger):
        spacing = seed_spacing or config.seed_spacing or default_spacing(N, params.omega_eff)
        seed = build_seed(N, spacing, params, logger=logger)
        manifest.outputs["seed"] = os.path.basename(
            write_seed(seed, manifest.path("seed.csv"))
        )

    with manifest.stage("separatrix", logger):
        if params.V_W > 0:
            try:
                contour = separatrix_contour(params, settings.separatrix_samples)
                manifest.outputs["separatrix"] = os.path.basename(
                    write_frame(contour.to_frame(), manifest.path("separatrix.csv"))
                )
                manifest.diagnostics["separatrix_radius"] = contour.radius
            except NoRoot:
                manifest.statuses["separatrix"] = "skipped: trap confines along every bearing"
                manifest.diagnostics["separatrix_radius"] = None
        else:
            manifest.statuses["separatrix"] = "skipped: no rotating wall"
            manifest.diagnostics["separatrix_radius"] = None

    with manifest.stage("equilibrate", logger):
        crystal = minimize(params, seed, settings, logger=logger)
        manifest.outputs["crystal"] = os.path.basename(
            write_crystal(crystal, manifest.path("crystal.csv"))
        )
        manifest.diagnostics.update(
            energy=crystal.energy,
            gradient_norm=crystal.gradient_norm,
            converged=crystal.converged,
            iterations=crystal.iterations,
            max_ion_radius=float(np.max(crystal.rho)),
        )

    with manifest.stage("neighbors", logger):
        if N >= 3:
            neighbors = nearest_neighbor_distances(crystal)
            manifest.outputs["neighbors"] = os.path.basename(
                write_frame(neighbors.frame, manifest.path("neighbors.csv"))
            )
            manifest.diagnostics["nn_mean"] = neighbors.mean
            manifest.diagnostics["nn_variance"] = neighbors.variance
        else:
            manifest.statuses["neighbors"] = "skipped: fewer than 3 ions"

    with manifest.stage("phonons", logger):
        K = build_stiffness(crystal)
        modes = solve_modes(K)
        manifest.outputs["spectrum"] = os.path.basename(
            write_frame(modes.spectrum_frame(), manifest.path("spectrum.csv"))
        )
        manifest.outputs["eigenvectors"] = os.path.basename(
            write_frame(modes.eigenvector_frame(), manifest.path("eigenvectors.csv"))
        )
        manifest.diagnostics["stable"] = modes.stable
        manifest.diagnostics["min_eigenvalue"] = float(modes.eigenvalues[0])
        manifest.diagnostics["com_residual"] = com_residual(K)
        if not modes.stable:
            logger.warning(
                f"{int(np.sum(modes.unstable))} unstable axial mode(s) in the equilibrium"
            )

    with manifest.stage("couplings", logger):
        manifest.outputs["couplings"] = {}
        for delta in config.coupling_deltas:
            name = _coupling_name(delta)
            if N > 1:
                J = coupling_matrix(modes, DriveParams.from_delta(delta))
                frame = J.to_frame(crystal)
            else:
                frame = pd.DataFrame(columns=COUPLING_COLUMNS)
            write_frame(frame, manifest.path(name))
            manifest.outputs["couplings"][f"{delta:g}"] = name

    with manifest.stage("sweep", logger):
        if N > 1:
            sweep = detuning_sweep(
                modes,
                crystal,
                config.delta_grid(),
                residual_space=config.rmsd_space,
                threads=threads,
                logger=logger,
            )
            frame = sweep.to_frame()
        else:
            frame = pd.DataFrame(columns=SWEEP_COLUMNS)
            manifest.statuses["sweep"] = "skipped: no ion pairs"
        manifest.outputs["sweep"] = os.path.basename(
            write_frame(frame, manifest.path("sweep.csv"))
        )
