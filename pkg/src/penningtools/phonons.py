"""Axial normal modes of planar crystals."""
from dataclasses import dataclass, field, replace
from typing import List, Union

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.spatial.distance import pdist, squareform

from penningtools.equilibrium import MinimizerSettings, minimize
from penningtools.exceptions import (
    CoincidentIons,
    ConfigInvalid,
    IndexOutOfRange,
    PenningError,
)
from penningtools.lattice import build_seed, default_spacing
from penningtools.log import loggers
from penningtools.potential import COINCIDENCE_DISTANCE, PotentialParams, as_positions
from penningtools.utils import ordered_map

STABILITY_EPSILON = 1e-8


@dataclass
class StiffnessMatrix:
    """Axial stiffness matrix in units of m ω_z²."""

    entries: np.ndarray

    @property
    def N(self):
        return self.entries.shape[0]


@dataclass
class AxialModeSet:
    """Axial eigenmodes sorted by ascending eigenvalue.

    `frequencies` are in units of ω_z; an unstable mode (eigenvalue ≤ 0) carries
    `-sqrt(-λ)`. `eigenvectors[:, ν]` is the unit-norm mode ν, signed so that its
    largest-magnitude component is positive.
    """

    eigenvalues: np.ndarray
    frequencies: np.ndarray
    eigenvectors: np.ndarray

    @property
    def N(self):
        return len(self.eigenvalues)

    @property
    def unstable(self):
        return self.eigenvalues <= 0

    @property
    def stable(self):
        return bool(np.all(self.eigenvalues > 0))

    def spectrum_frame(self):
        return pd.DataFrame(
            {
                "mode_index": np.arange(self.N),
                "omega_over_omega_z": self.frequencies,
                "eigenvalue_over_omega_z2": self.eigenvalues,
                "stable": ~self.unstable,
            }
        )

    def eigenvector_frame(self):
        modes, ions = np.meshgrid(np.arange(self.N), np.arange(self.N), indexing="ij")
        return pd.DataFrame(
            {
                "mode_index": modes.ravel(),
                "ion_index": ions.ravel(),
                "amplitude": self.eigenvectors.T.ravel(),
            }
        )


def build_stiffness(config) -> StiffnessMatrix:
    """Axial stiffness `K_jk = 1/R_jk³` (j ≠ k), `K_jj = 1 − Σ_k 1/R_jk³`.

    Depends on the ion positions only; every row sums to one.
    """
    positions = as_positions(getattr(config, "positions", config))
    if len(positions) == 1:
        return StiffnessMatrix(np.ones((1, 1)))
    distances = pdist(positions)
    if distances.min() < COINCIDENCE_DISTANCE:
        raise CoincidentIons(
            f"Ions closer than {COINCIDENCE_DISTANCE:g} l0 (min separation "
            f"{distances.min():.3g})"
        )
    coupling = squareform(distances**-3.0)
    entries = coupling.copy()
    np.fill_diagonal(entries, 1.0 - coupling.sum(axis=1))
    return StiffnessMatrix(entries)


def solve_modes(K: StiffnessMatrix) -> AxialModeSet:
    eigenvalues, eigenvectors = linalg.eigh(K.entries)
    largest = np.argmax(np.abs(eigenvectors), axis=0)
    signs = np.sign(eigenvectors[largest, np.arange(K.N)])
    eigenvectors = eigenvectors * np.where(signs == 0, 1.0, signs)
    frequencies = np.sign(eigenvalues) * np.sqrt(np.abs(eigenvalues))
    frequencies[eigenvalues == 0] = 0.0
    return AxialModeSet(eigenvalues, frequencies, eigenvectors)


def com_residual(K: StiffnessMatrix) -> float:
    """Max-norm residual of the centre-of-mass eigenpair (λ = 1, b = 1/sqrt(N))."""
    b = np.full(K.N, 1.0 / np.sqrt(K.N))
    return float(np.max(np.abs(K.entries @ b - b)))


def mode_displacement_map(modes: AxialModeSet, mode_index: int) -> np.ndarray:
    """Per-ion amplitudes of mode `mode_index`, scaled to a largest magnitude of 1."""
    if not 0 <= mode_index < modes.N:
        raise IndexOutOfRange(
            f"Mode index {mode_index} outside 0..{modes.N - 1}"
        )
    b = modes.eigenvectors[:, mode_index]
    return b / np.max(np.abs(b))


@dataclass
class ScanPoint:
    omega_eff: float
    min_eigenvalue: float = float("nan")
    stable: bool = False
    converged: bool = False
    frequencies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    status: str = "ok"


@dataclass
class StabilityBand:
    start: int
    stop: int
    omega_low: float
    omega_high: float

    @property
    def width(self):
        return self.omega_high - self.omega_low

    @property
    def points(self):
        return self.stop - self.start + 1


@dataclass
class StabilityScan:
    params: PotentialParams
    N: int
    points: List[ScanPoint]

    @property
    def omega_eff(self):
        return np.array([point.omega_eff for point in self.points])

    def band(self):
        return stability_band(self)

    def to_frame(self):
        return pd.DataFrame(
            {
                "omega_eff_over_omega_z": [p.omega_eff for p in self.points],
                "min_eigenvalue_over_omega_z2": [p.min_eigenvalue for p in self.points],
                "stable": [p.stable for p in self.points],
                "converged": [p.converged for p in self.points],
                "status": [p.status for p in self.points],
            }
        )

    def spectrum_frame(self):
        rows = [
            (point.omega_eff, nu, omega)
            for point in self.points
            for nu, omega in enumerate(point.frequencies)
        ]
        return pd.DataFrame(
            rows,
            columns=["omega_eff_over_omega_z", "mode_index", "omega_over_omega_z"],
        )


def _scan_point(params, N, spacing, settings, logger):
    def run(omega_eff):
        point_params = replace(params, omega_eff=float(omega_eff))
        try:
            seed = build_seed(
                N,
                spacing or default_spacing(N, point_params.omega_eff),
                point_params,
                logger=logger,
            )
            crystal = minimize(point_params, seed, settings, logger=logger)
            modes = solve_modes(build_stiffness(crystal))
        except PenningError as e:
            logger.warning(f"omega_eff = {omega_eff:.6g}: {type(e).__name__}: {e}")
            return ScanPoint(float(omega_eff), status=f"{type(e).__name__}: {e}")
        min_eigenvalue = float(modes.eigenvalues[0])
        return ScanPoint(
            float(omega_eff),
            min_eigenvalue=min_eigenvalue,
            stable=crystal.converged and min_eigenvalue > STABILITY_EPSILON,
            converged=crystal.converged,
            frequencies=modes.frequencies,
            status="ok" if crystal.converged else "not converged",
        )

    return run


def scan_stability(
    params: PotentialParams,
    omega_eff_grid,
    N: int,
    spacing: Union[float, None] = None,
    settings: Union[MinimizerSettings, None] = None,
    threads=1,
    logger=None,
) -> StabilityScan:
    """Seed, minimize and solve the axial modes at every `omega_eff` of the grid.

    `params` supplies C4, V_W and the wall order; its `omega_eff` is replaced point by
    point. Failures at a grid point are recorded in its status and the scan goes on.
    """
    logger = logger or loggers.current
    grid = np.asarray(omega_eff_grid, dtype=float)
    if np.any(grid <= 0):
        raise ConfigInvalid(f"omega_eff grid values must be positive, got {grid.min():g}")
    logger.info(
        f"Scanning {len(grid)} omega_eff values for N = {N}, V_W = {params.V_W:g}"
    )
    points = ordered_map(_scan_point(params, N, spacing, settings, logger), grid, threads)
    return StabilityScan(params, N, points)


def stability_band(scan: StabilityScan) -> Union[StabilityBand, None]:
    """Longest contiguous run of stable grid points (the first one on ties), or None
    when no point is stable."""
    best, start = None, None
    stable = [point.stable for point in scan.points] + [False]
    for k, flag in enumerate(stable):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            if best is None or k - start > best[1] - best[0] + 1:
                best = (start, k - 1)
            start = None
    if best is None:
        return None
    return StabilityBand(
        best[0],
        best[1],
        scan.points[best[0]].omega_eff,
        scan.points[best[1]].omega_eff,
    )
