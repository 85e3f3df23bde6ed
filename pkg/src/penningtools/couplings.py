"""Phonon-mediated Ising couplings and their power-law description.

Couplings are in units of J = F_O²/(m ω_z²) and frequencies in units of ω_z. The
beat-note frequency is written μ = 1 + δ, with δ > 0 the blue detuning from the
centre-of-mass mode.
"""
from dataclasses import dataclass, field
from typing import List, Union

import numpy as np
import pandas as pd
from scipy import stats
from scipy.spatial.distance import pdist

from penningtools.exceptions import (
    ConfigInvalid,
    InsufficientPairs,
    ResonantDrive,
    UnstableCrystal,
)
from penningtools.log import loggers
from penningtools.phonons import AxialModeSet
from penningtools.potential import as_positions
from penningtools.units import DEFAULT_DETUNING_GRID, RMSD_SPACES
from penningtools.utils import ordered_map, parse_grid

RESONANCE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DriveParams:
    mu: float
    F_O: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigInvalid(f"Beat-note frequency mu must be positive, got {self.mu}")

    @property
    def delta(self):
        return self.mu - 1.0

    @classmethod
    def from_delta(cls, delta, F_O=1.0):
        if not delta > 0:
            raise ConfigInvalid(f"Detuning must be blue of the COM mode, got {delta}")
        return cls(mu=1.0 + delta, F_O=F_O)


@dataclass
class CouplingMatrix:
    entries: np.ndarray
    drive: DriveParams

    @property
    def N(self):
        return self.entries.shape[0]

    def pair_values(self):
        """Couplings of the pairs i < j in row-major order."""
        return self.entries[np.triu_indices(self.N, k=1)]

    def to_frame(self, config):
        i, j = np.triu_indices(self.N, k=1)
        return pd.DataFrame(
            {
                "i": i,
                "j": j,
                "r_ij_over_l0": _pair_distances(config),
                "J_over_Junit": self.entries[i, j],
            }
        )


def _pair_distances(config):
    positions = as_positions(getattr(config, "positions", config))
    return pdist(positions)


def _check_drive(modes: AxialModeSet, drive: DriveParams):
    if not modes.stable:
        raise UnstableCrystal(
            f"{int(np.sum(modes.unstable))} axial mode(s) are unstable; couplings are "
            "undefined"
        )
    detuning = np.abs(drive.mu - modes.frequencies)
    if np.any(detuning < RESONANCE_TOLERANCE):
        nu = int(np.argmin(detuning))
        raise ResonantDrive(
            f"Drive mu = {drive.mu:.12g} is resonant with mode {nu} "
            f"(omega = {modes.frequencies[nu]:.12g})"
        )


def coupling_matrix(modes: AxialModeSet, drive: DriveParams) -> CouplingMatrix:
    """Time-averaged couplings `J_jk = (1/4) Σ_ν b_j b_k / (μ² − ω_ν²)`, j ≠ k.

    Off the diagonal the eigenvector completeness relation removes the 1/μ² part of
    every mode term, leaving `Σ_ν b_j b_k λ_ν / (μ² (μ² − λ_ν))`; this keeps large
    detunings free of cancellation.

    Raises:
        UnstableCrystal: some axial mode has a non-positive eigenvalue.
        ResonantDrive: μ lies within 1e-9 of a mode frequency.
    """
    _check_drive(modes, drive)
    mu2 = drive.mu**2
    weights = modes.eigenvalues / (mu2 * (mu2 - modes.eigenvalues))
    b = modes.eigenvectors
    entries = 0.25 * drive.F_O**2 * (b * weights) @ b.T
    entries = 0.5 * (entries + entries.T)
    np.fill_diagonal(entries, 0.0)
    return CouplingMatrix(entries, drive)


@dataclass
class CouplingTimeSeries:
    times: np.ndarray
    pairs: np.ndarray
    values: np.ndarray

    def to_frame(self):
        t = np.repeat(self.times, len(self.pairs))
        return pd.DataFrame(
            {
                "t_times_omega_z": t,
                "i": np.tile(self.pairs[:, 0], len(self.times)),
                "j": np.tile(self.pairs[:, 1], len(self.times)),
                "J_over_Junit": self.values.ravel(),
            }
        )


def coupling_time_series(modes: AxialModeSet, drive: DriveParams, times):
    """Full time dependence of the pair couplings.

    Each mode term of `coupling_matrix` carries the factor
    `1 + cos(2μt) − (2μ/ω_ν) sin(ω_ν t) sin(μt)`, with t in units of 1/ω_z.
    Values are indexed (time, pair) with pairs i < j in row-major order.
    """
    _check_drive(modes, drive)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    mu, omega = drive.mu, modes.frequencies
    i, j = np.triu_indices(modes.N, k=1)
    b = modes.eigenvectors
    amplitude = 0.25 * drive.F_O**2 * b[i] * b[j] / (mu**2 - omega**2)
    bracket = (
        1
        + np.cos(2 * mu * times)[:, None]
        - (2 * mu / omega)[None, :]
        * np.sin(np.outer(times, omega))
        * np.sin(mu * times)[:, None]
    )
    return CouplingTimeSeries(times, np.column_stack([i, j]), bracket @ amplitude.T)


@dataclass
class PowerLawFit:
    """Fit of `J_ij ≈ exp(logJ0) r_ij^(−α)` over the pairs with positive coupling.

    `rmsd` is the residual norm in `residual_space` (log J or J) and `linear_rmsd`
    the residual norm in J over every pair.
    """

    alpha: float
    logJ0: float
    pairs_used: int
    pairs_excluded: int
    rmsd: float
    linear_rmsd: float
    residual_space: str = "log"
    delta: Union[float, None] = None
    normalized_rmsd: float = float("nan")

    def predict(self, r):
        return np.exp(self.logJ0) * np.asarray(r, dtype=float) ** (-self.alpha)

    def to_dict(self):
        return dict(
            delta_over_omega_z=self.delta,
            alpha=self.alpha,
            logJ0=self.logJ0,
            pairs_used=self.pairs_used,
            pairs_excluded=self.pairs_excluded,
            rmsd=self.rmsd,
            linear_rmsd=self.linear_rmsd,
            normalized_rmsd=self.normalized_rmsd,
        )


def fit_power_law(config, Jmat: CouplingMatrix, residual_space="log") -> PowerLawFit:
    """Least-squares line through (log r_ij, log J_ij) for pairs i < j with J_ij > 0.

    A crystal of two ions has one pair; its exponent is the slope of the line
    through the origin, `α = −log J_12 / log r_12`.

    Raises:
        InsufficientPairs: fewer than two usable pairs, or all usable pairs at the
            same distance.
    """
    if residual_space not in RMSD_SPACES:
        raise ConfigInvalid(
            f"residual_space must be one of {RMSD_SPACES}, got '{residual_space}'"
        )
    r = _pair_distances(config)
    J = Jmat.pair_values()
    usable = J > 0
    log_r, log_J = np.log(r[usable]), np.log(J[usable])
    excluded = int(np.sum(~usable))

    if len(r) == 1:
        if not usable[0] or log_r[0] == 0:
            raise InsufficientPairs(
                "A single pair needs J > 0 and r != 1 to define an exponent"
            )
        alpha, logJ0 = float(-log_J[0] / log_r[0]), 0.0
    else:
        if usable.sum() < 2:
            raise InsufficientPairs(
                f"Only {int(usable.sum())} of {len(r)} pairs have J > 0"
            )
        if np.ptp(log_r) == 0:
            raise InsufficientPairs("All usable pairs are at the same distance")
        regression = stats.linregress(log_r, log_J)
        alpha, logJ0 = float(-regression.slope), float(regression.intercept)

    fitted = np.exp(logJ0) * r ** (-alpha)
    linear_rmsd = float(np.sqrt(np.sum((J - fitted) ** 2)))
    if residual_space == "log":
        rmsd = float(np.sqrt(np.sum((log_J - (logJ0 - alpha * log_r)) ** 2)))
    else:
        rmsd = linear_rmsd
    return PowerLawFit(
        alpha=alpha,
        logJ0=logJ0,
        pairs_used=int(usable.sum()),
        pairs_excluded=excluded,
        rmsd=rmsd,
        linear_rmsd=linear_rmsd,
        residual_space=residual_space,
        delta=Jmat.drive.delta,
    )


@dataclass
class DetuningSweep:
    fits: List[PowerLawFit] = field(default_factory=list)

    @property
    def deltas(self):
        return np.array([fit.delta for fit in self.fits])

    @property
    def alphas(self):
        return np.array([fit.alpha for fit in self.fits])

    @property
    def normalized_rmsd(self):
        return np.array([fit.normalized_rmsd for fit in self.fits])

    def to_frame(self):
        return pd.DataFrame([fit.to_dict() for fit in self.fits])


def _delta_grid(delta_grid):
    grid = parse_grid(DEFAULT_DETUNING_GRID if delta_grid is None else delta_grid)
    if np.any(grid <= 0):
        raise ConfigInvalid("Detunings must all be positive (blue of the COM mode)")
    return grid


def detuning_sweep(
    modes: AxialModeSet,
    config,
    delta_grid=None,
    residual_space="log",
    F_O=1.0,
    threads=1,
    logger=None,
) -> DetuningSweep:
    """Power-law fits over a grid of detunings, with each residual normalized by the
    largest residual on the grid.

    Args:
        modes: Axial modes of `config`.
        config: Crystal the modes belong to.
        delta_grid: Detunings or a grid spec. Defaults to 40 log-spaced points
            over [1e-6, 1e3].
        residual_space: `log` or `linear`; the space of the normalized residual.
        F_O: Optical dipole force in units making J = 1 when F_O = 1.
        threads: Worker threads for the per-detuning fits.
        logger: Logger. Defaults to `loggers.current`.
    """
    logger = logger or loggers.current
    grid = _delta_grid(delta_grid)

    def fit_at(delta):
        drive = DriveParams.from_delta(float(delta), F_O)
        return fit_power_law(config, coupling_matrix(modes, drive), residual_space)

    fits = ordered_map(fit_at, grid, threads)
    largest = max(fit.rmsd for fit in fits)
    for fit in fits:
        if largest > 0:
            fit.normalized_rmsd = 1.0 if fit.rmsd == largest else fit.rmsd / largest
        else:
            fit.normalized_rmsd = 0.0
    if largest == 0:
        logger.warning("All power-law residuals vanish; normalized RMSD set to zero")
    logger.info(
        f"Swept {len(grid)} detunings: alpha from {fits[0].alpha:.4g} to "
        f"{fits[-1].alpha:.4g}"
    )
    return DetuningSweep(fits)


def alpha_curve(modes: AxialModeSet, config, delta_grid=None, threads=1, logger=None):
    """Fitted exponent α against detuning δ as a list of (δ, α)."""
    sweep = detuning_sweep(modes, config, delta_grid, threads=threads, logger=logger)
    return list(zip(sweep.deltas.tolist(), sweep.alphas.tolist()))
