"""Dimensionless rotating-frame potential of a planar ion crystal.

The energy of N ions at planar positions r_i (units l0) is

    ε = Σ_i [½ ω_eff² (ρ_i² + C4 ρ_i⁴) + V_W Re((x_i + i y_i)^l)] + Σ_{i<j} 1/r_ij

in units of E0, where l is the wall order (3 for the triangular wall, 2 for the
quadrupole wall). Gradients and Hessians use the flat layout (x_1, y_1, ..., x_N, y_N).
"""
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import pandas as pd
from scipy.optimize import bisect
from scipy.spatial.distance import pdist

from penningtools.exceptions import CoincidentIons, ConfigInvalid, NoRoot, OriginUndefined
from penningtools.utils import rotate

COINCIDENCE_DISTANCE = 1e-9
SEPARATRIX_RHO_MAX = 1e3
SEPARATRIX_XTOL = 1e-10
SEPARATRIX_SAMPLES = 720
_SEPARATRIX_GRID = np.geomspace(1e-6, SEPARATRIX_RHO_MAX, 4000)


@dataclass(frozen=True)
class PotentialParams:
    omega_eff: float
    C4: float = 0.0
    V_W: float = 0.0
    wall_order: int = 3

    def __post_init__(self):
        if not self.omega_eff > 0:
            raise ConfigInvalid(f"omega_eff must be positive, got {self.omega_eff}")
        if self.C4 < 0:
            raise ConfigInvalid(f"C4 must be non-negative, got {self.C4}")
        if self.V_W < 0:
            raise ConfigInvalid(f"V_W must be non-negative, got {self.V_W}")
        if self.wall_order not in (2, 3):
            raise ConfigInvalid(f"wall_order must be 2 or 3, got {self.wall_order}")

    def to_dict(self):
        return dict(
            omega_eff=self.omega_eff,
            C4=self.C4,
            V_W=self.V_W,
            wall_order=self.wall_order,
        )

    @classmethod
    def from_dict(cls, document):
        return cls(**document)


@dataclass
class CrystalConfiguration:
    """Planar ion positions (units l0) with the state of the minimization that
    produced them."""

    positions: np.ndarray
    energy: float = float("nan")
    gradient_norm: float = float("nan")
    converged: bool = False
    iterations: int = 0
    params: Union[PotentialParams, None] = field(default=None, compare=False)

    def __post_init__(self):
        self.positions = as_positions(self.positions)

    @property
    def N(self):
        return self.positions.shape[0]

    @property
    def rho(self):
        return np.hypot(self.positions[:, 0], self.positions[:, 1])

    @property
    def theta(self):
        return np.mod(np.arctan2(self.positions[:, 1], self.positions[:, 0]), 2 * np.pi)

    def min_pair_distance(self):
        if self.N < 2:
            return float("inf")
        return float(pdist(self.positions).min())

    def rotated(self, theta):
        """Copy rotated by `theta` about the trap axis, metadata unchanged."""
        return CrystalConfiguration(
            rotate(self.positions, theta),
            energy=self.energy,
            gradient_norm=self.gradient_norm,
            converged=self.converged,
            iterations=self.iterations,
            params=self.params,
        )

    def to_physical(self, scales):
        """Positions in metres."""
        return self.positions * scales.l0

    @classmethod
    def from_physical(cls, positions_m, scales, **kwargs):
        return cls(np.asarray(positions_m, dtype=float) / scales.l0, **kwargs)

    def to_frame(self):
        return pd.DataFrame(
            {
                "index": np.arange(self.N),
                "x_over_l0": self.positions[:, 0],
                "y_over_l0": self.positions[:, 1],
            }
        )


def as_positions(positions) -> np.ndarray:
    """(N, 2) float array from either an (N, 2) array or the flat layout."""
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        if positions.size % 2:
            raise ValueError(f"Flat position vector has odd length {positions.size}")
        positions = positions.reshape(-1, 2)
    if positions.ndim != 2 or positions.shape[1] != 2:
        raise ValueError(f"Positions must have shape (N, 2), got {positions.shape}")
    return positions


def _check_separations(distances):
    if distances.size and distances.min() < COINCIDENCE_DISTANCE:
        raise CoincidentIons(
            f"Ions closer than {COINCIDENCE_DISTANCE:g} l0 (min separation "
            f"{distances.min():.3g})"
        )


def _displacements(positions):
    """Pairwise displacement vectors d_ij = r_i - r_j and their lengths, with an
    infinite self-distance."""
    d = positions[:, None, :] - positions[None, :, :]
    r = np.hypot(d[..., 0], d[..., 1])
    np.fill_diagonal(r, np.inf)
    _check_separations(r[np.triu_indices(len(positions), k=1)])
    return d, r


def single_ion_energy(params: PotentialParams, positions) -> np.ndarray:
    """Trap (harmonic, quartic and wall) energy of each ion, without Coulomb terms."""
    positions = as_positions(positions)
    rho2 = np.sum(positions**2, axis=1)
    z = positions[:, 0] + 1j * positions[:, 1]
    return 0.5 * params.omega_eff**2 * (rho2 + params.C4 * rho2**2) + params.V_W * np.real(
        z**params.wall_order
    )


def energy(params: PotentialParams, positions) -> float:
    positions = as_positions(positions)
    trap = np.sum(single_ion_energy(params, positions))
    if len(positions) < 2:
        return float(trap)
    distances = pdist(positions)
    _check_separations(distances)
    return float(trap + np.sum(1.0 / distances))


def gradient(params: PotentialParams, positions) -> np.ndarray:
    """Analytic gradient of the energy in the flat layout."""
    positions = as_positions(positions)
    w2, l = params.omega_eff**2, params.wall_order
    rho2 = np.sum(positions**2, axis=1)
    z = positions[:, 0] + 1j * positions[:, 1]
    grad = w2 * (1 + 2 * params.C4 * rho2)[:, None] * positions
    dwall = l * z ** (l - 1)
    grad[:, 0] += params.V_W * np.real(dwall)
    grad[:, 1] -= params.V_W * np.imag(dwall)
    if len(positions) > 1:
        d, r = _displacements(positions)
        grad -= np.sum(d / r[..., None] ** 3, axis=1)
    return grad.ravel()


def hessian(params: PotentialParams, positions) -> np.ndarray:
    """Analytic (2N, 2N) Hessian of the energy in the flat layout."""
    positions = as_positions(positions)
    n = len(positions)
    w2, C4, l = params.omega_eff**2, params.C4, params.wall_order
    x, y = positions[:, 0], positions[:, 1]
    z = x + 1j * y
    d2wall = params.V_W * l * (l - 1) * z ** (l - 2)

    blocks = np.zeros((n, n, 2, 2))
    if n > 1:
        d, r = _displacements(positions)
        inv_r = 1.0 / r
        tensor = 3 * d[..., :, None] * d[..., None, :] * (inv_r**5)[..., None, None]
        tensor -= (inv_r**3)[..., None, None] * np.eye(2)
        blocks = -tensor
        blocks[np.arange(n), np.arange(n)] = np.sum(tensor, axis=1)

    idx = np.arange(n)
    blocks[idx, idx, 0, 0] += w2 * (1 + C4 * (6 * x**2 + 2 * y**2)) + np.real(d2wall)
    blocks[idx, idx, 1, 1] += w2 * (1 + C4 * (2 * x**2 + 6 * y**2)) - np.real(d2wall)
    cross = 4 * w2 * C4 * x * y - np.imag(d2wall)
    blocks[idx, idx, 0, 1] += cross
    blocks[idx, idx, 1, 0] += cross
    return blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)


def radial_trap_force(params: PotentialParams, position) -> float:
    """Radial component of the trap force (Coulomb excluded) on one ion.

    `F_r = −[ω² ρ + 2 ω² C4 ρ³ + (l V_W / ρ) Re((x + iy)^l)]`; negative values
    push the ion back towards the axis.
    """
    x, y = np.asarray(position, dtype=float)
    rho = np.hypot(x, y)
    if rho == 0:
        raise OriginUndefined("Radial force direction is undefined at the trap axis")
    w2, l = params.omega_eff**2, params.wall_order
    wall = l * params.V_W * np.real(complex(x, y) ** l) / rho
    return float(-(w2 * rho + 2 * w2 * params.C4 * rho**3 + wall))


def _restoring_profile(params: PotentialParams, rho, theta):
    """-F_r/ρ along bearing `theta`; vanishes where the radial force does."""
    w2, l = params.omega_eff**2, params.wall_order
    return (
        w2
        + 2 * w2 * params.C4 * rho**2
        + l * params.V_W * rho ** (l - 2) * np.cos(l * theta)
    )


def _first_sign_change(values):
    signs = np.sign(values)
    changes = np.nonzero(signs[:-1] != signs[1:])[0]
    return None if not changes.size else int(changes[0])


def separatrix_radius(params: PotentialParams, theta: float) -> float:
    """Smallest ρ > 0 at which the radial trap force vanishes along bearing `theta`.

    Raises:
        NoRoot: the trap confines for every ρ up to the search limit along `theta`.
    """
    profile = _restoring_profile(params, _SEPARATRIX_GRID, theta)
    k = _first_sign_change(profile)
    if k is None:
        raise NoRoot(
            f"Radial force does not vanish for rho <= {SEPARATRIX_RHO_MAX:g} "
            f"along theta = {theta:.6g}"
        )
    if profile[k + 1] == 0:
        return float(_SEPARATRIX_GRID[k + 1])
    return float(
        bisect(
            lambda rho: _restoring_profile(params, rho, theta),
            _SEPARATRIX_GRID[k],
            _SEPARATRIX_GRID[k + 1],
            xtol=SEPARATRIX_XTOL,
        )
    )


def separatrix_table(params: PotentialParams, angular_samples=SEPARATRIX_SAMPLES):
    """Separatrix radius at `angular_samples` equally spaced bearings from θ = 0,
    infinite where the trap confines."""
    table = np.full(angular_samples, np.inf)
    for k, theta in enumerate(2 * np.pi * np.arange(angular_samples) / angular_samples):
        try:
            table[k] = separatrix_radius(params, theta)
        except NoRoot:
            pass
    return table


def separatrix_limit(table: np.ndarray, theta):
    """Look up the tabulated separatrix radius nearest to bearing(s) `theta`."""
    samples = len(table)
    k = np.rint(np.mod(theta, 2 * np.pi) * samples / (2 * np.pi)).astype(int) % samples
    return table[k]


@dataclass
class SeparatrixContour:
    """Zero-force contour sampled at equally spaced bearings.

    Bearings where the trap confines at every radius are left out of `theta`/`rho`.
    """

    theta: np.ndarray
    rho: np.ndarray
    angular_samples: int

    @property
    def radius(self):
        return float(np.min(self.rho))

    def to_frame(self):
        return pd.DataFrame({"theta_rad": self.theta, "rho_over_l0": self.rho})


def separatrix_contour(params: PotentialParams, angular_samples=SEPARATRIX_SAMPLES):
    """Zero radial-force contour of the trap potential.

    Raises:
        ConfigInvalid: `V_W` is zero or `angular_samples` is not positive.
        NoRoot: no sampled bearing has a zero of the radial force.
    """
    if not params.V_W > 0:
        raise ConfigInvalid("A separatrix needs a positive wall strength V_W")
    if angular_samples < 1:
        raise ConfigInvalid(f"angular_samples must be positive, got {angular_samples}")
    table = separatrix_table(params, angular_samples)
    theta = 2 * np.pi * np.arange(angular_samples) / angular_samples
    mask = np.isfinite(table)
    if not mask.any():
        raise NoRoot("The radial trap force does not vanish along any sampled bearing")
    return SeparatrixContour(
        theta=theta[mask], rho=table[mask], angular_samples=angular_samples
    )
