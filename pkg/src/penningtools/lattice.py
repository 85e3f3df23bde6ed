"""Closed-shell triangular seed lattices."""
from dataclasses import dataclass
from typing import Union

import numpy as np
import pandas as pd

from penningtools.exceptions import ConfigInvalid
from penningtools.log import loggers
from penningtools.potential import (
    CrystalConfiguration,
    PotentialParams,
    as_positions,
    single_ion_energy,
)

# Lattice directions at 0, 120 and 240 degrees; shell s is the triangle with
# vertices s * e_k.
_DIRECTIONS = np.array(
    [[np.cos(2 * np.pi * k / 3), np.sin(2 * np.pi * k / 3)] for k in range(3)]
)
_TIE_TOLERANCE = 1e-12


@dataclass
class SeedLattice:
    positions: np.ndarray
    shell_index: np.ndarray
    complete: bool
    spacing: Union[float, None] = None

    def __post_init__(self):
        self.positions = as_positions(self.positions)
        self.shell_index = np.asarray(self.shell_index, dtype=int)
        if len(self.shell_index) != len(self.positions):
            raise ValueError("shell_index must have one entry per ion")

    @property
    def N(self):
        return self.positions.shape[0]

    def configuration(self):
        return CrystalConfiguration(self.positions.copy())

    def to_frame(self):
        return pd.DataFrame(
            {
                "index": np.arange(self.N),
                "x_over_l0": self.positions[:, 0],
                "y_over_l0": self.positions[:, 1],
                "shell": self.shell_index,
            }
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame):
        frame = frame.sort_values("index")
        positions = frame[["x_over_l0", "y_over_l0"]].to_numpy(dtype=float)
        if "shell" in frame:
            shell_index = frame["shell"].to_numpy(dtype=int)
        else:
            shell_index = np.full(len(frame), -1)
        n = len(frame)
        return cls(positions, shell_index, complete=closed_shell_count(shell_count(n)) == n)


def closed_shell_count(S: int) -> int:
    """Number of ions in a lattice of S complete shells around a central ion."""
    return 1 + 3 * S * (S + 1) // 2


def shell_count(N: int) -> int:
    """Number of complete shells that fit in N ions,
    `floor(sqrt(2(N−1)/3 + 1/4) − 1/2)`."""
    if N < 1:
        raise ConfigInvalid(f"Ion count must be at least 1, got {N}")
    S = int(np.floor(np.sqrt(2 * (N - 1) / 3 + 0.25) - 0.5))
    # Guard the float estimate at exact closed-shell counts.
    while closed_shell_count(S + 1) <= N:
        S += 1
    while S > 0 and closed_shell_count(S) > N:
        S -= 1
    return S


def shell_sites(s: int) -> np.ndarray:
    """Unit-spacing sites of triangular shell `s`, starting at the vertex on +x and
    running counter-clockwise."""
    if s == 0:
        return np.zeros((1, 2))
    sites = [
        (s - j) * _DIRECTIONS[k] + j * _DIRECTIONS[(k + 1) % 3]
        for k in range(3)
        for j in range(s)
    ]
    return np.array(sites)


def default_spacing(N: int, omega_eff: float) -> float:
    """Lattice spacing that puts the outermost shell vertex at the mean-field radius
    `(sqrt(N)/ω_eff²)^(1/3)`."""
    rho_mf = (np.sqrt(N) / omega_eff**2) ** (1.0 / 3.0)
    return rho_mf / max(shell_count(N), 1)


def _polar_angle(points):
    return np.mod(np.arctan2(points[..., 1], points[..., 0]), 2 * np.pi)


def _pick(costs, angles):
    """Index of the lowest cost, ties going to the smallest polar angle."""
    best = np.min(costs)
    ties = np.nonzero(costs - best <= _TIE_TOLERANCE * max(1.0, abs(best)))[0]
    return int(ties[np.argmin(angles[ties])])


def build_seed(
    N: int,
    spacing: Union[float, None] = None,
    params: Union[PotentialParams, None] = None,
    logger=None,
) -> SeedLattice:
    """Closed-shell triangular seed for N ions.

    Complete shells 0..S are filled; any leftover ions go one at a time onto shell
    S+1, each onto the free site that raises the energy (trap plus Coulomb with the
    ions already placed) the least.

    Args:
        N: Number of ions.
        spacing: Lattice spacing in units of l0. Defaults to `default_spacing`.
        params: Potential used to rank leftover sites. Defaults to an isotropic
            harmonic trap with `omega_eff = 1`.
        logger: Logger. Defaults to `loggers.current`.
    """
    logger = logger or loggers.current
    params = params or PotentialParams(omega_eff=1.0)
    if spacing is None:
        spacing = default_spacing(N, params.omega_eff)
    if not spacing > 0:
        raise ConfigInvalid(f"Seed spacing must be positive, got {spacing}")
    S = shell_count(N)
    shells = [shell_sites(s) * spacing for s in range(S + 1)]
    positions = np.concatenate(shells)
    shell_index = np.concatenate([np.full(len(sites), s) for s, sites in enumerate(shells)])

    leftover = N - len(positions)
    if leftover:
        candidates = shell_sites(S + 1) * spacing
        angles = _polar_angle(candidates)
        free = np.ones(len(candidates), dtype=bool)
        trap = single_ion_energy(params, candidates)
        for _ in range(leftover):
            rest = np.nonzero(free)[0]
            separations = np.linalg.norm(
                candidates[rest, None, :] - positions[None, :, :], axis=-1
            )
            costs = trap[rest] + np.sum(1.0 / separations, axis=1)
            choice = rest[_pick(costs, angles[rest])]
            free[choice] = False
            positions = np.vstack([positions, candidates[choice]])
            shell_index = np.append(shell_index, S + 1)
        logger.info(f"Placed {leftover} leftover ions on shell {S + 1}")
    logger.info(f"Built seed of {N} ions in {S} complete shells, spacing {spacing:.6g} l0")
    return SeedLattice(positions, shell_index, complete=leftover == 0, spacing=spacing)


def build_circular_seed(N: int, spacing: float) -> SeedLattice:
    """Triangular lattice cropped by a circle: the N sites nearest the origin, ties
    ordered by polar angle. `shell_index` holds the hexagonal ring of each site."""
    if N < 1:
        raise ConfigInvalid(f"Ion count must be at least 1, got {N}")
    if not spacing > 0:
        raise ConfigInvalid(f"Seed spacing must be positive, got {spacing}")
    R = int(np.ceil(np.sqrt(N))) + 2
    m, n = np.meshgrid(np.arange(-R, R + 1), np.arange(-R, R + 1), indexing="ij")
    m, n = m.ravel(), n.ravel()
    sites = m[:, None] * _DIRECTIONS[0] + n[:, None] * _DIRECTIONS[1]
    radius = np.round(np.hypot(sites[:, 0], sites[:, 1]), 9)
    order = np.lexsort((_polar_angle(sites), radius))[:N]
    # Hexagonal ring number in axial lattice coordinates.
    rings = np.maximum.reduce([np.abs(m), np.abs(n), np.abs(m - n)])[order]
    return SeedLattice(
        sites[order] * spacing, rings, complete=False, spacing=float(spacing)
    )
