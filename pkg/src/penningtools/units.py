"""Trap parameters, unit scales and operating-regime checks.

Everything downstream of this module works in dimensionless units: lengths in l0,
energies in E0 = m ω_z² l0² and frequencies in ω_z.
"""
import json
import warnings
from dataclasses import dataclass, field
from typing import Any, Dict, List, Union

import numpy as np
from scipy import constants

from penningtools.exceptions import ConfigInvalid, NonconfiningRotation, PlanarityWarning
from penningtools.log import loggers
from penningtools.utils import parse_grid

BERYLLIUM_MASS_AMU = 9.012182
ELEMENTARY_CHARGE = 1.60217646e-19
PLANARITY_THRESHOLD = 10.0
DEFAULT_COUPLING_DELTAS = [1e-6, 1e-3, 1e-1, 1e1, 1e3]
DEFAULT_DETUNING_GRID = "1e-6:1e3:40log"
RMSD_SPACES = ("log", "linear")
WALL_ORDERS = (2, 3)

_KNOWN_KEYS = {
    "omega_z_hz",
    "b_z_tesla",
    "omega_c_ratio",
    "omega_ratio",
    "omega_eff_ratio",
    "c4",
    "c4_tilde",
    "r_p_m",
    "v_w",
    "v_wall_volts",
    "n_ions",
    "mass_amu",
    "charge_c",
    "wall_order",
    "seed_spacing",
    "minimizer",
    "coupling_deltas",
    "detuning_grid",
    "rmsd_space",
    "threads",
}


@dataclass(frozen=True)
class DimensionlessScales:
    """Length and energy scales of the planar crystal problem.

    `l0 = (k_e e²/(m ω_z²))^(1/3)` is the distance at which the Coulomb repulsion of
    two ions balances the axial restoring force, and `E0 = m ω_z² l0²`.
    """

    l0: float
    E0: float
    mass_kg: float
    charge_c: float
    omega_z: float

    @classmethod
    def from_physical(cls, omega_z: float, mass_kg: float, charge_c: float):
        if omega_z <= 0 or mass_kg <= 0 or charge_c <= 0:
            raise ConfigInvalid(
                "omega_z, mass and charge must all be positive to define unit scales"
            )
        k_e = 1.0 / (4.0 * np.pi * constants.epsilon_0)
        l0 = (k_e * charge_c**2 / (mass_kg * omega_z**2)) ** (1.0 / 3.0)
        return cls(
            l0=l0,
            E0=mass_kg * omega_z**2 * l0**2,
            mass_kg=mass_kg,
            charge_c=charge_c,
            omega_z=omega_z,
        )


@dataclass
class TrapConfig:
    """Physical and dimensionless trap parameters.

    Frequencies `omega_c` and `Omega` are stored as ratios to `omega_z`; the
    `*_rad_s` properties give them back in rad/s.
    """

    omega_z: float
    omega_c: float
    Omega: float
    C4: float
    V_W: float
    N: int
    r_p: Union[float, None] = None
    mass_amu: float = BERYLLIUM_MASS_AMU
    charge_c: float = ELEMENTARY_CHARGE
    wall_order: int = 3
    seed_spacing: Union[float, None] = None
    minimizer: Dict[str, Any] = field(default_factory=dict)
    coupling_deltas: List[float] = field(
        default_factory=lambda: list(DEFAULT_COUPLING_DELTAS)
    )
    detuning_grid: str = DEFAULT_DETUNING_GRID
    rmsd_space: str = "log"
    threads: int = 1

    def __post_init__(self):
        if self.omega_z <= 0:
            raise ConfigInvalid(f"omega_z must be positive, got {self.omega_z}")
        if self.omega_c <= 0:
            raise ConfigInvalid(f"omega_c must be positive, got {self.omega_c}")
        if self.Omega <= 0:
            raise ConfigInvalid(f"Omega must be positive, got {self.Omega}")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigInvalid(f"n_ions must be a positive integer, got {self.N}")
        self.N = int(self.N)
        if self.C4 < 0:
            raise ConfigInvalid(f"c4 must be non-negative, got {self.C4}")
        if self.V_W < 0:
            raise ConfigInvalid(f"v_w must be non-negative, got {self.V_W}")
        if self.wall_order not in WALL_ORDERS:
            raise ConfigInvalid(
                f"wall_order must be one of {WALL_ORDERS}, got {self.wall_order}"
            )
        if self.seed_spacing is not None and self.seed_spacing <= 0:
            raise ConfigInvalid(
                f"seed_spacing must be positive, got {self.seed_spacing}"
            )
        if self.rmsd_space not in RMSD_SPACES:
            raise ConfigInvalid(
                f"rmsd_space must be one of {RMSD_SPACES}, got '{self.rmsd_space}'"
            )
        if any(delta <= 0 for delta in self.coupling_deltas):
            raise ConfigInvalid("coupling_deltas must all be positive (blue detuning)")
        if int(self.threads) < 1:
            raise ConfigInvalid(f"threads must be at least 1, got {self.threads}")
        self.threads = int(self.threads)

    @property
    def mass_kg(self):
        return self.mass_amu * constants.atomic_mass

    @property
    def omega_c_rad_s(self):
        return self.omega_c * self.omega_z

    @property
    def Omega_rad_s(self):
        return self.Omega * self.omega_z

    @property
    def omega_eff(self):
        return effective_frequency(self)

    @property
    def scales(self):
        return DimensionlessScales.from_physical(
            self.omega_z, self.mass_kg, self.charge_c
        )

    def delta_grid(self) -> np.ndarray:
        grid = parse_grid(self.detuning_grid)
        if np.any(grid <= 0):
            raise ConfigInvalid("detuning_grid must contain only positive detunings")
        return grid

    def potential_params(self):
        from penningtools.potential import PotentialParams

        return PotentialParams(
            omega_eff=self.omega_eff,
            C4=self.C4,
            V_W=self.V_W,
            wall_order=self.wall_order,
        )

    @classmethod
    def from_dict(cls, document: Dict[str, Any]):
        """Build and validate a configuration from a JSON-style document.

        Raises:
            ConfigInvalid: unknown, missing or contradictory keys, or values outside
                their domain.
            NonconfiningRotation: the rotation frequency gives no real effective
                trapping frequency.
        """
        unknown = sorted(set(document) - _KNOWN_KEYS)
        if unknown:
            raise ConfigInvalid(f"Unknown configuration keys: {', '.join(unknown)}")

        def require(key):
            if key not in document:
                raise ConfigInvalid(f"Missing required configuration key '{key}'")
            return document[key]

        def exactly_one(*keys):
            present = [key for key in keys if key in document]
            if len(present) != 1:
                raise ConfigInvalid(
                    f"Exactly one of {', '.join(keys)} must be given, got "
                    f"{', '.join(present) if present else 'none'}"
                )
            return present[0]

        omega_z = 2 * np.pi * float(require("omega_z_hz"))
        mass_amu = float(document.get("mass_amu", BERYLLIUM_MASS_AMU))
        charge_c = float(document.get("charge_c", ELEMENTARY_CHARGE))
        scales = DimensionlessScales.from_physical(
            omega_z, mass_amu * constants.atomic_mass, charge_c
        )
        r_p = document.get("r_p_m")

        if exactly_one("b_z_tesla", "omega_c_ratio") == "b_z_tesla":
            b_z = float(document["b_z_tesla"])
            if b_z <= 0:
                raise ConfigInvalid(f"b_z_tesla must be positive, got {b_z}")
            omega_c = charge_c * b_z / scales.mass_kg / omega_z
        else:
            omega_c = float(document["omega_c_ratio"])
            if omega_c <= 0:
                raise ConfigInvalid(f"omega_c_ratio must be positive, got {omega_c}")

        if exactly_one("omega_ratio", "omega_eff_ratio") == "omega_ratio":
            Omega = float(document["omega_ratio"])
        else:
            Omega = rotation_for_effective_frequency(
                omega_c, float(document["omega_eff_ratio"])
            )

        if exactly_one("c4", "c4_tilde") == "c4":
            C4 = float(document["c4"])
        else:
            if r_p is None:
                raise ConfigInvalid("'c4_tilde' requires 'r_p_m'")
            C4 = convert_anharmonic(float(document["c4_tilde"]), float(r_p), scales)

        if exactly_one("v_w", "v_wall_volts") == "v_w":
            V_W = float(document["v_w"])
        else:
            if r_p is None:
                raise ConfigInvalid("'v_wall_volts' requires 'r_p_m'")
            V_W = convert_wall(float(document["v_wall_volts"]), float(r_p), scales)

        config = cls(
            omega_z=omega_z,
            omega_c=omega_c,
            Omega=Omega,
            C4=C4,
            V_W=V_W,
            N=require("n_ions"),
            r_p=None if r_p is None else float(r_p),
            mass_amu=mass_amu,
            charge_c=charge_c,
            wall_order=int(document.get("wall_order", 3)),
            seed_spacing=document.get("seed_spacing"),
            minimizer=dict(document.get("minimizer", {})),
            coupling_deltas=[
                float(el)
                for el in document.get("coupling_deltas", DEFAULT_COUPLING_DELTAS)
            ],
            detuning_grid=document.get("detuning_grid", DEFAULT_DETUNING_GRID),
            rmsd_space=document.get("rmsd_space", "log"),
            threads=document.get("threads", 1),
        )
        # Fails with the criterion named when the rotation is non-confining.
        effective_frequency(config)
        config.delta_grid()
        return config

    @classmethod
    def read_json(cls, file):
        try:
            with open(file, "r") as f:
                document = json.load(f)
        except FileNotFoundError:
            raise ConfigInvalid(f"Configuration file {file} does not exist")
        except json.JSONDecodeError as e:
            raise ConfigInvalid(f"Configuration file {file} is not valid JSON: {e}")
        if not isinstance(document, dict):
            raise ConfigInvalid(f"Configuration file {file} must hold a JSON object")
        return cls.from_dict(document)

    def to_dict(self):
        document = dict(
            omega_z_hz=self.omega_z / (2 * np.pi),
            omega_c_ratio=self.omega_c,
            omega_ratio=self.Omega,
            c4=self.C4,
            v_w=self.V_W,
            n_ions=self.N,
            mass_amu=self.mass_amu,
            charge_c=self.charge_c,
            wall_order=self.wall_order,
            minimizer=dict(self.minimizer),
            coupling_deltas=list(self.coupling_deltas),
            detuning_grid=self.detuning_grid,
            rmsd_space=self.rmsd_space,
            threads=self.threads,
        )
        if self.r_p is not None:
            document["r_p_m"] = self.r_p
        if self.seed_spacing is not None:
            document["seed_spacing"] = self.seed_spacing
        return document

    def to_json(self, file):
        with open(file, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


def _omega_eff_squared(omega_c: float, Omega: float) -> float:
    return omega_c * Omega - Omega**2 - 0.5


def effective_frequency(config: TrapConfig) -> float:
    """Effective radial trapping frequency in the rotating frame, in units of ω_z.

    Raises:
        NonconfiningRotation: `ω_c Ω − Ω² − 1/2 ≤ 0`.
    """
    value = _omega_eff_squared(config.omega_c, config.Omega)
    if value <= 0:
        raise NonconfiningRotation(
            f"Rotation is not confining: omega_c*Omega - Omega^2 - 1/2 = {value:.6g} <= 0 "
            f"(omega_c = {config.omega_c:.6g}, Omega = {config.Omega:.6g} in units of omega_z)"
        )
    return float(np.sqrt(value))


def rotation_for_effective_frequency(omega_c: float, omega_eff: float) -> float:
    """Slower of the two rotation frequencies giving `omega_eff`, in units of ω_z."""
    if omega_eff <= 0:
        raise ConfigInvalid(f"omega_eff_ratio must be positive, got {omega_eff}")
    discriminant = omega_c**2 - 4 * (omega_eff**2 + 0.5)
    if discriminant < 0:
        raise NonconfiningRotation(
            f"No rotation frequency reaches omega_eff = {omega_eff:.6g} with "
            f"omega_c = {omega_c:.6g}: omega_c^2 - 4(omega_eff^2 + 1/2) < 0"
        )
    return float((omega_c - np.sqrt(discriminant)) / 2)


def planar_confinement_ratio(config: TrapConfig) -> float:
    """Ratio of axial to radial confinement, `1/ω_eff²` in dimensionless units.

    A planar crystal needs this to be much larger than one.
    """
    return 1.0 / effective_frequency(config) ** 2


def check_planarity(config: TrapConfig, threshold=PLANARITY_THRESHOLD, logger=None):
    """Warns with `PlanarityWarning` when the planar confinement ratio is below
    `threshold`. Returns the ratio."""
    logger = logger or loggers.current
    ratio = planar_confinement_ratio(config)
    if ratio < threshold:
        msg = (
            f"Planar confinement ratio {ratio:.4g} is below {threshold:g}; "
            "the crystal may not stay in a single plane."
        )
        logger.warning(msg)
        warnings.warn(msg, PlanarityWarning)
    return ratio


def convert_anharmonic(C4_tilde: float, r_p: float, scales: DimensionlessScales):
    """Dimensionless quartic strength `C4 = 3 l0² C̃4 / (8 r_p²)`."""
    if r_p <= 0:
        raise ConfigInvalid(f"r_p_m must be positive, got {r_p}")
    return 3 * scales.l0**2 * C4_tilde / (8 * r_p**2)


def convert_wall(V_wall: float, r_p: float, scales: DimensionlessScales):
    """Dimensionless wall strength from a wall potential in volts.

    `V_W = e V_wall l0 / (m ω_z² r_p³)`, in units of ω_z².
    """
    if r_p <= 0:
        raise ConfigInvalid(f"r_p_m must be positive, got {r_p}")
    return scales.charge_c * V_wall * scales.l0**3 / (scales.E0 * r_p**3)
