"""Equilibrium crystals: minimization of the planar potential from a seed lattice."""
from dataclasses import asdict, dataclass
from typing import Union

import numpy as np
import pandas as pd
from scipy import optimize
from scipy.spatial import Delaunay

try:
    from scipy.spatial import QhullError
except ImportError:  # scipy < 1.8
    from scipy.spatial.qhull import QhullError

from penningtools.exceptions import (
    ConfigInvalid,
    DegenerateGeometry,
    DivergedOutsideSeparatrix,
)
from penningtools.lattice import SeedLattice, build_circular_seed, default_spacing
from penningtools.log import loggers
from penningtools.potential import (
    CrystalConfiguration,
    PotentialParams,
    as_positions,
    energy,
    gradient,
    hessian,
    separatrix_limit,
    separatrix_table,
)

METHODS = ("trust-exact", "trust-constr", "descent")
QUADRUPOLE_OMEGA_EFF = 0.06
ENERGY_ROUNDING = 1e-12


@dataclass
class MinimizerSettings:
    """Minimizer controls.

    `initial_trust_radius` and `max_trust_radius` bound the trust-region steps;
    `shrink_factor` and `grow_factor` scale the step length of the backtracking
    descent.
    """

    gradient_tolerance: float = 1e-10
    max_iterations: int = 100000
    method: str = "trust-exact"
    initial_trust_radius: float = 1.0
    max_trust_radius: float = 100.0
    shrink_factor: float = 0.5
    grow_factor: float = 1.5
    polish_iterations: int = 50
    deconfinement_fraction: float = 0.95
    separatrix_samples: int = 720

    def __post_init__(self):
        if not self.gradient_tolerance > 0:
            raise ConfigInvalid(
                f"gradient_tolerance must be positive, got {self.gradient_tolerance}"
            )
        if self.max_iterations < 1:
            raise ConfigInvalid(
                f"max_iterations must be at least 1, got {self.max_iterations}"
            )
        if self.method not in METHODS:
            raise ConfigInvalid(
                f"Unknown minimizer method '{self.method}', expected one of {METHODS}"
            )
        if not 0 < self.shrink_factor < 1 or not self.grow_factor >= 1:
            raise ConfigInvalid("Need 0 < shrink_factor < 1 <= grow_factor")
        if not 0 < self.initial_trust_radius <= self.max_trust_radius:
            raise ConfigInvalid("Need 0 < initial_trust_radius <= max_trust_radius")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, document):
        unknown = set(document) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigInvalid(
                f"Unknown minimizer settings: {', '.join(sorted(unknown))}"
            )
        return cls(**document)


class _DeconfinementGuard:
    """Aborts a minimization once any ion passes `fraction` of the separatrix radius
    along its own bearing."""

    def __init__(self, params: PotentialParams, settings: MinimizerSettings):
        self.fraction = settings.deconfinement_fraction
        if params.V_W > 0:
            self.table = separatrix_table(params, settings.separatrix_samples)
        else:
            self.table = None

    def __call__(self, xk, *_):
        if self.table is None:
            return
        positions = as_positions(xk)
        rho = np.hypot(positions[:, 0], positions[:, 1])
        theta = np.arctan2(positions[:, 1], positions[:, 0])
        limit = self.fraction * separatrix_limit(self.table, theta)
        outside = np.nonzero(rho > limit)[0]
        if outside.size:
            i = int(outside[np.argmax(rho[outside] / limit[outside])])
            raise DivergedOutsideSeparatrix(
                f"Ion {i} reached rho = {rho[i]:.6g} l0, beyond {self.fraction:g} of the "
                f"separatrix radius {limit[i] / self.fraction:.6g} l0 along its bearing",
                ion_index=i,
                rho=float(rho[i]),
                limit=float(limit[i] / self.fraction),
            )


def _gradient_norm(params, x):
    return float(np.max(np.abs(gradient(params, x))))


def _descent(params, x, settings, callback):
    """Backtracking steepest descent with an Armijo condition."""
    step = settings.initial_trust_radius
    e = energy(params, x)
    for k in range(settings.max_iterations):
        g = gradient(params, x)
        if np.max(np.abs(g)) <= settings.gradient_tolerance:
            return x, k
        g2 = float(g @ g)
        while True:
            x_new = x - step * g
            e_new = energy(params, x_new)
            if e_new <= e - 1e-4 * step * g2 or step < 1e-16:
                break
            step *= settings.shrink_factor
        if e_new > e:
            # No descent possible at working precision.
            return x, k
        x, e = x_new, e_new
        callback(x)
        step = min(step * settings.grow_factor, settings.max_trust_radius)
    return x, settings.max_iterations


def _polish(params, x, settings, callback):
    """Newton iterations on the analytic Hessian.

    A step is kept while the gradient norm shrinks and the energy does not rise by
    more than `ENERGY_ROUNDING` relative.
    """
    g = gradient(params, x)
    e = energy(params, x)
    norm = np.max(np.abs(g))
    iterations = 0
    while norm > settings.gradient_tolerance and iterations < settings.polish_iterations:
        step = np.linalg.lstsq(hessian(params, x), g, rcond=1e-12)[0]
        x_new = x - step
        g_new = gradient(params, x_new)
        norm_new = np.max(np.abs(g_new))
        e_new = energy(params, x_new)
        if not norm_new < norm or e_new > e + ENERGY_ROUNDING * abs(e):
            break
        x, g, e, norm = x_new, g_new, e_new, norm_new
        callback(x)
        iterations += 1
    return x, iterations


def minimize(
    params: PotentialParams,
    seed: Union[SeedLattice, CrystalConfiguration, np.ndarray],
    settings: Union[MinimizerSettings, None] = None,
    logger=None,
) -> CrystalConfiguration:
    """Relax a seed configuration to a local minimum of the potential.

    Args:
        params: Potential parameters.
        seed: Starting positions.
        settings: Minimizer settings. Defaults to `MinimizerSettings()`.
        logger: Logger. Defaults to `loggers.current`.

    Returns:
        The relaxed configuration. `converged` is False when the gradient tolerance
        was not reached within the iteration budget; the positions are then the best
        found.

    Raises:
        DivergedOutsideSeparatrix: an ion left the confining region during the
            minimization.
    """
    logger = logger or loggers.current
    settings = settings or MinimizerSettings()
    positions = seed.positions if hasattr(seed, "positions") else seed
    x0 = as_positions(positions).ravel().copy()
    n = len(x0) // 2
    guard = _DeconfinementGuard(params, settings)
    guard(x0)

    if n == 1:
        # A single ion sits at the trap centre.
        x, iterations = np.zeros(2), 0
    elif settings.method == "trust-exact":
        result = optimize.minimize(
            lambda x: energy(params, x),
            x0,
            method="trust-exact",
            jac=lambda x: gradient(params, x),
            hess=lambda x: hessian(params, x),
            callback=guard,
            options=dict(
                gtol=settings.gradient_tolerance,
                maxiter=settings.max_iterations,
                initial_trust_radius=settings.initial_trust_radius,
                max_trust_radius=settings.max_trust_radius,
            ),
        )
        x, iterations = result.x, int(result.nit)
        logger.info(f"trust-exact finished after {iterations} iterations: {result.message}")
    elif settings.method == "trust-constr":
        result = optimize.minimize(
            lambda x: energy(params, x),
            x0,
            method="trust-constr",
            jac=lambda x: gradient(params, x),
            hess=optimize.BFGS(),
            callback=guard,
            options=dict(
                gtol=settings.gradient_tolerance,
                xtol=1e-16,
                maxiter=settings.max_iterations,
                initial_tr_radius=settings.initial_trust_radius,
            ),
        )
        x, iterations = result.x, int(result.nit)
        logger.info(f"trust-constr finished after {iterations} iterations: {result.message}")
    else:
        x, iterations = _descent(params, x0, settings, guard)
        logger.info(f"Gradient descent finished after {iterations} iterations")

    if n > 1:
        x, polished = _polish(params, x, settings, guard)
        iterations += polished

    norm = _gradient_norm(params, x)
    converged = norm <= settings.gradient_tolerance
    if not converged:
        logger.warning(
            f"Minimization of {n} ions stopped at gradient norm {norm:.3g} "
            f"(tolerance {settings.gradient_tolerance:g})"
        )
    return CrystalConfiguration(
        x.reshape(-1, 2),
        energy=energy(params, x),
        gradient_norm=norm,
        converged=converged,
        iterations=iterations,
        params=params,
    )


def perturb(seed: SeedLattice, amplitude=0.05, rng=None) -> SeedLattice:
    """Copy of `seed` with every coordinate shifted by uniform noise in
    `[-amplitude, amplitude]` (units l0)."""
    rng = np.random.default_rng(rng)
    noise = rng.uniform(-amplitude, amplitude, size=seed.positions.shape)
    return SeedLattice(
        seed.positions + noise, seed.shell_index.copy(), seed.complete, seed.spacing
    )


@dataclass
class NeighborTable:
    """Delaunay nearest-neighbour distances.

    `frame` has one row per directed neighbour pair, so every edge appears twice;
    the mean and (population) variance are the same as over unique edges.
    """

    frame: pd.DataFrame

    @property
    def edges(self):
        return self.frame[self.frame.ion_index < self.frame.neighbor_index]

    @property
    def mean(self):
        return float(self.frame.distance_over_l0.mean())

    @property
    def variance(self):
        return float(self.frame.distance_over_l0.var(ddof=0))


def nearest_neighbor_distances(config: CrystalConfiguration) -> NeighborTable:
    """Distances from every ion to the ions sharing a Delaunay edge with it.

    Raises:
        DegenerateGeometry: fewer than three ions, or all ions on one line.
    """
    positions = config.positions
    if len(positions) < 3:
        raise DegenerateGeometry(
            f"Delaunay triangulation needs at least 3 ions, got {len(positions)}"
        )
    if np.linalg.matrix_rank(positions - positions.mean(axis=0), tol=1e-9) < 2:
        raise DegenerateGeometry("All ions are collinear")
    try:
        triangulation = Delaunay(positions)
    except QhullError as e:
        raise DegenerateGeometry(f"Delaunay triangulation failed: {e}")
    simplices = triangulation.simplices
    edges = np.concatenate([simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [0, 2]]])
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    directed = np.concatenate([edges, edges[:, ::-1]])
    directed = directed[np.lexsort((directed[:, 1], directed[:, 0]))]
    i, j = directed[:, 0], directed[:, 1]
    return NeighborTable(
        pd.DataFrame(
            {
                "ion_index": i,
                "neighbor_index": j,
                "rho_over_l0": np.hypot(positions[i, 0], positions[i, 1]),
                "distance_over_l0": np.linalg.norm(positions[i] - positions[j], axis=1),
            }
        )
    )


def quadrupole_parameters(omega_eff=QUADRUPOLE_OMEGA_EFF) -> PotentialParams:
    """Quadrupole-wall comparison trap: harmonic confinement only and a wall of a
    quarter of the radial curvature."""
    return PotentialParams(
        omega_eff=omega_eff, C4=0.0, V_W=omega_eff**2 / 4, wall_order=2
    )


def quadrupole_comparison(
    N: int,
    omega_eff=QUADRUPOLE_OMEGA_EFF,
    settings: Union[MinimizerSettings, None] = None,
    logger=None,
) -> CrystalConfiguration:
    """Equilibrium of the quadrupole-wall comparison trap, seeded from a circularly
    cropped triangular lattice."""
    params = quadrupole_parameters(omega_eff)
    seed = build_circular_seed(N, default_spacing(N, omega_eff))
    return minimize(params, seed, settings, logger=logger)
