import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform

from penningtools.couplings import (
    CouplingMatrix,
    DriveParams,
    alpha_curve,
    coupling_matrix,
    coupling_time_series,
    detuning_sweep,
    fit_power_law,
)
from penningtools.exceptions import (
    ConfigInvalid,
    InsufficientPairs,
    ResonantDrive,
    UnstableCrystal,
)
from penningtools.phonons import build_stiffness, solve_modes
from penningtools.potential import CrystalConfiguration


def two_mode_coupling(modes, mu):
    """Pair coupling of a two-ion crystal from its stretch and centre-of-mass modes."""
    stretch = modes.eigenvalues[0]
    return 0.25 * (0.5 / (mu**2 - 1.0) - 0.5 / (mu**2 - stretch))


def power_law_matrix(positions, alpha, J0=2.0):
    return CouplingMatrix(
        J0 * squareform(pdist(positions) ** (-alpha)), DriveParams.from_delta(0.1)
    )


def test_drive_params():
    drive = DriveParams.from_delta(0.01)
    assert drive.mu == pytest.approx(1.01)
    assert drive.delta == pytest.approx(0.01)
    with pytest.raises(ConfigInvalid):
        DriveParams.from_delta(0.0)
    with pytest.raises(ConfigInvalid):
        DriveParams(mu=-1.0)


@pytest.mark.parametrize("mu", [1.0001, 1.1, 2.0, 30.0])
def test_two_ion_coupling(two_ion_modes, mu):
    J = coupling_matrix(two_ion_modes, DriveParams(mu))
    expected = two_mode_coupling(two_ion_modes, mu)
    assert J.entries[0, 1] == pytest.approx(expected, rel=1e-9)
    assert J.entries[1, 0] == J.entries[0, 1]
    np.testing.assert_array_equal(np.diag(J.entries), 0.0)


def test_coupling_scales_with_force(two_ion_modes):
    J1 = coupling_matrix(two_ion_modes, DriveParams(1.1))
    J2 = coupling_matrix(two_ion_modes, DriveParams(1.1, F_O=3.0))
    assert J2.entries[0, 1] == pytest.approx(9 * J1.entries[0, 1], rel=1e-12)


def test_coupling_matrix_structure(small_modes):
    J = coupling_matrix(small_modes, DriveParams.from_delta(0.05)).entries
    np.testing.assert_array_equal(J, J.T)
    np.testing.assert_array_equal(np.diag(J), 0.0)


def test_small_detuning_gives_uniform_coupling(small_crystal, small_modes):
    delta = 1e-6
    J = coupling_matrix(small_modes, DriveParams.from_delta(delta)).pair_values()
    uniform = 0.25 / small_crystal.N / ((1 + delta) ** 2 - 1)
    np.testing.assert_allclose(J, uniform, rtol=1e-3)


def test_large_detuning_gives_dipolar_coupling(paper_crystal, paper_modes):
    mu = 1e3
    J = coupling_matrix(paper_modes, DriveParams(mu)).pair_values()
    dipolar = pdist(paper_crystal.positions) ** -3.0 / (4 * mu**4)
    np.testing.assert_allclose(J / dipolar, 1.0, rtol=1e-2)


def test_unstable_crystal_has_no_couplings():
    modes = solve_modes(build_stiffness(CrystalConfiguration([[-0.25, 0.0], [0.25, 0.0]])))
    with pytest.raises(UnstableCrystal):
        coupling_matrix(modes, DriveParams(1.1))


def test_resonant_drive(two_ion_modes):
    with pytest.raises(ResonantDrive):
        coupling_matrix(two_ion_modes, DriveParams(float(two_ion_modes.frequencies[0])))
    with pytest.raises(ResonantDrive):
        coupling_matrix(two_ion_modes, DriveParams(1.0 + 1e-10))


def test_time_series_at_origin(small_modes):
    drive = DriveParams.from_delta(0.1)
    series = coupling_time_series(small_modes, drive, [0.0])
    static = coupling_matrix(small_modes, drive).pair_values()
    np.testing.assert_allclose(series.values[0], 2 * static, rtol=1e-9)
    assert series.values.shape == (1, len(static))


def test_time_series_averages_to_static_coupling(two_ion_modes):
    delta = 0.1
    drive = DriveParams.from_delta(delta)
    period = 2 * np.pi / delta
    times = np.linspace(0, 200 * period, 250000, endpoint=False)
    series = coupling_time_series(two_ion_modes, drive, times)
    static = coupling_matrix(two_ion_modes, drive).entries[0, 1]
    assert series.values[:, 0].mean() == pytest.approx(static, rel=1e-2)


def test_time_series_single_ion():
    modes = solve_modes(build_stiffness(CrystalConfiguration([[0.0, 0.0]])))
    series = coupling_time_series(modes, DriveParams(1.1), np.linspace(0, 1, 5))
    assert series.values.shape == (5, 0)
    assert series.to_frame().empty


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 3.0])
def test_exact_power_law(paper_crystal, alpha):
    fit = fit_power_law(paper_crystal, power_law_matrix(paper_crystal.positions, alpha))
    assert fit.alpha == pytest.approx(alpha, abs=1e-9)
    assert fit.logJ0 == pytest.approx(np.log(2.0), abs=1e-9)
    assert fit.rmsd < 1e-9
    assert fit.linear_rmsd < 1e-9
    assert fit.pairs_used == 85 * 84 // 2
    assert fit.pairs_excluded == 0


def test_linear_residual_space(paper_crystal):
    J = power_law_matrix(paper_crystal.positions, 1.5)
    J.entries[0, 1] = J.entries[1, 0] = 5 * J.entries[0, 1]
    log_fit = fit_power_law(paper_crystal, J)
    linear_fit = fit_power_law(paper_crystal, J, residual_space="linear")
    assert log_fit.alpha == linear_fit.alpha
    assert linear_fit.rmsd == linear_fit.linear_rmsd
    assert log_fit.rmsd > 0
    with pytest.raises(ConfigInvalid):
        fit_power_law(paper_crystal, J, residual_space="cubic")


def test_non_positive_pairs_excluded():
    positions = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]])
    J = power_law_matrix(positions, 2.0)
    J.entries[0, 3] = J.entries[3, 0] = -0.1
    J.entries[1, 2] = J.entries[2, 1] = 0.0
    fit = fit_power_law(CrystalConfiguration(positions), J)
    assert fit.pairs_used == 4
    assert fit.pairs_excluded == 2
    assert fit.alpha == pytest.approx(2.0, abs=1e-9)


def test_insufficient_pairs():
    positions = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    J = power_law_matrix(positions, 2.0)
    J.entries[:] = -J.entries
    with pytest.raises(InsufficientPairs):
        fit_power_law(CrystalConfiguration(positions), J)

    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    J = power_law_matrix(square, 2.0)
    J.entries[0, 2] = J.entries[2, 0] = J.entries[1, 3] = J.entries[3, 1] = -1.0
    with pytest.raises(InsufficientPairs):
        fit_power_law(CrystalConfiguration(square), J)


def test_two_ion_fit(two_ion_crystal, two_ion_modes):
    J = coupling_matrix(two_ion_modes, DriveParams(1.1))
    fit = fit_power_law(two_ion_crystal, J)
    r = np.linalg.norm(two_ion_crystal.positions[0] - two_ion_crystal.positions[1])
    assert fit.alpha == pytest.approx(-np.log(J.entries[0, 1]) / np.log(r), rel=1e-12)
    assert fit.pairs_used == 1

    unit = CrystalConfiguration([[-0.5, 0.0], [0.5, 0.0]])
    with pytest.raises(InsufficientPairs):
        fit_power_law(unit, J)


def test_two_ion_alpha_curve(two_ion_crystal, two_ion_modes):
    deltas = np.logspace(-4, 2, 7)
    r = np.linalg.norm(two_ion_crystal.positions[0] - two_ion_crystal.positions[1])
    for delta, alpha in alpha_curve(two_ion_modes, two_ion_crystal, deltas):
        J = two_mode_coupling(two_ion_modes, 1 + delta)
        assert alpha == pytest.approx(-np.log(J) / np.log(r), rel=1e-8)


def test_sweep_normalization(small_crystal, small_modes):
    sweep = detuning_sweep(small_modes, small_crystal, "1e-4:1e2:13log", threads=2)
    normalized = sweep.normalized_rmsd
    assert len(sweep.fits) == 13
    assert np.all((normalized >= 0) & (normalized <= 1))
    assert np.max(normalized) == 1.0
    np.testing.assert_allclose(sweep.deltas, np.logspace(-4, 2, 13))
    frame = sweep.to_frame()
    assert list(frame.columns) == [
        "delta_over_omega_z",
        "alpha",
        "logJ0",
        "pairs_used",
        "pairs_excluded",
        "rmsd",
        "linear_rmsd",
        "normalized_rmsd",
    ]


def test_sweep_rejects_red_detuning(small_crystal, small_modes):
    with pytest.raises(ConfigInvalid):
        detuning_sweep(small_modes, small_crystal, [-1e-3, 1e-2])


def test_sweep_limits(paper_crystal, paper_modes):
    sweep = detuning_sweep(paper_modes, paper_crystal)
    alphas, normalized = sweep.alphas, sweep.normalized_rmsd
    assert len(sweep.fits) == 40
    assert alphas[0] < 0.05
    assert 2.9 <= alphas[-1] <= 3.001
    assert alphas[-1] > alphas[0]
    assert normalized[0] < 0.1
    assert normalized[-1] < 0.1
    assert 1e-4 <= sweep.deltas[np.argmax(normalized)] <= 1e1
    assert np.all(np.diff(alphas) > -0.05)
