import numpy as np
import pytest
from scipy.spatial.distance import cdist, pdist

from penningtools.exceptions import ConfigInvalid
from penningtools.lattice import (
    build_circular_seed,
    build_seed,
    closed_shell_count,
    default_spacing,
    shell_count,
    shell_sites,
)
from penningtools.persistence import read_seed, write_seed
from penningtools.potential import PotentialParams, single_ion_energy
from penningtools.utils import rotate


@pytest.mark.parametrize("N,S", [(1, 0), (3, 0), (4, 1), (9, 1), (10, 2), (85, 7), (86, 7)])
def test_shell_count(N, S):
    assert shell_count(N) == S


def test_shell_count_inverts_closed_shells():
    for S in range(30):
        N = closed_shell_count(S)
        assert shell_count(N) == S
        assert shell_count(N + 1) == S
        if S:
            assert shell_count(N - 1) == S - 1
    assert closed_shell_count(7) == 85


def test_shell_count_rejects_empty():
    with pytest.raises(ConfigInvalid):
        shell_count(0)


@pytest.mark.parametrize("s", range(1, 8))
def test_shell_sites(s):
    sites = shell_sites(s)
    assert len(sites) == 3 * s
    np.testing.assert_allclose(sites[0], [s, 0.0], atol=1e-12)
    assert pdist(sites).min() == pytest.approx(1.0)


@pytest.mark.parametrize("N", [1, 4, 10, 19, 31, 46, 64, 85])
def test_closed_shell_seed_is_triangle_symmetric(N):
    seed = build_seed(N, spacing=1.3)
    assert seed.complete
    assert seed.N == N
    rotated = rotate(seed.positions, 2 * np.pi / 3)
    assert cdist(rotated, seed.positions).min(axis=1).max() < 1e-9


def test_four_ion_seed():
    seed = build_seed(4, spacing=2.0)
    np.testing.assert_allclose(seed.positions[0], [0.0, 0.0])
    np.testing.assert_allclose(np.hypot(*seed.positions[1:].T), 2.0)
    np.testing.assert_allclose(pdist(seed.positions[1:]), 2.0 * np.sqrt(3))


def test_vertex_on_x_axis():
    seed = build_seed(85, spacing=1.0)
    outer = seed.positions[np.argmax(seed.positions[:, 0])]
    np.testing.assert_allclose(outer, [7.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("N", [2, 5, 6, 12, 50, 85, 90])
def test_seed_minimum_separation(N):
    spacing = 0.8
    seed = build_seed(N, spacing=spacing)
    assert seed.N == N
    if N > 1:
        assert pdist(seed.positions).min() >= 0.5 * spacing
    counts = np.bincount(seed.shell_index)
    S = shell_count(N)
    for s in range(1, S + 1):
        assert counts[s] == 3 * s


@pytest.mark.parametrize("N", [5, 6, 8])
def test_leftover_ions_placed_greedily(N):
    params = PotentialParams(omega_eff=0.25, C4=0.002472, V_W=0.0025)
    spacing = 1.5
    seed = build_seed(N, spacing=spacing, params=params)
    assert not seed.complete
    candidates = shell_sites(2) * spacing
    n_closed = closed_shell_count(1)
    for k in range(n_closed, N):
        placed = seed.positions[:k]
        free = [
            c for c in candidates if cdist(c[None], seed.positions[:k]).min() > 1e-9
        ]
        free = np.array(free)
        costs = single_ion_energy(params, free) + np.sum(1.0 / cdist(free, placed), axis=1)
        chosen = single_ion_energy(params, seed.positions[k : k + 1])[0] + np.sum(
            1.0 / np.linalg.norm(placed - seed.positions[k], axis=1)
        )
        assert chosen <= costs.min() + 1e-9


def test_default_spacing():
    N, omega_eff = 85, 0.25
    spacing = default_spacing(N, omega_eff)
    seed = build_seed(N, params=PotentialParams(omega_eff=omega_eff))
    assert seed.spacing == pytest.approx(spacing)
    assert np.max(np.hypot(*seed.positions.T)) == pytest.approx(
        (np.sqrt(N) / omega_eff**2) ** (1 / 3)
    )


def test_seed_rejects_bad_spacing():
    with pytest.raises(ConfigInvalid):
        build_seed(10, spacing=0.0)


@pytest.mark.parametrize("N", [1, 7, 20, 85])
def test_circular_seed(N):
    seed = build_circular_seed(N, 1.1)
    assert seed.N == N
    radii = np.hypot(*seed.positions.T)
    assert radii[0] == 0
    assert np.all(np.diff(np.round(radii, 9)) >= 0)
    if N > 1:
        assert pdist(seed.positions).min() == pytest.approx(1.1)


def test_circular_seed_first_ring():
    seed = build_circular_seed(7, 1.0)
    np.testing.assert_array_equal(seed.shell_index, [0, 1, 1, 1, 1, 1, 1])
    np.testing.assert_allclose(np.hypot(*seed.positions[1:].T), 1.0)


def test_seed_csv_round_trip(tmp_path):
    seed = build_seed(12, spacing=1.2)
    path = write_seed(seed, str(tmp_path / "seed.csv"))
    reread = read_seed(path)
    np.testing.assert_allclose(reread.positions, seed.positions, rtol=1e-11, atol=1e-12)
    np.testing.assert_array_equal(reread.shell_index, seed.shell_index)
    assert reread.complete == seed.complete
