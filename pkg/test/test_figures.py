import json
import os

import pandas as pd
import pytest
from conftest import trap_document

from penningtools.exceptions import MissingUpstream, UnknownFigure
from penningtools.figures import (
    FIGURE_IDS,
    SEPARATRIX_STRENGTHS,
    SPECTRUM_OMEGA_EFF,
    STRUCTURE_OMEGA_EFF,
    WALL_STRENGTHS,
    emit_figure_data,
)
from penningtools.pipeline import RunManifest, run_pipeline


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("figures")
    config = root / "trap.json"
    config.write_text(
        json.dumps(
            trap_document(
                n_ions=10, detuning_grid="1e-4:1e2:7log", coupling_deltas=[1e-3, 1e1]
            )
        )
    )
    return run_pipeline(str(config), str(root / "run"))


@pytest.fixture
def empty_manifest(tmp_path):
    manifest = RunManifest(config=trap_document(n_ions=10), out_dir=str(tmp_path))
    return manifest


def names(paths):
    return sorted(os.path.basename(path) for path in paths)


def test_unknown_figure(small_run):
    with pytest.raises(UnknownFigure):
        emit_figure_data(small_run, "fig9")


@pytest.mark.parametrize("figure_id", ["fig3", "fig6", "fig8"])
def test_missing_upstream(empty_manifest, figure_id):
    with pytest.raises(MissingUpstream):
        emit_figure_data(empty_manifest, figure_id)


def test_fig1(empty_manifest):
    written = emit_figure_data(empty_manifest, "fig1")
    assert names(written) == sorted(f"fig1_strength_{s:g}.csv" for s in SEPARATRIX_STRENGTHS)
    radii = [pd.read_csv(path).rho_over_l0.min() for path in sorted(written)]
    # 0.508, 0.608, 0.908 in order: the contour shrinks as the wall strengthens.
    assert radii[0] > radii[1] > radii[2]
    for path in written:
        assert os.path.dirname(path) == os.path.join(empty_manifest.out_dir, "figures")


def test_fig2(small_run):
    written = emit_figure_data(small_run, "fig2")
    index = pd.read_csv(small_run.path("figures/fig2_index.csv"))
    assert len(index) == len(WALL_STRENGTHS) * len(STRUCTURE_OMEGA_EFF)
    assert len(written) == 1 + index.file.notna().sum()


def test_fig3(small_run):
    written = emit_figure_data(small_run, "fig3")
    assert names(written) == [
        "fig3_quadrupole.csv",
        "fig3_quadrupole_crystal.csv",
        "fig3_triangular.csv",
        "fig3_triangular_crystal.csv",
    ]
    frame = pd.read_csv(small_run.path("figures/fig3_triangular.csv"))
    assert list(frame.columns) == ["rho_over_l0", "distance_over_l0"]
    crystal = pd.read_csv(small_run.path("figures/fig3_quadrupole_crystal.csv"))
    assert len(crystal) == 10


def test_fig4(small_run):
    written = emit_figure_data(small_run, "fig4")
    assert len(written) == 2 * len(WALL_STRENGTHS) + 1
    bands = pd.read_csv(small_run.path("figures/fig4_bands.csv"))
    assert list(bands.V_W_over_omega_z2) == list(WALL_STRENGTHS)
    stability = pd.read_csv(small_run.path("figures/fig4_vw_0.0025_stability.csv"))
    assert len(stability) == 41


def test_fig5(small_run):
    written = emit_figure_data(small_run, "fig5")
    eigenvectors = [path for path in written if "eigenvectors" in path]
    assert written
    for path in eigenvectors:
        frame = pd.read_csv(path)
        assert {"mode_9_amplitude", "mode_8_amplitude", "mode_7_amplitude"} <= set(frame.columns)
        assert frame.mode_9_amplitude.max() == pytest.approx(1.0)


def test_fig6(small_run):
    written = emit_figure_data(small_run, "fig6")
    assert names(written) == ["fig6_delta_0.001.csv", "fig6_delta_10.csv", "fig6_fits.csv"]
    fits = pd.read_csv(small_run.path("figures/fig6_fits.csv"))
    assert fits.alpha.iloc[0] < fits.alpha.iloc[1]
    scatter = pd.read_csv(small_run.path("figures/fig6_delta_10.csv"))
    assert list(scatter.columns) == ["log_r", "log_J"]


def test_fig7(small_run):
    emit_figure_data(small_run, "fig7")
    index = pd.read_csv(small_run.path("figures/fig7_index.csv"))
    assert len(index) == len(WALL_STRENGTHS) * len(SPECTRUM_OMEGA_EFF)
    for name in index.file.dropna():
        curve = pd.read_csv(small_run.path(os.path.join("figures", name)))
        assert list(curve.columns) == ["delta_over_omega_z", "alpha"]
        assert len(curve) == 7


def test_fig8(small_run):
    written = emit_figure_data(small_run, "fig8")
    frame = pd.read_csv(written[0])
    assert list(frame.columns) == ["delta_over_omega_z", "normalized_rmsd"]
    assert frame.normalized_rmsd.max() == 1.0


@pytest.mark.slow
def test_all_figures_for_paper_run(write_config, tmp_path):
    manifest = run_pipeline(write_config(threads=4), str(tmp_path / "run"))
    for figure_id in FIGURE_IDS:
        assert emit_figure_data(manifest, figure_id)
