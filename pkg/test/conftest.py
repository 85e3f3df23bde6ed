import json
import os
import shutil

import numpy as np
import pytest

from penningtools.equilibrium import minimize
from penningtools.lattice import build_seed
from penningtools.phonons import build_stiffness, solve_modes
from penningtools.potential import PotentialParams

PAPER_C4 = 0.002472
PAPER_OMEGA_EFF = 0.25
PAPER_V_W = 0.0025


@pytest.fixture(scope="function")
def to_destroy():
    to_destroy = []
    yield to_destroy

    for v in to_destroy:
        if os.path.isfile(v):
            os.remove(v)
        elif os.path.isdir(v):
            shutil.rmtree(v)
    # Remove empty folders
    for v in to_destroy:
        dir_ = os.path.split(v)[0]
        if os.path.exists(dir_):
            if not len(os.listdir(dir_)):
                os.rmdir(dir_)


@pytest.fixture(scope="session", autouse=True)
def isolate_logs(tmp_path_factory):
    log_dir = tmp_path_factory.mktemp("logs")
    previous = {
        key: os.environ.get(key)
        for key in ("PENNINGTOOLS_LOG_DIR", "PENNINGTOOLS_PROG", "PENNINGTOOLS_OUT_DIR")
    }
    os.environ["PENNINGTOOLS_LOG_DIR"] = str(log_dir)
    os.environ["PENNINGTOOLS_PROG"] = "penningtools-test"
    os.environ.pop("PENNINGTOOLS_OUT_DIR", None)
    yield log_dir
    for key, value in previous.items():
        if value is None:
            os.environ.pop(key, None)
        else:
            os.environ[key] = value


def trap_document(**overrides):
    document = dict(
        omega_z_hz=795e3,
        b_z_tesla=4.5,
        omega_eff_ratio=PAPER_OMEGA_EFF,
        c4=PAPER_C4,
        v_w=PAPER_V_W,
        n_ions=85,
    )
    document.update(overrides)
    return {k: v for k, v in document.items() if v is not None}


@pytest.fixture
def write_config(tmp_path):
    def write(name="trap.json", **overrides):
        path = tmp_path / name
        path.write_text(json.dumps(trap_document(**overrides)))
        return str(path)

    return write


@pytest.fixture(scope="session")
def paper_params():
    return PotentialParams(omega_eff=PAPER_OMEGA_EFF, C4=PAPER_C4, V_W=PAPER_V_W)


@pytest.fixture(scope="session")
def paper_seed(paper_params):
    return build_seed(85, params=paper_params)


@pytest.fixture(scope="session")
def paper_crystal(paper_params, paper_seed):
    return minimize(paper_params, paper_seed)


@pytest.fixture(scope="session")
def paper_modes(paper_crystal):
    return solve_modes(build_stiffness(paper_crystal))


@pytest.fixture(scope="session")
def two_ion_crystal():
    params = PotentialParams(omega_eff=0.25)
    return minimize(params, build_seed(2, spacing=1.0, params=params))


@pytest.fixture(scope="session")
def two_ion_modes(two_ion_crystal):
    return solve_modes(build_stiffness(two_ion_crystal))


@pytest.fixture(scope="session")
def small_crystal(paper_params):
    return minimize(paper_params, build_seed(10, params=paper_params))


@pytest.fixture(scope="session")
def small_modes(small_crystal):
    return solve_modes(build_stiffness(small_crystal))


def random_positions(rng, N, box=3.0, min_distance=0.5):
    """Uniform random planar positions with a minimum pair separation."""
    while True:
        positions = rng.uniform(-box, box, size=(N, 2))
        d = np.linalg.norm(positions[:, None] - positions[None], axis=-1)
        np.fill_diagonal(d, np.inf)
        if d.min() >= min_distance:
            return positions
