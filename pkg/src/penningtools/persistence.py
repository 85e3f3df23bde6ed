"""CSV and JSON artifacts.

Tables are written with a fixed number format so that repeated runs give
byte-identical files.
"""
import json
import os
from typing import Union

import numpy as np
import pandas as pd

from penningtools.exceptions import MissingUpstream
from penningtools.lattice import SeedLattice
from penningtools.potential import CrystalConfiguration, PotentialParams

FLOAT_FORMAT = "%.12g"


def write_frame(frame: pd.DataFrame, file_path: str):
    """Write a table as CSV with a header row and 12 significant digits."""
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    frame.to_csv(file_path, index=False, float_format=FLOAT_FORMAT)
    return file_path


def read_frame(file_path: str) -> pd.DataFrame:
    if not os.path.exists(file_path):
        raise MissingUpstream(f"Required file {file_path} does not exist")
    return pd.read_csv(file_path)


def _plain(value):
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def write_json(document, file_path: str):
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    with open(file_path, "w") as f:
        json.dump(_plain(document), f, indent=2)
        f.write("\n")
    return file_path


def read_json(file_path: str):
    if not os.path.exists(file_path):
        raise MissingUpstream(f"Required file {file_path} does not exist")
    with open(file_path, "r") as f:
        return json.load(f)


def sidecar_path(csv_path: str) -> str:
    return os.path.splitext(csv_path)[0] + ".json"


def write_crystal(config: CrystalConfiguration, file_path: str):
    """Write positions as CSV plus a JSON sidecar with the minimization state."""
    write_frame(config.to_frame(), file_path)
    write_json(
        dict(
            params=None if config.params is None else config.params.to_dict(),
            energy=config.energy,
            gradient_norm=config.gradient_norm,
            iterations=config.iterations,
            converged=config.converged,
        ),
        sidecar_path(file_path),
    )
    return file_path


def read_crystal(file_path: str) -> CrystalConfiguration:
    frame = read_frame(file_path).sort_values("index")
    positions = frame[["x_over_l0", "y_over_l0"]].to_numpy(dtype=float)
    meta: Union[dict, None] = None
    if os.path.exists(sidecar_path(file_path)):
        meta = read_json(sidecar_path(file_path))
    if not meta:
        return CrystalConfiguration(positions)
    params = meta.get("params")
    return CrystalConfiguration(
        positions,
        energy=float("nan") if meta.get("energy") is None else meta["energy"],
        gradient_norm=float("nan")
        if meta.get("gradient_norm") is None
        else meta["gradient_norm"],
        converged=bool(meta.get("converged", False)),
        iterations=int(meta.get("iterations", 0)),
        params=None if params is None else PotentialParams.from_dict(params),
    )


def write_seed(seed: SeedLattice, file_path: str):
    return write_frame(seed.to_frame(), file_path)


def read_seed(file_path: str) -> SeedLattice:
    return SeedLattice.from_frame(read_frame(file_path))
