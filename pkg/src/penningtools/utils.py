import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, TypeVar, Union

import numpy as np
import regex as re

from penningtools.exceptions import ConfigInvalid

T = TypeVar("T")
R = TypeVar("R")

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_LINEAR_GRID = re.compile(rf"^\s*(?P<start>{_NUMBER}):(?P<stop>{_NUMBER}):(?P<step>{_NUMBER})\s*$")
_LOG_GRID = re.compile(
    rf"^\s*(?P<start>{_NUMBER}):(?P<stop>{_NUMBER}):(?P<count>\d+)log\s*$"
)
_LIST_GRID = re.compile(rf"^\s*{_NUMBER}(?:\s*,\s*{_NUMBER})*\s*$")


class Singleton(type):
    """Singleton metaclass.

    Only allows one instance of each class.
    """

    _instances = {}

    def __call__(cls, *args, **kwargs):
        if cls not in cls._instances:
            cls._instances[cls] = super(Singleton, cls).__call__(*args, **kwargs)
        return cls._instances[cls]


def parse_grid(spec: Union[str, Sequence[float]]) -> np.ndarray:
    """Parse a grid specification into an array of grid values.

    Accepted forms are `start:stop:step` (linear, stop included when it lies on the
    grid to within half a step), `start:stop:countlog` (`count` log-spaced points)
    and comma-separated lists. Sequences of numbers are passed through.

    Args:
        spec: Grid specification string or sequence of values.

    Raises:
        ConfigInvalid: the grid string cannot be parsed or is empty.
    """
    if not isinstance(spec, str):
        values = np.asarray(list(spec), dtype=float)
        if values.ndim != 1 or not values.size:
            raise ConfigInvalid(f"Grid must be a non-empty list of numbers, got {spec!r}")
        return values
    match = _LOG_GRID.match(spec)
    if match is not None:
        start, stop = float(match.group("start")), float(match.group("stop"))
        count = int(match.group("count"))
        if start <= 0 or stop <= 0 or count < 1:
            raise ConfigInvalid(
                f"Log grid '{spec}' needs positive bounds and at least one point."
            )
        return np.logspace(np.log10(start), np.log10(stop), count)
    match = _LINEAR_GRID.match(spec)
    if match is not None:
        start, stop = float(match.group("start")), float(match.group("stop"))
        step = float(match.group("step"))
        if step <= 0 or stop < start:
            raise ConfigInvalid(f"Linear grid '{spec}' needs step > 0 and stop >= start.")
        count = int(np.floor((stop - start) / step + 0.5)) + 1
        return start + step * np.arange(count)
    if _LIST_GRID.match(spec):
        return np.array([float(el) for el in spec.split(",")])
    raise ConfigInvalid(f"Unrecognized grid specification: '{spec}'")


def default_out_dir(out_dir: Union[str, None] = None) -> str:
    """Resolve the output directory, falling back to `PENNINGTOOLS_OUT_DIR` and then
    the working directory."""
    if out_dir is None:
        out_dir = os.environ.get("PENNINGTOOLS_OUT_DIR", os.getcwd())
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def ordered_map(
    func: Callable[[T], R], items: Iterable[T], threads: Union[int, None] = 1
) -> List[R]:
    """Map `func` over `items`, concurrently when `threads > 1`.

    Results come back in input order whatever the completion order.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def rotate(positions: np.ndarray, theta: float) -> np.ndarray:
    """Rotate an (N, 2) array of positions counter-clockwise by `theta`."""
    c, s = np.cos(theta), np.sin(theta)
    return np.asarray(positions, dtype=float) @ np.array([[c, s], [-s, c]])
