import logging
import os
import threading
import time

import numpy as np
import pytest

from penningtools.exceptions import ConfigInvalid
from penningtools.log import Loggers, get_logger, loggers
from penningtools.utils import Singleton, default_out_dir, ordered_map, parse_grid, rotate


def test_parse_linear_grid():
    grid = parse_grid("0.19:0.27:0.002")
    assert len(grid) == 41
    assert grid[0] == pytest.approx(0.19)
    assert grid[-1] == pytest.approx(0.27)


def test_parse_log_grid():
    grid = parse_grid("1e-6:1e3:40log")
    assert len(grid) == 40
    assert grid[0] == pytest.approx(1e-6)
    assert grid[-1] == pytest.approx(1e3)
    np.testing.assert_allclose(np.diff(np.log(grid)), np.log(1e9) / 39)


def test_parse_list_grid():
    np.testing.assert_array_equal(parse_grid("0.1, 0.2,0.5"), [0.1, 0.2, 0.5])
    np.testing.assert_array_equal(parse_grid([1, 2]), [1.0, 2.0])


@pytest.mark.parametrize(
    "spec", ["", "a:b:c", "1:0:0.1", "0:1:0", "0:1:10log", "1:2:0log", []]
)
def test_parse_grid_rejects(spec):
    with pytest.raises(ConfigInvalid):
        parse_grid(spec)


def test_ordered_map_keeps_order():
    def slow_square(x):
        time.sleep(0.01 * (5 - x))
        return x**2, threading.get_ident()

    results = ordered_map(slow_square, range(5), threads=4)
    assert [value for value, _ in results] == [0, 1, 4, 9, 16]
    assert ordered_map(lambda x: -x, [1, 2, 3], threads=1) == [-1, -2, -3]


def test_rotate():
    rotated = rotate(np.array([[1.0, 0.0], [0.0, 2.0]]), np.pi / 2)
    np.testing.assert_allclose(rotated, [[0.0, 1.0], [-2.0, 0.0]], atol=1e-15)


def test_default_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("PENNINGTOOLS_OUT_DIR", str(tmp_path / "from_env"))
    assert default_out_dir() == str(tmp_path / "from_env")
    assert os.path.isdir(tmp_path / "from_env")
    assert default_out_dir(str(tmp_path / "explicit")) == str(tmp_path / "explicit")


def test_singleton():
    class Registry(metaclass=Singleton):
        pass

    assert Registry() is Registry()
    assert Loggers() is loggers


def test_logger_writes_file(isolate_logs):
    logger = loggers["penningtools-logfile"]
    assert logger is loggers["penningtools-logfile"]
    logger.info("relaxed crystal")
    for handler in logger.handlers:
        handler.flush()
    with open(isolate_logs / ".penningtools-logfile.log") as f:
        assert "relaxed crystal" in f.read()


def test_logger_without_log_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("PENNINGTOOLS_LOG_DIR", str(tmp_path / "missing"))
    logger = get_logger("penningtools-nolog")
    assert not any(isinstance(h, logging.FileHandler) for h in logger.handlers)


def test_current_logger(monkeypatch):
    monkeypatch.setenv("PENNINGTOOLS_PROG", "penningtools-current")
    assert loggers.current is loggers["penningtools-current"]
