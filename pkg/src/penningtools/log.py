import logging
import os
from typing import Union

from rich.console import Console
from rich.logging import RichHandler

from penningtools.utils import Singleton


def log_dir() -> str:
    """Directory that receives `.<prog>.log` files: `PENNINGTOOLS_LOG_DIR` when set,
    otherwise the user's home."""
    return os.environ.get("PENNINGTOOLS_LOG_DIR", os.path.expanduser("~"))


def get_logger(name: Union[str, None] = None):
    """Gets a logger with a particular name. If None, infers from `PENNINGTOOLS_PROG` environment variable.

    Records go to a rich console handler on stderr (WARNING and above, or INFO and above
    when `PENNINGTOOLS_VERBOSE` is set to a non-empty value other than `0`) and to
    `${PENNINGTOOLS_LOG_DIR}/.${PENNINGTOOLS_PROG}.log` at INFO.

    File logging is skipped when the log directory cannot be written.
    """
    if name is None:
        name = os.environ.get("PENNINGTOOLS_PROG", "penning-tools")

    handlers = []

    verbose = os.environ.get("PENNINGTOOLS_VERBOSE", "") not in ("", "0")
    console_handler = RichHandler(
        console=Console(stderr=True), show_path=False, rich_tracebacks=True
    )
    console_handler.setLevel(logging.INFO if verbose else logging.WARNING)
    handlers.append(console_handler)

    try:
        file_handler = logging.FileHandler(os.path.join(log_dir(), f".{name}.log"))
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s - %(levelname)s - %(message)s")
        )
        file_handler.setLevel(logging.INFO)
        handlers.append(file_handler)
    except (FileNotFoundError, PermissionError, IsADirectoryError):
        # Unusable log directory, skip file logging
        pass

    log = logging.getLogger(name)
    log.setLevel(logging.INFO)
    log.propagate = False
    for handler in handlers:
        log.addHandler(handler)
    return log


class Loggers(dict, metaclass=Singleton):
    """Singleton dict-like logger registry.

    Use to fetch loggers by name. If the requested logger does not exist,
    it is created, registered and returned.

    The named logger for the current `PENNINGTOOLS_PROG` can be accessed through the
    `current` attribute.
    """

    def __getitem__(self, key):
        if key in self:
            return super().__getitem__(key)
        logger = get_logger(key)
        self[key] = logger
        return logger

    @property
    def current(self):
        return self[os.environ.get("PENNINGTOOLS_PROG", "penning-tools")]


loggers = Loggers()
