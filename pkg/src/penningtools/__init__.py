try:
    from importlib.metadata import PackageNotFoundError, version
except ImportError:  # pragma: no cover
    from importlib_metadata import PackageNotFoundError, version  # type: ignore

try:
    __version__ = version("penning-tools")
except PackageNotFoundError:  # pragma: no cover
    # Running from a source checkout
    __version__ = "0.0.0+local"
