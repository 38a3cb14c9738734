import pathlib
import tomllib
from importlib import metadata

from .functools import get_nested

PYPROJECT_PATH = pathlib.Path(__file__).resolve().parents[3] / "pyproject.toml"


def get_version() -> str | None:
    """
    Get the version of the simulator.

    The version is read from the `pyproject.toml` next to the package when running from a checkout, and from the
    installed distribution metadata otherwise.

    Returns:
        str | None: The version of the simulator as a string, or None if the version cannot be found.
    """
    try:
        with open(PYPROJECT_PATH, "rb") as toml_file:
            pyproject_data = tomllib.load(toml_file)
    except FileNotFoundError:
        try:
            return metadata.version("fedcache")
        except metadata.PackageNotFoundError:
            return None

    version = get_nested(pyproject_data, "tool", "poetry", "version")
    return None if version is None else str(version)
