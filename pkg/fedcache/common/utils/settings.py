import pathlib
from typing import Type, TypeVar

from pydantic_settings import BaseSettings, SettingsConfigDict

Settings = TypeVar("Settings")

ENV_PREFIX = "FEDCACHE_"


def get_settings(settings_cls: Type[Settings], env_file: pathlib.Path | None = None) -> Settings:
    """Create and configure settings from the process environment.

    This function reads `FEDCACHE_`-prefixed environment variables and values from an optional `.env` file to
    populate `settings_cls`. Nested models are addressed with the `__` delimiter, e.g.
    `FEDCACHE_RUNTIME__WORKERS=4`.

    Args:
        settings_cls (Type[Settings]): The settings class to use. This should be a pydantic `BaseModel` subclass.
        env_file (pathlib.Path | None): The path to the `.env` file. If not provided, only the environment is read.

    Returns:
        An instance of the `settings_cls` class, configured with the values read from the environment variables and
        `.env` file.
    """
    return type(
        "Settings",
        (settings_cls, BaseSettings),
        {
            "model_config": SettingsConfigDict(
                env_prefix=ENV_PREFIX,
                env_nested_delimiter="__",
                env_file=None if env_file is None else str(env_file),
                extra="ignore",
            ),
        },
    )()
