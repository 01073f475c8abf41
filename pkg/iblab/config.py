from __future__ import annotations

import importlib.resources as res
from collections.abc import Callable
from pathlib import Path
from typing import Any, ClassVar, Optional

import yaml
from attrs import define, field

__all__ = [
    "Config",
    "load_config",
    "ConfigError",
    "ConfigKeyError",
    "ConfigValueError",
    "ConfigTypeError",
]


def load_config(filepath: Optional[str | Path] = None) -> Config:
    """Load a config from a given file or the packaged default.

    If config is built from a given config file, it will be validated
    before returned.

    Args:
        filepath: Path to the config file. If None (default),
            load the default config file shipped with ib-lab.

    Returns:
        Config: The config object.

    Raises:
        ConfigError: When the config is invalid.
    """
    if filepath is None:
        config = Config.default()
    else:
        config = Config.from_yaml(filepath)
        config.validate()
    return config


class ConfigError(Exception):
    """Base class for all exceptions raised by Config."""


class ConfigKeyError(ConfigError, KeyError):
    """Raised when a key is not found in Config."""


class ConfigValueError(ConfigError, ValueError):
    """Raised when a value is invalid in Config."""


class ConfigTypeError(ConfigError, TypeError):
    """Raised when a value has an invalid type in Config."""


@define
class Config:
    """Manager of all configurations."""

    validators: ClassVar[list[Callable[[dict[str, Any]], None]]] = []

    _data: dict[str, Any] = field(factory=dict, converter=dict)

    @classmethod
    def from_yaml(cls, filepath: str | Path) -> Config:
        """Load a config from a yaml file."""
        with open(filepath, encoding="utf-8") as f:
            data = yaml.safe_load(f)
        if not isinstance(data, dict):
            raise ConfigTypeError(f"{filepath} does not contain a mapping.")
        return cls(data)

    @classmethod
    def default(cls) -> Config:
        """Return the default config."""
        text = default_config_path().read_text(encoding="utf8")
        return cls(yaml.safe_load(text))

    def validate(self):
        """Validate the config."""
        for validator in self.validators:
            validator(self._data)

    def __getitem__(self, key: str) -> Any:
        return self._data[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self._data.get(key, default)

    def items(self) -> list[tuple[str, Any]]:
        return list(self._data.items())

    def to_dict(self) -> dict[str, Any]:
        return self._data.copy()

    def section(self, key: str) -> dict[str, Any]:
        """Return a copy of a nested section, e.g. `config.section("dvib")`."""
        return dict(self._data[key])


def default_config_path():
    return res.files("iblab").joinpath("resources/config.yaml")


def register_validator(validator: Callable[[dict[str, Any]], None]) -> None:
    """Register a validator for Config."""
    Config.validators.append(validator)


def validate_exist(data: dict[str, Any], key: str) -> None:
    """Validate if a key exists."""
    if key not in data:
        raise ConfigKeyError(f"'{key}' is required.")


def _validate_section(data: dict[str, Any], key: str) -> dict[str, Any]:
    validate_exist(data, key)
    section = data[key]
    if not isinstance(section, dict):
        raise ConfigTypeError(f"'{key}' must be a dict, not {type(section)}.")
    return section


def _validate_int(data: dict[str, Any], key: str, minimum: int, name: str) -> None:
    validate_exist(data, key)
    value = data[key]
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigTypeError(f"'{name}' must be an integer, not {type(value)}.")
    if value < minimum:
        raise ConfigValueError(f"'{name}' must be at least {minimum}, not {value}.")


def _validate_float(
    data: dict[str, Any], key: str, name: str, *, positive: bool = True
) -> None:
    validate_exist(data, key)
    value = data[key]
    if not isinstance(value, (float, int)) or isinstance(value, bool):
        raise ConfigTypeError(f"'{name}' must be a float, not {type(value)}.")
    if positive and value <= 0:
        raise ConfigValueError(f"'{name}' must be positive, not {value}.")
    if not positive and value < 0:
        raise ConfigValueError(f"'{name}' must be non-negative, not {value}.")


@register_validator
def validate_seed(data: dict[str, Any]) -> None:
    """Validate seed."""
    _validate_int(data, "seed", 0, "seed")


@register_validator
def validate_n_starts(data: dict[str, Any]) -> None:
    """Validate n_starts."""
    _validate_int(data, "n_starts", 1, "n_starts")


@register_validator
def validate_ba(data: dict[str, Any]) -> None:
    """Validate ba."""
    ba = _validate_section(data, "ba")
    _validate_float(ba, "tol", "ba.tol")
    _validate_int(ba, "max_iter", 1, "ba.max_iter")
    _validate_int(ba, "n_init", 1, "ba.n_init")


@register_validator
def validate_sparse_gib(data: dict[str, Any]) -> None:
    """Validate sparse_gib."""
    sparse = _validate_section(data, "sparse_gib")
    _validate_float(sparse, "tol", "sparse_gib.tol")
    _validate_int(sparse, "max_iter", 1, "sparse_gib.max_iter")


@register_validator
def validate_dvib(data: dict[str, Any]) -> None:
    """Validate dvib."""
    dvib = _validate_section(data, "dvib")
    _validate_float(dvib, "lr", "dvib.lr")
    _validate_float(dvib, "tol", "dvib.tol")
    _validate_int(dvib, "max_iter", 1, "dvib.max_iter")
    validate_exist(dvib, "prior")
    match dvib["prior"]:
        case "marginal" | "standard":
            pass
        case str(prior):
            raise ConfigValueError(
                f"'dvib.prior' must be 'marginal' or 'standard', not {prior}."
            )
        case other:
            raise ConfigTypeError(f"'dvib.prior' must be a string, not {type(other)}.")


@register_validator
def validate_mc(data: dict[str, Any]) -> None:
    """Validate mc."""
    mc = _validate_section(data, "mc")
    _validate_int(mc, "n_samples", 2, "mc.n_samples")


@register_validator
def validate_discrete(data: dict[str, Any]) -> None:
    """Validate discrete."""
    discrete = _validate_section(data, "discrete")
    _validate_float(discrete, "smoothing", "discrete.smoothing", positive=False)
