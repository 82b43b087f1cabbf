"""Experiment configuration: JSON config files plus CLI-flag overrides.

The config file is a flat JSON object whose keys match the field names
below (camelCase, e.g. ``gridN``, ``outputPath``, ``spectrumSpec``);
unknown keys are rejected so configs stay diffable and typo-safe.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

__all__ = ["ConfigError", "SpectrumSpec", "ScalarMarginals", "CustomStart",
           "ExperimentConfig", "load_config", "DEFAULT_EPSILON"]

MODES = ("scalar1d", "matrixNd", "rates", "sinkhornOracle", "mcCheck")
START_KINDS = ("imf", "ipf", "ind-p0", "custom")

DEFAULT_EPSILON = {"scalar1d": 1.0, "matrixNd": 0.3, "rates": 1.0,
                   "sinkhornOracle": 1.0, "mcCheck": 1.0}


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to usage-error exit code)."""


@dataclass(frozen=True)
class SpectrumSpec:
    """Eigenvalue/eigenvector sampling for the covariance construction."""

    log_uniform_range: tuple[float, float] = (-math.log(2.0), math.log(2.0))
    orthogonal_seed: int | None = None

    def __post_init__(self) -> None:
        lo, hi = self.log_uniform_range
        if not lo <= hi:
            raise ConfigError("logUniformRange must be ordered (lo, hi)")


@dataclass(frozen=True)
class ScalarMarginals:
    mu0: float = 0.0
    sigma0: float = 1.0
    mu1: float = 0.0
    sigma1: float = 1.0

    def __post_init__(self) -> None:
        if not (self.sigma0 > 0.0 and self.sigma1 > 0.0):
            raise ConfigError("scalar sigmas must be positive")


@dataclass(frozen=True)
class CustomStart:
    """Custom scalar start (rho0, s0, nu0) or custom matrix joint blocks."""

    rho0: float | None = None
    s0: float | None = None
    nu0: float | None = None
    mean0: list | None = None
    mean1: list | None = None
    cov00: list | None = None
    cov11: list | None = None
    cov01: list | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "matrixNd"
    dimension: int = 16
    epsilon: float | None = None
    rounds: int = 100
    start: str = "imf"
    seed: int = 0
    grid_n: int = 1
    instances: int = 200
    spectrum: SpectrumSpec = field(default_factory=SpectrumSpec)
    scalar: ScalarMarginals = field(default_factory=ScalarMarginals)
    custom_start: CustomStart | None = None
    output_path: str = "ipmf-run"

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.start not in START_KINDS:
            raise ConfigError(f"start must be one of {START_KINDS}")
        if self.dimension < 1 or self.rounds < 1 or self.grid_n < 1 or self.instances < 1:
            raise ConfigError("dimension, rounds, gridN and instances must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.epsilon is not None and not self.epsilon > 0.0:
            raise ConfigError("epsilon must be positive")
        if self.start == "custom" and self.custom_start is None:
            raise ConfigError("start=custom requires a customStart section")

    @property
    def resolved_epsilon(self) -> float:
        return self.epsilon if self.epsilon is not None else DEFAULT_EPSILON[self.mode]


_KEY_MAP = {
    "mode": "mode", "dimension": "dimension", "epsilon": "epsilon",
    "rounds": "rounds", "start": "start", "seed": "seed", "gridN": "grid_n",
    "instances": "instances", "outputPath": "output_path",
}


def _parse_spectrum(raw: dict) -> SpectrumSpec:
    extra = set(raw) - {"logUniformRange", "orthogonalSeed"}
    if extra:
        raise ConfigError(f"unknown spectrumSpec keys: {sorted(extra)}")
    rng = raw.get("logUniformRange")
    kwargs = {}
    if rng is not None:
        if len(rng) != 2:
            raise ConfigError("logUniformRange must be a [lo, hi] pair")
        kwargs["log_uniform_range"] = (float(rng[0]), float(rng[1]))
    if "orthogonalSeed" in raw and raw["orthogonalSeed"] is not None:
        kwargs["orthogonal_seed"] = int(raw["orthogonalSeed"])
    return SpectrumSpec(**kwargs)


def _parse_scalar(raw: dict) -> ScalarMarginals:
    extra = set(raw) - {"mu0", "sigma0", "mu1", "sigma1"}
    if extra:
        raise ConfigError(f"unknown scalar keys: {sorted(extra)}")
    return ScalarMarginals(**{k: float(v) for k, v in raw.items()})


def _parse_custom(raw: dict) -> CustomStart:
    allowed = {"rho0", "s0", "nu0", "mean0", "mean1", "cov00", "cov11", "cov01"}
    extra = set(raw) - allowed
    if extra:
        raise ConfigError(f"unknown customStart keys: {sorted(extra)}")
    return CustomStart(**raw)


def load_config(path: str | Path | None = None,
                overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from an optional JSON file plus override values.

    Overrides use the dataclass field names and win over file values.
    """
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    kwargs: dict = {}
    known = set(_KEY_MAP) | {"spectrumSpec", "scalar", "customStart"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for file_key, field_name in _KEY_MAP.items():
        if file_key in data and data[file_key] is not None:
            kwargs[field_name] = data[file_key]
    if "spectrumSpec" in data:
        kwargs["spectrum"] = _parse_spectrum(data["spectrumSpec"])
    if "scalar" in data:
        kwargs["scalar"] = _parse_scalar(data["scalar"])
    if "customStart" in data:
        kwargs["custom_start"] = _parse_custom(data["customStart"])
    try:
        config = ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if overrides:
        clean = {k: v for k, v in overrides.items() if v is not None}
        if clean:
            config = replace(config, **clean)
    return config
