"""Load experiment configurations from YAML or JSON files."""

from __future__ import annotations

from pathlib import Path

import yaml

from ..sampler import GibbsConfig
from .experiments import ConfigError, ExperimentConfig, RegimeParams

# singular spellings accepted as aliases of the list-valued fields
_ALIASES = {"growth_exponent": "growth_exponents", "prior_case": "prior_cases", "setting": "settings"}
_LIST_FIELDS = ("n_grid", "growth_exponents", "prior_cases", "settings", "beta_true")


def load_mapping(path) -> dict:
    """Parse a YAML (or JSON, which is valid YAML) file into a dict."""
    data = yaml.safe_load(Path(path).read_text())
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def experiment_from_dict(data: dict, **overrides) -> ExperimentConfig:
    kw = {}
    for key, value in {**data, **{k: v for k, v in overrides.items() if v is not None}}.items():
        key = _ALIASES.get(key, key)
        if key == "regime":
            continue
        if key in _LIST_FIELDS and not isinstance(value, (list, tuple)):
            value = [value]
        if key == "gibbs" and isinstance(value, dict):
            value = GibbsConfig(**value)
        kw[key] = value
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(kw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def regime_from_dict(data: dict) -> RegimeParams:
    block = dict(data.get("regime") or {})
    if "eta" in block and "etas" not in block:
        block["etas"] = block.pop("eta")
    if "etas" in block and not isinstance(block["etas"], (list, tuple)):
        block["etas"] = [block["etas"]]
    try:
        return RegimeParams(**block)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_experiment(path, **overrides) -> ExperimentConfig:
    return experiment_from_dict(load_mapping(path), **overrides)
