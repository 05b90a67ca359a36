"""Load and validate training, densification and shading settings from YAML."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

try:
    import yaml
except ImportError:  # pragma: no cover - exercised when PyYAML missing
    yaml = None  # type: ignore[assignment]

from splatting.errors import ConfigError
from splatting.hngd import DensifyConfig, Strategy
from splatting.shading import ShadingConfig, ShadingMode
from splatting.train import TrainConfig

_CONFIG_DIR = Path(__file__).resolve().parent
_DEFAULT_CONFIG_PATH = _CONFIG_DIR / "defaults.yaml"

SECTIONS = ("train", "densify", "shading")


@dataclass(frozen=True)
class Settings:
    train: TrainConfig
    densify: DensifyConfig
    shading: ShadingConfig


def default_config_path() -> Path:
    return _DEFAULT_CONFIG_PATH


def _read_yaml(path: Path) -> dict[str, Any]:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    if yaml is None:
        raise ImportError("PyYAML is required to load configuration. Install with: pip install PyYAML")
    with path.open(encoding="utf-8") as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: invalid YAML: {e}") from e
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config root must be a mapping, got {type(raw).__name__}")
    return raw


def load_defaults() -> Settings:
    """Settings from the packaged defaults.yaml."""
    return parse_settings(_read_yaml(_DEFAULT_CONFIG_PATH))


def load_settings(path: Path | str | None = None) -> Settings:
    """Packaged defaults, overlaid with the sections and keys present in path."""
    base = load_defaults()
    if path is None:
        return base
    return parse_settings(_read_yaml(Path(path)), base)


def parse_settings(data: Mapping[str, Any], base: Settings | None = None) -> Settings:
    """Parse and validate a settings mapping (for tests and programmatic use)."""
    unknown = set(data) - set(SECTIONS) - {"schema_version"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for section in SECTIONS:
        if section in data and data[section] is not None and not isinstance(data[section], dict):
            raise ConfigError(f"{section} must be a mapping")
    base = base or Settings(TrainConfig(), DensifyConfig(), ShadingConfig())
    return Settings(
        train=parse_train_config(data.get("train") or {}, base.train),
        densify=parse_densify_config(data.get("densify") or {}, base.densify),
        shading=parse_shading_config(data.get("shading") or {}, base.shading),
    )


def _overlay(cls_name: str, base: Any, raw: Mapping[str, Any], coerce: Mapping[str, Any]) -> Any:
    names = {f.name for f in dataclasses.fields(base)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{cls_name}: unknown keys {sorted(unknown)}")
    changes: dict[str, Any] = {}
    for key, value in raw.items():
        convert = coerce.get(key)
        try:
            changes[key] = convert(value) if convert is not None else value
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{cls_name}.{key}: invalid value {value!r}") from e
    try:
        return dataclasses.replace(base, **changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{cls_name}: {e}") from e


def _strict_int(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError("expected an integer")
    return value


def _number(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError("expected a number")
    return float(value)


def _triple(value: Any) -> tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise TypeError("expected three numbers")
    return tuple(_number(v) for v in value)  # type: ignore[return-value]


def _ladder(value: Any) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)):
        raise TypeError("expected a list of numbers")
    return tuple(_number(v) for v in value)


_TRAIN_COERCE = {
    "iterations": _strict_int,
    "densify_from": _strict_int,
    "densify_until": _strict_int,
    "opacity_reset_interval": _strict_int,
    "sh_degree_interval": _strict_int,
    "test_every": _strict_int,
    "seed": _strict_int,
    "background": _triple,
    **{
        name: _number
        for name in (
            "loss_lambda",
            "position_lr_init",
            "position_lr_final",
            "sh_lr",
            "sh_rest_factor",
            "opacity_lr",
            "scale_lr",
            "rotation_lr",
            "specular_lr",
            "lighting_lr",
        )
    },
}

_DENSIFY_COERCE = {
    "omega": _number,
    "thresholds": _ladder,
    "strategy": lambda v: Strategy(str(v).lower()),
    "grid_resolution": _strict_int,
    "densify_interval": _strict_int,
    "clone_grad_threshold": _number,
    "prune_opacity": _number,
    "percent_dense": _number,
    "hngd_sample_interval": _strict_int,
    "level_cap": _strict_int,
    "max_gaussians": _strict_int,
}

_SHADING_COERCE = {
    "mode": lambda v: ShadingMode(str(v).lower()),
    "light_direction": lambda v: None if v is None else _triple(v),
    "sh_degree": _strict_int,
}


def parse_train_config(raw: Mapping[str, Any], base: TrainConfig | None = None) -> TrainConfig:
    return _overlay("train", base or TrainConfig(), raw, _TRAIN_COERCE)


def parse_densify_config(raw: Mapping[str, Any], base: DensifyConfig | None = None) -> DensifyConfig:
    return _overlay("densify", base or DensifyConfig(), raw, _DENSIFY_COERCE)


def parse_shading_config(raw: Mapping[str, Any], base: ShadingConfig | None = None) -> ShadingConfig:
    return _overlay("shading", base or ShadingConfig(), raw, _SHADING_COERCE)


def config_as_dict(cfg: Any) -> dict[str, Any]:
    """One config dataclass as YAML/JSON-ready plain data."""
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, (Strategy, ShadingMode)):
            value = value.value
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


def settings_as_dict(settings: Settings) -> dict[str, Any]:
    """Plain-data form, used for the checkpoint config echo."""
    return {section: config_as_dict(getattr(settings, section)) for section in SECTIONS}
