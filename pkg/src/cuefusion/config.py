"""Flat key/value configuration.

One name per tunable, shared by config files and command-line flags (flags
use dashes, files may use either). Precedence: built-in defaults, then the
config file, then flags.

Example file::

    # MOT17-style defaults, appearance weight raised for dance data
    fusion = weighted-sum
    cues = motion,appearance,hiou,confidence
    lambda2 = 0.2
"""
from __future__ import annotations

from dataclasses import replace
from typing import Any, Callable, Mapping

from .appearance import EmaConfig
from .fusion import Cues, FusionConfig, FusionMethod
from .kalman import NoiseFactors, Preserve
from .tracker import SecondStageMetric, TrackerConfig


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in {"1", "true", "yes", "on"}:
        return True
    if value in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _cues(text) -> Cues:
    return text if isinstance(text, Cues) else Cues.parse(str(text))


# name -> (section, field, parser); section None means TrackerConfig itself
KEYS: dict[str, tuple[str | None, str, Callable[[Any], Any]]] = {
    "tau_high": (None, "tau_high", float),
    "tau_low": (None, "tau_low", float),
    "init_score": (None, "init_score", float),
    "max_lost": (None, "max_lost", int),
    "reject_sim_stage1": (None, "reject_sim_stage1", float),
    "reject_sim_stage2": (None, "reject_sim_stage2", float),
    "second_stage": (None, "second_stage_metric", SecondStageMetric),
    "preserve_lost_only": (None, "preserve_lost_only", _bool),
    "stage2_active_only": (None, "stage2_active_only", _bool),
    "nsa": (None, "nsa_enabled", _bool),
    "cmc": (None, "cmc_enabled", _bool),
    "fusion": ("fusion", "method", FusionMethod),
    "cues": ("fusion", "cues", _cues),
    "theta_iou": ("fusion", "theta_iou", float),
    "theta_emb": ("fusion", "theta_emb", float),
    "lambda1": ("fusion", "lambda1", float),
    "lambda2": ("fusion", "lambda2", float),
    "lambda3": ("fusion", "lambda3", float),
    "lambda4": ("fusion", "lambda4", float),
    "lambda": ("fusion", "lam", float),
    "lambda_h": ("fusion", "lambda_h", float),
    "lambda_c": ("fusion", "lambda_c", float),
    "gate": ("fusion", "gate", float),
    "std_position": ("noise", "std_position", float),
    "std_velocity": ("noise", "std_velocity", float),
    "std_measurement": ("noise", "std_measurement", float),
    "preserve_width": ("preserve", "width", _bool),
    "preserve_height": ("preserve", "height", _bool),
    "preserve_confidence": ("preserve", "confidence", _bool),
    "alpha": ("ema", "alpha", float),
}


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def read_config_file(path) -> dict[str, str]:
    settings = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            key = normalize_key(key)
            if key not in KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            settings[key] = value.strip()
    return settings


def build_config(*layers: Mapping[str, Any], base: TrackerConfig | None = None) -> TrackerConfig:
    """Apply settings layers in order (later wins) on top of ``base``."""
    merged: dict[str, Any] = {}
    for layer in layers:
        for key, value in layer.items():
            if value is None:
                continue
            key = normalize_key(key)
            if key not in KEYS:
                raise ValueError(f"unknown config key {key!r}")
            merged[key] = value
    cfg = base or TrackerConfig()
    sections: dict[str | None, dict[str, Any]] = {}
    for key, value in merged.items():
        section, name, parse = KEYS[key]
        try:
            sections.setdefault(section, {})[name] = parse(value)
        except ValueError as exc:
            raise ValueError(f"bad value for {key}: {exc}") from None
    top = dict(sections.pop(None, {}))
    for section, fields in sections.items():
        top[section] = replace(getattr(cfg, section), **fields)
    return replace(cfg, **top)


def to_settings(cfg: TrackerConfig) -> dict[str, str]:
    """Inverse of :func:`build_config`: every key with its current value."""
    out = {}
    for key, (section, name, _) in KEYS.items():
        obj = cfg if section is None else getattr(cfg, section)
        value = getattr(obj, name)
        if isinstance(value, Cues):
            value = ",".join(
                n for n in ("motion", "appearance", "hiou", "confidence") if getattr(value, n)
            )
        elif hasattr(value, "value"):
            value = value.value
        out[key] = repr(value) if isinstance(value, float) else str(value)
    return out


__all__ = [
    "EmaConfig", "FusionConfig", "NoiseFactors", "Preserve", "TrackerConfig",
    "KEYS", "build_config", "read_config_file", "to_settings", "normalize_key",
]
