"""Run configuration: one JSON tree with documented defaults and dotted overrides."""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Iterable, Optional, Union

from .bootstrap import BootstrapConfig
from .classifier import TrainConfig
from .corpus import DEFAULT_ENTITY_TYPES


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "entity_types": list(DEFAULT_ENTITY_TYPES),
    "expansion": {"enabled": True, "relations": ["compound"]},
    "trainer": {
        "learning_rate": 0.1,
        "epochs": 20,
        "loss": "mae",
        "batch": 64,
        "full_batch": False,
        "seed": 0,
        "tau": 0.5,
        "prior": 0.01,
        "risk": "nnpu",
        "threads": None,
    },
    "bootstrap": {"K": 5, "I": 10, "max_phrase_len": 4},
}


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def parse_override(item: str) -> tuple[list[str], object]:
    """``"trainer.prior=0.05"`` -> (["trainer", "prior"], 0.05); values are JSON, else strings."""
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {item!r} must look like key.path=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def load_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = ()) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                user = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
        cfg = _merge(cfg, user)
    for item in overrides:
        keys, value = parse_override(item)
        update: dict = value  # type: ignore[assignment]
        for k in reversed(keys):
            update = {k: update}
        cfg = _merge(cfg, update)
    return cfg


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(**cfg["trainer"])


def bootstrap_config(cfg: dict) -> BootstrapConfig:
    b = cfg["bootstrap"]
    return BootstrapConfig(K=int(b["K"]), I=int(b["I"]), max_phrase_len=int(b["max_phrase_len"]),
                           expand=bool(cfg["expansion"]["enabled"]),
                           relations=tuple(cfg["expansion"]["relations"]),
                           trainer=train_config(cfg))


def dumps(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"
