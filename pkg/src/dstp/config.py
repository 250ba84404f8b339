"""INI-style experiment configuration files.

Sections: ``[dataset]``, ``[model]``, ``[train]`` and ``[grid]``.  Every key is
optional; dataset defaults come from the named preset.  Relative dataset
paths are resolved against the config file's directory.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .data import DatasetSpec, preset
from .errors import ConfigurationError
from .evaluation import ExperimentGrid
from .training import TrainConfig


def _list(value: str) -> list[str]:
    return [v.strip() for v in value.replace("\n", ",").split(",") if v.strip()]


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec | None = None
    model: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    grid: ExperimentGrid | None = None


_TRAIN_TYPES = {"batch_size": int, "learning_rate": float, "max_epochs": int, "patience": int,
                "val_fraction": float, "beta1": float, "beta2": float, "eps": float, "seed": int,
                "clip_norm": float, "max_steps": int}
_MODEL_TYPES = {"arch": str, "window": int, "horizon": int, "hidden": int, "hidden_phase1": int,
                "hidden_phase2": int, "hidden_decoder": int, "seed": int, "target_in_last_phase": bool}


def _typed(section: configparser.SectionProxy, types: dict, where: str) -> dict:
    out = {}
    for key in section:
        if key not in types:
            raise ConfigurationError(f"unknown key {key!r} in [{where}]")
        try:
            out[key] = section.getboolean(key) if types[key] is bool else types[key](section[key])
        except ValueError as exc:
            raise ConfigurationError(f"[{where}] {key}: {exc}") from None
    return out


def parse_config(text: str, base_dir: str | Path = ".") -> ExperimentConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(str(exc)) from None
    cfg = ExperimentConfig()
    if cp.has_section("dataset"):
        sec = cp["dataset"]
        name = sec.get("name")
        if not name:
            raise ConfigurationError("[dataset] needs a name")
        kw = {}
        if "path" in sec:
            path = Path(sec["path"])
            kw["path"] = str(path if path.is_absolute() else Path(base_dir) / path)
        if "target" in sec:
            kw["target"] = sec["target"]
        if "exclude" in sec:
            kw["exclude"] = _list(sec["exclude"])
        for key in ("train_size", "test_size"):
            if key in sec:
                kw[key] = sec.getint(key)
        if "delimiter" in sec:
            kw["delimiter"] = sec["delimiter"]
        cfg.dataset = preset(name, **kw)
    if cp.has_section("model"):
        cfg.model = _typed(cp["model"], _MODEL_TYPES, "model")
    if cp.has_section("train"):
        cfg.train = TrainConfig(**_typed(cp["train"], _TRAIN_TYPES, "train"))
    if cp.has_section("grid"):
        sec = cp["grid"]
        kw = {"archs": _list(sec.get("archs", "dstp"))}
        if "horizons" in sec:
            kw["horizons"] = [int(v) for v in _list(sec["horizons"])]
        if "windows" in sec:
            kw["windows"] = [int(v) for v in _list(sec["windows"])]
        if "hidden" in sec:
            kw["hidden"] = sec.getint("hidden")
        if "seed" in sec:
            kw["seed"] = sec.getint("seed")
        cfg.grid = ExperimentGrid(**kw)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    return parse_config(path.read_text(), path.parent)
