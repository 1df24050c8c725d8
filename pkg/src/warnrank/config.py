"""Experiment configuration: INI file with sections, defaulted to the
published setup (embedding 96, lengths 600/40, hidden 256, dropout 0.1,
batch 64, epochs 60, Adamax lr 0.002, stratified 5 folds). Every field can
be overridden by the file or by CLI flags.
"""

from __future__ import annotations

import configparser
from pathlib import Path
from typing import Optional

from .experiment import ExperimentConfig

_SECTIONS = {
    "corpus": {"dir": ("corpus_dir", str), "warnings": ("warnings_path", str)},
    "context": {
        "mode": ("context_mode", str),
        "use_stmt_branch": ("use_stmt_branch", bool),
        "abstraction": ("abstraction_on", bool),
    },
    "preprocess": {"l_slice": ("L_slice", int), "l_stmt": ("L_stmt", int)},
    "embedding": {
        "dim": ("embed_dim", int),
        "window": ("cbow_window", int),
        "negatives": ("cbow_negatives", int),
        "epochs": ("cbow_epochs", int),
        "lr": ("cbow_lr", float),
    },
    "model": {
        "hidden": ("hidden", int),
        "dense1": ("dense1", int),
        "dense2": ("dense2", int),
        "dropout": ("dropout", float),
    },
    "training": {
        "epochs": ("epochs", int),
        "batch_size": ("batch_size", int),
        "lr": ("lr", float),
    },
    "split": {"folds": ("folds", int), "setting": ("split", str), "seed": ("seed", int)},
    "output": {"dir": ("output_dir", str)},
}


def load_config(path: Optional[str | Path] = None) -> ExperimentConfig:
    config = ExperimentConfig()
    if path is None:
        return config
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")
    for section, keys in _SECTIONS.items():
        if not parser.has_section(section):
            continue
        for key, (attr, typ) in keys.items():
            if not parser.has_option(section, key):
                continue
            if typ is bool:
                value = parser.getboolean(section, key)
            elif typ is int:
                value = parser.getint(section, key)
            elif typ is float:
                value = parser.getfloat(section, key)
            else:
                value = parser.get(section, key)
                if value == "":
                    value = None
            setattr(config, attr, value)
    return config


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    parser = configparser.ConfigParser()
    for section, keys in _SECTIONS.items():
        parser.add_section(section)
        for key, (attr, _typ) in keys.items():
            value = getattr(config, attr)
            parser.set(section, key, "" if value is None else str(value))
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)
