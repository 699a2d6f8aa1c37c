"""Flat ``key = value`` config files with dotted section keys.

Values are JSON literals (numbers, booleans, lists, quoted strings); anything
that fails to parse as JSON is kept as a bare string. ``#`` starts a comment
when it begins a line or follows whitespace.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration value or file."""


_COMMENT = re.compile(r"(^|\s)#.*$")


def parse_flat(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _COMMENT.sub("", raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def dump_flat(values: dict) -> str:
    return "".join(f"{k} = {json.dumps(values[k], sort_keys=True)}\n" for k in sorted(values))


def load_flat(path) -> dict:
    try:
        return parse_flat(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def section(values: dict, prefix: str) -> dict:
    """Sub-dict of keys under ``prefix.`` with the prefix stripped."""
    p = prefix + "."
    return {k[len(p):]: v for k, v in values.items() if k.startswith(p)}


VARIANTS = ("full", "one-tnet", "one-tnet-reduced", "no-tnet")


@dataclass
class RunConfig:
    """Every knob of the pipeline; stochastic stages derive RNGs from ``seed``."""

    seed: int = 2024
    recipe: str = "campaign"        # bundled recipe name or path to a recipe file
    duration: Optional[float] = None  # overrides the recipe duration (seconds)
    tf_ms: float = 200.0
    pc: int = 256
    scales: tuple = (120.0, 120.0, 120.0, 40.0, 25.0)
    oversample_to: float = 0.02
    split: float = 0.75
    variant: str = "one-tnet"
    widths: Optional[dict] = None
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch: int = 32
    max_epochs: int = 100
    patience: int = 10
    min_delta: float = 1e-4
    reg_weight: float = 1e-3
    epsilon_m: float = 1.5
    forest_trees: int = 100
    forest_depth: int = 12
    forest_min_leaf: int = 1
    forest_max_features: int = 2
    forest_max_points: int = 200_000
    extra: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.pc <= 0:
            raise ConfigError("pc must be positive")
        if self.tf_ms <= 0:
            raise ConfigError("tf_ms must be positive")
        if not 0.0 < self.split < 1.0:
            raise ConfigError("split ratio must be in (0, 1)")
        if len(self.scales) != 5 or min(self.scales) <= 0:
            raise ConfigError("scales must be 5 positive numbers")
        if self.batch <= 0 or self.max_epochs <= 0:
            raise ConfigError("batch and max_epochs must be positive")
        if self.duration is not None and self.duration < 0:
            raise ConfigError("duration must be non-negative")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        return self

    @property
    def tf(self) -> float:
        return self.tf_ms / 1000.0

    def to_flat(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "extra":
                out.update({f"extra.{k}": x for k, x in v.items()})
            elif v is not None:
                out[f"run.{f.name}"] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_flat(cls, values: dict) -> "RunConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs: dict[str, Any] = {"extra": section(values, "extra")}
        for key, v in section(values, "run").items():
            if key not in known or key == "extra":
                raise ConfigError(f"unknown config key run.{key}")
            kwargs[key] = tuple(v) if key == "scales" else v
        for key in values:
            if not key.startswith(("run.", "extra.")):
                raise ConfigError(f"unknown config key {key}")
        return cls(**kwargs).validate()

    def dumps(self) -> str:
        return dump_flat(self.to_flat())

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        return cls.from_flat(parse_flat(text))

    def hash(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()[:16]


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]
