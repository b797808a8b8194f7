"""Run configuration: JSON file sections resolved against defaults and flags.

Precedence is flag > file > default. Unknown keys anywhere are an error.

Example file::

    {
      "seed": 7,
      "threads": 2,
      "model": {"epochs": 12, "lr": 0.002},
      "levt": {"p": 0.5},
      "tm": {"theta": 0.6, "k": 3}
    }
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from bisync.editor_levt import LevtTrainConfig
from bisync.seqmodel import ModelConfig
from bisync.synth import GeneratorConfig
from bisync.tm import TmConfig
from bisync.toytrans import ToyLanguageSpec


@dataclass(frozen=True)
class EvalConfig:
    metric: str = "bleu"
    strata: str = "bucket"
    ter_shifts: bool = False

    def __post_init__(self):
        if self.metric not in ("bleu", "ter"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.strata not in ("bucket", "opclass"):
            raise ValueError(f"unknown strata {self.strata!r}")


@dataclass(frozen=True)
class ToyConfig:
    vocab_size: int = 50
    noise_eps: float = 0.1
    min_len: int = 4
    max_len: int = 14

    def spec(self, seed: int) -> ToyLanguageSpec:
        return ToyLanguageSpec(self.vocab_size, self.noise_eps, seed)


SECTIONS = {
    "toy": ToyConfig,
    "synth": GeneratorConfig,
    "model": ModelConfig,
    "levt": LevtTrainConfig,
    "tm": TmConfig,
    "eval": EvalConfig,
}
TOP_LEVEL = {"seed": int, "threads": int, "tokenizer": str}
# sections whose own seed follows the global one unless set explicitly
SEEDED = ("synth", "model", "levt")


class ConfigError(ValueError):
    """The configuration file or flags do not match the schema."""


def _field_names(cls) -> set:
    return {f.name for f in fields(cls)}


@dataclass
class RunConfig:
    seed: int = 0
    threads: int = 1
    tokenizer: str = "whitespace"
    sections: dict = field(default_factory=dict)

    def section(self, name: str):
        return self.sections[name]

    def to_json(self) -> dict:
        out = {"seed": self.seed, "threads": self.threads, "tokenizer": self.tokenizer}
        for name, value in self.sections.items():
            data = asdict(value)
            if name == "model":
                data["vocab"] = list(value.vocab)
                if len(data["vocab"]) > 20:
                    data["vocab"] = f"<{len(value.vocab)} tokens>"
            out[name] = data
        return out


def _tuplify(cls, data: dict) -> dict:
    out = dict(data)
    for f in fields(cls):
        if f.name in out and isinstance(out[f.name], list):
            out[f.name] = tuple(out[f.name])
    return out


def resolve(file_data: Optional[dict] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Merge defaults, file contents and flag overrides.

    ``overrides`` uses the same shape as the file; ``None`` values mean
    "flag not given".
    """
    file_data = dict(file_data or {})
    overrides = overrides or {}
    unknown = set(file_data) - set(SECTIONS) - set(TOP_LEVEL)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    top = {k: file_data.get(k) for k in TOP_LEVEL}
    for k, v in overrides.items():
        if k in TOP_LEVEL and v is not None:
            top[k] = v
    for k, typ in TOP_LEVEL.items():
        if top[k] is not None and not isinstance(top[k], typ):
            raise ConfigError(f"{k} must be {typ.__name__}, got {top[k]!r}")
    run = RunConfig(
        seed=top["seed"] if top["seed"] is not None else 0,
        threads=top["threads"] if top["threads"] is not None else 1,
        tokenizer=top["tokenizer"] or "whitespace",
    )
    if run.tokenizer != "whitespace":
        raise ConfigError(f"unsupported tokenizer {run.tokenizer!r}")
    for name, cls in SECTIONS.items():
        values = file_data.get(name, {})
        if not isinstance(values, dict):
            raise ConfigError(f"section {name!r} must be an object")
        bad = set(values) - _field_names(cls)
        if bad:
            raise ConfigError(f"unknown keys in section {name!r}: {sorted(bad)}")
        merged = dict(values)
        if name in SEEDED and "seed" in _field_names(cls) and "seed" not in merged:
            merged["seed"] = run.seed
        for k, v in (overrides.get(name) or {}).items():
            if v is not None:
                if k not in _field_names(cls):
                    raise ConfigError(f"unknown key {k!r} for section {name!r}")
                merged[k] = v
        try:
            run.sections[name] = cls(**_tuplify(cls, merged))
        except (TypeError, ValueError) as err:
            raise ConfigError(f"section {name!r}: {err}") from None
    return run


def load_file(path) -> dict:
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data
