"""Run configuration: one JSON document covering every pipeline stage.

Unknown keys are rejected; missing keys take the dataclass defaults. Each
stage's lineage hash covers only the sections that influence its output.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .attack.greedy import AttackConfig
from .cohortgen import GeneratorConfig, stable_hash
from .errors import ConfigError
from .similarity import EncoderConfig
from .victim.train import TrainingConfig

ATTACKERS = ("survattack", "nosym", "random")


@dataclass(frozen=True)
class CooccurrenceConfig:
    scope: str = "record"
    direction: str = "candidate_given_anchor"

    def __post_init__(self):
        if self.scope not in ("record", "visit"):
            raise ValueError("cooccurrence.scope must be 'record' or 'visit'")
        if self.direction not in ("candidate_given_anchor", "anchor_given_candidate"):
            raise ValueError("cooccurrence.direction must be 'candidate_given_anchor' "
                             "or 'anchor_given_candidate'")


@dataclass(frozen=True)
class RunOptions:
    attacker: str = "survattack"
    budget: int = 10
    workers: int = 1

    def __post_init__(self):
        if self.attacker not in ATTACKERS:
            raise ValueError(f"run.attacker must be one of {ATTACKERS}")
        if self.budget < 0:
            raise ValueError("run.budget must be >= 0")
        if self.workers < 1:
            raise ValueError("run.workers must be >= 1")


SECTIONS = {
    "gen": GeneratorConfig,
    "victim": TrainingConfig,
    "encoder": EncoderConfig,
    "attack": AttackConfig,
    "cooccurrence": CooccurrenceConfig,
    "run": RunOptions,
}


@dataclass(frozen=True)
class RunConfig:
    gen: GeneratorConfig = field(default_factory=GeneratorConfig)
    victim: TrainingConfig = field(default_factory=TrainingConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    cooccurrence: CooccurrenceConfig = field(default_factory=CooccurrenceConfig)
    run: RunOptions = field(default_factory=RunOptions)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(data) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"unknown config key: {unknown[0]}")
        parts = {}
        for name, klass in SECTIONS.items():
            section = data.get(name, {})
            if not isinstance(section, dict):
                raise ConfigError(f"config section {name} must be an object")
            known = {f.name for f in dataclasses.fields(klass)}
            extra = sorted(set(section) - known)
            if extra:
                raise ConfigError(f"unknown config key: {name}.{extra[0]}")
            try:
                parts[name] = klass(**section)
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc)) from None
        return cls(**parts)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc.msg}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {name: _jsonable(dataclasses.asdict(getattr(self, name))) for name in SECTIONS}

    def replace(self, **sections) -> "RunConfig":
        """Copy with per-section field overrides, e.g. ``replace(attack={"lam": 0})``."""
        data = self.to_dict()
        for name, overrides in sections.items():
            data[name].update(overrides)
        return RunConfig.from_dict(data)

    def with_seed(self, seed: int) -> "RunConfig":
        return self.replace(gen={"seed": seed}, victim={"seed": seed},
                            encoder={"seed": seed}, attack={"seed": seed})

    def lineage(self) -> dict:
        d = self.to_dict()
        return {
            "gen": stable_hash(d["gen"]),
            "train": stable_hash([d["gen"], d["victim"]]),
            "attack": stable_hash([d["gen"], d["victim"], d["encoder"], d["attack"],
                                   d["cooccurrence"], d["run"]]),
        }

    def config_hash(self) -> str:
        return stable_hash(self.to_dict())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj
