"""JSON experiment configuration.

One file, one section per component::

    {"rules": {...}, "generator": {...}, "train": {...},
     "attack": {...}, "merge": {...}, "experiment": {...}}

Every section and key is optional; unknown keys are rejected.
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .attack import AttackConfig
from .candlestick import RuleParams
from .cnn import TrainConfig
from .datagen import GeneratorConfig
from .errors import ConfigError

SECTIONS = ("rules", "generator", "train", "attack", "merge", "experiment")


@dataclass(frozen=True)
class MergeConfig:
    clean_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.clean_fraction < 1:
            raise ConfigError("merge: clean_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class ExperimentConfig:
    n_runs: int = 20
    master_seed: int = 0
    # sample a fresh adversarial pool from every run's clean model instead of
    # one pool from the run-0 reference model
    pool_per_run: bool = False

    def __post_init__(self):
        if self.n_runs < 2:
            raise ConfigError("experiment: n_runs must be >= 2")


@dataclass(frozen=True)
class Config:
    rules: RuleParams = field(default_factory=RuleParams)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    merge: MergeConfig = field(default_factory=MergeConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def with_seed(self, seed: int) -> "Config":
        """Override every section's seed (and the experiment master seed)."""
        return replace(
            self,
            generator=replace(self.generator, seed=seed),
            train=replace(self.train, seed=seed),
            attack=replace(self.attack, seed=seed),
            merge=replace(self.merge, seed=seed),
            experiment=replace(self.experiment, master_seed=seed),
        )

    def to_dict(self) -> dict:
        gen = asdict(self.generator)
        gen.pop("rule_params")
        return {
            "rules": self.rules.to_dict(),
            "generator": gen,
            "train": asdict(self.train),
            "attack": self.attack.to_dict(),
            "merge": asdict(self.merge),
            "experiment": asdict(self.experiment),
        }


def _build(cls, section: str, raw, **extra):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{section}: expected an object")
    known = {f.name for f in fields(cls)} - set(extra)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")
    try:
        return cls(**raw, **extra)
    except TypeError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def from_dict(doc: dict) -> Config:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    rules = _build(RuleParams, "rules", doc.get("rules"))
    attack_raw = dict(doc.get("attack") or {})
    for key in ("schedule", "channels"):
        if isinstance(attack_raw.get(key), list):
            attack_raw[key] = tuple(
                tuple(v) if isinstance(v, list) else v for v in attack_raw[key]
            )
    return Config(
        rules=rules,
        generator=_build(GeneratorConfig, "generator", doc.get("generator"), rule_params=rules),
        train=_build(TrainConfig, "train", doc.get("train")),
        attack=_build(AttackConfig, "attack", attack_raw),
        merge=_build(MergeConfig, "merge", doc.get("merge")),
        experiment=_build(ExperimentConfig, "experiment", doc.get("experiment")),
    )


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return from_dict(doc)
