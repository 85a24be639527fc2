"""Declarative pipeline configuration.

One TOML file with [paths], [match], [loop], and [service] sections;
every key can be overridden through an OSSNER_<SECTION>_<KEY>
environment variable.  A run is reproducible from config + inputs +
seed.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .core import PipelineError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_PREFIX = "OSSNER"


@dataclass
class PathsSection:
    corpus: Optional[str] = None
    dicts: list[str] = field(default_factory=list)
    rules: Optional[str] = None
    provider: Optional[str] = None
    oracle: Optional[str] = None
    stopwords: Optional[str] = None
    model: Optional[str] = None
    annotations: Optional[str] = None
    eval_gold: Optional[str] = None
    out_dir: str = "out"


@dataclass
class MatchSection:
    url_pattern: Optional[str] = None
    regex_rejectors: list[str] = field(default_factory=list)


@dataclass
class LoopSection:
    per_year: int = 0
    year_start: int = 0
    year_end: int = 0
    threshold: float = 0.5
    max_rounds: Optional[int] = None
    max_human_labels: Optional[int] = None
    seed: int = 0


@dataclass
class ServiceSection:
    host: str = "127.0.0.1"
    port: int = 8571
    claim_ttl: float = 300.0
    prime: bool = True
    static_dir: str = ""


@dataclass
class PipelineConfig:
    paths: PathsSection = field(default_factory=PathsSection)
    match: MatchSection = field(default_factory=MatchSection)
    loop: LoopSection = field(default_factory=LoopSection)
    service: ServiceSection = field(default_factory=ServiceSection)

    def validate_paths(self, *names: str) -> None:
        """Fail fast when a referenced input file is missing."""
        for name in names:
            value = getattr(self.paths, name)
            if value is None:
                raise PipelineError(f"config paths.{name} is required")
            targets = value if isinstance(value, list) else [value]
            if not targets:
                raise PipelineError(f"config paths.{name} is required")
            for target in targets:
                if not Path(target).exists():
                    raise PipelineError(f"paths.{name}: no such file {target!r}")


def _coerce(current, raw: str):
    if isinstance(current, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, list):
        return [item for item in raw.split(",") if item]
    return raw


def _apply_section(section, values: dict, name: str):
    known = {f.name for f in fields(section)}
    for key, value in values.items():
        if key not in known:
            raise PipelineError(f"unknown config key {name}.{key}")
        setattr(section, key, value)
    for key in known:
        env = os.environ.get(f"{ENV_PREFIX}_{name.upper()}_{key.upper()}")
        if env is not None:
            setattr(section, key, _coerce(getattr(section, key), env))


def load_config(path: Optional[Path]) -> PipelineConfig:
    data = {}
    if path is not None:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
    cfg = PipelineConfig()
    for name, section in (
        ("paths", cfg.paths),
        ("match", cfg.match),
        ("loop", cfg.loop),
        ("service", cfg.service),
    ):
        _apply_section(section, data.get(name, {}), name)
    return cfg
