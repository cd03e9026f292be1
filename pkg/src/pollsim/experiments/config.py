"""Scenario configuration: flat key=value files, CLI overrides, defaults."""

from __future__ import annotations

import ast
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from ..effort import EffortParams
from ..protocol import MONTH, YEAR, ProtocolParams

ADVERSARIES = ("none", "stealth_lurk", "stealth_attack", "nuisance",
               "attrition")
STOP_CHOICES = ("none", "inconclusive", "interpoll", "spoofing", "any")


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    """Experiment inputs; defaults reproduce the baseline deployment
    parameters (N=20, Q=10, D=3, A=3, I=10, E=4 polls, R=3 months)."""
    name: str = "scenario"
    # population
    peers: int = 1000
    cluster_size: int = 30
    intra_cluster_fraction: float = 0.8
    # protocol
    inner_size: int = 20
    quorum: int = 10
    max_minority: int = 3
    max_discredited: int = 3
    nominations: int = 10
    entry_max_age: int = 4
    poll_interval_months: float = 3.0
    interval_jitter: float = 0.2
    churn: float = 0.10
    ref_target_multiplier: int = 3
    # archival unit / effort scale
    au_blocks: int = 4
    block_cost: int = 1
    au_hash_seconds: float = 120.0
    au_size_mb: float = 50.0
    # faults
    damage_mtbf_years: float = 0.0          # 0 disables random damage
    # adversary
    adversary: str = "none"
    subversion: float = 0.0
    extra_cpus: float = 0.0                 # inf allowed ("unlimited")
    cpus: Optional[float] = None            # overrides subverted+extra
    initial_foothold: float = 0.0
    foothold_exact: bool = False            # exact per-list ratio variant
    nic_cap: Optional[int] = None
    # run control
    horizon_years: float = 20.0
    stop_on_alarm: str = "none"
    seeds: tuple = (1,)
    workers: int = 1
    out_dir: str = "out"

    def __post_init__(self):
        if self.adversary not in ADVERSARIES:
            raise ConfigError(f"unknown adversary {self.adversary!r}")
        if self.stop_on_alarm not in STOP_CHOICES:
            raise ConfigError(f"unknown stop_on_alarm {self.stop_on_alarm!r}")
        if not 0 <= self.subversion < 1:
            raise ConfigError("subversion fraction must be in [0, 1)")
        if self.cluster_size > self.peers:
            raise ConfigError("cluster larger than population")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        self.seeds = tuple(int(s) for s in self.seeds)

    # -- derived parameter objects --------------------------------------

    def protocol_params(self) -> ProtocolParams:
        return ProtocolParams(
            inner_size=self.inner_size, quorum=self.quorum,
            max_minority=self.max_minority,
            max_discredited=self.max_discredited,
            nominations=self.nominations, entry_max_age=self.entry_max_age,
            poll_interval=self.poll_interval_months * MONTH,
            churn=self.churn,
            ref_target_multiplier=self.ref_target_multiplier,
            interval_jitter=self.interval_jitter)

    def effort_params(self) -> EffortParams:
        return EffortParams.canonical(self.au_blocks, self.block_cost,
                                      self.au_hash_seconds)

    @property
    def horizon_seconds(self) -> float:
        return self.horizon_years * YEAR

    @property
    def damage_mtbf_seconds(self) -> Optional[float]:
        if not self.damage_mtbf_years or math.isinf(self.damage_mtbf_years):
            return None
        return self.damage_mtbf_years * YEAR

    @property
    def au_bits(self) -> float:
        return self.au_size_mb * 8e6

    def subverted_count(self) -> int:
        return int(self.peers * self.subversion)

    def total_cpus(self) -> float:
        if self.cpus is not None:
            return self.cpus
        return self.subverted_count() + self.extra_cpus

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)

    def fingerprint(self) -> tuple:
        """Everything except seeds/workers/output; used to reject mixing
        summaries from different configurations in one aggregate."""
        skip = {"seeds", "workers", "out_dir", "name"}
        return tuple(sorted(
            (f.name, repr(getattr(self, f.name)))
            for f in dataclasses.fields(self) if f.name not in skip))


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}


def _coerce(key: str, value: Union[str, object]):
    """Parse a raw config value into the field's type."""
    if key not in _FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in ("unlimited", "inf", "infinite"):
            return math.inf
        if text.lower() == "none":
            return None
        try:
            value = ast.literal_eval(text)
        except (ValueError, SyntaxError):
            value = text    # bare string, e.g. adversary = nuisance
    if key == "seeds":
        if isinstance(value, int):
            return (value,)
        return tuple(int(v) for v in value)
    return value


def parse_config_text(text: str, base: Optional[ScenarioConfig] = None,
                      ) -> ScenarioConfig:
    """Parse a flat `key = value` scenario file.

    Values use Python literal syntax; bare words are strings; `#` starts a
    comment; `unlimited` means +inf.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected `key = value`")
        key, _, val = line.partition("=")
        key = key.strip()
        values[key] = _coerce(key, val)
    merged = dataclasses.asdict(base) if base else {}
    merged.update(values)
    try:
        return ScenarioConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_config_text(text)


def apply_overrides(config: ScenarioConfig, pairs: dict) -> ScenarioConfig:
    """CLI `key=value` overrides win over file keys."""
    return config.replace(**{k: _coerce(k, v) for k, v in pairs.items()})
