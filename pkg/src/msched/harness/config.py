"""Experiment configuration and built-in profile fixtures."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from ..lattice import LatticeSpec
from ..noise import DeviceProfile, ProfileError, ProfileTransform, load_profile, profile_from_dict

DEFAULT_SHOTS = 100_000
MIN_SHOTS = 1000
BUILTIN_PROFILES = ("ibm-ithaca", "sycamore", "gate-dominated", "idle-heavy", "toy-d3")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SchedulerSpec:
    """``original``, ``ms_local`` or ``ms_rl`` with a depth bound ``m``."""

    kind: str
    m: Optional[int] = None

    @property
    def label(self) -> str:
        return f"ms_rl(m={self.m})" if self.kind == "ms_rl" else self.kind


_RL = re.compile(r"^ms_rl(?:\(m=(\d+)\)|:(\d+))$")


def parse_scheduler(text: str) -> SchedulerSpec:
    text = str(text).strip()
    if text in ("original", "ms_local"):
        return SchedulerSpec(text)
    hit = _RL.match(text)
    if hit:
        m = int(hit.group(1) or hit.group(2))
        if m < 1:
            raise ConfigError("ms_rl depth m must be at least 1")
        return SchedulerSpec("ms_rl", m)
    raise ConfigError(f"unknown scheduler {text!r} (original, ms_local, ms_rl(m=N))")


def builtin_profile_path(name: str) -> Path:
    return Path(str(resources.files("msched") / "data" / f"{name}.json"))


def read_profile_source(source: Union[str, dict]) -> dict:
    """Raw profile JSON from a built-in name, a path, or an inline object."""
    if isinstance(source, dict):
        return source
    if source in BUILTIN_PROFILES:
        return json.loads(builtin_profile_path(source).read_text())
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"profile {source!r} is neither a built-in name nor a file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed profile file {path}: {exc}") from None


@dataclass(frozen=True)
class RLSettings:
    epochs: int = 300
    steps_per_episode: Optional[int] = None
    learning_rate: float = 0.1
    discount: float = 0.95
    alpha_w: float = 1.0
    beta_w: float = 1.0
    gamma_w: Optional[float] = None


@dataclass(frozen=True)
class ExperimentConfig:
    distances: tuple[int, ...] = (3, 5, 7)
    rounds: int = 7
    profile: Union[str, dict] = "ibm-ithaca"
    transform: ProfileTransform = field(default_factory=ProfileTransform)
    schedulers: tuple[SchedulerSpec, ...] = (SchedulerSpec("original"), SchedulerSpec("ms_local"))
    shots: int = DEFAULT_SHOTS
    seed: int = 0
    out: Optional[str] = None
    grid: tuple[float, ...] = ()
    rl: RLSettings = field(default_factory=RLSettings)
    workers: int = 1

    def __post_init__(self):
        if not self.distances:
            raise ConfigError("at least one distance is required")
        for d in self.distances:
            if not isinstance(d, int) or d % 2 == 0 or not 3 <= d <= 15:
                raise ConfigError(f"distance {d} must be odd and in [3, 15]")
        if self.rounds < 1:
            raise ConfigError("rounds must be positive")
        if self.shots < MIN_SHOTS:
            raise ConfigError(f"shots must be at least {MIN_SHOTS}")
        if not self.schedulers:
            raise ConfigError("at least one scheduler is required")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    def profile_for(self, lat: LatticeSpec, transform: Optional[ProfileTransform] = None) -> DeviceProfile:
        """Base profile for ``lat`` with the config's (or the given) transform applied."""
        raw = read_profile_source(self.profile)
        try:
            base = profile_from_dict(raw, lat)
        except ProfileError as exc:
            raise ConfigError(str(exc)) from None
        return (transform or self.transform).apply(base, lat)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)} | {"alpha", "std_scale", "beta", "scheduler"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw: dict = {}
    try:
        if "distances" in raw:
            kw["distances"] = tuple(int(d) for d in raw["distances"])
        for key in ("rounds", "shots", "seed", "workers"):
            if key in raw:
                kw[key] = int(raw[key])
        if "profile" in raw:
            kw["profile"] = raw["profile"]
        if "out" in raw:
            kw["out"] = str(raw["out"])
        t = raw.get("transform", {})
        t = {**t, **{k: raw[k] for k in ("alpha", "std_scale", "beta") if k in raw}}
        kw["transform"] = ProfileTransform(**{k: float(v) for k, v in t.items()})
        scheds = raw.get("schedulers", raw.get("scheduler"))
        if scheds is not None:
            if isinstance(scheds, str):
                scheds = [scheds]
            kw["schedulers"] = tuple(parse_scheduler(s) for s in scheds)
        if "grid" in raw:
            kw["grid"] = tuple(float(g) for g in raw["grid"])
        if "rl" in raw:
            kw["rl"] = RLSettings(**raw["rl"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config: {exc}") from None
    return ExperimentConfig(**kw)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    return config_from_dict(raw)


def load_profile_for(source: Union[str, dict], lat: LatticeSpec) -> DeviceProfile:
    if isinstance(source, str) and source not in BUILTIN_PROFILES and Path(source).exists():
        return load_profile(source, lat)
    return profile_from_dict(read_profile_source(source), lat)
