"""Device error profiles and the synthetic transforms applied to them."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np
from scipy.stats import truncnorm

from .lattice import LatticeSpec

MER_FLOOR = 1e-6
MER_CEIL = 0.5
DEPOL_CEIL = 0.75

DEFAULT_ROUND_DEPOL = 0.001
DEFAULT_IDLE_DEPOL = 0.0005


class ProfileError(ValueError):
    pass


def clamp_mer(p: float) -> float:
    return min(MER_CEIL, max(MER_FLOOR, float(p)))


def _check_prob(name: str, p, hi: float = MER_CEIL) -> float:
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise ProfileError(f"{name}: not a number: {p!r}") from None
    if not math.isfinite(p) or p < 0 or p > hi:
        raise ProfileError(f"{name}: probability out of range: {p}")
    return p


@dataclass(frozen=True)
class DeviceProfile:
    """Per-qubit measurement error rates plus uniform gate/depolarizing rates.

    ``mer`` is indexed by lattice qubit index.  ``ger_overrides`` maps a sorted
    ``(a, b)`` edge to its own two-qubit gate error; it is empty unless a
    profile file supplies it.
    """

    name: str
    mer: tuple[float, ...]
    ger: float
    round_depol: float = DEFAULT_ROUND_DEPOL
    idle_depol_per_tick: float = DEFAULT_IDLE_DEPOL
    seed: Optional[int] = None
    ger_overrides: Mapping[tuple[int, int], float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for i, p in enumerate(self.mer):
            _check_prob(f"mer[{i}]", p)
        _check_prob("ger", self.ger)
        _check_prob("round_depol", self.round_depol, DEPOL_CEIL)
        _check_prob("idle_depol_per_tick", self.idle_depol_per_tick, DEPOL_CEIL)

    def gate_error(self, a: int, b: int) -> float:
        if self.ger_overrides:
            return self.ger_overrides.get((min(a, b), max(a, b)), self.ger)
        return self.ger

    @property
    def mean_mer(self) -> float:
        return float(np.mean(self.mer))

    def mean_data_mer(self, lat: LatticeSpec) -> float:
        return float(np.mean([self.mer[q] for q in lat.data]))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "ger": self.ger,
            "default_mer": self.mean_mer,
            "mer_overrides": {str(i): p for i, p in enumerate(self.mer)},
            "round_depol": self.round_depol,
            "idle_depol_per_tick": self.idle_depol_per_tick,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ProfileTransform:
    alpha: float = 1.0
    std_scale: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for k in ("alpha", "std_scale", "beta"):
            v = getattr(self, k)
            if not math.isfinite(v):
                raise ValueError(f"{k} must be finite")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.std_scale < 0 or self.beta < 0:
            raise ValueError("std_scale and beta must be non-negative")

    def apply(self, p: DeviceProfile, lat: LatticeSpec) -> DeviceProfile:
        if self.std_scale != 1.0:
            p = scale_mer_std(p, self.std_scale)
        if self.alpha != 1.0:
            p = scale_data_mer(p, lat, self.alpha)
        return p


def synthesize_profile(
    lat: LatticeSpec,
    mean_mer: float,
    std_mer: float,
    ger: float,
    seed: int,
    *,
    round_depol: float = DEFAULT_ROUND_DEPOL,
    idle_depol_per_tick: float = DEFAULT_IDLE_DEPOL,
    name: str = "synthetic",
    pin_mean: bool = False,
) -> DeviceProfile:
    """Draw every qubit's MER i.i.d. from a normal truncated to [1e-6, 0.5].

    With ``pin_mean`` the draws are rescaled so their sample mean is exactly
    ``mean_mer``; truncation otherwise pulls the sample mean upward.
    """
    if not (math.isfinite(mean_mer) and MER_FLOOR <= mean_mer <= MER_CEIL):
        raise ProfileError(f"invalid mean_mer {mean_mer}")
    if not (math.isfinite(std_mer) and std_mer >= 0):
        raise ProfileError(f"invalid std_mer {std_mer}")
    n = lat.num_qubits
    if std_mer == 0:
        mer = [float(mean_mer)] * n
    else:
        lo = (MER_FLOOR - mean_mer) / std_mer
        hi = (MER_CEIL - mean_mer) / std_mer
        rng = np.random.default_rng(seed)
        draws = truncnorm.rvs(lo, hi, loc=mean_mer, scale=std_mer, size=n, random_state=rng)
        if pin_mean:
            draws = draws * (mean_mer / float(np.mean(draws)))
        mer = [clamp_mer(x) for x in draws]
    return DeviceProfile(
        name=name,
        mer=tuple(mer),
        ger=_check_prob("ger", ger),
        round_depol=round_depol,
        idle_depol_per_tick=idle_depol_per_tick,
        seed=seed,
    )


def _parse_edge_key(key: str) -> tuple[int, int]:
    a, b = (int(x) for x in str(key).replace(",", "-").split("-"))
    return (min(a, b), max(a, b))


def profile_from_dict(raw: dict, lat: LatticeSpec) -> DeviceProfile:
    """Build a profile from its JSON form.

    Two shapes are accepted: explicit (``default_mer`` plus optional
    ``mer_overrides``) and synthetic (``mean_mer``/``std_mer``, drawn for
    ``lat`` with the file's seed).
    """
    if not isinstance(raw, dict):
        raise ProfileError("profile must be a JSON object")
    if "ger" not in raw:
        raise ProfileError("profile is missing 'ger'")
    name = str(raw.get("name", "profile"))
    ger = _check_prob("ger", raw["ger"])
    round_depol = _check_prob("round_depol", raw.get("round_depol", DEFAULT_ROUND_DEPOL), DEPOL_CEIL)
    idle = _check_prob(
        "idle_depol_per_tick", raw.get("idle_depol_per_tick", DEFAULT_IDLE_DEPOL), DEPOL_CEIL
    )
    seed = raw.get("seed")
    if "num_qubits" in raw and int(raw["num_qubits"]) != lat.num_qubits:
        raise ProfileError(
            f"qubit count mismatch: file has {raw['num_qubits']}, lattice has {lat.num_qubits}"
        )

    if "mean_mer" in raw:
        prof = synthesize_profile(
            lat,
            _check_prob("mean_mer", raw["mean_mer"]),
            float(raw.get("std_mer", 0.0)),
            ger,
            int(seed if seed is not None else 0),
            round_depol=round_depol,
            idle_depol_per_tick=idle,
            name=name,
            pin_mean=bool(raw.get("pin_mean", False)),
        )
    elif "default_mer" in raw:
        default = _check_prob("default_mer", raw["default_mer"])
        mer = [default] * lat.num_qubits
        overrides = raw.get("mer_overrides") or {}
        if not isinstance(overrides, dict):
            raise ProfileError("mer_overrides must be an object")
        for k, v in overrides.items():
            try:
                idx = int(k)
            except ValueError:
                raise ProfileError(f"bad qubit key {k!r}") from None
            if not 0 <= idx < lat.num_qubits:
                raise ProfileError(f"qubit count mismatch: index {idx} outside lattice")
            mer[idx] = _check_prob(f"mer[{idx}]", v)
        prof = DeviceProfile(name, tuple(mer), ger, round_depol, idle, seed)
    else:
        raise ProfileError("profile needs 'default_mer' or 'mean_mer'")

    ger_over = raw.get("ger_overrides") or {}
    if ger_over:
        parsed = {_parse_edge_key(k): _check_prob(f"ger[{k}]", v) for k, v in ger_over.items()}
        prof = replace(prof, ger_overrides=parsed)
    return prof


def load_profile(path: Union[str, Path], lat: LatticeSpec) -> DeviceProfile:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ProfileError(f"malformed profile file {path}: {exc}") from None
    return profile_from_dict(raw, lat)


def scale_data_mer(p: DeviceProfile, lat: LatticeSpec, alpha: float) -> DeviceProfile:
    """Scale data-qubit MER by ``alpha``; measure-qubit MER is left alone."""
    if alpha == 1.0:
        return p
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    mer = list(p.mer)
    for q in lat.data:
        mer[q] = clamp_mer(alpha * mer[q])
    return replace(p, mer=tuple(mer))


def scale_mer_std(p: DeviceProfile, s: float) -> DeviceProfile:
    """Stretch the MER spread about its mean: ``mu + s * (mer - mu)``."""
    if s < 0:
        raise ValueError("std scale must be non-negative")
    if s == 1.0:
        return p
    mu = float(np.mean(p.mer))
    mer = tuple(clamp_mer(mu + s * (x - mu)) for x in p.mer)
    return replace(p, mer=mer)


def idle_depolarize_prob(p: DeviceProfile, ticks_waited: int, beta: float) -> float:
    if ticks_waited < 0 or beta < 0:
        raise ValueError("ticks_waited and beta must be non-negative")
    if ticks_waited == 0:
        return 0.0
    per_tick = min(1.0, beta * p.idle_depol_per_tick)
    if ticks_waited == 1:
        prob = per_tick
    else:
        prob = 1.0 - (1.0 - per_tick) ** ticks_waited
    return min(DEPOL_CEIL, max(0.0, prob))
