"""MS-RL: pointer-based scheduling under a queue-length bound.

Every readout unit keeps its candidate options sorted by ascending cost,
filtered to those strictly cheaper than measuring the unit directly (plus
direct measurement itself).  The state is one pointer per unit; an action
moves one pointer by one step.  After each move the pointed-to options are
packed into ticks and the queue length ``tau`` is compared with the bound
``m``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .lattice import LatticeSpec
from .modalities import enumerate_modalities
from .noise import DeviceProfile
from .scheduler import (
    Assignment,
    Option,
    Schedule,
    ScheduleError,
    Unit,
    dm_option,
    option_cost,
    option_key,
    readout_units,
    resolve_conflicts,
)

MAX_ORACLE_CONFIGS = 10**7


class InfeasibleScheduleError(RuntimeError):
    """No configuration with ``tau <= m`` was found."""


def unit_sequence(lat: LatticeSpec, unit: Unit, p: DeviceProfile) -> tuple[Option, ...]:
    """Options for one unit, cheapest first, ending at direct measurement."""
    dm = dm_option(unit)
    bound = option_cost(dm, p)

    def singles(q: int) -> list[Option]:
        own = option_cost(((dm_option((q,))[0]),), p)
        out = [(i,) for i in enumerate_modalities(lat, q) if option_cost((i,), p) < own]
        return out + [dm_option((q,))]

    if len(unit) == 1:
        opts = singles(unit[0])
    else:
        opts = [(i,) for i in enumerate_modalities(lat, unit) if option_cost((i,), p) < bound]
        for a, b in product(singles(unit[0]), singles(unit[1])):
            opts.append(a + b)
    opts = sorted(set(opts), key=lambda o: option_key(o, p) + (o,))
    return tuple(opts)


@dataclass(frozen=True)
class Action:
    unit: int
    delta: int


@dataclass(frozen=True)
class RewardParams:
    """Reward weights; ``*_final`` values ramp linearly over training when set."""

    alpha_w: float = 1.0
    beta_w: float = 1.0
    gamma_w: Optional[float] = None
    alpha_w_final: Optional[float] = None
    beta_w_final: Optional[float] = None

    def __post_init__(self):
        for k in ("alpha_w", "beta_w", "gamma_w", "alpha_w_final", "beta_w_final"):
            v = getattr(self, k)
            if v is not None and (not math.isfinite(v) or v < 0):
                raise ValueError(f"{k} must be finite and non-negative")

    def weights(self, progress: float = 0.0) -> tuple[float, float]:
        def ramp(a, b):
            return a if b is None else a + (b - a) * min(1.0, max(0.0, progress))

        return ramp(self.alpha_w, self.alpha_w_final), ramp(self.beta_w, self.beta_w_final)


class SchedulingEnv:
    """Static part of the environment: sequences, costs and a tau cache."""

    def __init__(self, lat: LatticeSpec, p: DeviceProfile, m: int):
        if m < 1:
            raise ValueError("schedule depth m must be at least 1")
        self.lattice = lat
        self.profile = p
        self.m = int(m)
        self.units: tuple[Unit, ...] = tuple(readout_units(lat))
        self.sequences = tuple(unit_sequence(lat, u, p) for u in self.units)
        if any(len(s) == 0 for s in self.sequences):
            raise ScheduleError("a readout unit has no candidate modality")
        self.costs = tuple(tuple(option_cost(o, p) for o in seq) for seq in self.sequences)
        self.default_gamma = 1.0 / (len(self.units) * max(p.mer))
        self._tau_cache: dict[tuple[int, ...], int] = {}

    @property
    def k(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.sequences)

    def assignment(self, pointers: Sequence[int]) -> Assignment:
        return Assignment({u: self.sequences[i][pointers[i]] for i, u in enumerate(self.units)})

    def schedule(self, pointers: Sequence[int]) -> Schedule:
        return resolve_conflicts(self.assignment(pointers))

    def tau(self, pointers: Sequence[int]) -> int:
        key = tuple(pointers)
        t = self._tau_cache.get(key)
        if t is None:
            t = self.schedule(key).tau
            self._tau_cache[key] = t
        return t

    def cost(self, pointers: Sequence[int]) -> float:
        total = 0.0
        for i, ptr in enumerate(pointers):
            total += self.costs[i][ptr]
        return total

    def initial_state(self) -> "EnvState":
        ptrs = tuple(0 for _ in self.units)
        return EnvState(self, ptrs, self.tau(ptrs), 0)


@dataclass(frozen=True)
class EnvState:
    env: SchedulingEnv = field(compare=False, repr=False)
    pointers: tuple[int, ...]
    tau: int
    step_count: int = 0

    @property
    def m(self) -> int:
        return self.env.m

    @property
    def sequences(self):
        return self.env.sequences

    @property
    def feasible(self) -> bool:
        return self.tau <= self.env.m

    @property
    def total_cost(self) -> float:
        return self.env.cost(self.pointers)


def build_env(lat: LatticeSpec, p: DeviceProfile, m: int) -> EnvState:
    return SchedulingEnv(lat, p, m).initial_state()


def valid_actions(s: EnvState) -> list[Action]:
    out = []
    for i, (ptr, k) in enumerate(zip(s.pointers, s.env.k)):
        if ptr > 0:
            out.append(Action(i, -1))
        if ptr < k - 1:
            out.append(Action(i, +1))
    return out


def reward_value(
    old_tau: int, new_tau: int, new_cost: float, m: int, r: RewardParams, gamma: float, progress: float = 0.0
) -> float:
    a_w, b_w = r.weights(progress)
    dq_minus = max(0, old_tau - new_tau)
    dq_plus = max(0, new_tau - old_tau)
    value = a_w * dq_minus / m - b_w * dq_plus / m - gamma * new_cost
    if new_tau > m:
        value -= b_w * (new_tau - m) / m
    return value


def step(s: EnvState, a: Action, r: RewardParams, progress: float = 0.0) -> tuple[EnvState, float]:
    k = s.env.k
    if not (0 <= a.unit < len(k)) or a.delta not in (-1, 1):
        raise ValueError(f"invalid action {a}")
    ptr = s.pointers[a.unit] + a.delta
    if not 0 <= ptr < k[a.unit]:
        raise ValueError(f"action {a} moves pointer out of range")
    ptrs = s.pointers[: a.unit] + (ptr,) + s.pointers[a.unit + 1 :]
    new = EnvState(s.env, ptrs, s.env.tau(ptrs), s.step_count + 1)
    gamma = s.env.default_gamma if r.gamma_w is None else r.gamma_w
    return new, reward_value(s.tau, new.tau, new.total_cost, s.env.m, r, gamma, progress)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    steps_per_episode: Optional[int] = None
    learning_rate: float = 0.1
    discount: float = 0.95
    seed: int = 0
    baseline_decay: float = 0.9

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.steps_per_episode is not None and self.steps_per_episode < 1:
            raise ValueError("steps_per_episode must be positive")
        if not (self.learning_rate > 0 and 0 <= self.discount <= 1):
            raise ValueError("learning_rate must be positive and discount in [0, 1]")


class LinearPolicy:
    """Masked softmax over ``2 * units`` actions, linear in pointer one-hots and tau/m."""

    def __init__(self, env: SchedulingEnv):
        self.env = env
        self.offsets = np.concatenate([[0], np.cumsum(env.k)])
        self.num_features = int(self.offsets[-1]) + 2
        self.num_actions = 2 * len(env.units)
        self.theta = np.zeros((self.num_actions, self.num_features))

    def features(self, s: EnvState) -> np.ndarray:
        f = np.zeros(self.num_features)
        f[self.offsets[:-1] + np.array(s.pointers)] = 1.0
        f[-2] = s.tau / s.env.m
        f[-1] = 1.0
        return f

    @staticmethod
    def action_index(a: Action) -> int:
        return 2 * a.unit + (1 if a.delta > 0 else 0)

    def mask(self, s: EnvState) -> np.ndarray:
        mask = np.zeros(self.num_actions, dtype=bool)
        for a in valid_actions(s):
            mask[self.action_index(a)] = True
        return mask

    def probabilities(self, s: EnvState) -> np.ndarray:
        return self._probs(self.features(s), self.mask(s))

    def _probs(self, f: np.ndarray, mask: np.ndarray) -> np.ndarray:
        logits = self.theta @ f
        logits = np.where(mask, logits, -np.inf)
        logits -= logits[mask].max()
        w = np.exp(logits)
        return w / w.sum()


@dataclass
class TrainResult:
    policy: LinearPolicy
    best_cost: float
    best_pointers: tuple[int, ...]
    assignment: Assignment
    schedule: Schedule
    curve: list[float]
    mean_rewards: list[float]


def train(env: SchedulingEnv, r: RewardParams, cfg: TrainConfig) -> TrainResult:
    """REINFORCE with a moving-average baseline; keeps the cheapest feasible state seen."""
    rng = np.random.default_rng(cfg.seed)
    policy = LinearPolicy(env)
    steps = cfg.steps_per_episode or 4 * len(env.units)
    baseline = None
    best_cost, best_ptrs = math.inf, None
    curve, mean_rewards = [], []

    def consider(s: EnvState):
        nonlocal best_cost, best_ptrs
        if s.feasible:
            c = s.total_cost
            if c < best_cost or (c == best_cost and s.pointers < best_ptrs):
                best_cost, best_ptrs = c, s.pointers

    for epoch in range(cfg.epochs):
        progress = epoch / max(1, cfg.epochs - 1)
        s = env.initial_state()
        consider(s)
        feats, masks, acts, rewards = [], [], [], []
        for _ in range(steps):
            mask = policy.mask(s)
            if not mask.any():
                break
            f = policy.features(s)
            probs = policy._probs(f, mask)
            ai = int(rng.choice(policy.num_actions, p=probs))
            a = Action(ai // 2, 1 if ai % 2 else -1)
            s, rew = step(s, a, r, progress)
            consider(s)
            feats.append(f)
            masks.append(mask)
            acts.append(ai)
            rewards.append(rew)
        if rewards:
            returns = np.zeros(len(rewards))
            g = 0.0
            for t in range(len(rewards) - 1, -1, -1):
                g = rewards[t] + cfg.discount * g
                returns[t] = g
            mean_ret = float(returns.mean())
            baseline = mean_ret if baseline is None else (
                cfg.baseline_decay * baseline + (1 - cfg.baseline_decay) * mean_ret
            )
            grad = np.zeros_like(policy.theta)
            for f, mask, ai, ret in zip(feats, masks, acts, returns):
                probs = policy._probs(f, mask)
                coef = -probs
                coef[ai] += 1.0
                grad += np.outer(coef * (ret - baseline), f)
            policy.theta += cfg.learning_rate * grad / len(rewards)
        curve.append(best_cost)
        mean_rewards.append(float(np.mean(rewards)) if rewards else 0.0)

    if best_ptrs is None:
        raise InfeasibleScheduleError(
            f"no configuration with tau <= {env.m} found in {cfg.epochs} epochs"
        )
    assignment = env.assignment(best_ptrs)
    return TrainResult(
        policy, best_cost, best_ptrs, assignment, resolve_conflicts(assignment), curve, mean_rewards
    )


def constrained_oracle(
    lat: LatticeSpec, p: DeviceProfile, m: int, max_configs: int = MAX_ORACLE_CONFIGS
) -> tuple[float, Assignment]:
    """Cheapest configuration with ``tau <= m``, by best-first enumeration.

    Configurations are popped in ascending total cost from a heap over
    pointer vectors; the first feasible one is optimal.
    """
    env = SchedulingEnv(lat, p, m)
    k = env.k
    if math.prod(k) > max_configs:
        raise ValueError(f"search space too large: {math.prod(k)} configurations")
    start = tuple(0 for _ in k)
    heap = [(env.cost(start), start, 0)]
    while heap:
        c, ptrs, last = heapq.heappop(heap)
        if env.tau(ptrs) <= m:
            return env.cost(ptrs), env.assignment(ptrs)
        # each vector is generated once: only bump coordinates >= the last bumped
        for i in range(last, len(k)):
            if ptrs[i] + 1 < k[i]:
                nxt = ptrs[:i] + (ptrs[i] + 1,) + ptrs[i + 1 :]
                heapq.heappush(heap, (env.cost(nxt), nxt, i))
    raise InfeasibleScheduleError(f"no configuration with tau <= {m}")


def ms_local_baseline(lat: LatticeSpec, p: DeviceProfile) -> tuple[float, int]:
    """Relaxed greedy cost and its natural (unconstrained) queue length."""
    from .scheduler import select_local, total_cost

    a = select_local(lat, p)
    return total_cost(a, p), resolve_conflicts(a).tau
