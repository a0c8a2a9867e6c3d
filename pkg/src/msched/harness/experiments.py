"""Memory runs, parameter sweeps, scheduler comparison and crossover detection."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from ..lattice import LatticeSpec, build_lattice
from ..noise import DeviceProfile, ProfileTransform
from ..rl import InfeasibleScheduleError, RewardParams, SchedulingEnv, TrainConfig, constrained_oracle, train
from ..scheduler import Schedule, all_dm, resolve_conflicts, select_local
from ..sim.estimate import ErrorEstimate, logical_error_rate, merge_estimates
from .config import ExperimentConfig, SchedulerSpec, parse_scheduler

CSV_COLUMNS = ("sweep_key", "d", "scheduler", "value", "rate", "ci_lo", "ci_hi")
SWEEP_KINDS = ("alpha", "std", "beta", "depth_m")
BOOTSTRAP_SAMPLES = 2000


@dataclass(frozen=True)
class ResultRow:
    sweep_key: str
    d: int
    scheduler: str
    value: float
    rate: float
    ci_lo: Optional[float] = None
    ci_hi: Optional[float] = None
    estimate: Optional[ErrorEstimate] = None

    def as_csv(self) -> dict:
        def fmt(x):
            return "" if x is None else repr(float(x))

        return {
            "sweep_key": self.sweep_key,
            "d": self.d,
            "scheduler": self.scheduler,
            "value": fmt(self.value),
            "rate": fmt(self.rate),
            "ci_lo": fmt(self.ci_lo),
            "ci_hi": fmt(self.ci_hi),
        }


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row.as_csv())
    return buf.getvalue()


def read_rows(text: str) -> list[ResultRow]:
    """Parse a long-format CSV, validating its header."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV columns {reader.fieldnames}")

    def num(x):
        return None if x == "" else float(x)

    return [
        ResultRow(r["sweep_key"], int(r["d"]), r["scheduler"], num(r["value"]), num(r["rate"]),
                  num(r["ci_lo"]), num(r["ci_hi"]))
        for r in reader
    ]


def derived_seed(seed: int, *key: int) -> int:
    """Stable per-point seed so each row reproduces from (config, seed) alone."""
    return int(np.random.SeedSequence([seed, *key]).generate_state(1)[0])


def rl_schedule(lat: LatticeSpec, p: DeviceProfile, m: int, cfg: ExperimentConfig) -> Schedule:
    s = cfg.rl
    r = RewardParams(s.alpha_w, s.beta_w, s.gamma_w)
    tc = TrainConfig(
        epochs=s.epochs, steps_per_episode=s.steps_per_episode, learning_rate=s.learning_rate,
        discount=s.discount, seed=derived_seed(cfg.seed, lat.distance, m),
    )
    return train(SchedulingEnv(lat, p, m), r, tc).schedule


def make_schedule(
    spec: SchedulerSpec, lat: LatticeSpec, p: DeviceProfile, cfg: ExperimentConfig
) -> Schedule:
    if spec.kind == "original":
        return resolve_conflicts(all_dm(lat))
    if spec.kind == "ms_local":
        return resolve_conflicts(select_local(lat, p))
    return rl_schedule(lat, p, spec.m, cfg)


def _estimate(args) -> ErrorEstimate:
    lat, sched, p, r, beta, shots, seed = args
    return logical_error_rate(lat, sched, p, r, beta, shots, seed)


def _run_points(points: list, workers: int) -> list[ErrorEstimate]:
    if workers <= 1 or len(points) <= 1:
        return [_estimate(a) for a in points]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_estimate, points))


def _memory_rows(
    cfg: ExperimentConfig, sweep_key: str, values: Sequence[float], transforms: Sequence[ProfileTransform]
) -> list[ResultRow]:
    jobs, labels = [], []
    for d in cfg.distances:
        lat = build_lattice(d)
        cache: dict = {}
        for value, tf in zip(values, transforms):
            p = cfg.profile_for(lat, tf)
            for spec in cfg.schedulers:
                # beta does not change the profile, so schedules are shared
                key = (spec, tf.alpha, tf.std_scale)
                if key not in cache:
                    cache[key] = make_schedule(spec, lat, p, cfg)
                jobs.append((lat, cache[key], p, cfg.rounds, tf.beta, cfg.shots, derived_seed(cfg.seed, d)))
                labels.append((d, spec.label, value))
    ests = _run_points(jobs, cfg.workers)
    rows = [
        ResultRow(sweep_key, d, name, value, e.rate, e.ci95[0], e.ci95[1], e)
        for (d, name, value), e in zip(labels, ests)
    ]
    return sorted(rows, key=lambda r: (r.d, r.value, r.scheduler))


def run_memory(cfg: ExperimentConfig) -> list[ResultRow]:
    """One row per (distance, scheduler) at the config's transform."""
    return _memory_rows(cfg, "alpha", [cfg.transform.alpha], [cfg.transform])


def sweep(kind: str, grid: Sequence[float], cfg: ExperimentConfig) -> list[ResultRow]:
    if kind not in SWEEP_KINDS:
        raise ValueError(f"unknown sweep {kind!r}")
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    if kind == "depth_m":
        return depth_sweep([int(g) for g in grid], cfg)
    field_name = {"alpha": "alpha", "std": "std_scale", "beta": "beta"}[kind]
    tfs = [replace(cfg.transform, **{field_name: float(g)}) for g in grid]
    return _memory_rows(cfg, kind, [float(g) for g in grid], tfs)


def depth_sweep(ms: Sequence[int], cfg: ExperimentConfig) -> list[ResultRow]:
    """Best MS-RL cost per depth bound, plus the exact constrained optimum when small."""
    rows = []
    for d in cfg.distances:
        lat = build_lattice(d)
        p = cfg.profile_for(lat)
        env_k = SchedulingEnv(lat, p, 1).k
        exact = math.prod(env_k) <= 10**6
        for m in ms:
            s = cfg.rl
            tc = TrainConfig(
                epochs=s.epochs, steps_per_episode=s.steps_per_episode,
                learning_rate=s.learning_rate, discount=s.discount,
                seed=derived_seed(cfg.seed, d, m),
            )
            try:
                res = train(SchedulingEnv(lat, p, m), RewardParams(s.alpha_w, s.beta_w, s.gamma_w), tc)
                rows.append(ResultRow("depth_m", d, "ms_rl", float(m), res.best_cost))
            except InfeasibleScheduleError:
                rows.append(ResultRow("depth_m", d, "ms_rl", float(m), math.inf))
            if exact:
                try:
                    cost, _ = constrained_oracle(lat, p, m)
                except InfeasibleScheduleError:
                    cost = math.inf
                rows.append(ResultRow("depth_m", d, "oracle", float(m), cost))
    return rows


def _strata(est) -> list[ErrorEstimate]:
    return list(est) if isinstance(est, (list, tuple)) else [est]


def _resampled_rates(strata: Sequence[ErrorEstimate], rng: np.random.Generator, samples: int):
    """Pooled rate per bootstrap draw, resampling shot blocks within each stratum."""
    fails = np.zeros(samples)
    shots = np.zeros(samples)
    for est in strata:
        f, n = np.array(est.block_failures), np.array(est.block_shots)
        idx = rng.integers(0, len(f), size=(samples, len(f)))
        fails += f[idx].sum(1)
        shots += n[idx].sum(1)
    return fails / shots


def bootstrap_ratio(num, den, seed: int, samples: int = BOOTSTRAP_SAMPLES) -> tuple[float, float]:
    """95% percentile interval of ``rate(num) / rate(den)``.

    Either side may be one estimate or a list of estimates (one per distance);
    lists are pooled and resampled stratum by stratum.
    """
    rng = np.random.default_rng(seed)
    rn = _resampled_rates(_strata(num), rng, samples)
    rd = _resampled_rates(_strata(den), rng, samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rd > 0, rn / rd, np.inf)
    lo, hi = np.percentile(ratio, [2.5, 97.5])
    return float(lo), float(hi)


def ratio_entry(num, den, seed: int) -> dict:
    """Ratio with bootstrap CI, or a lower bound when the denominator saw no failures."""
    pn, pd = merge_estimates(_strata(num)), merge_estimates(_strata(den))
    if pd.failures == 0:
        # one failure is the smallest count the denominator could have had
        return {"ratio": None, "ratio_lower_bound": pn.rate * pd.shots, "ci95": None}
    lo, hi = bootstrap_ratio(num, den, seed)
    return {"ratio": pn.rate / pd.rate, "ratio_lower_bound": None, "ci95": [lo, hi]}


def compare(cfg: ExperimentConfig, baseline: str = "original", candidate: str = "ms_local") -> dict:
    """Error ratio baseline/candidate per distance and pooled, with the profile's G/M ratios."""
    specs = (parse_scheduler(baseline), parse_scheduler(candidate))
    rows = _memory_rows(replace(cfg, schedulers=specs), "alpha", [cfg.transform.alpha], [cfg.transform])
    by = {(r.d, r.scheduler): r.estimate for r in rows}
    per_d = []
    for d in cfg.distances:
        b, c = by[(d, specs[0].label)], by[(d, specs[1].label)]
        entry = {"d": d, "baseline": b.to_json(), "candidate": c.to_json()}
        entry.update(ratio_entry(b, c, derived_seed(cfg.seed, d, 99)))
        per_d.append(entry)
    pooled = ratio_entry(
        [by[(d, specs[0].label)] for d in cfg.distances],
        [by[(d, specs[1].label)] for d in cfg.distances],
        derived_seed(cfg.seed, 0, 99),
    )
    lat = build_lattice(cfg.distances[0])
    p = cfg.profile_for(lat)
    return {
        "profile": p.name,
        "baseline": specs[0].label,
        "candidate": specs[1].label,
        "gate_over_measure": p.ger / p.mean_mer,
        "measure_over_gate": p.mean_mer / p.ger,
        "per_distance": per_d,
        "pooled": pooled,
    }


def crossovers(rows: Sequence[ResultRow], first: str, second: str) -> list[dict]:
    """Grid intervals where ``rate(first) - rate(second)`` changes sign, per distance."""
    out = []
    for d in sorted({r.d for r in rows}):
        a = {r.value: r.rate for r in rows if r.d == d and r.scheduler == first}
        b = {r.value: r.rate for r in rows if r.d == d and r.scheduler == second}
        xs = sorted(set(a) & set(b))
        diffs = [a[x] - b[x] for x in xs]
        for k in range(1, len(xs)):
            if diffs[k - 1] * diffs[k] < 0:
                out.append({
                    "d": d, "between": [xs[k - 1], xs[k]],
                    "first": first, "second": second,
                    "diff_before": diffs[k - 1], "diff_after": diffs[k],
                })
    return out


def beta_diagnostics(rows: Sequence[ResultRow]) -> dict:
    """Monotonicity per scheduler and every pairwise crossover in a beta sweep."""
    names = sorted({r.scheduler for r in rows})
    mono = {}
    for d in sorted({r.d for r in rows}):
        for n in names:
            rates = [r.rate for r in sorted(rows, key=lambda r: r.value) if r.d == d and r.scheduler == n]
            mono[f"{n}@d={d}"] = all(y >= x for x, y in zip(rates, rates[1:]))
    cross = []
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            cross += crossovers(rows, a, b)
    return {"monotone": mono, "crossovers": cross}
