"""Command-line entry point: ``msched <subcommand> [--config cfg.json] [--seed N] ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..lattice import build_lattice
from ..noise import ProfileError
from ..rl import InfeasibleScheduleError, RewardParams, SchedulingEnv, TrainConfig, train
from ..scheduler import ScheduleError, resolve_conflicts, select_local, total_cost
from ..sim.memory import build_memory_circuit
from .config import ConfigError, ExperimentConfig, load_config, parse_scheduler
from .ecd import EcdFitError, fit_ecd
from .experiments import (
    beta_diagnostics,
    compare,
    derived_seed,
    make_schedule,
    read_rows,
    rows_to_csv,
    run_memory,
    sweep,
)

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

DEFAULT_GRIDS = {
    "alpha": (0.5, 1.0, 1.5, 2.0),
    "std": (0.5, 1.0, 1.5, 2.0),
    "beta": (1.0, 4.0, 8.0, 16.0),
    "depth_m": (1, 2, 3, 4, 5),
}


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment config JSON")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--shots", type=int)
    parser.add_argument("--out", help="output path (stdout when omitted)")
    parser.add_argument("--distances", type=int, nargs="+")
    parser.add_argument("--rounds", type=int)
    parser.add_argument("--profile", help="built-in profile name or profile JSON path")
    parser.add_argument("--schedulers", nargs="+", help="original, ms_local, ms_rl(m=N)")
    parser.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="msched", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("run-memory", help="logical error rate per distance and scheduler"))
    for kind, name in (("alpha", "sweep-alpha"), ("std", "sweep-std"), ("beta", "sweep-beta"),
                       ("depth_m", "sweep-depth")):
        p = sub.add_parser(name, help=f"sweep over {kind}")
        _common(p)
        p.add_argument("--grid", type=float, nargs="+", help=f"default {DEFAULT_GRIDS[kind]}")
        p.add_argument("--report", help="beta sweeps: path for the crossover diagnostics JSON")
        p.set_defaults(kind=kind)

    p = sub.add_parser("train-rl", help="train the depth-bounded scheduler for one distance")
    _common(p)
    p.add_argument("--m", type=int, required=True, help="schedule depth bound")
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("fit-ecd", help="effective code distances from a run-memory CSV")
    _common(p)
    p.add_argument("--csv", required=True, help="long-format results CSV")
    p.add_argument("--baseline", default="original")
    p.add_argument("--candidate", default="ms_local")

    p = sub.add_parser("compare", help="error ratio of two schedulers with bootstrap CIs")
    _common(p)
    p.add_argument("--baseline", default="original")
    p.add_argument("--candidate", default="ms_local")

    _common(sub.add_parser("dump-lattice", help="lattice JSON for the first distance"))
    p = sub.add_parser("dump-circuit", help="memory circuit text for the first distance and scheduler")
    _common(p)
    p.add_argument("--beta", type=float, default=None)
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    scheds = tuple(parse_scheduler(s) for s in args.schedulers) if args.schedulers else None
    return cfg.with_overrides(
        seed=args.seed,
        shots=args.shots,
        out=args.out,
        distances=tuple(args.distances) if args.distances else None,
        rounds=args.rounds,
        profile=args.profile,
        schedulers=scheds,
        workers=args.workers,
    )


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _cmd_sweep(args, cfg: ExperimentConfig) -> None:
    grid = args.grid or cfg.grid or DEFAULT_GRIDS[args.kind]
    rows = sweep(args.kind, grid, cfg)
    _emit(rows_to_csv(rows), cfg.out)
    if args.kind == "beta":
        diag = beta_diagnostics(rows)
        if args.report:
            Path(args.report).write_text(_json(diag))
        else:
            sys.stderr.write(_json(diag))


def _cmd_train(args, cfg: ExperimentConfig) -> None:
    d = cfg.distances[0]
    lat = build_lattice(d)
    p = cfg.profile_for(lat)
    s = cfg.rl
    tc = TrainConfig(
        epochs=args.epochs or s.epochs, steps_per_episode=s.steps_per_episode,
        learning_rate=s.learning_rate, discount=s.discount, seed=derived_seed(cfg.seed, d, args.m),
    )
    env = SchedulingEnv(lat, p, args.m)
    res = train(env, RewardParams(s.alpha_w, s.beta_w, s.gamma_w), tc)
    local = select_local(lat, p)
    _emit(_json({
        "d": d,
        "m": args.m,
        "best_cost": res.best_cost,
        "tau": res.schedule.tau,
        "ms_local_cost": total_cost(local, p),
        "ms_local_tau": resolve_conflicts(local).tau,
        "note": "ms_local_tau is the measured depth of the greedy schedule; it is not capped at m",
        "curve": res.curve,
        "schedule": res.schedule.to_json(),
    }), cfg.out)


def _cmd_fit(args, cfg: ExperimentConfig) -> None:
    rows = read_rows(Path(args.csv).read_text())
    base = [r for r in rows if r.scheduler == args.baseline]
    cand = [r for r in rows if r.scheduler == args.candidate]
    if not cand:
        raise ConfigError(f"no rows for scheduler {args.candidate!r} in {args.csv}")
    _emit(_json(fit_ecd(base, cand).to_json()), cfg.out)


def _cmd_dump_circuit(args, cfg: ExperimentConfig) -> None:
    lat = build_lattice(cfg.distances[0])
    p = cfg.profile_for(lat)
    sched = make_schedule(cfg.schedulers[0], lat, p, cfg)
    beta = cfg.transform.beta if args.beta is None else args.beta
    _emit(build_memory_circuit(lat, sched, p, cfg.rounds, beta).to_text(), cfg.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.command == "run-memory":
            _emit(rows_to_csv(run_memory(cfg)), cfg.out)
        elif args.command.startswith("sweep-"):
            _cmd_sweep(args, cfg)
        elif args.command == "train-rl":
            _cmd_train(args, cfg)
        elif args.command == "fit-ecd":
            _cmd_fit(args, cfg)
        elif args.command == "compare":
            _emit(_json(compare(cfg, args.baseline, args.candidate)), cfg.out)
        elif args.command == "dump-lattice":
            _emit(build_lattice(cfg.distances[0]).dumps() + "\n", cfg.out)
        elif args.command == "dump-circuit":
            _cmd_dump_circuit(args, cfg)
    except InfeasibleScheduleError as exc:
        print(f"infeasible schedule: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, ProfileError, EcdFitError, ScheduleError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
