"""Command-line front end: gen-maps, train, eval, bench, show-map.

Exit codes: 0 success, 1 usage error (bad flags, missing input files),
2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import random
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from hazardgrid.agent import run_episode
from hazardgrid.bench import (
    ConfigError,
    ExperimentConfig,
    WorkUnit,
    map_seed,
    run_benchmark,
    train_on_map,
    write_outputs,
)
from hazardgrid.engine import MapSensors, Status, default_step_budget, reset_episode
from hazardgrid.flood import FloodKind, FloodModel, default_params
from hazardgrid.grid import Density, MapError, generate_map, load_map, save_map, serialize_map
from hazardgrid.learn import QTablePair
from hazardgrid.seeding import child_seed

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _existing_file(text: str) -> Path:
    path = Path(text)
    if not path.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return path


def _flood_kind(text: str) -> FloodKind:
    try:
        return FloodKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_flood_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--r0", type=float)
    p.add_argument("--delta-r", type=float)
    p.add_argument("--delta-d", type=float)
    p.add_argument("--spawn-prob", type=float)
    p.add_argument("--max-spawn", type=int)


def _flood_params(args, kind: FloodKind, cfg: Optional[ExperimentConfig] = None):
    base = cfg.floods[kind] if cfg is not None else default_params(kind)
    overrides = {
        name: getattr(args, name)
        for name in ("r0", "delta_r", "delta_d", "spawn_prob", "max_spawn")
        if getattr(args, name) is not None
    }
    params = replace(base, **overrides)
    params.validate(kind)
    return params


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hazardgrid", description="Flood-escape grid world with tabular double Q-learning.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-maps", help="generate benchmark maps")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--density", choices=[d.value for d in Density], required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="master seed (matches bench map suites)")
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("train", help="train one grouping and write a Q-table snapshot")
    p.add_argument("--config", type=_existing_file, required=True)
    p.add_argument("--out-snapshot", type=Path, required=True)
    p.add_argument("--map", type=_existing_file, help="map file (default: the config's suite map)")
    p.add_argument("--flood", type=_flood_kind, help="flood kind (default: first in config)")
    p.add_argument("--size", type=int, help="suite map size (default: first in config)")
    p.add_argument("--density", choices=[d.value for d in Density])
    p.add_argument("--map-index", type=int, default=0)
    p.add_argument("--repetition", type=int, default=0)

    p = sub.add_parser("eval", help="greedy success rate of a snapshot")
    p.add_argument("--map", type=_existing_file, required=True)
    p.add_argument("--snapshot", type=_existing_file, required=True)
    p.add_argument("--flood", type=_flood_kind, required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=_existing_file, help="learner, flood and budget settings")
    p.add_argument("--trajectory", type=Path, help="write the first episode's trajectory here")
    _add_flood_params(p)

    p = sub.add_parser("bench", help="run the benchmark harness")
    p.add_argument("--config", type=_existing_file, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--workers", type=int, help="worker processes (default: HAZARDGRID_THREADS or all CPUs)")

    p = sub.add_parser("show-map", help="print a map with the flood overlay")
    p.add_argument("--map", type=_existing_file, required=True)
    p.add_argument("--flood", type=_flood_kind)
    p.add_argument("--tick", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    _add_flood_params(p)
    return parser


def cmd_gen_maps(args) -> int:
    if args.count < 1 or args.size < 8:
        raise UsageError("--count must be >= 1 and --size >= 8")
    density = Density(args.density)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for idx in range(args.count):
        grid = generate_map(args.size, args.size, density, map_seed(args.seed, args.size, density, idx))
        path = args.out_dir / f"map_{args.size}_{density.value}_{idx}.txt"
        save_map(grid, path)
        print(path)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    size = args.size or cfg.map_sizes[0]
    density = Density(args.density) if args.density else cfg.densities[0]
    kind = args.flood or cfg.flood_kinds[0]
    unit = WorkUnit(size, density, args.map_index, kind, args.repetition)
    if args.map is not None:
        grid = load_map(args.map)
        unit = unit._replace(size=grid.width)
    else:
        grid = generate_map(size, size, density, map_seed(cfg.master_seed, size, density, args.map_index))
    tables, results, _ = train_on_map(cfg, grid, unit, unit.seed(cfg.master_seed))
    args.out_snapshot.parent.mkdir(parents=True, exist_ok=True)
    tables.save(args.out_snapshot)
    tail = results[-cfg.episodes_per_epoch:]
    rate = sum(r.outcome is Status.SUCCESS for r in tail) / len(tail)
    print(f"states {len(tables)}")
    print(f"terminal_epoch_success_rate {rate!r}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.episodes < 1:
        raise UsageError("--episodes must be >= 1")
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    grid = load_map(args.map)
    grid.require_pools()
    tables = QTablePair.load(args.snapshot)
    params = _flood_params(args, args.flood, cfg)
    sensors = MapSensors(grid)
    budget = cfg.step_budget or default_step_budget(grid)
    rng = random.Random(child_seed("eval", args.seed))
    hits = 0
    for i in range(args.episodes):
        start = grid.start_pool[rng.randrange(len(grid.start_pool))]
        episode = reset_episode(grid, args.flood, params, start, budget, rng.getrandbits(63),
                                sensors=sensors, step_penalty=cfg.step_penalty,
                                key_flood_tag=cfg.key_flood_tag, record=i == 0 and args.trajectory is not None)
        outcome, _, _ = run_episode(episode, tables, cfg.learner, 0.0, rng, learn=False)
        hits += outcome is Status.SUCCESS
        if episode.trajectory is not None:
            args.trajectory.write_text("".join(line + "\n" for line in episode.trajectory), encoding="ascii")
    print(f"episodes {args.episodes}")
    print(f"successes {hits}")
    print(f"success_rate {hits / args.episodes!r}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.workers is not None and args.workers < 0:
        raise UsageError("--workers must be >= 0")
    run = run_benchmark(cfg, args.workers)
    for path in write_outputs(run, cfg, args.out_dir):
        print(path)
    for curve in run.curves:
        print(f"{curve.size} {curve.density.value} {curve.flood_kind.value} "
              f"terminal_success {curve.terminal_rate:.3f}")
    return EXIT_OK


def cmd_show_map(args) -> int:
    grid = load_map(args.map)
    overlay = None
    if args.flood is not None:
        if args.tick < 0:
            raise UsageError("--tick must be >= 0")
        flood = FloodModel(args.flood, _flood_params(args, args.flood), grid.width, grid.height, args.seed)
        flood.advance(args.tick)
        overlay = flood.mask
    sys.stdout.write(serialize_map(grid, overlay))
    return EXIT_OK


COMMANDS = {
    "gen-maps": cmd_gen_maps,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "show-map": cmd_show_map,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verbose:
            logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except (ConfigError, MapError, ValueError, OSError, RuntimeError) as exc:
        print(f"hazardgrid: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
