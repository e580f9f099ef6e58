"""Seeded benchmark harness: map suites, training runs, success curves, CSV/SVG.

A *work unit* is one ``(size, density, map index, flood kind, repetition)``
tuple. Each unit trains a fresh table pair for ``total_episodes`` episodes
on its own RNG stream, seeded by ``child_seed`` over the tuple and the
master seed, so results do not depend on worker count or scheduling.
"""
from __future__ import annotations

import concurrent.futures
import csv
import functools
import json
import logging
import os
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from hazardgrid.agent import run_episode
from hazardgrid.engine import MapSensors, Status, default_step_budget, reset_episode
from hazardgrid.flood import DEFAULT_PARAMS, FloodKind, FloodParams
from hazardgrid.grid import Density, GridMap, generate_map
from hazardgrid.learn import DecayUnit, LearnerConfig, QTablePair, decay_epsilon
from hazardgrid.seeding import child_seed

log = logging.getLogger(__name__)

THREADS_ENV = "HAZARDGRID_THREADS"

RESULTS_HEADER = ["size", "density", "flood_kind", "repetition", "episode", "epoch",
                  "outcome", "steps", "epsilon"]
CURVES_HEADER = ["size", "density", "flood_kind", "epoch", "success_rate"]

_DENSITY_ORDER = {d: i for i, d in enumerate(Density)}
_KIND_ORDER = {k: i for i, k in enumerate(FloodKind)}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # full-scale values in comments
    map_sizes: tuple[int, ...] = (32,)  # 32, 64, 128
    densities: tuple[Density, ...] = (Density.SPARSE, Density.DENSE)
    maps_per_density: int = 3  # 10
    flood_kinds: tuple[FloodKind, ...] = tuple(FloodKind)
    floods: dict = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    points_generated: int = 1000  # 1000
    starts_sampled: int = 100  # 100
    goals_sampled: int = 100  # 100
    episodes_per_epoch: int = 50  # 50
    total_episodes: int = 1000  # 1000
    repetitions: int = 10  # 1000
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    master_seed: int = 0
    step_budget: Optional[int] = None  # None -> 4 * (w + h)
    step_penalty: float = 0.0
    key_flood_tag: bool = False
    greedy_eval_episodes: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "densities", tuple(Density(d) for d in self.densities))
            object.__setattr__(self, "flood_kinds", tuple(FloodKind.parse(k) for k in self.flood_kinds))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        floods = dict(DEFAULT_PARAMS)
        floods.update({FloodKind.parse(k): v for k, v in self.floods.items()})
        object.__setattr__(self, "floods", floods)
        object.__setattr__(self, "map_sizes", tuple(int(s) for s in self.map_sizes))
        for name in ("maps_per_density", "points_generated", "starts_sampled", "goals_sampled",
                     "episodes_per_epoch", "total_episodes", "repetitions"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
        if not self.map_sizes or not self.densities or not self.flood_kinds:
            raise ConfigError("map_sizes, densities and flood_kinds must be non-empty")
        if any(s < 8 for s in self.map_sizes):
            raise ConfigError(f"map sizes must be >= 8, got {self.map_sizes}")
        if self.total_episodes % self.episodes_per_epoch:
            raise ConfigError("total_episodes must be a multiple of episodes_per_epoch")
        if self.starts_sampled > self.points_generated or self.goals_sampled > self.points_generated:
            raise ConfigError("starts_sampled/goals_sampled cannot exceed points_generated")
        if self.step_budget is not None and self.step_budget < 1:
            raise ConfigError(f"step_budget must be >= 1, got {self.step_budget}")
        if self.greedy_eval_episodes < 0:
            raise ConfigError("greedy_eval_episodes must be >= 0")
        for kind in self.flood_kinds:
            try:
                self.floods[kind].validate(kind)
            except ValueError as exc:
                raise ConfigError(f"flood {kind.value}: {exc}") from None

    @property
    def epochs(self) -> int:
        return self.total_episodes // self.episodes_per_epoch

    def units(self) -> list["WorkUnit"]:
        return [
            WorkUnit(size, density, m, kind, rep)
            for size in self.map_sizes
            for density in self.densities
            for m in range(self.maps_per_density)
            for kind in self.flood_kinds
            for rep in range(self.repetitions)
        ]

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "map_sizes": list(self.map_sizes),
            "densities": [d.value for d in self.densities],
            "maps_per_density": self.maps_per_density,
            "flood_kinds": [k.value for k in self.flood_kinds],
            "floods": [dict(kind=k.value, **self.floods[k].to_dict()) for k in FloodKind],
            "points_generated": self.points_generated,
            "starts_sampled": self.starts_sampled,
            "goals_sampled": self.goals_sampled,
            "episodes_per_epoch": self.episodes_per_epoch,
            "total_episodes": self.total_episodes,
            "repetitions": self.repetitions,
            "step_budget": self.step_budget,
            "step_penalty": self.step_penalty,
            "key_flood_tag": self.key_flood_tag,
            "greedy_eval_episodes": self.greedy_eval_episodes,
            "learner": self.learner.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "learner" in data:
            try:
                data["learner"] = LearnerConfig(**data["learner"])
            except TypeError as exc:
                raise ConfigError(f"learner: {exc}") from None
        if "floods" in data:
            data["floods"] = parse_flood_blocks(data["floods"])
        for name in ("map_sizes", "densities", "flood_kinds"):
            if name in data:
                data[name] = tuple(data[name])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


_FLOOD_KEYS = {"kind", "r0", "delta_r", "delta_d", "spawn_prob", "max_spawn"}


def parse_flood_blocks(blocks) -> dict:
    """``[{"kind": "central", "delta_r": 0.5}, ...]`` -> {kind: FloodParams}.

    Missing keys fall back to the kind's defaults.
    """
    if isinstance(blocks, dict):
        blocks = [dict(kind=k, **v) for k, v in blocks.items()]
    out = {}
    for block in blocks:
        unknown = set(block) - _FLOOD_KEYS
        if unknown or "kind" not in block:
            raise ConfigError(f"flood block needs 'kind' and only {sorted(_FLOOD_KEYS)}: {block}")
        kind = FloodKind.parse(block["kind"])
        overrides = {k: v for k, v in block.items() if k != "kind"}
        if "max_spawn" in overrides:
            overrides["max_spawn"] = int(overrides["max_spawn"])
        out[kind] = replace(DEFAULT_PARAMS[kind], **overrides)
    return out


class WorkUnit(NamedTuple):
    size: int
    density: Density
    map_index: int
    flood_kind: FloodKind
    repetition: int

    def seed(self, master_seed: int) -> int:
        return child_seed("unit", master_seed, self.size, self.density.value, self.map_index,
                          self.flood_kind.value, self.repetition)


@dataclass(frozen=True)
class EpisodeResult:
    size: int
    density: Density
    flood_kind: FloodKind
    map_index: int
    repetition: int
    episode: int
    epoch: int
    outcome: Status
    steps: int
    epsilon: float

    def csv_row(self) -> list[str]:
        return [str(self.size), self.density.value, self.flood_kind.value, str(self.repetition),
                str(self.episode), str(self.epoch), self.outcome.value, str(self.steps),
                repr(float(self.epsilon))]


@dataclass(frozen=True)
class SuccessCurve:
    size: int
    density: Density
    flood_kind: FloodKind
    rates: tuple[float, ...]
    counts: tuple[int, ...]  # episodes behind each rate

    @property
    def group(self) -> tuple[int, Density, FloodKind]:
        return self.size, self.density, self.flood_kind

    @property
    def terminal_rate(self) -> float:
        return self.rates[-1]


class BenchmarkRun(NamedTuple):
    results: list[EpisodeResult]
    curves: list[SuccessCurve]
    greedy_curves: list[SuccessCurve]


def map_seed(master_seed: int, size: int, density, map_index: int) -> int:
    return child_seed("map", master_seed, size, Density(density).value, map_index)


@functools.lru_cache(maxsize=64)
def _suite_map(master_seed: int, size: int, density: Density, map_index: int) -> tuple[GridMap, MapSensors]:
    grid = generate_map(size, size, density, map_seed(master_seed, size, density, map_index))
    return grid, MapSensors(grid)


def sample_points(pool: Sequence, generated: int, chosen: int, rng: np.random.Generator) -> list:
    """Draw ``generated`` pool cells with replacement, keep ``chosen`` of them."""
    candidates = rng.integers(0, len(pool), size=generated)
    picked = rng.choice(candidates, size=chosen, replace=False)
    return [pool[int(i)] for i in picked]


def train_on_map(cfg: ExperimentConfig, grid: GridMap, unit: WorkUnit, seed: int,
                 sensors: Optional[MapSensors] = None):
    """Train one fresh learner on ``grid`` against ``unit.flood_kind``.

    ``unit`` only labels the results. Returns ``(tables, results, greedy)``
    where ``greedy`` holds the ``(hits, episodes)`` of each per-epoch greedy
    pass (empty when greedy evaluation is off).
    """
    grid.require_pools()
    sensors = sensors or MapSensors(grid)
    np_rng = np.random.default_rng(seed)
    starts = sample_points(grid.start_pool, cfg.points_generated, cfg.starts_sampled, np_rng)
    goals = sample_points(grid.safe_pool, cfg.points_generated, cfg.goals_sampled, np_rng)
    rng = random.Random(seed)
    greedy_rng = random.Random(child_seed("greedy", seed))
    params: FloodParams = cfg.floods[unit.flood_kind]
    budget = cfg.step_budget or default_step_budget(grid)
    learner = cfg.learner
    tables = QTablePair(seed=child_seed("tables", seed))
    epsilon = learner.epsilon0
    results = []
    greedy = []

    def new_episode(start, flood_seed):
        return reset_episode(grid, unit.flood_kind, params, start, budget, flood_seed,
                             sensors=sensors, step_penalty=cfg.step_penalty,
                             key_flood_tag=cfg.key_flood_tag)

    for ep in range(cfg.total_episodes):
        start = starts[rng.randrange(len(starts))]
        goals[rng.randrange(len(goals))]  # goal designation; success is any safe cell
        episode = new_episode(start, rng.getrandbits(63))
        eps_start = epsilon
        outcome, steps, epsilon = run_episode(episode, tables, learner, epsilon, rng)
        results.append(EpisodeResult(unit.size, unit.density, unit.flood_kind, unit.map_index,
                                     unit.repetition, ep, ep // cfg.episodes_per_epoch,
                                     outcome, steps, eps_start))
        if learner.decay_unit is DecayUnit.EPISODE:
            epsilon = decay_epsilon(epsilon, learner)
        if cfg.greedy_eval_episodes and (ep + 1) % cfg.episodes_per_epoch == 0:
            hits = 0
            for _ in range(cfg.greedy_eval_episodes):
                start = starts[greedy_rng.randrange(len(starts))]
                episode = new_episode(start, greedy_rng.getrandbits(63))
                outcome, _, _ = run_episode(episode, tables, learner, 0.0, greedy_rng, learn=False)
                hits += outcome is Status.SUCCESS
            greedy.append((hits, cfg.greedy_eval_episodes))
    return tables, results, greedy


def train_unit(cfg: ExperimentConfig, unit: WorkUnit):
    grid, sensors = _suite_map(cfg.master_seed, unit.size, unit.density, unit.map_index)
    return train_on_map(cfg, grid, unit, unit.seed(cfg.master_seed), sensors)


def run_unit(cfg: ExperimentConfig, unit: WorkUnit) -> tuple[list[EpisodeResult], list[tuple[int, int]]]:
    _, results, greedy = train_unit(cfg, unit)
    return results, greedy


def _run_unit_star(args):
    return run_unit(*args)


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit count, else ``HAZARDGRID_THREADS`` (0 or unset = all CPUs)."""
    if workers is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        try:
            workers = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if workers < 0:
        raise ConfigError(f"worker count must be >= 0, got {workers}")
    return workers or (os.cpu_count() or 1)


def run_benchmark(cfg: ExperimentConfig, workers: Optional[int] = None) -> BenchmarkRun:
    units = cfg.units()
    n_workers = min(resolve_workers(workers), len(units))
    log.info("running %d work units on %d worker(s)", len(units), n_workers)
    if n_workers <= 1:
        outputs = []
        for i, unit in enumerate(units):
            outputs.append(run_unit(cfg, unit))
            log.debug("unit %d/%d done: %s", i + 1, len(units), unit)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=n_workers) as pool:
            outputs = list(pool.map(_run_unit_star, [(cfg, u) for u in units], chunksize=1))
    results = [r for unit_results, _ in outputs for r in unit_results]
    curves = aggregate(results)
    greedy_curves = []
    if cfg.greedy_eval_episodes:
        greedy_curves = _aggregate_counts(
            (u.size, u.density, u.flood_kind, g) for u, (_, g) in zip(units, outputs)
        )
    return BenchmarkRun(results, curves, greedy_curves)


def _group_order(group):
    size, density, kind = group
    return size, _DENSITY_ORDER[density], _KIND_ORDER[kind]


def _curves_from_tallies(tallies: dict) -> list[SuccessCurve]:
    curves = []
    for group in sorted(tallies, key=_group_order):
        per_epoch = tallies[group]
        n_epochs = max(per_epoch) + 1
        rates, counts = [], []
        for epoch in range(n_epochs):
            hits, n = per_epoch.get(epoch, (0, 0))
            if n == 0:
                raise ValueError(f"no episodes for epoch {epoch} of group {group}")
            rates.append(hits / n)
            counts.append(n)
        curves.append(SuccessCurve(*group, tuple(rates), tuple(counts)))
    return curves


def aggregate(results: Iterable[EpisodeResult]) -> list[SuccessCurve]:
    """Pooled per-epoch success rate for each (size, density, flood kind).

    An epoch with no episodes inside a group's range is an error.
    """
    tallies: dict = {}
    for r in results:
        group = tallies.setdefault((r.size, r.density, r.flood_kind), {})
        hits, n = group.get(r.epoch, (0, 0))
        group[r.epoch] = (hits + (r.outcome is Status.SUCCESS), n + 1)
    return _curves_from_tallies(tallies)


def _aggregate_counts(rows) -> list[SuccessCurve]:
    tallies: dict = {}
    for size, density, kind, per_epoch in rows:
        group = tallies.setdefault((size, density, kind), {})
        for epoch, (hits, n) in enumerate(per_epoch):
            h0, n0 = group.get(epoch, (0, 0))
            group[epoch] = (h0 + hits, n0 + n)
    return _curves_from_tallies(tallies)


def write_results_csv(results: Iterable[EpisodeResult], path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for r in results:
            writer.writerow(r.csv_row())


def write_curves_csv(curves: Iterable[SuccessCurve], path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVES_HEADER)
        for c in curves:
            for epoch, rate in enumerate(c.rates):
                writer.writerow([c.size, c.density.value, c.flood_kind.value, epoch, repr(float(rate))])


def write_csv(curves, results, path) -> None:
    """Write ``results.csv`` and ``curves.csv`` into directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_results_csv(results, path / "results.csv")
    write_curves_csv(curves, path / "curves.csv")


_COLORS = {
    FloodKind.CENTRAL: "#1f77b4",
    FloodKind.TOP_RIGHT: "#ff7f0e",
    FloodKind.BOTTOM_RIGHT: "#2ca02c",
    FloodKind.LINEAR: "#d62728",
    FloodKind.RANDOM: "#9467bd",
}


def render_svg(curves: Sequence[SuccessCurve], title: str = "success rate per epoch") -> str:
    width, height = 640, 400
    left, right, top, bottom = 60, 150, 40, 50
    plot_w, plot_h = width - left - right, height - top - bottom
    n_epochs = max((len(c.rates) for c in curves), default=1)
    span = max(n_epochs - 1, 1)

    def px(epoch):
        return left + plot_w * epoch / span

    def py(rate):
        return top + plot_h * (1.0 - rate)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="24" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = py(tick)
        parts.append(f'<line x1="{left - 4}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.2f}" font-family="sans-serif" font-size="10" '
                     f'text-anchor="end">{tick:g}</text>')
    parts.append(f'<text x="{left + plot_w / 2:.2f}" y="{height - 12}" font-family="sans-serif" '
                 f'font-size="12" text-anchor="middle">epoch</text>')
    parts.append(f'<text x="16" y="{top + plot_h / 2:.2f}" font-family="sans-serif" font-size="12" '
                 f'text-anchor="middle" transform="rotate(-90 16 {top + plot_h / 2:.2f})">success rate</text>')
    parts.append(f'<text x="{left}" y="{top + plot_h + 16}" font-family="sans-serif" font-size="10">0</text>')
    parts.append(f'<text x="{left + plot_w}" y="{top + plot_h + 16}" font-family="sans-serif" '
                 f'font-size="10" text-anchor="end">{n_epochs - 1}</text>')
    for i, c in enumerate(curves):
        color = _COLORS[c.flood_kind]
        label = f"{c.flood_kind.value} ({c.size} {c.density.value})"
        points = " ".join(f"{px(e):.2f},{py(r):.2f}" for e, r in enumerate(c.rates))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{points}">'
                     f'<title>{escape(label)}</title></polyline>')
        ly = top + 14 + 18 * i
        lx = left + plot_w + 12
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 26}" y="{ly + 4}" font-family="sans-serif" font-size="11">'
                     f'{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(curves: Sequence[SuccessCurve], path, title: str = "success rate per epoch") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_svg(curves, title))


def write_outputs(run: BenchmarkRun, cfg: ExperimentConfig, out_dir) -> list[Path]:
    """Write every benchmark artifact under ``out_dir``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "results.csv", out / "curves.csv", out / "config.json"]
    write_csv(run.curves, run.results, out)
    cfg.dump(out / "config.json")
    if run.greedy_curves:
        write_curves_csv(run.greedy_curves, out / "greedy_curves.csv")
        written.append(out / "greedy_curves.csv")
    for size in cfg.map_sizes:
        for density in cfg.densities:
            group = [c for c in run.curves if c.size == size and c.density is density]
            path = out / f"curves_{size}_{density.value}.svg"
            write_svg(group, path, f"{size}x{size} {density.value}: training success rate per epoch")
            written.append(path)
    return written
