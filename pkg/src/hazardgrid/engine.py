"""Episode state machine: placement, sensing, moves, flooding, termination.

The agent senses an 8x8 window of ternary codes (0 free, 1 obstacle or
off-map, 2 hazard) covering offsets ``[-4, +3]`` on both axes, so it sits
at window index ``(4, 4)``, plus a four-ray sonar giving the number of free
cells before the first obstacle or map edge along ``+x, -x, +y, -y``,
capped at ``SONAR_CAP``. It never sees its absolute position.

Each step resolves the move, advances the flood one tick, then adjudicates
in the order drowned, success, timed out.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from hazardgrid.flood import FloodKind, FloodModel, FloodParams
from hazardgrid.grid import NEIGHBOURS, Cell, CellKind, GridMap

WINDOW = 8
WINDOW_BEFORE = 4  # cells sensed on the negative side of each axis
SONAR_CAP = 8

_FREE, _OBSTACLE, _HAZARD = ord("0"), ord("1"), ord("2")


class Action(enum.IntEnum):
    N = 0
    NE = 1
    E = 2
    SE = 3
    S = 4
    SW = 5
    W = 6
    NW = 7

    @property
    def offset(self) -> Cell:
        return NEIGHBOURS[self]


N_ACTIONS = len(Action)


class Status(str, enum.Enum):
    RUNNING = "running"
    SUCCESS = "success"
    DROWNED = "drowned"
    TIMED_OUT = "timed_out"


class EpisodeOver(RuntimeError):
    """Raised when observing or stepping a finished episode."""


def default_step_budget(grid: GridMap) -> int:
    return 4 * (grid.width + grid.height)


@dataclass(frozen=True)
class Observation:
    feature_map: np.ndarray  # (8, 8) int8, rows are y offsets -4..+3
    sonar: tuple[int, int, int, int]  # +x, -x, +y, -y
    key: str
    flood_hint: Optional[str] = None


def sonar_readings(grid: GridMap, cap: int = SONAR_CAP) -> np.ndarray:
    """(height, width, 4) array of capped free-run lengths per direction."""
    h, w = grid.height, grid.width
    free = grid.terrain == CellKind.FREE
    out = np.zeros((h, w, 4), dtype=np.int64)
    # runs[+x] at (y, x) = free cells strictly right of x before a block
    for y in range(h):
        run = 0
        for x in range(w - 1, -1, -1):
            out[y, x, 0] = run
            run = run + 1 if free[y, x] else 0
        run = 0
        for x in range(w):
            out[y, x, 1] = run
            run = run + 1 if free[y, x] else 0
    for x in range(w):
        run = 0
        for y in range(h - 1, -1, -1):
            out[y, x, 2] = run
            run = run + 1 if free[y, x] else 0
        run = 0
        for y in range(h):
            out[y, x, 3] = run
            run = run + 1 if free[y, x] else 0
    return np.minimum(out, cap)


def _window_minimum(a: np.ndarray) -> np.ndarray:
    """Minimum over every WINDOW x WINDOW block, by repeated halving."""
    span = 1
    while span < WINDOW:
        a = np.minimum(a[:, :-span], a[:, span:])
        a = np.minimum(a[:-span], a[span:])
        span *= 2
    return a


class MapSensors:
    """Per-map lookup tables shared by every episode on that map."""

    def __init__(self, grid: GridMap):
        self.grid = grid
        h, w = grid.height, grid.width
        pad = np.full((h + WINDOW, w + WINDOW), _OBSTACLE, dtype=np.uint8)
        inner = pad[WINDOW_BEFORE:WINDOW_BEFORE + h, WINDOW_BEFORE:WINDOW_BEFORE + w]
        inner[...] = np.where(grid.terrain == CellKind.FREE, _FREE, _OBSTACLE)
        self.base_codes = pad
        self.sonar = sonar_readings(grid)
        self.sonar_suffix = [
            [":" + ",".join(str(int(v)) for v in self.sonar[y, x]) for x in range(w)]
            for y in range(h)
        ]
        # observation key of each cell while no hazard is in view
        self.static_keys = [
            [pad[y:y + WINDOW, x:x + WINDOW].tobytes().decode("ascii") + self.sonar_suffix[y][x]
             for x in range(w)]
            for y in range(h)
        ]
        self.start_set = frozenset(grid.start_pool)
        self.free = (grid.terrain == CellKind.FREE).tolist()
        self.safe = grid.safe_mask.tolist()


class Episode:
    """One running episode; create with ``reset_episode``."""

    def __init__(
        self,
        grid: GridMap,
        flood: FloodModel,
        start: Cell,
        step_budget: int,
        sensors: Optional[MapSensors] = None,
        step_penalty: float = 0.0,
        key_flood_tag: bool = False,
        record: bool = False,
    ):
        if step_budget < 1:
            raise ValueError(f"step_budget must be >= 1, got {step_budget}")
        self.grid = grid
        self.sensors = sensors if sensors is not None else MapSensors(grid)
        start = (int(start[0]), int(start[1]))
        if start not in self.sensors.start_set:
            raise ValueError(f"start cell {start} is not in the map's start pool")
        if (flood.width, flood.height) != (grid.width, grid.height):
            raise ValueError("flood model dimensions do not match the map")
        self.flood = flood
        self.agent = start
        self.t = 0
        self.step_budget = step_budget
        self.remaining = step_budget
        self.step_penalty = step_penalty
        self.key_suffix = "|" + flood.kind.value if key_flood_tag else ""
        self.trajectory: Optional[list[str]] = [] if record else None
        self._arrival = np.full(self.sensors.base_codes.shape, FloodModel.NEVER, dtype=np.int64)
        self._version = -1
        self._sync_arrival()
        self.status = Status.DROWNED if flood.hazard_at(start) else Status.RUNNING

    def _sync_arrival(self) -> None:
        # padded copy of the flood's arrival ticks, refreshed only on change
        if self._version != self.flood.version:
            self._arrival[WINDOW_BEFORE:WINDOW_BEFORE + self.grid.height,
                          WINDOW_BEFORE:WINDOW_BEFORE + self.grid.width] = self.flood.arrival
            self._version = self.flood.version
            # earliest arrival tick anywhere in each cell's window
            self._window_min = _window_minimum(self._arrival).tolist()

    def _window(self) -> np.ndarray:
        x, y = self.agent
        flooded = self._arrival[y:y + WINDOW, x:x + WINDOW] <= self.flood.t
        return np.where(flooded, np.uint8(_HAZARD), self.sensors.base_codes[y:y + WINDOW, x:x + WINDOW])

    @property
    def running(self) -> bool:
        return self.status is Status.RUNNING

    def _check_running(self) -> None:
        if self.status is not Status.RUNNING:
            raise EpisodeOver(f"episode already ended ({self.status.value})")

    def state_key(self) -> str:
        """Canonical text key of the current observation."""
        self._check_running()
        x, y = self.agent
        if self.flood.t < self._window_min[y][x]:
            return self.sensors.static_keys[y][x] + self.key_suffix
        return self._window().tobytes().decode("ascii") + self.sensors.sonar_suffix[y][x] + self.key_suffix

    def observe(self) -> Observation:
        self._check_running()
        x, y = self.agent
        feature_map = (self._window() - _FREE).astype(np.int8)
        sonar = tuple(int(v) for v in self.sensors.sonar[y, x])
        return Observation(feature_map, sonar, self.state_key(), self.flood.kind.value)

    def step(self, action) -> tuple[float, bool]:
        """Apply ``action``; returns ``(reward, terminal)``."""
        self._check_running()
        dx, dy = NEIGHBOURS[action]
        x, y = self.agent
        nx, ny = x + dx, y + dy
        if 0 <= nx < self.grid.width and 0 <= ny < self.grid.height and self.sensors.free[ny][nx]:
            x, y = nx, ny
            self.agent = (x, y)
        self.flood.tick()
        self._sync_arrival()
        self.t += 1
        self.remaining -= 1
        reward = 0.0
        if self.flood.arrival[y, x] <= self.flood.t:
            self.status = Status.DROWNED
        elif self.sensors.safe[y][x]:
            self.status = Status.SUCCESS
            reward = 1.0
        elif self.remaining <= 0:
            self.status = Status.TIMED_OUT
        if self.step_penalty:
            reward = min(1.0, max(0.0, reward - self.step_penalty))
        if self.trajectory is not None:
            self.trajectory.append(
                f"{self.t} {x} {y} {int(action)} {reward:g} {self.status.value}"
            )
        return reward, self.status is not Status.RUNNING


def reset_episode(
    grid: GridMap,
    flood_kind,
    flood_params: FloodParams,
    start: Cell,
    step_budget: Optional[int] = None,
    seed: int = 0,
    *,
    sensors: Optional[MapSensors] = None,
    step_penalty: float = 0.0,
    key_flood_tag: bool = False,
    record: bool = False,
) -> Episode:
    """Fresh episode at tick 0; already DROWNED if the start is flooded."""
    grid.require_pools()
    if step_budget is None:
        step_budget = default_step_budget(grid)
    flood = FloodModel(FloodKind.parse(flood_kind), flood_params, grid.width, grid.height, seed)
    return Episode(grid, flood, start, step_budget, sensors, step_penalty, key_flood_tag, record)


def observe(state: Episode) -> Observation:
    return state.observe()


def step(state: Episode, action) -> tuple[Episode, float, bool]:
    reward, terminal = state.step(action)
    return state, reward, terminal
