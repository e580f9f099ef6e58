"""Hazard dynamics evolving a boolean mask over the grid, one tick at a time.

Five kinds are supported:

* ``central`` (A): a ping growing from the map centre ``(w // 2, h // 2)``.
* ``top`` (B) and ``bottom`` (C): pings anchored at the top-right and
  bottom-right corner cells.
* ``linear`` (D): a vertical front entering from the right edge; at tick
  ``t`` every column ``x >= w - floor(t * delta_d)`` is flooded.
* ``random`` (E): each tick draws ``u``; when ``u < spawn_prob`` between 1
  and ``max_spawn`` pings appear at uniformly random cells.

A ping created at tick ``b`` has radius ``r0 + (t - b) * delta_r`` at tick
``t`` (the product is evaluated directly, so fractional increments never
drift) and floods every cell whose Euclidean distance to its centre is at
most that radius.  Masks only ever grow.

Internally every kind is stored as an *arrival tick* per cell, the first
tick at which the cell floods, so the mask at tick ``t`` is ``arrival <= t``.
"""
from __future__ import annotations

import enum
import math
import random
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np


class FloodKind(str, enum.Enum):
    CENTRAL = "central"
    TOP_RIGHT = "top"
    BOTTOM_RIGHT = "bottom"
    LINEAR = "linear"
    RANDOM = "random"

    @property
    def letter(self) -> str:
        return "ABCDE"[list(FloodKind).index(self)]

    @property
    def is_ping(self) -> bool:
        return self is not FloodKind.LINEAR

    @classmethod
    def parse(cls, name) -> "FloodKind":
        """Accept a kind, its value (``"central"``) or its letter (``"A"``)."""
        if isinstance(name, cls):
            return name
        text = str(name).strip()
        for kind in cls:
            if text.lower() == kind.value or text.upper() == kind.letter:
                return kind
        raise ValueError(f"unknown flood kind {name!r}; expected one of "
                         + ", ".join(k.value for k in cls))


class FloodParamsError(ValueError):
    pass


@dataclass(frozen=True)
class FloodParams:
    r0: float = 0.0
    delta_r: float = 0.25
    delta_d: float = 1.0
    spawn_prob: float = 0.1
    max_spawn: int = 3

    def validate(self, kind: FloodKind) -> None:
        if not self.r0 >= 0:
            raise FloodParamsError(f"r0 must be >= 0, got {self.r0}")
        if kind.is_ping and not self.delta_r > 0:
            raise FloodParamsError(f"{kind.value} flood needs delta_r > 0, got {self.delta_r}")
        if kind is FloodKind.LINEAR and not self.delta_d > 0:
            raise FloodParamsError(f"linear flood needs delta_d > 0, got {self.delta_d}")
        if not 0 <= self.spawn_prob <= 1:
            raise FloodParamsError(f"spawn_prob must lie in [0, 1], got {self.spawn_prob}")
        if not (isinstance(self.max_spawn, int) and 1 <= self.max_spawn <= 8):
            raise FloodParamsError(f"max_spawn must be an integer in [1, 8], got {self.max_spawn}")

    def to_dict(self) -> dict:
        return asdict(self)


# Desk-scale defaults, calibrated on 32x32 maps (see README). Pings grow
# slowly and random pings are rare: hazards inside the sensed window make
# new state keys, so faster floods leave too little to learn from.
DEFAULT_PARAMS: dict[FloodKind, FloodParams] = {
    FloodKind.CENTRAL: FloodParams(r0=0.0, delta_r=0.02),
    FloodKind.TOP_RIGHT: FloodParams(r0=0.0, delta_r=0.05),
    FloodKind.BOTTOM_RIGHT: FloodParams(r0=0.0, delta_r=0.05),
    FloodKind.LINEAR: FloodParams(delta_d=0.08),
    FloodKind.RANDOM: FloodParams(r0=0.0, delta_r=0.01, spawn_prob=0.01, max_spawn=2),
}


def default_params(kind, **overrides) -> FloodParams:
    params = DEFAULT_PARAMS[FloodKind.parse(kind)]
    return replace(params, **overrides) if overrides else params


def ping_origin(kind: FloodKind, width: int, height: int) -> tuple[int, int]:
    if kind is FloodKind.CENTRAL:
        return width // 2, height // 2
    if kind is FloodKind.TOP_RIGHT:
        return width - 1, 0
    if kind is FloodKind.BOTTOM_RIGHT:
        return width - 1, height - 1
    raise ValueError(f"{kind.value} flood has no fixed origin")


class FloodModel:
    """Mutable hazard state for one episode.

    ``tick()`` advances one step and ``t`` counts the ticks taken so far.
    ``arrival`` holds, per cell, the first tick it is flooded (a huge value
    for never); ``mask`` is the current boolean hazard mask derived from it.
    ``version`` increases whenever ``arrival`` changes (random spawns).
    """

    NEVER = np.iinfo(np.int64).max

    def __init__(self, kind, params: FloodParams, width: int, height: int, seed: int = 0):
        self.kind = FloodKind.parse(kind)
        params.validate(self.kind)
        self.params = params
        self.width = width
        self.height = height
        self.seed = seed
        self.t = 0
        self.version = 0
        self.pings: list[tuple[int, int, int]] = []  # (x, y, birth tick)
        self.arrival = np.full((height, width), self.NEVER, dtype=np.int64)
        self._rng = random.Random(seed) if self.kind is FloodKind.RANDOM else None
        self._cols = np.arange(width, dtype=np.float64)[None, :]
        self._rows = np.arange(height, dtype=np.float64)[:, None]
        self._mask_cache: Optional[tuple[int, int, np.ndarray]] = None
        if self.kind is FloodKind.LINEAR:
            self.arrival[:] = self._front_arrival()[None, :]
        elif self.kind is not FloodKind.RANDOM:
            self._add_ping(*ping_origin(self.kind, width, height))

    def _front_arrival(self) -> np.ndarray:
        # smallest t with floor(t * dd) >= w - x, per column x
        dd = self.params.delta_d
        need = self.width - np.arange(self.width, dtype=np.float64)
        t = np.maximum(np.ceil(need / dd), 0).astype(np.int64)
        short = np.floor(t * dd) < need
        while short.any():
            t[short] += 1
            short = np.floor(t * dd) < need
        early = (t > 0) & (np.floor((t - 1) * dd) >= need)
        while early.any():
            t[early] -= 1
            early = (t > 0) & (np.floor((t - 1) * dd) >= need)
        return t

    def _ping_arrival(self, cx: int, cy: int, birth: int) -> np.ndarray:
        r0, dr = self.params.r0, self.params.delta_r
        dist = np.sqrt((self._cols - cx) ** 2 + (self._rows - cy) ** 2)
        k = np.maximum(np.ceil((dist - r0) / dr), 0).astype(np.int64)
        # the division above can be off by one ulp; settle on the exact
        # smallest k with r0 + k * dr >= dist
        short = r0 + k * dr < dist
        while short.any():
            k[short] += 1
            short = r0 + k * dr < dist
        early = (k > 0) & (r0 + (k - 1) * dr >= dist)
        while early.any():
            k[early] -= 1
            early = (k > 0) & (r0 + (k - 1) * dr >= dist)
        return k + birth

    def _add_ping(self, x: int, y: int) -> None:
        self.pings.append((x, y, self.t))
        np.minimum(self.arrival, self._ping_arrival(x, y, self.t), out=self.arrival)
        self.version += 1

    def tick(self) -> "FloodModel":
        self.t += 1
        if self.kind is FloodKind.RANDOM:
            rng = self._rng
            if rng.random() < self.params.spawn_prob:
                for _ in range(rng.randint(1, self.params.max_spawn)):
                    x = rng.randrange(self.width)
                    y = rng.randrange(self.height)
                    self._add_ping(x, y)
        return self

    def advance(self, ticks: int) -> "FloodModel":
        for _ in range(ticks):
            self.tick()
        return self

    @property
    def mask(self) -> np.ndarray:
        cache = self._mask_cache
        if cache is None or cache[0] != self.t or cache[1] != self.version:
            mask = self.arrival <= self.t
            mask.setflags(write=False)
            cache = self._mask_cache = (self.t, self.version, mask)
        return cache[2]

    def radius(self, birth: int = 0) -> float:
        """Radius at the current tick of a ping created at ``birth``."""
        return self.params.r0 + (self.t - birth) * self.params.delta_r

    def hazard_at(self, cell) -> bool:
        x, y = cell
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise ValueError(f"cell {cell} is outside the {self.width}x{self.height} map")
        return bool(self.arrival[y, x] <= self.t)

    @property
    def hazard_count(self) -> int:
        return int(np.count_nonzero(self.mask))


def flood_init(kind, params: FloodParams, grid, rng_seed: int = 0) -> FloodModel:
    """Tick-0 flood for ``grid`` (anything with ``width``/``height``)."""
    return FloodModel(kind, params, grid.width, grid.height, rng_seed)


def flood_tick(model: FloodModel) -> FloodModel:
    return model.tick()


def hazard_at(model: FloodModel, cell) -> bool:
    return model.hazard_at(cell)
