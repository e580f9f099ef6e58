"""Static grid worlds: map model, ASCII format, procedural generation, BFS.

Cells are addressed as ``(x, y)`` with ``x`` the column and ``y`` the row,
``y = 0`` being the first map line. Movement and reachability are both
8-connected; diagonal steps between two diagonally adjacent obstacles are
allowed.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from hazardgrid.seeding import child_seed

MIN_SIDE = 8
GENERATION_ATTEMPTS = 100

Cell = tuple[int, int]

# 8-connected neighbourhood, same order as the action codes in ``engine``.
NEIGHBOURS: tuple[Cell, ...] = (
    (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1),
)


class CellKind(enum.IntEnum):
    FREE = 0
    OBSTACLE = 1


class Density(str, enum.Enum):
    SPARSE = "sparse"
    DENSE = "dense"

    @property
    def obstacle_fraction(self) -> float:
        return 0.05 if self is Density.SPARSE else 0.20


class MapError(ValueError):
    """Base class for map related failures."""


class MapHeaderError(MapError):
    pass


class MapDimensionError(MapError):
    pass


class MapAlphabetError(MapError):
    pass


class MapTooSmallError(MapError):
    pass


class MapPoolError(MapError):
    pass


class EmptyPoolError(MapError):
    pass


class GenerationError(RuntimeError):
    pass


def band_width(width: int) -> int:
    """Columns in each of the start (right) and safe (left) bands."""
    return math.ceil(width / 4)


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    terrain: np.ndarray  # (height, width) uint8 of CellKind values
    start_pool: tuple[Cell, ...]
    safe_pool: tuple[Cell, ...]
    hazard_seeds: tuple[Cell, ...] = ()
    _safe_mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terrain = np.ascontiguousarray(self.terrain, dtype=np.uint8)
        if terrain.shape != (self.height, self.width):
            raise MapDimensionError(
                f"terrain shape {terrain.shape} does not match {self.height}x{self.width}"
            )
        if self.width < MIN_SIDE or self.height < MIN_SIDE:
            raise MapTooSmallError(
                f"map is {self.width}x{self.height}; both sides must be >= {MIN_SIDE}"
            )
        terrain.setflags(write=False)
        object.__setattr__(self, "terrain", terrain)
        band = band_width(self.width)
        for x, y in self.start_pool:
            if x < self.width - band or terrain[y, x] != CellKind.FREE:
                raise MapPoolError(f"start cell ({x},{y}) must be Free and in the rightmost {band} columns")
        for x, y in self.safe_pool:
            if x >= band or terrain[y, x] != CellKind.FREE:
                raise MapPoolError(f"safe cell ({x},{y}) must be Free and in the leftmost {band} columns")
        safe = np.zeros((self.height, self.width), dtype=bool)
        for x, y in self.safe_pool:
            safe[y, x] = True
        safe.setflags(write=False)
        object.__setattr__(self, "_safe_mask", safe)

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.terrain, other.terrain)
            and self.start_pool == other.start_pool
            and self.safe_pool == other.safe_pool
            and self.hazard_seeds == other.hazard_seeds
        )

    __hash__ = None  # type: ignore[assignment]

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.terrain[cell[1], cell[0]] == CellKind.FREE

    def is_safe(self, cell: Cell) -> bool:
        return bool(self._safe_mask[cell[1], cell[0]])

    @property
    def safe_mask(self) -> np.ndarray:
        return self._safe_mask

    @property
    def obstacle_count(self) -> int:
        return int(np.count_nonzero(self.terrain))

    def require_pools(self) -> None:
        """Raise EmptyPoolError unless both pools are populated."""
        if not self.start_pool:
            raise EmptyPoolError("map has no start cells ('S'); cannot be used for episodes")
        if not self.safe_pool:
            raise EmptyPoolError("map has no safe cells ('G'); cannot be used for episodes")

    def to_text(self) -> str:
        return serialize_map(self)


def _sorted_cells(cells: Iterable[Cell]) -> tuple[Cell, ...]:
    # row-major order, which is also the order parse_map discovers cells in
    return tuple(sorted(cells, key=lambda c: (c[1], c[0])))


def parse_map(text: str) -> GridMap:
    """Parse the ASCII map format.

    Line 1 is ``"w h"``; then ``h`` rows of ``w`` characters from ``@.#SG``.
    ``S`` and ``G`` are Free cells belonging to the start and safe pools.
    ``#`` cells are Free terrain, recorded in ``hazard_seeds`` only.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MapHeaderError("empty map document")
    header = lines[0].split(" ")
    if len(header) != 2 or not all(part.isdigit() for part in header):
        raise MapHeaderError(f"header must be two positive integers 'w h', got {lines[0]!r}")
    width, height = int(header[0]), int(header[1])
    if width < 1 or height < 1:
        raise MapHeaderError(f"header dimensions must be positive, got {width}x{height}")
    if width < MIN_SIDE or height < MIN_SIDE:
        raise MapTooSmallError(f"map is {width}x{height}; both sides must be >= {MIN_SIDE}")
    rows = lines[1:]
    if len(rows) != height:
        raise MapDimensionError(f"header declares {height} rows, found {len(rows)}")

    terrain = np.zeros((height, width), dtype=np.uint8)
    starts, safes, seeds = [], [], []
    for y, row in enumerate(rows):
        if len(row) != width:
            raise MapDimensionError(f"row {y} has {len(row)} characters, expected {width}")
        for x, ch in enumerate(row):
            if ch == "@":
                terrain[y, x] = CellKind.OBSTACLE
            elif ch == ".":
                pass
            elif ch == "#":
                seeds.append((x, y))
            elif ch == "S":
                starts.append((x, y))
            elif ch == "G":
                safes.append((x, y))
            else:
                raise MapAlphabetError(f"invalid character {ch!r} at row {y}, column {x}")
    return GridMap(width, height, terrain, tuple(starts), tuple(safes), tuple(seeds))


def serialize_map(grid: GridMap, overlay: Optional[np.ndarray] = None) -> str:
    """Render ``grid`` in the ASCII map format.

    ``overlay`` is an optional (height, width) boolean mask drawn as ``#``
    over every other symbol.
    """
    chars = np.where(grid.terrain == CellKind.OBSTACLE, "@", ".").astype("<U1")
    for x, y in grid.hazard_seeds:
        chars[y, x] = "#"
    for x, y in grid.start_pool:
        chars[y, x] = "S"
    for x, y in grid.safe_pool:
        chars[y, x] = "G"
    if overlay is not None:
        chars[np.asarray(overlay, dtype=bool)] = "#"
    body = "".join("".join(row) + "\n" for row in chars)
    return f"{grid.width} {grid.height}\n{body}"


def load_map(path) -> GridMap:
    with open(path, "r", encoding="ascii", newline="") as fh:
        return parse_map(fh.read())


def save_map(grid: GridMap, path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(serialize_map(grid))


def _reachable(terrain: np.ndarray, sources: Iterable[Cell]) -> np.ndarray:
    height, width = terrain.shape
    seen = np.zeros_like(terrain, dtype=bool)
    queue = deque()
    for x, y in sources:
        if not seen[y, x]:
            seen[y, x] = True
            queue.append((x, y))
    while queue:
        x, y = queue.popleft()
        for dx, dy in NEIGHBOURS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < width and 0 <= ny < height and not seen[ny, nx] and terrain[ny, nx] == 0:
                seen[ny, nx] = True
                queue.append((nx, ny))
    return seen


def pools_connected(grid: GridMap) -> bool:
    """True when at least one start cell reaches at least one safe cell."""
    if not grid.start_pool or not grid.safe_pool:
        return False
    seen = _reachable(grid.terrain, grid.start_pool)
    return bool(np.any(seen & grid.safe_mask))


def generate_map(width: int, height: int, density, rng_seed: int) -> GridMap:
    """Generate a random obstacle map.

    Obstacles cover ``floor(fraction * middle_cells)`` cells of the middle
    columns (5% sparse, 20% dense); both bands stay obstacle-free and every
    band cell joins its pool. Attempt ``i`` draws from a sub-seed of
    ``(rng_seed, i)``; after ``GENERATION_ATTEMPTS`` unreachable layouts a
    GenerationError is raised.
    """
    density = Density(density)
    if width < MIN_SIDE or height < MIN_SIDE:
        raise MapTooSmallError(f"map is {width}x{height}; both sides must be >= {MIN_SIDE}")
    band = band_width(width)
    middle_cols = np.arange(band, width - band)
    middle = [(int(x), y) for y in range(height) for x in middle_cols]
    n_obstacles = math.floor(density.obstacle_fraction * len(middle))
    starts = tuple((x, y) for y in range(height) for x in range(width - band, width))
    safes = tuple((x, y) for y in range(height) for x in range(band))

    for attempt in range(GENERATION_ATTEMPTS):
        rng = np.random.default_rng(child_seed("map-attempt", rng_seed, attempt))
        terrain = np.zeros((height, width), dtype=np.uint8)
        if n_obstacles:
            picks = rng.choice(len(middle), size=n_obstacles, replace=False)
            for i in picks:
                x, y = middle[i]
                terrain[y, x] = CellKind.OBSTACLE
        grid = GridMap(width, height, terrain, starts, safes)
        if pools_connected(grid):
            return grid
    raise GenerationError(
        f"no connected {width}x{height} {density.value} map after {GENERATION_ATTEMPTS} attempts"
    )


def shortest_path(grid: GridMap, start: Cell, goal: Cell) -> Optional[int]:
    """Number of 8-connected steps from ``start`` to ``goal``, or None.

    Hazards are ignored; only static obstacles block.
    """
    for name, cell in (("from", start), ("to", goal)):
        if not grid.in_bounds(cell):
            raise ValueError(f"{name} cell {cell} is out of bounds")
        if not grid.is_free(cell):
            raise ValueError(f"{name} cell {cell} is an obstacle")
    if start == goal:
        return 0
    terrain = grid.terrain
    width, height = grid.width, grid.height
    dist = {start: 0}
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        d = dist[(x, y)] + 1
        for dx, dy in NEIGHBOURS:
            nxt = (x + dx, y + dy)
            if nxt in dist:
                continue
            nx, ny = nxt
            if 0 <= nx < width and 0 <= ny < height and terrain[ny, nx] == 0:
                if nxt == goal:
                    return d
                dist[nxt] = d
                queue.append(nxt)
    return None


def distance_field(grid: GridMap, sources: Iterable[Cell]) -> np.ndarray:
    """BFS step counts from the nearest source; -1 where unreachable."""
    height, width = grid.height, grid.width
    dist = np.full((height, width), -1, dtype=np.int64)
    queue = deque()
    for x, y in sources:
        if dist[y, x] < 0:
            dist[y, x] = 0
            queue.append((x, y))
    terrain = grid.terrain
    while queue:
        x, y = queue.popleft()
        d = dist[y, x] + 1
        for dx, dy in NEIGHBOURS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < width and 0 <= ny < height and dist[ny, nx] < 0 and terrain[ny, nx] == 0:
                dist[ny, nx] = d
                queue.append((nx, ny))
    return dist
