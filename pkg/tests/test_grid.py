import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hazardgrid.grid import (
    CellKind,
    Density,
    EmptyPoolError,
    GenerationError,
    GridMap,
    MapAlphabetError,
    MapDimensionError,
    MapHeaderError,
    MapPoolError,
    MapTooSmallError,
    band_width,
    distance_field,
    generate_map,
    load_map,
    parse_map,
    pools_connected,
    save_map,
    serialize_map,
    shortest_path,
)
from oracles import relaxation_distances

EMPTY_8 = "8 8\n" + "........\n" * 3 + "G......S\n" + "........\n" * 4

WALL_8 = "8 8\n" + "".join(
    ("G" if y == 0 else ".") + "..." + ("." if y == 6 else "@") + ".." + ("S" if y == 0 else ".") + "\n"
    for y in range(8)
)


def test_too_small_rejected():
    with pytest.raises(MapTooSmallError):
        parse_map("3 1\n@.#\n")


def test_identity_like_map():
    grid = parse_map(EMPTY_8)
    assert (grid.width, grid.height) == (8, 8)
    assert grid.start_pool == ((7, 3),)
    assert grid.safe_pool == ((0, 3),)
    assert grid.terrain.size == 64
    assert grid.obstacle_count == 0


def test_bad_character_names_row_and_column():
    text = EMPTY_8.replace("G......S", "G..X...S")
    with pytest.raises(MapAlphabetError, match="row 3, column 3"):
        parse_map(text)


@pytest.mark.parametrize("text, error", [
    ("8\n", MapHeaderError),
    ("a b\n", MapHeaderError),
    ("", MapHeaderError),
    ("8 8\n" + "........\n" * 7, MapDimensionError),
    ("8 8\n" + "........\n" * 7 + ".......\n", MapDimensionError),
    ("8 8\n" + "S.......\n" + "........\n" * 7, MapPoolError),
    ("8 8\n" + ".......G\n" + "........\n" * 7, MapPoolError),
])
def test_parse_diagnostics_are_distinct(text, error):
    with pytest.raises(error):
        parse_map(text)


def test_empty_pools_only_fail_when_used():
    grid = parse_map("8 8\n" + "........\n" * 8)
    with pytest.raises(EmptyPoolError):
        grid.require_pools()


def test_hash_cells_are_free_hazard_seeds():
    grid = parse_map(EMPTY_8.replace("G......S", "G..#...S"))
    assert grid.hazard_seeds == ((3, 3),)
    assert grid.terrain[3, 3] == CellKind.FREE


def test_round_trip_bytes(tmp_path):
    text = WALL_8.replace("G...", "G.#.")
    grid = parse_map(text)
    assert serialize_map(grid) == text
    assert parse_map(serialize_map(grid)) == grid
    save_map(grid, tmp_path / "m.txt")
    assert (tmp_path / "m.txt").read_bytes() == text.encode("ascii")
    assert load_map(tmp_path / "m.txt") == grid


def test_overlay_draws_hash():
    grid = parse_map(EMPTY_8)
    overlay = np.zeros((8, 8), dtype=bool)
    overlay[0, 0] = True
    assert serialize_map(grid, overlay).split("\n")[1] == "#......."


def test_band_width():
    assert [band_width(w) for w in (8, 9, 32, 33)] == [2, 3, 8, 9]


@pytest.mark.parametrize("density, expected", [(Density.SPARSE, 25), (Density.DENSE, 102)])
def test_generated_obstacle_count(density, expected):
    # floor(fraction * (32*32 - 2*8*32)) counted directly
    grid = generate_map(32, 32, density, 11)
    assert expected == math.floor(density.obstacle_fraction * (32 * 32 - 2 * 8 * 32))
    assert grid.obstacle_count == expected
    assert not grid.terrain[:, :8].any() and not grid.terrain[:, -8:].any()
    assert len(grid.start_pool) == len(grid.safe_pool) == 8 * 32


def test_generation_is_deterministic():
    a = generate_map(32, 32, Density.SPARSE, 7)
    b = generate_map(32, 32, Density.SPARSE, 7)
    assert serialize_map(a) == serialize_map(b)
    assert serialize_map(a) != serialize_map(generate_map(32, 32, Density.SPARSE, 8))


@pytest.mark.parametrize("seed", range(5))
def test_small_generated_map_is_reachable(seed):
    grid = generate_map(8, 8, Density.SPARSE, seed)
    assert any(shortest_path(grid, s, g) is not None for s in grid.start_pool for g in grid.safe_pool)


def test_generation_gives_up(monkeypatch):
    import hazardgrid.grid as grid_mod
    monkeypatch.setattr(grid_mod, "pools_connected", lambda grid: False)
    with pytest.raises(GenerationError):
        generate_map(8, 8, Density.DENSE, 0)


def test_shortest_path_basics():
    grid = parse_map(EMPTY_8)
    assert shortest_path(grid, (2, 2), (2, 2)) == 0
    assert shortest_path(grid, (0, 0), (7, 7)) == 7


def test_shortest_path_through_gap_matches_relaxation():
    grid = parse_map(WALL_8)
    free = (grid.terrain == 0).tolist()
    assert relaxation_distances(free, (0, 0))[0][7] == 12
    assert shortest_path(grid, (0, 0), (7, 0)) == 12


def test_shortest_path_disconnected_and_bad_cells():
    grid = parse_map("8 8\n" + "G...@..S\n" * 8)
    assert shortest_path(grid, (0, 0), (7, 0)) is None
    assert not pools_connected(grid)
    with pytest.raises(ValueError):
        shortest_path(grid, (4, 0), (0, 0))
    with pytest.raises(ValueError):
        shortest_path(grid, (8, 0), (0, 0))


def test_distance_field_agrees_with_relaxation():
    grid = generate_map(16, 12, Density.DENSE, 3)
    free = (grid.terrain == 0).tolist()
    ref = relaxation_distances(free, (0, 0))
    field = distance_field(grid, [(0, 0)])
    for y in range(12):
        for x in range(16):
            want = -1 if ref[y][x] == math.inf else ref[y][x]
            assert field[y, x] == want


@st.composite
def grids(draw):
    w = draw(st.integers(8, 12))
    h = draw(st.integers(8, 12))
    bits = draw(st.lists(st.booleans(), min_size=w * h, max_size=w * h))
    terrain = np.array(bits, dtype=np.uint8).reshape(h, w)
    return GridMap(w, h, terrain, (), ())


@settings(max_examples=40, deadline=None)
@given(grids(), st.data())
def test_shortest_path_metric_properties(grid, data):
    free = [(x, y) for y in range(grid.height) for x in range(grid.width) if grid.terrain[y, x] == 0]
    if len(free) < 3:
        return
    a, b, c = (data.draw(st.sampled_from(free)) for _ in range(3))
    ab, ba = shortest_path(grid, a, b), shortest_path(grid, b, a)
    assert ab == ba
    bc, ac = shortest_path(grid, b, c), shortest_path(grid, a, c)
    if ab is not None and bc is not None:
        assert ac is not None and ac <= ab + bc
    ref = relaxation_distances((grid.terrain == 0).tolist(), a)[b[1]][b[0]]
    assert ab == (None if ref == math.inf else ref)


@settings(max_examples=25, deadline=None)
@given(st.integers(8, 20), st.integers(8, 20), st.sampled_from(list(Density)), st.integers(0, 2**32))
def test_generated_maps_round_trip_and_connect(w, h, density, seed):
    grid = generate_map(w, h, density, seed)
    assert pools_connected(grid)
    assert parse_map(serialize_map(grid)) == grid
