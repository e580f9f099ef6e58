import json
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings, strategies as st

from hazardgrid.bench import (
    CURVES_HEADER,
    RESULTS_HEADER,
    ConfigError,
    EpisodeResult,
    ExperimentConfig,
    SuccessCurve,
    WorkUnit,
    aggregate,
    map_seed,
    parse_flood_blocks,
    render_svg,
    resolve_workers,
    run_benchmark,
    sample_points,
    train_on_map,
    write_csv,
    write_outputs,
    write_svg,
)
from hazardgrid.engine import Status
from hazardgrid.flood import FloodKind, FloodParams
from hazardgrid.grid import Density, parse_map
from hazardgrid.learn import LearnerConfig

EMPTY_8 = parse_map("8 8\n" + "GG....SS\n" * 8)

TINY = dict(map_sizes=[8], densities=["sparse"], maps_per_density=1, flood_kinds=["random", "linear"],
            points_generated=20, starts_sampled=5, goals_sampled=5, episodes_per_epoch=5,
            total_episodes=20, repetitions=2)


def result(outcome, epoch=0, kind=FloodKind.CENTRAL, density=Density.SPARSE, episode=0):
    return EpisodeResult(32, density, kind, 0, 0, episode, epoch, outcome, 3, 1.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(repetitions=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(total_episodes=75, episodes_per_epoch=50)
    with pytest.raises(ConfigError):
        ExperimentConfig(map_sizes=(4,))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"floods": [{"kind": "linear", "delta_d": 0}]})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"learner": {"alpha": 2}})


def test_desk_defaults():
    cfg = ExperimentConfig()
    assert cfg.map_sizes == (32,) and cfg.maps_per_density == 3 and cfg.repetitions == 10
    assert cfg.episodes_per_epoch == 50 and cfg.total_episodes == 1000 and cfg.epochs == 20
    assert (cfg.points_generated, cfg.starts_sampled) == (1000, 100)
    assert len(cfg.units()) == 2 * 3 * 5 * 10


def test_config_json_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict(dict(TINY, floods=[{"kind": "linear", "delta_d": 0.7}],
                                          learner={"gamma": 0.7}))
    assert cfg.floods[FloodKind.LINEAR].delta_d == 0.7
    assert cfg.learner.gamma == 0.7
    cfg.dump(tmp_path / "c.json")
    again = ExperimentConfig.load(tmp_path / "c.json")
    assert again == cfg
    with pytest.raises(ConfigError):
        (tmp_path / "bad.json").write_text("{")
        ExperimentConfig.load(tmp_path / "bad.json")


def test_flood_blocks_fill_defaults():
    blocks = parse_flood_blocks([{"kind": "B", "r0": 1.5}])
    assert blocks[FloodKind.TOP_RIGHT].r0 == 1.5
    with pytest.raises(ConfigError):
        parse_flood_blocks([{"kind": "central", "speed": 1}])


def test_child_seeds_are_distinct_across_units():
    cfg = ExperimentConfig()
    seeds = [u.seed(cfg.master_seed) for u in cfg.units()]
    assert len(set(seeds)) == len(seeds)
    maps = {map_seed(0, 32, d, i) for d in Density for i in range(10)}
    assert len(maps) == 20
    assert WorkUnit(32, Density.SPARSE, 0, FloodKind.CENTRAL, 0).seed(1) != \
        WorkUnit(32, Density.SPARSE, 0, FloodKind.CENTRAL, 0).seed(0)


def test_sample_points_subset():
    import numpy as np
    pool = [(i, 0) for i in range(50)]
    picks = sample_points(pool, 1000, 100, np.random.default_rng(0))
    assert len(picks) == 100 and set(picks) <= set(pool)


def test_aggregate_examples():
    curves = aggregate([result(Status.SUCCESS, epoch=e) for e in range(3) for _ in range(4)])
    assert curves[0].rates == (1.0, 1.0, 1.0)
    alternating = [result(Status.SUCCESS if i % 2 else Status.DROWNED, episode=i) for i in range(50)]
    assert aggregate(alternating)[0].rates == (0.5,)
    assert aggregate([]) == []


def test_aggregate_rejects_empty_epoch():
    with pytest.raises(ValueError):
        aggregate([result(Status.SUCCESS, epoch=0), result(Status.SUCCESS, epoch=2)])


outcomes = st.sampled_from([Status.SUCCESS, Status.DROWNED, Status.TIMED_OUT])


@settings(max_examples=50)
@given(st.lists(outcomes, min_size=1, max_size=40), st.lists(outcomes, min_size=1, max_size=40))
def test_aggregate_concat_is_weighted_mean(a, b):
    ra = [result(o) for o in a]
    rb = [result(o) for o in b]
    whole = aggregate(ra + rb)[0].rates[0]
    wa, wb = aggregate(ra)[0].rates[0], aggregate(rb)[0].rates[0]
    assert whole == pytest.approx((wa * len(a) + wb * len(b)) / (len(a) + len(b)))
    assert 0.0 <= whole <= 1.0


def test_single_epoch_curve_row(tmp_path):
    cfg = dict(TINY, total_episodes=5, flood_kinds=["random"], repetitions=1)
    run = run_benchmark(ExperimentConfig.from_dict(cfg), workers=1)
    assert [len(c.rates) for c in run.curves] == [1]
    write_csv([SuccessCurve(32, Density.SPARSE, FloodKind.CENTRAL, (1.0,), (1,))], [], tmp_path)
    lines = (tmp_path / "curves.csv").read_text().splitlines()
    assert lines == [",".join(CURVES_HEADER), "32,sparse,central,0,1.0"]
    assert (tmp_path / "results.csv").read_text() == ",".join(RESULTS_HEADER) + "\n"


def test_empty_curve_set_writes_header_only(tmp_path):
    write_csv([], [], tmp_path)
    assert (tmp_path / "curves.csv").read_bytes() == (",".join(CURVES_HEADER) + "\n").encode()


def test_svg_is_well_formed(tmp_path):
    run = run_benchmark(ExperimentConfig.from_dict(TINY), workers=1)
    write_svg(run.curves, tmp_path / "c.svg")
    root = ET.parse(tmp_path / "c.svg").getroot()
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f".//{ns}polyline")) == len(run.curves) == 2
    assert ET.fromstring(render_svg([])) is not None


def test_dry_empty_map_converges():
    cfg = ExperimentConfig(floods={"random": FloodParams(spawn_prob=0.0)},
                           learner=LearnerConfig(epsilon_decay=0.99, epsilon_min=0.0),
                           points_generated=100, starts_sampled=10, goals_sampled=10)
    unit = WorkUnit(8, Density.SPARSE, 0, FloodKind.RANDOM, 0)
    _, results, _ = train_on_map(cfg, EMPTY_8, unit, 123)
    last = [r for r in results if r.epoch == cfg.epochs - 1]
    assert all(r.outcome is Status.SUCCESS for r in last)


def test_results_are_well_formed():
    cfg = ExperimentConfig.from_dict(dict(TINY, greedy_eval_episodes=3))
    run = run_benchmark(cfg, workers=1)
    assert len(run.results) == 2 * 2 * 20
    for r in run.results:
        assert r.outcome is not Status.RUNNING and 0 <= r.steps <= 64
        assert r.epoch == r.episode // 5
    for c in run.curves + run.greedy_curves:
        assert len(c.rates) == cfg.epochs and all(0 <= x <= 1 for x in c.rates)
    assert [c.counts[0] for c in run.greedy_curves] == [6, 6]


def test_outputs_identical_across_worker_counts(tmp_path):
    cfg = ExperimentConfig.from_dict(TINY)
    paths = {}
    for workers in (1, 2):
        out = tmp_path / f"w{workers}"
        paths[workers] = write_outputs(run_benchmark(cfg, workers=workers), cfg, out)
    for a, b in zip(paths[1], paths[2]):
        assert a.name == b.name and a.read_bytes() == b.read_bytes()
    header = paths[1][0].read_text().splitlines()[0]
    assert header == "size,density,flood_kind,repetition,episode,epoch,outcome,steps,epsilon"
    assert json.loads((tmp_path / "w1" / "config.json").read_text())["repetitions"] == 2


def test_resolve_workers(monkeypatch):
    monkeypatch.setenv("HAZARDGRID_THREADS", "3")
    assert resolve_workers() == 3
    assert resolve_workers(2) == 2
    monkeypatch.setenv("HAZARDGRID_THREADS", "0")
    assert resolve_workers() >= 1
    monkeypatch.setenv("HAZARDGRID_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_workers()
