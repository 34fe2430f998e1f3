import json
import numpy as np
import pytest
from numpy.testing import assert_array_equal
from facetflow.energy import EnergyModel, QuadSpec, mollify_density
from facetflow.exceptions import ConfigError
from facetflow.solver import (
    Grid,
    BoundaryData,
    SolverConfig,
    initial_field,
    run_simulation,
    save_run,
    load_run,
)


@pytest.fixture(scope="module")
def small_run():
    model = EnergyModel(n=2, p=1.5)
    md = mollify_density(model, 0.2, QuadSpec(r_max=5.0))
    grid = Grid(dim=2, cells=(6, 4), extent=(1.5, 1.0))
    bc = BoundaryData(kind="affine", offset=0.1, slope=[0.5, -0.25])
    initial = initial_field(grid, bc, kind="sine", amplitude=0.3)
    cfg = SolverConfig(dt=0.05, t_end=0.2, eps=0.2, snapshot_every=2)
    return run_simulation(cfg, model, bc, initial, md=md, run_id="small")


def test_files_and_headers(small_run, work_dir):
    manifest_path = save_run(small_run, work_dir / "small", {"outcome": "ok"})
    manifest = json.loads(manifest_path.read_text())
    assert manifest["outcome"] == "ok"
    assert manifest["files"] == [
        "series.csv",
        "snapshot_0.csv",
        "snapshot_1.csv",
        "snapshot_2.csv",
    ]
    series = (work_dir / "small" / "series.csv").read_text().splitlines()
    assert series[0] == "t,energy,sup_u,sup_V,newton_iters"
    assert len(series) == 1 + 5
    snapshot = (work_dir / "small" / "snapshot_0.csv").read_text().splitlines()
    assert snapshot[0] == "x,y,u"
    assert len(snapshot) == 1 + 7 * 5


def test_round_trip(small_run, work_dir):
    save_run(small_run, work_dir / "run")
    loaded = load_run(work_dir / "run")
    assert loaded.grid == small_run.grid
    assert loaded.model == small_run.model
    assert loaded.config == small_run.config
    assert_array_equal(loaded.snapshot_times, small_run.snapshot_times)
    for a, b in zip(loaded.snapshots, small_run.snapshots):
        assert_array_equal(a.values, b.values)
    assert_array_equal(loaded.energy, small_run.energy)
    assert_array_equal(loaded.newton_iters, small_run.newton_iters)
    assert loaded.data_sup == small_run.data_sup


def test_rewrites_are_byte_identical(small_run, work_dir):
    save_run(small_run, work_dir / "a")
    save_run(small_run, work_dir / "b")
    for name in ("series.csv", "snapshot_2.csv", "manifest.json"):
        first = (work_dir / "a" / name).read_bytes()
        assert first == (work_dir / "b" / name).read_bytes()


def test_missing_run(work_dir):
    with pytest.raises(ConfigError, match="no run found"):
        load_run(work_dir / "nowhere")


def test_series_columns(small_run):
    series = small_run.series()
    assert set(series) == {"t", "energy", "sup_u", "sup_V", "newton_iters"}
    assert np.all(series["sup_V"] >= 0.2)
    assert series["newton_iters"][0] == 0
