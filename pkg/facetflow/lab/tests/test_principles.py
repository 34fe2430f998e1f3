import numpy as np
import pytest
from facetflow.energy import EnergyModel, QuadSpec, mollify_density
from facetflow.exceptions import IncompatibleRunsError
from facetflow.solver import (
    Grid,
    BoundaryData,
    SolverConfig,
    initial_field,
    run_simulation,
)
from facetflow.lab import check_max_principle, check_comparison, ordered_boundary_pair

MODEL_1D = EnergyModel(n=1, p=1.3)
MODEL_2D = EnergyModel(n=2, p=1.5)
CFG = SolverConfig(dt=0.02, t_end=0.1, eps=0.2)


@pytest.fixture(scope="module")
def md_1d():
    return mollify_density(MODEL_1D, 0.2, QuadSpec(r_max=8.0))


@pytest.fixture(scope="module")
def md_2d():
    return mollify_density(MODEL_2D, 0.2, QuadSpec(r_max=6.0))


def _run(grid, bc, md, model, shift=0.0, amplitude=1.0, run_id="run"):
    initial = initial_field(grid, bc, kind="bump", amplitude=amplitude)
    return run_simulation(
        CFG, model, bc, initial.evolve(initial.values + shift), md=md, run_id=run_id
    )


def test_constant_data_has_zero_margin(md_1d):
    grid = Grid(dim=1, cells=16)
    run = _run(grid, BoundaryData(value=0.4), md_1d, MODEL_1D, amplitude=0.0)
    report = check_max_principle(run)
    assert report.passed
    assert report.margins["margin"] == 0.0


def test_max_principle_2d(md_2d):
    run = _run(Grid(dim=2, cells=10), BoundaryData(), md_2d, MODEL_2D)
    report = check_max_principle(run)
    assert report.passed
    assert report.margins["margin"] >= -1e-10


def test_injected_spike_is_located(md_1d):
    grid = Grid(dim=1, cells=16)
    run = _run(grid, BoundaryData(), md_1d, MODEL_1D)
    snapshots = list(run.snapshots)
    values = snapshots[3].values.copy()
    values[5] = 10.0
    snapshots[3] = snapshots[3].evolve(values)
    report = check_max_principle(run.with_snapshots(snapshots))
    assert report.status == "fail"
    assert report.margins["margin"] == pytest.approx(run.data_sup - 10.0)
    assert report.located["node"] == [5]
    assert report.located["t"] == pytest.approx(snapshots[3].t)


@pytest.mark.parametrize("dim", [1, 2])
def test_vertical_shift_preserves_order(dim, md_1d, md_2d):
    md, model = (md_1d, MODEL_1D) if dim == 1 else (md_2d, MODEL_2D)
    grid = Grid(dim=dim, cells=10)
    lower = _run(grid, BoundaryData(), md, model, run_id="lower")
    upper = _run(grid, BoundaryData(value=1.0), md, model, shift=1.0, run_id="upper")
    report = check_comparison(lower, upper)
    assert report.passed
    assert report.margins["violation"] == pytest.approx(1.0, abs=1e-10)
    assert report.run_ids == ("lower", "upper")
    with pytest.raises(IncompatibleRunsError, match="parabolic boundary"):
        check_comparison(upper, lower)


@pytest.mark.parametrize("dim", [1, 2])
def test_constant_lower_data(dim, md_1d, md_2d):
    md, model = (md_1d, MODEL_1D) if dim == 1 else (md_2d, MODEL_2D)
    grid = Grid(dim=dim, cells=10)
    arbitrary = _run(grid, BoundaryData(value=0.2), md, model, amplitude=0.7)
    M = arbitrary.data_sup
    constant = _run(grid, BoundaryData(value=-M), md, model, amplitude=0.0)
    assert check_comparison(constant, arbitrary).passed


def test_runs_on_different_grids(md_1d):
    a = _run(Grid(dim=1, cells=10), BoundaryData(), md_1d, MODEL_1D)
    b = _run(Grid(dim=1, cells=12), BoundaryData(), md_1d, MODEL_1D)
    with pytest.raises(IncompatibleRunsError, match="grids"):
        check_comparison(a, b)


def test_ordered_pair_is_ordered():
    grid = Grid(dim=2, cells=6)
    lower, upper = ordered_boundary_pair(grid, np.random.default_rng(3))
    assert lower.times.tolist() == [0.0, 0.5, 1.0]
    assert np.all(upper.table >= lower.table)
    gap = upper.initial_slice(grid).values - lower.initial_slice(grid).values
    assert np.all(gap >= 0.0)
    assert not lower.static


def test_random_ordered_pairs_1d():
    grid = Grid(dim=1, cells=16)
    rng = np.random.default_rng(42)
    cfg = SolverConfig(dt=0.05, t_end=0.5, eps=0.2)
    for draw in range(10):
        lower_bc, upper_bc = ordered_boundary_pair(grid, rng, amplitude=0.5, modes=2)
        lower = run_simulation(
            cfg, MODEL_1D, lower_bc, lower_bc.initial_slice(grid), run_id=f"A{draw}"
        )
        upper = run_simulation(
            cfg, MODEL_1D, upper_bc, upper_bc.initial_slice(grid), run_id=f"B{draw}"
        )
        report = check_comparison(lower, upper)
        assert report.passed, report.to_dict()
        assert check_max_principle(lower).passed
