"""
Maximum and comparison principles checked on computed runs
"""
from __future__ import annotations
import typing as ty
import logging
import numpy as np
from facetflow.exceptions import IncompatibleRunsError
from facetflow.solver import Grid, BoundaryData, RunResult
from .report import DiagnosticsReport

logger = logging.getLogger("facetflow")

MAX_PRINCIPLE_SLACK = 1e-10
COMPARISON_SLACK = 1e-8
DATA_ORDER_SLACK = 1e-12


def _locate(run: RunResult, k: int, flat_index: int) -> ty.Dict[str, ty.Any]:
    index = np.unravel_index(flat_index, run.grid.shape)
    return {
        "snapshot": int(k),
        "t": float(run.snapshots[k].t),
        "node": [int(i) for i in index],
        "x": run.grid.coords()[index].tolist(),
    }


def check_max_principle(run: RunResult) -> DiagnosticsReport:
    """Compares sup |u| over every snapshot with sup |u_*| over the parabolic
    boundary

    The margin is ‖u_*‖_∞ − max_k ‖u(t_k)‖_∞ and the check passes iff it is at least
    −1e−10; the node and time of the largest |u| are reported.
    """
    sups = np.array([s.sup_norm for s in run.snapshots])
    k = int(np.argmax(sups))
    margin = run.data_sup - float(sups[k])
    passed = margin >= -MAX_PRINCIPLE_SLACK
    located = {}
    if not passed:
        located = _locate(run, k, int(np.argmax(np.abs(run.snapshots[k].values))))
        logger.warning(
            f"run '{run.run_id}' exceeds its data by {-margin:.3g} "
            f"at t={located['t']:g}"
        )
    return DiagnosticsReport.judged(
        passed,
        check="max_principle",
        run_ids=[run.run_id],
        params={"data_sup": run.data_sup, "slack": MAX_PRINCIPLE_SLACK},
        margins={"margin": margin},
        located=located,
    )


def _check_comparable(lower: RunResult, upper: RunResult):
    if lower.grid != upper.grid:
        raise IncompatibleRunsError(
            f"runs '{lower.run_id}' and '{upper.run_id}' live on different grids"
        )
    if lower.model != upper.model or lower.eps != upper.eps:
        raise IncompatibleRunsError(
            f"runs '{lower.run_id}' and '{upper.run_id}' solve different equations"
        )
    if lower.snapshot_times.shape != upper.snapshot_times.shape or not np.allclose(
        lower.snapshot_times, upper.snapshot_times, rtol=0.0, atol=1e-12
    ):
        raise IncompatibleRunsError(
            f"runs '{lower.run_id}' and '{upper.run_id}' were sampled at "
            "different times"
        )
    # ordered data on Ω × {0} and on the lateral boundary at every snapshot
    mask = lower.grid.boundary_mask()
    gaps = [upper.snapshots[0].values - lower.snapshots[0].values]
    gaps.extend(
        (b.values - a.values)[mask] for a, b in zip(lower.snapshots, upper.snapshots)
    )
    worst = min(float(g.min()) for g in gaps)
    if worst < -DATA_ORDER_SLACK:
        raise IncompatibleRunsError(
            f"data of '{lower.run_id}' exceeds data of '{upper.run_id}' by "
            f"{-worst:.3g} on the parabolic boundary"
        )


def check_comparison(run_a: RunResult, run_b: RunResult) -> DiagnosticsReport:
    """Checks that runs with ordered parabolic-boundary data u_A ≤ u_B stay ordered

    Parameters
    ----------
    run_a : RunResult
        the run with the smaller data
    run_b : RunResult
        the run with the larger data, on the same grid, model and times

    Returns
    -------
    DiagnosticsReport
        the worst violation min(u_B − u_A) over nodes and snapshots, passing iff it
        is at least −1e−8

    Raises
    ------
    IncompatibleRunsError
        if grids, models or snapshot times differ, or the data are not ordered
    """
    _check_comparable(run_a, run_b)
    gaps = np.stack(
        [b.values - a.values for a, b in zip(run_a.snapshots, run_b.snapshots)]
    )
    flat = int(np.argmin(gaps))
    k, node = divmod(flat, run_a.grid.node_count)
    violation = float(gaps.flat[flat])
    passed = violation >= -COMPARISON_SLACK
    return DiagnosticsReport.judged(
        passed,
        check="comparison",
        run_ids=[run_a.run_id, run_b.run_id],
        params={"slack": COMPARISON_SLACK},
        margins={"violation": violation},
        located={} if passed else _locate(run_a, int(k), int(node)),
    )


def ordered_boundary_pair(
    grid: Grid,
    rng: np.random.Generator,
    times: ty.Sequence[float] = (0.0, 0.5, 1.0),
    amplitude: float = 1.0,
    modes: int = 3,
) -> ty.Tuple[BoundaryData, BoundaryData]:
    """Draws tabulated parabolic-boundary data A ≤ B

    A is a random combination of cosine modes whose coefficients move linearly
    between the sample times; B adds a nonnegative random profile to A. The first
    slice of each table is the full datum on Ω × {0} (see
    `BoundaryData.initial_slice`).

    Parameters
    ----------
    grid : Grid
        the grid the data are sampled on
    rng : np.random.Generator
        source of the draw
    times : sequence of float
        sample times, starting at 0
    amplitude : float
        scale of the drawn data
    modes : int
        number of cosine modes per axis to draw frequencies from

    Returns
    -------
    tuple[BoundaryData, BoundaryData]
        the lower and the upper data
    """
    times = np.asarray(times, dtype=float)
    x = grid.coords() / np.asarray(grid.extent)

    def profile():
        frequencies = rng.integers(0, modes + 1, grid.dim)
        phases = rng.uniform(0.0, np.pi, grid.dim)
        return np.prod(np.cos(np.pi * frequencies * x + phases), axis=-1)

    shapes = [profile() for _ in range(modes)]
    start = rng.uniform(-amplitude, amplitude, modes)
    drift = rng.uniform(-amplitude, amplitude, modes)
    lower = np.stack(
        [
            sum((c + d * t) * s for c, d, s in zip(start, drift, shapes)) / modes
            for t in times
        ]
    )
    lift = rng.uniform(0.0, amplitude / 2.0) + rng.uniform(0.0, amplitude) * (
        1.0 + profile()
    ) / 2.0
    upper = lower + lift[None]
    return (
        BoundaryData(kind="tabulated", times=times, table=lower),
        BoundaryData(kind="tabulated", times=times, table=upper),
    )
