"""
Sweeps over the mollification radius ε
"""
from __future__ import annotations
import typing as ty
import logging
from concurrent.futures import ThreadPoolExecutor
import attrs
import numpy as np
from facetflow.exceptions import ConfigError, IncompatibleRunsError
from facetflow.energy import EnergyModel, QuadSpec, mollify_density
from facetflow.solver import (
    BoundaryData,
    ScalarField,
    SolverConfig,
    RunResult,
    gradient_field,
    run_simulation,
    table_radius,
)
from .cylinder import ParabolicCylinder
from .report import DiagnosticsReport

logger = logging.getLogger("facetflow")

GRADIENT_BOUND_FACTOR = 1.2


def check_eps_list(eps_list: ty.Sequence[float]) -> ty.List[float]:
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ConfigError("eps_list is empty", "experiment", "eps_list")
    if any(not 0.0 < e < 1.0 for e in eps_list):
        raise ConfigError(
            f"every eps must lie in (0, 1) (got {eps_list})", "experiment", "eps_list"
        )
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError(
            f"eps_list must decrease strictly (got {eps_list})",
            "experiment",
            "eps_list",
        )
    return eps_list


def run_sweep(
    cfg: SolverConfig,
    model: EnergyModel,
    bc: BoundaryData,
    initial: ScalarField,
    eps_list: ty.Sequence[float],
    workers: int = 1,
    quad_spec: ty.Optional[QuadSpec] = None,
    name: str = "eps",
) -> ty.List[RunResult]:
    """Solves the same problem once per ε, up to `workers` runs at a time

    Parameters
    ----------
    cfg : SolverConfig
        stepping settings; its eps is replaced by each entry of `eps_list`
    model : EnergyModel
        the density parameters
    bc : BoundaryData
        the lateral data
    initial : ScalarField
        the initial slice
    eps_list : sequence of float
        strictly decreasing radii in (0, 1)
    workers : int
        cap on the runs solved concurrently
    quad_spec : QuadSpec, optional
        quadrature settings of the density tables (r_max is always derived from
        the data)
    name : str
        prefix of the run ids, which end in the index of the ε

    Returns
    -------
    list[RunResult]
        one run per ε, in the order of `eps_list`
    """
    eps_list = check_eps_list(eps_list)
    if quad_spec is None:
        quad_spec = QuadSpec()
    r_max = table_radius(initial, bc, cfg.t_end)

    def solve(indexed: ty.Tuple[int, float]) -> RunResult:
        i, eps = indexed
        md = mollify_density(model, eps, attrs.evolve(quad_spec, r_max=r_max))
        return run_simulation(
            attrs.evolve(cfg, eps=eps), model, bc, initial, md=md, run_id=f"{name}_{i}"
        )

    logger.info(f"sweeping eps over {eps_list} with {workers} workers")
    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as executor:
        return list(executor.map(solve, enumerate(eps_list)))


def _check_sweep(runs: ty.Sequence[RunResult]):
    first = runs[0]
    for run in runs[1:]:
        if run.grid != first.grid or run.model != first.model:
            raise IncompatibleRunsError(
                f"run '{run.run_id}' does not share grid and model with "
                f"'{first.run_id}'"
            )
        if not np.array_equal(run.snapshot_times, first.snapshot_times):
            raise IncompatibleRunsError(
                f"run '{run.run_id}' was sampled at different times than "
                f"'{first.run_id}'"
            )


def gradient_difference_matrix(
    runs: ty.Sequence[RunResult], tau: float
) -> np.ndarray:
    """‖∇u_i − ∇u_j‖ in L^p(Ω × (0, T − τ)) for every pair of runs, with p the growth
    exponent of the model; each snapshot stands for the time up to the next one"""
    _check_sweep(runs)
    first = runs[0]
    p = first.model.p
    times = first.snapshot_times
    keep = np.flatnonzero(times <= times[-1] - tau + 1e-12)
    weights = np.diff(np.append(times, times[-1]))[keep]
    if weights.sum() == 0.0:
        weights = np.ones(keep.size)
    weights = weights * first.grid.cell_volume
    grads = [[gradient_field(run.snapshots[k]) for k in keep] for run in runs]
    matrix = np.zeros((len(runs), len(runs)))
    for i in range(len(runs)):
        for j in range(i + 1, len(runs)):
            total = sum(
                w * np.sum(np.linalg.norm(a - b, axis=-1) ** p)
                for w, a, b in zip(weights, grads[i], grads[j])
            )
            matrix[i, j] = matrix[j, i] = total ** (1.0 / p)
    return matrix


def epsilon_convergence_study(
    cfg: SolverConfig,
    model: EnergyModel,
    bc: ty.Optional[BoundaryData],
    eps_list: ty.Sequence[float],
    initial: ty.Optional[ScalarField] = None,
    runs: ty.Optional[ty.Sequence[RunResult]] = None,
    tau_fraction: float = 0.1,
    workers: int = 1,
    quad_spec: ty.Optional[QuadSpec] = None,
) -> DiagnosticsReport:
    """Pairwise gradient differences of runs with decreasing ε

    The differences are measured in L^p over the cylinder that excludes the final
    band of length τ = tau_fraction·T. The check passes iff the differences between
    consecutive radii do not increase; otherwise it is inconclusive, since the limit
    is only known to exist along a subsequence.

    Parameters
    ----------
    cfg, model : SolverConfig, EnergyModel
        the problem, solved once per ε unless `runs` are given
    bc : BoundaryData or None
        the lateral data, only needed when the runs are solved here
    eps_list : sequence of float
        strictly decreasing radii in (0, 1)
    initial : ScalarField, optional
        the initial slice, required unless `runs` are given
    runs : sequence of RunResult, optional
        precomputed runs, one per entry of `eps_list`
    tau_fraction : float
        length of the excluded final band relative to T
    workers : int
        cap on concurrently solved runs
    quad_spec : QuadSpec, optional
        quadrature settings of the density tables

    Returns
    -------
    DiagnosticsReport
        with the matrix in margins["matrix"] and the consecutive differences in
        margins["consecutive"]
    """
    eps_list = check_eps_list(eps_list)
    if not 0.0 <= tau_fraction < 1.0:
        raise ConfigError(
            f"tau_fraction must lie in [0, 1) (got {tau_fraction})",
            "experiment",
            "tau_fraction",
        )
    if runs is None:
        if initial is None or bc is None:
            raise ConfigError(
                "boundary data and an initial slice, or precomputed runs, are required"
            )
        runs = run_sweep(cfg, model, bc, initial, eps_list, workers, quad_spec)
    if len(runs) != len(eps_list):
        raise IncompatibleRunsError(
            f"{len(runs)} runs were given for {len(eps_list)} radii"
        )
    tau = tau_fraction * cfg.t_end
    if len(runs) > 1:
        matrix = gradient_difference_matrix(runs, tau)
    else:
        matrix = np.zeros((0, 0))
    consecutive = [float(matrix[i, i + 1]) for i in range(len(runs) - 1)]
    monotone = all(
        b <= a * (1.0 + 1e-12) + 1e-14 for a, b in zip(consecutive, consecutive[1:])
    )
    if not monotone:
        logger.warning(
            f"gradient differences {consecutive} do not decrease along the sweep"
        )
    return DiagnosticsReport(
        check="epsilon_convergence",
        run_ids=[r.run_id for r in runs],
        params={"eps_list": eps_list, "tau": tau, "p": model.p},
        margins={"matrix": matrix, "consecutive": consecutive},
        status="pass" if monotone else "inconclusive",
    )


def gradient_sup_series(
    runs: ty.Sequence[RunResult], Q: ParabolicCylinder
) -> DiagnosticsReport:
    """sup of V_ε over Q for every run of an ε sweep

    The check passes iff max(series) ≤ 1.2·max(min(series), max ε), i.e. the bound
    does not grow as ε shrinks (values below the largest ε carry no information
    since V_ε ≥ ε).
    """
    _check_sweep(runs)
    series = np.array([float(Q.restrict(run).V.max()) for run in runs])
    eps = np.array([run.eps for run in runs])
    floor = max(float(series.min()), float(eps.max()))
    ratio = float(series.max()) / floor
    return DiagnosticsReport.judged(
        ratio <= GRADIENT_BOUND_FACTOR,
        check="gradient_sup_series",
        run_ids=[r.run_id for r in runs],
        params={"eps": eps, "cylinder": attrs.asdict(Q)},
        margins={"series": series, "bound": GRADIENT_BOUND_FACTOR - ratio},
        fitted={"C": float(series.max())},
    )
