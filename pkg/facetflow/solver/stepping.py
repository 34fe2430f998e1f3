"""
Backward-Euler time stepping of ∂_t u = div(∇E^ε(∇u)) with Dirichlet data
"""
from __future__ import annotations
import typing as ty
import logging
import attrs
import numpy as np
from scipy.sparse import linalg as spla
from scipy import sparse
from facetflow.exceptions import (
    ConfigError,
    IncompatibleDataError,
    NonConvergenceError,
    OutOfTableError,
)
from facetflow.energy.model import EnergyModel
from facetflow.energy.mollify import MollifiedDensity, QuadSpec, mollify_density
from .grid import Grid, ScalarField, gradient_field
from .boundary import BoundaryData
from .flux import face_flux, divergence, discrete_energy, flux_jacobian, frozen_operator

logger = logging.getLogger("facetflow")

MIN_STEP_LENGTH = 2.0**-10
SUFFICIENT_DECREASE = 1e-4


def _positive(instance, attribute, value):
    if not value > 0:
        raise ConfigError(f"{attribute.name} must be positive (got {value})", "solver")


@attrs.define(kw_only=True, frozen=True)
class SolverConfig:
    """Settings of a backward-Euler run

    Parameters
    ----------
    dt : float
        time step, ≥ 0 (a zero step reproduces the previous slice)
    t_end : float
        final time
    eps : float
        mollification radius of the density
    newton_tol : float
        sup-norm of the step residual at which the nonlinear solve stops
    newton_max_iter : int
        cap on Newton iterations per step
    damping : float
        factor by which a Newton step is shortened until the residual decreases
    picard_fallback : bool
        whether to switch to frozen-coefficient iterations once half of the Newton
        iterations failed to decrease the residual
    picard_max_iter : int
        cap on frozen-coefficient iterations per step
    snapshot_every : int
        cadence (in steps) at which snapshots are kept; the last step is always kept
    """

    dt: float = attrs.field(converter=float)
    t_end: float = attrs.field(converter=float)
    eps: float = attrs.field(default=0.1, converter=float)
    newton_tol: float = attrs.field(default=1e-12, converter=float, validator=_positive)
    newton_max_iter: int = attrs.field(default=30, converter=int, validator=_positive)
    damping: float = attrs.field(default=0.5, converter=float)
    picard_fallback: bool = True
    picard_max_iter: int = attrs.field(default=200, converter=int, validator=_positive)
    snapshot_every: int = attrs.field(default=1, converter=int, validator=_positive)

    @dt.validator
    def _check_dt(self, attribute, value):
        if value < 0:
            raise ConfigError(f"dt must be nonnegative (got {value})", "time", "dt")

    @t_end.validator
    def _check_t_end(self, attribute, value):
        if value < 0:
            raise ConfigError(f"t_end must be nonnegative (got {value})", "time")

    @damping.validator
    def _check_damping(self, attribute, value):
        if not 0.0 < value < 1.0:
            raise ConfigError(f"damping must lie in (0, 1) (got {value})", "solver")

    @property
    def steps(self) -> int:
        if self.dt == 0 or self.t_end == 0:
            return 0
        return int(np.ceil(self.t_end / self.dt - 1e-9))


@attrs.define(kw_only=True, frozen=True)
class StepLog:
    "Convergence history of one implicit step"

    t: float
    newton_iters: int
    picard_iters: int
    residuals: ty.Tuple[float, ...]

    @property
    def final_residual(self) -> float:
        return self.residuals[-1]


def _residual_values(
    new: np.ndarray, u_old: ScalarField, dt: float, md: MollifiedDensity
) -> np.ndarray:
    field = u_old.evolve(new)
    res = new - u_old.values - dt * divergence(field.grid, face_flux(field, md))
    res[field.grid.boundary_mask()] = 0.0
    return res


def step_residual(
    u_new: ScalarField,
    u_old: ScalarField,
    dt: float,
    md: MollifiedDensity,
    bc: BoundaryData,
) -> ScalarField:
    """Residual u_new − u_old − dt·div_h(∇E^ε(∇u_new)) of a backward-Euler step

    The residual vanishes on boundary nodes, where u_new is prescribed by `bc`.

    Raises
    ------
    GridMismatchError
        if the two fields live on different grids
    """
    u_new.grid.check_same(u_old.grid)
    values = _residual_values(u_new.values, u_old, dt, md)
    return u_new.evolve(values)


def _sup(values: np.ndarray) -> float:
    return float(np.abs(values).max()) if values.size else 0.0


def solve_timestep(
    u_old: ScalarField,
    dt: float,
    md: MollifiedDensity,
    bc: BoundaryData,
    cfg: SolverConfig,
    return_log: bool = False,
) -> ty.Union[ScalarField, ty.Tuple[ScalarField, StepLog]]:
    """Solves one backward-Euler step by damped Newton iterations

    Parameters
    ----------
    u_old : ScalarField
        the slice at the previous time
    dt : float
        the step length
    md : MollifiedDensity
        the density whose gradient is the flux
    bc : BoundaryData
        boundary data, imposed at the new time u_old.t + dt
    cfg : SolverConfig
        tolerances and iteration caps
    return_log : bool
        whether to also return the convergence history

    Returns
    -------
    ScalarField
        the slice at the new time with residual sup-norm ≤ cfg.newton_tol
    StepLog
        the convergence history (only if `return_log`)

    Raises
    ------
    NonConvergenceError
        if neither Newton nor (if enabled) Picard iterations reach the tolerance
    """
    grid = u_old.grid
    t_new = u_old.t + dt
    identity = sparse.identity(grid.node_count, format="csr")
    u = bc.apply(u_old.values, grid, t_new)
    res = _residual_values(u, u_old, dt, md)
    history = [_sup(res)]
    newton_iters = picard_iters = failures = 0
    while history[-1] > cfg.newton_tol and newton_iters < cfg.newton_max_iter:
        if cfg.picard_fallback and failures >= cfg.newton_max_iter // 2:
            break
        newton_iters += 1
        # boundary rows of the Jacobian are those of the identity
        jac = identity - dt * flux_jacobian(u_old.evolve(u), md)
        step = spla.spsolve(jac.tocsc(), -res.ravel()).reshape(grid.shape)
        length, best = 1.0, None
        while length >= MIN_STEP_LENGTH:
            try:
                trial = u + length * step
                trial_res = _residual_values(trial, u_old, dt, md)
            except (OutOfTableError, ValueError):
                length *= cfg.damping
                continue
            trial_sup = _sup(trial_res)
            if trial_sup <= (1.0 - SUFFICIENT_DECREASE * length) * history[-1]:
                best = (trial, trial_res)
                break
            if trial_sup < history[-1] and best is None:
                best = (trial, trial_res)
            length *= cfg.damping
        if length < MIN_STEP_LENGTH:
            failures += 1
            logger.debug(
                f"t={t_new:.6g}: Newton iteration {newton_iters} found no sufficient "
                f"decrease ({failures} failures)"
            )
            if best is None:
                break
        elif length < 1.0:
            logger.debug(f"t={t_new:.6g}: Newton step damped to {length:g}")
        u, res = best
        history.append(_sup(res))
        logger.debug(
            f"t={t_new:.6g}: Newton {newton_iters}, residual {history[-1]:.3g}"
        )
    if history[-1] > cfg.newton_tol and cfg.picard_fallback:
        logger.debug(f"t={t_new:.6g}: falling back to frozen-coefficient iterations")
        interior = grid.interior_mask().ravel()
        rhs = np.where(interior, u_old.values.ravel(), bc.values(grid, t_new).ravel())
        while history[-1] > cfg.newton_tol and picard_iters < cfg.picard_max_iter:
            picard_iters += 1
            op = identity - dt * frozen_operator(u_old.evolve(u), md)
            u = spla.spsolve(op.tocsc(), rhs).reshape(grid.shape)
            try:
                res = _residual_values(u, u_old, dt, md)
            except (OutOfTableError, ValueError) as e:
                raise NonConvergenceError(
                    f"frozen-coefficient iteration {picard_iters} of the step to "
                    f"t={t_new:.6g} left the density table: {e}",
                    residuals=history,
                ) from e
            history.append(_sup(res))
    if history[-1] > cfg.newton_tol:
        raise NonConvergenceError(
            f"step to t={t_new:.6g} stalled at residual {history[-1]:.3g} after "
            f"{newton_iters} Newton and {picard_iters} Picard iterations "
            f"(tolerance {cfg.newton_tol:g})",
            residuals=history,
        )
    field = ScalarField(grid=grid, values=u, t=t_new)
    if return_log:
        return field, StepLog(
            t=t_new,
            newton_iters=newton_iters,
            picard_iters=picard_iters,
            residuals=tuple(history),
        )
    return field


@attrs.define(kw_only=True, frozen=True, eq=False)
class RunResult:
    """The trajectory of a backward-Euler run

    Parameters
    ----------
    run_id : str
        name of the run
    grid : Grid
        the spatial grid
    model : EnergyModel
        the density parameters the run was computed with
    config : SolverConfig
        the stepping settings
    snapshots : tuple[ScalarField, ...]
        kept slices, the initial one first, time stamps strictly increasing
    times : np.ndarray
        time of every step, starting at 0
    energy : np.ndarray
        ∫E^ε(∇u) dx at every step
    sup_u : np.ndarray
        sup |u| at every step
    sup_V : np.ndarray
        sup V_ε = sup √(ε² + |∇u|²) at every step
    newton_iters : np.ndarray
        Newton iterations of every step (0 for the initial slice)
    residuals : np.ndarray
        final residual sup-norm of every step (0 for the initial slice)
    data_sup : float
        ‖u_*‖_∞ over the parabolic boundary
    static : bool
        whether the lateral data was independent of time
    """

    run_id: str
    grid: Grid
    model: EnergyModel
    config: SolverConfig
    snapshots: ty.Tuple[ScalarField, ...] = attrs.field(converter=tuple)
    times: np.ndarray = attrs.field(converter=np.asarray)
    energy: np.ndarray = attrs.field(converter=np.asarray)
    sup_u: np.ndarray = attrs.field(converter=np.asarray)
    sup_V: np.ndarray = attrs.field(converter=np.asarray)
    newton_iters: np.ndarray = attrs.field(converter=np.asarray)
    residuals: np.ndarray = attrs.field(converter=np.asarray)
    data_sup: float = attrs.field(converter=float)
    static: bool = True

    @snapshots.validator
    def _check_snapshots(self, attribute, value):
        stamps = [s.t for s in value]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise ValueError(f"snapshot times must increase strictly (got {stamps})")

    @property
    def eps(self) -> float:
        return self.config.eps

    @property
    def snapshot_times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def final(self) -> ScalarField:
        return self.snapshots[-1]

    def gradients(self) -> ty.List[np.ndarray]:
        "Node-centred gradients of every snapshot"
        return [gradient_field(s) for s in self.snapshots]

    def series(self) -> ty.Dict[str, np.ndarray]:
        return {
            "t": self.times,
            "energy": self.energy,
            "sup_u": self.sup_u,
            "sup_V": self.sup_V,
            "newton_iters": self.newton_iters,
        }

    def with_snapshots(self, snapshots: ty.Sequence[ScalarField]) -> RunResult:
        return attrs.evolve(self, snapshots=snapshots)


def table_radius(initial: ScalarField, bc: BoundaryData, t_end: float = 0.0) -> float:
    """A radius for the density table that covers the reconstructed gradients of the
    initial slice and of the boundary data, with a factor 2 of headroom"""
    grid = initial.grid
    slices = [initial.values, bc.values(grid, 0.0)]
    if bc.kind == "tabulated":
        slices.extend(bc.values(grid, t) for t in bc.times if t <= t_end)
    largest = max(
        float(np.abs(np.diff(s, axis=k)).max() / grid.spacing[k])
        for s in slices
        for k in range(grid.dim)
    )
    return max(2.0, 2.0 * np.sqrt(grid.dim) * largest + 1.0)


def run_simulation(
    cfg: SolverConfig,
    model: EnergyModel,
    bc: BoundaryData,
    initial: ScalarField,
    md: ty.Optional[MollifiedDensity] = None,
    run_id: str = "run",
) -> RunResult:
    """Marches backward-Euler steps from `initial` to cfg.t_end

    Parameters
    ----------
    cfg : SolverConfig
        stepping settings
    model : EnergyModel
        the density parameters
    bc : BoundaryData
        Dirichlet data on the lateral boundary
    initial : ScalarField
        the slice at t = 0, agreeing with `bc` on the spatial boundary
    md : MollifiedDensity, optional
        a precomputed density table for cfg.eps (tabulated on demand otherwise)
    run_id : str
        name of the run

    Returns
    -------
    RunResult
        the trajectory

    Raises
    ------
    IncompatibleDataError
        if the initial slice disagrees with the boundary data at t = 0
    NonConvergenceError
        if a step fails to converge
    """
    grid = initial.grid
    mask = grid.boundary_mask()
    expected = bc.values(grid, 0.0)[mask]
    mismatch = _sup(initial.values[mask] - expected)
    if mismatch > 1e-9 * (1.0 + _sup(expected)):
        raise IncompatibleDataError(
            f"initial data differs from the boundary data on ∂Ω by {mismatch:.3g}"
        )
    if md is None:
        md = mollify_density(
            model, cfg.eps, QuadSpec(r_max=table_radius(initial, bc, cfg.t_end))
        )
    logger.info(
        f"run '{run_id}': {cfg.steps} steps of dt={cfg.dt:g} on a {grid.shape} grid, "
        f"eps={cfg.eps:g}"
    )
    u = ScalarField(grid=grid, values=bc.apply(initial.values, grid, 0.0), t=0.0)
    snapshots = [u]
    times, iters, residuals = [0.0], [0], [0.0]
    energy = [discrete_energy(u, md)]
    sup_u = [u.sup_norm]
    sup_V = [_sup_V(u, cfg.eps)]
    for k in range(1, cfg.steps + 1):
        t_new = min(k * cfg.dt, cfg.t_end)
        u, log = solve_timestep(u, t_new - u.t, md, bc, cfg, return_log=True)
        times.append(t_new)
        iters.append(log.newton_iters)
        residuals.append(log.final_residual)
        energy.append(discrete_energy(u, md))
        sup_u.append(u.sup_norm)
        sup_V.append(_sup_V(u, cfg.eps))
        if k % cfg.snapshot_every == 0 or k == cfg.steps:
            snapshots.append(u)
    logger.info(
        f"run '{run_id}' reached t={times[-1]:g}, final energy {energy[-1]:.6g}"
    )
    return RunResult(
        run_id=run_id,
        grid=grid,
        model=model,
        config=cfg,
        snapshots=snapshots,
        times=times,
        energy=energy,
        sup_u=sup_u,
        sup_V=sup_V,
        newton_iters=iters,
        residuals=residuals,
        data_sup=max(initial.sup_norm, bc.lateral_sup(grid, cfg.t_end)),
        static=bc.static,
    )


def _sup_V(u: ScalarField, eps: float) -> float:
    grad = gradient_field(u)
    return float(np.sqrt(eps**2 + np.sum(grad * grad, axis=-1)).max())
