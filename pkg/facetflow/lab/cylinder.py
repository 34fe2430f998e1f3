from __future__ import annotations
import typing as ty
import attrs
import numpy as np
from scipy import special
from facetflow.exceptions import GeometryError, HypothesisError
from facetflow.solver import Grid, RunResult

TIME_SLACK = 1e-12


def _float_tuple(value) -> ty.Tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(value))


@attrs.define(kw_only=True, frozen=True)
class ParabolicCylinder:
    """The cylinder Q_R(x₀, t₀) = B_R(x₀) × (t₀ − R², t₀]

    Parameters
    ----------
    center : tuple[float, ...]
        spatial centre x₀
    t0 : float
        top time t₀
    R : float
        radius
    """

    center: ty.Tuple[float, ...] = attrs.field(converter=_float_tuple)
    t0: float = attrs.field(converter=float)
    R: float = attrs.field(converter=float)

    @R.validator
    def _check_R(self, attribute, value):
        if not value > 0:
            raise GeometryError(f"cylinder radius must be positive (got {value})")

    @classmethod
    def from_sequence(cls, values: ty.Sequence[float], dim: int) -> ParabolicCylinder:
        "Builds a cylinder from `cx[,cy[,cz]],ct,R`"
        values = [float(v) for v in values]
        if len(values) != dim + 2:
            raise GeometryError(
                f"a {dim}-dimensional cylinder takes {dim + 2} values "
                f"(centre, time, radius), got {len(values)}"
            )
        return cls(center=values[:dim], t0=values[dim], R=values[dim + 1])

    @classmethod
    def default(
        cls, grid: Grid, t_end: float, fraction: float = 0.25
    ) -> ParabolicCylinder:
        """The cylinder centred in the box at the final time whose radius is
        `fraction` of the shortest side (or √t_end if that is smaller)"""
        R = min(fraction * min(grid.extent), np.sqrt(t_end))
        return cls(center=[e / 2.0 for e in grid.extent], t0=t_end, R=R)

    def half(self) -> ParabolicCylinder:
        return attrs.evolve(self, R=self.R / 2.0)

    def measure(self) -> float:
        "|Q_R| = |B_R| R²"
        n = len(self.center)
        ball = np.pi ** (n / 2.0) / float(special.gamma(n / 2.0 + 1.0)) * self.R**n
        return float(ball * self.R**2)

    def require_unit_radius(self):
        if not self.R < 1.0:
            raise HypothesisError(f"the estimate needs R < 1 (got R = {self.R})")

    def check_inside(self, grid: Grid, t_end: float):
        """Raises GeometryError unless the cylinder lies in [0, extent] × [0, t_end]"""
        if len(self.center) != grid.dim:
            raise GeometryError(
                f"cylinder centre {self.center} does not match the grid dimension "
                f"{grid.dim}"
            )
        c = np.asarray(self.center)
        if np.any(c - self.R < -TIME_SLACK) or np.any(
            c + self.R > np.asarray(grid.extent) + TIME_SLACK
        ):
            raise GeometryError(
                f"ball of radius {self.R} about {self.center} leaves the domain "
                f"{grid.extent}"
            )
        if self.t0 - self.R**2 < -TIME_SLACK or self.t0 > t_end + TIME_SLACK:
            raise GeometryError(
                f"time interval ({self.t0 - self.R**2:g}, {self.t0:g}] leaves "
                f"[0, {t_end:g}]"
            )

    def spatial_mask(self, grid: Grid) -> np.ndarray:
        distance = np.linalg.norm(grid.coords() - np.asarray(self.center), axis=-1)
        return distance <= self.R * (1.0 + TIME_SLACK)

    def time_mask(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times)
        return (times > self.t0 - self.R**2 + TIME_SLACK) & (
            times <= self.t0 + TIME_SLACK
        )

    def restrict(self, run: RunResult) -> CylinderSample:
        """The nodes and snapshots of `run` inside the cylinder

        Raises
        ------
        GeometryError
            if the cylinder leaves the run domain or holds no node or snapshot
        """
        self.check_inside(run.grid, run.times[-1])
        space = self.spatial_mask(run.grid)
        when = np.flatnonzero(self.time_mask(run.snapshot_times))
        if not space.any() or when.size == 0:
            raise GeometryError(
                f"cylinder {self} holds {int(space.sum())} nodes and {when.size} "
                "snapshots of the run; refine the grid or keep more snapshots"
            )
        grads = run.gradients()
        coords = run.grid.coords()[space]
        return CylinderSample(
            cylinder=self,
            times=run.snapshot_times[when],
            coords=coords,
            u=np.stack([run.snapshots[k].values[space] for k in when]),
            grad=np.stack([grads[k][space] for k in when]),
            eps=run.eps,
        )


@attrs.define(kw_only=True, frozen=True, eq=False)
class CylinderSample:
    """Values of a run inside a cylinder, arrays indexed by (snapshot, node)"""

    cylinder: ParabolicCylinder
    times: np.ndarray
    coords: np.ndarray
    u: np.ndarray
    grad: np.ndarray
    eps: float

    @property
    def V(self) -> np.ndarray:
        return np.sqrt(self.eps**2 + np.sum(self.grad * self.grad, axis=-1))
