"""
Parabolic-boundary data and the initial slices compatible with it
"""
from __future__ import annotations
import typing as ty
import attrs
import numpy as np
from facetflow.exceptions import ConfigError, GridMismatchError
from .grid import Grid, ScalarField

BOUNDARY_KINDS = ("constant", "affine", "tabulated")
INITIAL_KINDS = ("trace", "bump", "sine")


def _optional_array(value) -> ty.Optional[np.ndarray]:
    if value is None:
        return None
    array = np.array(value, dtype=float)
    array.flags.writeable = False
    return array


@attrs.define(kw_only=True, frozen=True, eq=False)
class BoundaryData:
    """Dirichlet data u_* prescribed on the parabolic boundary of Ω × (0, T)

    Parameters
    ----------
    kind : str
        "constant" (u_* ≡ value), "affine" (u_* = offset + slope·x) or "tabulated"
        (nodal samples at the given times, linearly interpolated in time)
    value : float
        the constant of the "constant" kind
    offset : float
        the offset of the "affine" kind
    slope : tuple[float, ...]
        the slope of the "affine" kind, one entry per axis
    times : np.ndarray, optional
        sample times of the "tabulated" kind, strictly increasing, starting at 0
    table : np.ndarray, optional
        nodal samples of the "tabulated" kind, shape (len(times), *grid.shape); the
        boundary nodes carry the lateral data and the first slice is the datum on
        Ω × {0} returned by `initial_slice`
    """

    kind: str = "constant"
    value: float = attrs.field(default=0.0, converter=float)
    offset: float = attrs.field(default=0.0, converter=float)
    slope: ty.Tuple[float, ...] = attrs.field(
        default=(), converter=lambda s: tuple(float(x) for x in np.atleast_1d(s))
    )
    times: ty.Optional[np.ndarray] = attrs.field(
        default=None, converter=_optional_array
    )
    table: ty.Optional[np.ndarray] = attrs.field(
        default=None, converter=_optional_array
    )

    def __attrs_post_init__(self):
        if self.kind not in BOUNDARY_KINDS:
            raise ConfigError(
                f"kind must be one of {BOUNDARY_KINDS} (got '{self.kind}')",
                "boundary",
                "kind",
            )
        if self.kind == "tabulated":
            if self.times is None or self.table is None:
                raise ConfigError("tabulated data needs times and table", "boundary")
            if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
                raise ConfigError(
                    "sample times must start at 0 and increase strictly", "boundary"
                )
            if self.table.shape[0] != self.times.size:
                raise ConfigError("one table slice per sample time is required")
            if not np.all(np.isfinite(self.table)):
                raise ConfigError("tabulated boundary data must be finite")

    @property
    def static(self) -> bool:
        "Whether the data on the lateral boundary is independent of time"
        if self.kind != "tabulated":
            return True
        lateral = self.table[:, self._lateral_mask()]
        return bool(np.all(lateral == lateral[0]))

    def _lateral_mask(self) -> np.ndarray:
        grid_shape = self.table.shape[1:]
        mask = np.zeros(grid_shape, dtype=bool)
        for axis in range(len(grid_shape)):
            index = [slice(None)] * len(grid_shape)
            for end in (0, -1):
                index[axis] = end
                mask[tuple(index)] = True
        return mask

    def values(self, grid: Grid, t: float) -> np.ndarray:
        """The data evaluated at every node of `grid` at time t; only the boundary
        nodes are prescribed"""
        if self.kind == "constant":
            return np.full(grid.shape, self.value)
        if self.kind == "affine":
            if len(self.slope) != grid.dim:
                raise GridMismatchError(
                    f"affine slope has {len(self.slope)} entries for a "
                    f"{grid.dim}-dimensional grid"
                )
            return self.offset + grid.coords() @ np.asarray(self.slope)
        if self.table.shape[1:] != grid.shape:
            raise GridMismatchError(
                f"tabulated data of shape {self.table.shape[1:]} does not match the "
                f"grid nodes {grid.shape}"
            )
        if t >= self.times[-1]:
            return self.table[-1].copy()
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        w = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return (1.0 - w) * self.table[k] + w * self.table[k + 1]

    def apply(self, values: np.ndarray, grid: Grid, t: float) -> np.ndarray:
        "A copy of `values` whose boundary nodes are overwritten by the data at t"
        mask = grid.boundary_mask()
        out = np.array(values, dtype=float)
        out[mask] = self.values(grid, t)[mask]
        return out

    def lateral_sup(self, grid: Grid, t_end: float) -> float:
        "sup of |u_*| over ∂Ω × [0, t_end]"
        mask = grid.boundary_mask()
        if self.kind == "tabulated":
            upto = self.times <= t_end
            upto[0] = True
            samples = self.table[upto][:, mask]
            if not upto.all():
                last = self.values(grid, t_end)[mask]
                samples = np.concatenate([samples, last[None]])
            return float(np.abs(samples).max())
        return float(np.abs(self.values(grid, 0.0)[mask]).max())

    def trace(self, grid: Grid) -> np.ndarray:
        """Extension of the boundary values at t = 0 into the interior by transfinite
        multilinear interpolation, exact for multilinear data"""
        data = self.values(grid, 0.0)
        if self.kind != "tabulated":
            return data
        remainder = data.copy()
        for axis, x in enumerate(grid.axes()):
            remainder = remainder - _axis_interpolant(remainder, axis, x)
        return data - remainder

    def initial_slice(self, grid: Grid) -> ScalarField:
        """The datum on Ω × {0}: the first table slice for tabulated data, the trace
        otherwise"""
        if self.kind == "tabulated":
            values = self.values(grid, 0.0)
        else:
            values = self.trace(grid)
        return ScalarField(grid=grid, values=values, t=0.0)


def _axis_interpolant(values: np.ndarray, axis: int, x: np.ndarray) -> np.ndarray:
    "Linear interpolation along `axis` between the two end slices of `values`"
    w = (x - x[0]) / (x[-1] - x[0])
    shape = [1] * values.ndim
    shape[axis] = -1
    w = w.reshape(shape)
    lo = np.take(values, [0], axis=axis)
    hi = np.take(values, [-1], axis=axis)
    return (1.0 - w) * lo + w * hi


def initial_field(
    grid: Grid,
    bc: BoundaryData,
    kind: str = "trace",
    amplitude: float = 1.0,
    mode: int = 1,
) -> ScalarField:
    """Builds an initial slice at t = 0 compatible with the boundary data

    Parameters
    ----------
    grid : Grid
        the spatial grid
    bc : BoundaryData
        the boundary data whose t = 0 trace the slice extends
    kind : str
        "trace" (the trace alone), "bump" (trace plus `amplitude` times a smooth
        bump vanishing on ∂Ω) or "sine" (trace plus `amplitude` times the product of
        sin(mode·π·x_d/L_d))
    amplitude : float
        height of the added profile
    mode : int
        frequency of the "sine" kind

    Returns
    -------
    ScalarField
        the initial slice
    """
    if kind not in INITIAL_KINDS:
        raise ConfigError(
            f"kind must be one of {INITIAL_KINDS} (got '{kind}')", "initial", "kind"
        )
    values = bc.trace(grid)
    x = grid.coords()
    L = np.asarray(grid.extent)
    if kind == "bump":
        xi = 2.0 * x / L - 1.0
        r2 = np.sum(xi * xi, axis=-1)
        inside = r2 < 1.0
        safe = np.where(inside, r2, 0.0)
        values = values + amplitude * np.where(
            inside, np.exp(1.0 - 1.0 / (1.0 - safe)), 0.0
        )
    elif kind == "sine":
        profile = np.prod(np.sin(mode * np.pi * x / L), axis=-1)
        # sin(kπ) is not exactly zero in floating point
        profile[grid.boundary_mask()] = 0.0
        values = values + amplitude * profile
    return ScalarField(grid=grid, values=values, t=0.0)
