from __future__ import annotations
import typing as ty
import attrs
import numpy as np
from facetflow.exceptions import ConfigError, GridMismatchError

DEFAULT_MAX_NODES = 2_000_000


def _int_tuple(value) -> ty.Tuple[int, ...]:
    if isinstance(value, (int, np.integer)):
        return (int(value),)
    return tuple(int(v) for v in value)


def _float_tuple(value) -> ty.Tuple[float, ...]:
    if isinstance(value, (int, float, np.number)):
        return (float(value),)
    return tuple(float(v) for v in value)


@attrs.define(kw_only=True, frozen=True)
class Grid:
    """A uniform rectangular grid on the box Π_d [0, extent_d]

    Parameters
    ----------
    dim : int
        spatial dimension, 1 to 3
    cells : tuple[int, ...]
        number of cells along each axis (a single value is repeated over the axes)
    extent : tuple[float, ...]
        side lengths of the box (a single value is repeated over the axes)
    max_nodes : int
        cap on the total number of nodes
    """

    dim: int = attrs.field(converter=int)
    cells: ty.Tuple[int, ...] = attrs.field(converter=_int_tuple)
    extent: ty.Tuple[float, ...] = attrs.field(default=(1.0,), converter=_float_tuple)
    max_nodes: int = attrs.field(default=DEFAULT_MAX_NODES, converter=int)

    def __attrs_post_init__(self):
        if not 1 <= self.dim <= 3:
            raise ConfigError(f"dim must be 1, 2 or 3 (got {self.dim})", "grid", "dim")
        for name in ("cells", "extent"):
            value = getattr(self, name)
            if len(value) == 1 and self.dim > 1:
                object.__setattr__(self, name, value * self.dim)
            elif len(value) != self.dim:
                raise ConfigError(
                    f"expected 1 or {self.dim} values (got {len(value)})", "grid", name
                )
        if min(self.cells) < 2:
            raise ConfigError(
                f"at least two cells per axis are required (got {self.cells})",
                "grid",
                "cells",
            )
        if min(self.extent) <= 0:
            raise ConfigError(
                f"extents must be positive (got {self.extent})", "grid", "extent"
            )
        if self.node_count > self.max_nodes:
            raise ConfigError(
                f"{self.node_count} nodes exceed the cap of {self.max_nodes}",
                "grid",
                "cells",
            )

    @property
    def shape(self) -> ty.Tuple[int, ...]:
        "Number of nodes along each axis"
        return tuple(c + 1 for c in self.cells)

    @property
    def cell_shape(self) -> ty.Tuple[int, ...]:
        return self.cells

    @property
    def spacing(self) -> np.ndarray:
        return np.asarray(self.extent) / np.asarray(self.cells)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def axes(self) -> ty.List[np.ndarray]:
        return [np.linspace(0.0, L, n) for L, n in zip(self.extent, self.shape)]

    def coords(self) -> np.ndarray:
        """Node coordinates, shape (*shape, dim)"""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.dim):
            index = [slice(None)] * self.dim
            for end in (0, -1):
                index[axis] = end
                mask[tuple(index)] = True
        return mask

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()

    def check_same(self, other: Grid):
        if self != other:
            raise GridMismatchError(f"grids differ: {self} vs {other}")


@attrs.define(kw_only=True, frozen=True, eq=False)
class ScalarField:
    """Nodal values of a scalar function at time t

    Parameters
    ----------
    grid : Grid
        the grid the values live on
    values : np.ndarray
        one finite value per node, shape grid.shape
    t : float
        time stamp
    """

    grid: Grid
    values: np.ndarray = attrs.field(converter=lambda v: np.array(v, dtype=float))
    t: float = attrs.field(default=0.0, converter=float)

    def __attrs_post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(
                f"values of shape {self.values.shape} do not match the grid nodes "
                f"{self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"field at t={self.t} holds non-finite values")
        self.values.flags.writeable = False

    def evolve(self, values: np.ndarray, t: ty.Optional[float] = None) -> ScalarField:
        return ScalarField(grid=self.grid, values=values, t=self.t if t is None else t)

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())


def gradient_field(u: ScalarField) -> np.ndarray:
    """Node-centred gradient of `u`: central differences in the interior and
    second-order one-sided differences on the boundary

    Returns
    -------
    np.ndarray
        shape (*grid.shape, dim)
    """
    grid = u.grid
    if grid.dim == 1:
        parts = [np.gradient(u.values, grid.spacing[0], edge_order=2)]
    else:
        parts = np.gradient(u.values, *grid.spacing, edge_order=2)
    return np.stack(parts, axis=-1)
