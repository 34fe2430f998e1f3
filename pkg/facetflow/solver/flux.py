"""
Face-gradient discretisation of div(∇E^ε(∇u)) on uniform grids

Every cell carries 2^dim reconstructions of the gradient, one per corner, each
built from the cell edges that meet at that corner. The discrete energy is the
cell volume times the mean of E^ε over these reconstructions, and the discrete
divergence is minus its gradient divided by the nodal volume, so that implicit
steps are minimisation steps of a convex functional.
"""
from __future__ import annotations
import typing as ty
import itertools
from functools import lru_cache
import attrs
import numpy as np
from scipy import sparse
from facetflow.exceptions import GridMismatchError
from facetflow.energy.mollify import MollifiedDensity
from .grid import Grid, ScalarField


@attrs.define(frozen=True, eq=False)
class Stencil:
    """Sparse difference operators of a grid

    Parameters
    ----------
    grid : Grid
        the grid the operators act on
    diff : list[sparse.csr_matrix]
        edge difference (u[i+1] − u[i])/h_k along each axis, edges × nodes
    corners : list[tuple[int, ...]]
        the 2^dim corners of a cell
    select : dict[tuple, list[np.ndarray]]
        for each corner and axis the flat index of the edge used by every cell
    weight : list[np.ndarray]
        1 / (number of (cell, corner) reconstructions using each edge)
    """

    grid: Grid
    diff: ty.List[sparse.csr_matrix]
    corners: ty.List[ty.Tuple[int, ...]]
    select: ty.Dict[ty.Tuple[int, ...], ty.List[np.ndarray]]
    weight: ty.List[np.ndarray]

    @property
    def dim(self) -> int:
        return self.grid.dim

    def edge_shape(self, axis: int) -> ty.Tuple[int, ...]:
        shape = list(self.grid.shape)
        shape[axis] -= 1
        return tuple(shape)

    def edge_differences(self, values: np.ndarray) -> ty.List[np.ndarray]:
        return [
            (np.diff(values, axis=k) / self.grid.spacing[k]).ravel()
            for k in range(self.dim)
        ]

    def corner_gradients(self, values: np.ndarray) -> ty.Dict[tuple, np.ndarray]:
        "Reconstructed gradient of every cell at every corner, shape (cells, dim)"
        diffs = self.edge_differences(values)
        return {
            c: np.stack([diffs[k][self.select[c][k]] for k in range(self.dim)], -1)
            for c in self.corners
        }

    def corner_operator(self, corner, axis) -> sparse.csr_matrix:
        "cells × nodes operator returning component `axis` of a corner gradient"
        return self.diff[axis][self.select[corner][axis]]

    def scatter(self, corner, axis) -> sparse.csr_matrix:
        "edges × cells operator averaging cell quantities onto the edges along `axis`"
        index = self.select[corner][axis]
        n_edges = self.weight[axis].size
        return sparse.csr_matrix(
            (self.weight[axis][index], (index, np.arange(index.size))),
            shape=(n_edges, index.size),
        )


@lru_cache(maxsize=8)
def stencil(grid: Grid) -> Stencil:
    dim, shape = grid.dim, grid.shape
    n_nodes = grid.node_count
    diff, edge_shapes = [], []
    for k in range(dim):
        edge_shape = list(shape)
        edge_shape[k] -= 1
        edge_shapes.append(tuple(edge_shape))
        idx = np.indices(edge_shape).reshape(dim, -1)
        lo = np.ravel_multi_index(idx, shape)
        idx[k] += 1
        hi = np.ravel_multi_index(idx, shape)
        rows = np.arange(lo.size)
        h = grid.spacing[k]
        weights = np.full(lo.size, 1.0 / h)
        diff.append(
            sparse.csr_matrix(
                (
                    np.concatenate([-weights, weights]),
                    (np.concatenate([rows, rows]), np.concatenate([lo, hi])),
                ),
                shape=(lo.size, n_nodes),
            )
        )
    cells = np.indices(grid.cell_shape).reshape(dim, -1)
    corners = list(itertools.product((0, 1), repeat=dim))
    select = {}
    for c in corners:
        per_axis = []
        for k in range(dim):
            idx = cells.copy()
            for e in range(dim):
                if e != k:
                    idx[e] += c[e]
            per_axis.append(np.ravel_multi_index(idx, edge_shapes[k]))
        select[c] = per_axis
    weight = []
    for k in range(dim):
        counts = np.bincount(
            np.concatenate([select[c][k] for c in corners]),
            minlength=int(np.prod(edge_shapes[k])),
        )
        weight.append(1.0 / counts)
    return Stencil(grid, diff, corners, select, weight)


def _check_density(grid: Grid, md: MollifiedDensity):
    if md.n != grid.dim:
        raise GridMismatchError(
            f"density of dimension {md.n} applied on a {grid.dim}-dimensional grid"
        )


def face_flux(u: ScalarField, md: MollifiedDensity) -> ty.List[np.ndarray]:
    """∇E^ε of the reconstructed gradients, averaged onto the cell edges

    Parameters
    ----------
    u : ScalarField
        the field whose flux is computed
    md : MollifiedDensity
        the density, of the same dimension as the grid

    Returns
    -------
    list[np.ndarray]
        one array per axis k of shape (*edge_shape_k, dim) holding the flux vector on
        the edges along k; component k is the normal flux through the dual face

    Raises
    ------
    OutOfTableError
        if a reconstructed gradient leaves the density table
    """
    grid = u.grid
    _check_density(grid, md)
    st = stencil(grid)
    grads = st.corner_gradients(u.values)
    fluxes = {c: md.gradient(g) for c, g in grads.items()}
    return [
        sum(st.scatter(c, k) @ fluxes[c] for c in st.corners).reshape(
            st.edge_shape(k) + (grid.dim,)
        )
        for k in range(grid.dim)
    ]


def divergence(grid: Grid, fluxes: ty.Sequence[np.ndarray]) -> np.ndarray:
    """Discrete divergence Σ_k (F_k[i+½] − F_k[i−½])/h_k of the normal edge fluxes,
    zero on boundary nodes"""
    st = stencil(grid)
    total = np.zeros(grid.node_count)
    for k, flux in enumerate(fluxes):
        total -= st.diff[k].T @ flux[..., k].ravel()
    total = total.reshape(grid.shape)
    total[grid.boundary_mask()] = 0.0
    return total


def discrete_energy(u: ScalarField, md: MollifiedDensity) -> float:
    "∫E^ε(∇u) dx as the cell volume times the mean of E^ε over the reconstructions"
    grid = u.grid
    _check_density(grid, md)
    st = stencil(grid)
    grads = st.corner_gradients(u.values)
    total = sum(float(np.sum(md.value(g))) for g in grads.values())
    return grid.cell_volume * total / len(st.corners)


def flux_jacobian(u: ScalarField, md: MollifiedDensity) -> sparse.csr_matrix:
    """Derivative of the nodal divergence with respect to the nodal values, built
    from ∇²E^ε at the reconstructed gradients (interior rows only)"""
    grid = u.grid
    st = stencil(grid)
    grads = st.corner_gradients(u.values)
    hessians = {c: md.hessian(g) for c, g in grads.items()}
    jac = sparse.csr_matrix((grid.node_count, grid.node_count))
    for d in range(grid.dim):
        normal = sparse.csr_matrix((st.weight[d].size, grid.node_count))
        for c in st.corners:
            inner = sum(
                sparse.diags(hessians[c][:, d, k]) @ st.corner_operator(c, k)
                for k in range(grid.dim)
            )
            normal = normal + st.scatter(c, d) @ inner
        jac = jac - st.diff[d].T @ normal
    return _interior_rows(grid) @ jac


def frozen_operator(u: ScalarField, md: MollifiedDensity) -> sparse.csr_matrix:
    """Linear divergence operator with the coefficients g1(|G|)/|G| frozen at the
    gradients of `u` (interior rows only)"""
    grid = u.grid
    st = stencil(grid)
    grads = st.corner_gradients(u.values)
    op = sparse.csr_matrix((grid.node_count, grid.node_count))
    for d in range(grid.dim):
        normal = sum(
            st.scatter(c, d)
            @ sparse.diags(md.total.ratio(np.linalg.norm(grads[c], axis=-1)))
            @ st.corner_operator(c, d)
            for c in st.corners
        )
        op = op - st.diff[d].T @ normal
    return _interior_rows(grid) @ op


def _interior_rows(grid: Grid) -> sparse.csr_matrix:
    return sparse.diags(grid.interior_mask().ravel().astype(float)).tocsr()
