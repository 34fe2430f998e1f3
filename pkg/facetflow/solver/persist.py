"""
Reading and writing runs: manifest.json, series.csv and snapshot_<k>.csv
"""
from __future__ import annotations
import typing as ty
import json
import logging
from pathlib import Path
import attrs
import numpy as np
from facetflow.exceptions import ConfigError
from facetflow.energy.model import EnergyModel
from .grid import Grid, ScalarField
from .stepping import RunResult, SolverConfig

logger = logging.getLogger("facetflow")

MANIFEST = "manifest.json"
SERIES = "series.csv"
SERIES_COLUMNS = ("t", "energy", "sup_u", "sup_V", "newton_iters")
COORD_NAMES = ("x", "y", "z")


def snapshot_name(index: int) -> str:
    return f"snapshot_{index}.csv"


def write_snapshot(field: ScalarField, path: Path):
    "Writes one row `x[,y[,z]],u` per node, in C order of the node array"
    grid = field.grid
    rows = np.column_stack(
        [grid.coords().reshape(-1, grid.dim), field.values.reshape(-1)]
    )
    header = ",".join(COORD_NAMES[: grid.dim] + ("u",))
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=header, comments="")


def read_snapshot(path: Path, grid: Grid, t: float) -> ScalarField:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if rows.shape != (grid.node_count, grid.dim + 1):
        raise ConfigError(
            f"snapshot {path} holds {rows.shape[0]} rows of {rows.shape[1]} columns, "
            f"expected {grid.node_count} rows of {grid.dim + 1}"
        )
    return ScalarField(grid=grid, values=rows[:, -1].reshape(grid.shape), t=t)


def write_series(run: RunResult, path: Path):
    series = run.series()
    rows = np.column_stack([series[c] for c in SERIES_COLUMNS])
    np.savetxt(
        path,
        rows,
        fmt=["%.17g"] * 4 + ["%d"],
        delimiter=",",
        header=",".join(SERIES_COLUMNS),
        comments="",
    )


def read_series(path: Path) -> ty.Dict[str, np.ndarray]:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {c: rows[:, i] for i, c in enumerate(SERIES_COLUMNS)}


def run_metadata(run: RunResult) -> ty.Dict[str, ty.Any]:
    "The parts of a run needed to reload it, in JSON-serialisable form"
    model = attrs.asdict(run.model)
    return {
        "run_id": run.run_id,
        "grid": {
            "dim": run.grid.dim,
            "cells": list(run.grid.cells),
            "extent": list(run.grid.extent),
            "max_nodes": run.grid.max_nodes,
        },
        "model": model,
        "solver": attrs.asdict(run.config),
        "data_sup": run.data_sup,
        "static": run.static,
        "snapshot_times": [float(t) for t in run.snapshot_times],
        "residuals": [float(r) for r in run.residuals],
    }


def save_run(
    run: RunResult, directory: Path, manifest: ty.Optional[ty.Dict[str, ty.Any]] = None
) -> Path:
    """Writes the run into `directory`, which is created if needed

    Parameters
    ----------
    run : RunResult
        the run to store
    directory : Path
        the run directory
    manifest : dict, optional
        extra manifest entries (configuration hash, versions, timings, outcome)

    Returns
    -------
    Path
        the manifest path
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = [SERIES]
    write_series(run, directory / SERIES)
    for index, snapshot in enumerate(run.snapshots):
        name = snapshot_name(index)
        write_snapshot(snapshot, directory / name)
        files.append(name)
    content = dict(manifest or {})
    content.update(run_metadata(run))
    content["files"] = files
    path = directory / MANIFEST
    path.write_text(json.dumps(content, indent=2, sort_keys=True) + "\n")
    logger.info(f"wrote run '{run.run_id}' ({len(files)} files) to {directory}")
    return path


def load_manifest(directory: Path) -> ty.Dict[str, ty.Any]:
    directory = Path(directory)
    path = directory / MANIFEST
    if not path.exists():
        raise ConfigError(f"no run found at {directory} (missing {MANIFEST})")
    return json.loads(path.read_text())


def load_run(directory: Path) -> RunResult:
    """Reloads a run written by `save_run`

    Raises
    ------
    ConfigError
        if the directory does not hold a run
    """
    directory = Path(directory)
    manifest = load_manifest(directory)
    grid = Grid(**manifest["grid"])
    model = manifest["model"]
    if model.get("anisotropy") is not None:
        model["anisotropy"] = tuple(tuple(row) for row in model["anisotropy"])
    series = read_series(directory / SERIES)
    snapshots = [
        read_snapshot(directory / snapshot_name(i), grid, t)
        for i, t in enumerate(manifest["snapshot_times"])
    ]
    return RunResult(
        run_id=manifest["run_id"],
        grid=grid,
        model=EnergyModel(**model),
        config=SolverConfig(**manifest["solver"]),
        snapshots=snapshots,
        times=series["t"],
        energy=series["energy"],
        sup_u=series["sup_u"],
        sup_V=series["sup_V"],
        newton_iters=series["newton_iters"].astype(int),
        residuals=manifest["residuals"],
        data_sup=manifest["data_sup"],
        static=manifest["static"],
    )
