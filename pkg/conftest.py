from __future__ import annotations
import os
import logging
import tempfile
from pathlib import Path
import numpy as np
import pytest
from click.testing import CliRunner
from facetflow.energy import EnergyModel
from facetflow.solver import Grid, ScalarField, SolverConfig, RunResult

# Set DEBUG logging for unittests if required
log_level = logging.WARNING

logger = logging.getLogger("facetflow")
logger.setLevel(log_level)

sch = logging.StreamHandler()
sch.setLevel(log_level)
formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
sch.setFormatter(formatter)
logger.addHandler(sch)


############
# FIXTURES #
############


@pytest.fixture
def cli_runner(catch_cli_exceptions):
    def invoke(*args, catch_exceptions=catch_cli_exceptions, **kwargs):
        runner = CliRunner()
        result = runner.invoke(*args, catch_exceptions=catch_exceptions, **kwargs)
        return result

    return invoke


@pytest.fixture
def work_dir() -> Path:
    work_dir = tempfile.mkdtemp()
    return Path(work_dir)


@pytest.fixture
def synthetic_run():
    """Builds a RunResult from a closed-form field u(x, t) without solving"""

    def make(fn, grid: Grid, times, eps=0.1, p=1.5, run_id="synthetic"):
        times = np.asarray(times, dtype=float)
        snapshots = [
            ScalarField(grid=grid, values=fn(grid.coords(), t), t=t) for t in times
        ]
        zeros = np.zeros(times.size)
        return RunResult(
            run_id=run_id,
            grid=grid,
            model=EnergyModel(n=grid.dim, p=p),
            config=SolverConfig(dt=times[1] - times[0], t_end=times[-1], eps=eps),
            snapshots=snapshots,
            times=times,
            energy=zeros,
            sup_u=[s.sup_norm for s in snapshots],
            sup_V=zeros,
            newton_iters=np.zeros(times.size, dtype=int),
            residuals=zeros,
            data_sup=max(s.sup_norm for s in snapshots),
        )

    return make


# For debugging in IDE's don't catch raised exceptions and let the IDE
# break at it
if os.getenv("_PYTEST_RAISE", "0") != "0":

    @pytest.hookimpl(tryfirst=True)
    def pytest_exception_interact(call):
        raise call.excinfo.value

    @pytest.hookimpl(tryfirst=True)
    def pytest_internalerror(excinfo):
        raise excinfo.value

    CATCH_CLI_EXCEPTIONS = False
else:
    CATCH_CLI_EXCEPTIONS = True


@pytest.fixture
def catch_cli_exceptions():
    return CATCH_CLI_EXCEPTIONS
