import numpy as np
import pytest
from facetflow.solver import Grid
from facetflow.lab import facet_fraction, vw_compatibility, euler_identity_residual

GRID = Grid(dim=1, cells=20)
TIMES = np.linspace(0.0, 0.1, 6)


def _sine(amplitude):
    def fn(x, t):
        return amplitude * np.exp(-t) * np.sin(np.pi * x[..., 0])

    return fn


def test_facet_fraction_extremes(synthetic_run):
    constant = synthetic_run(lambda x, t: np.full(x.shape[:-1], 0.3), GRID, TIMES)
    assert np.all(facet_fraction(constant, 0.5) == 1.0)
    affine = synthetic_run(lambda x, t: x[..., 0], GRID, TIMES)
    assert np.all(facet_fraction(affine, 0.5) == 0.0)


def test_facet_fraction_of_sine(synthetic_run):
    run = synthetic_run(_sine(1.0), GRID, TIMES, eps=0.01)
    fractions = facet_fraction(run, 0.5)
    assert fractions.shape == (TIMES.size,)
    assert np.all((fractions > 0.0) & (fractions < 1.0))


def test_vw_compatibility(synthetic_run):
    run = synthetic_run(_sine(2.0), GRID, TIMES, eps=0.05, p=1.3)
    report = vw_compatibility(run)
    assert report.passed, report.to_dict()
    assert set(report.margins) == {"lower", "upper", "facet"}
    assert report.located == {}


@pytest.mark.parametrize("eps", [0.2, 0.05])
def test_euler_identity(synthetic_run, eps):
    run = synthetic_run(_sine(0.5), GRID, TIMES, eps=eps, p=1.3)
    report = euler_identity_residual(run)
    assert report.passed, report.to_dict()
    assert report.margins["bound"] >= 0.0
