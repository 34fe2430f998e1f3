import numpy as np
import pytest
from facetflow.energy import EnergyModel
from facetflow.exceptions import GeometryError, HypothesisError
from facetflow.solver import (
    Grid,
    BoundaryData,
    SolverConfig,
    initial_field,
    run_simulation,
)
from facetflow.lab import (
    DiagnosticsReport,
    ParabolicCylinder,
    sup_estimate_ratio,
    reversed_holder_ratio,
    sup_vq_ratio,
    constant_stability,
    has_fitted_constant,
)

MODEL = EnergyModel(n=1, p=1.3)
EPS = 0.1
Q = ParabolicCylinder(center=[0.5], t0=0.1, R=0.26)


def _constant_run(cells, value=0.7):
    grid = Grid(dim=1, cells=cells)
    bc = BoundaryData(value=value)
    cfg = SolverConfig(dt=0.01, t_end=0.1, eps=EPS)
    return run_simulation(cfg, MODEL, bc, initial_field(grid, bc), run_id=f"c{cells}")


@pytest.fixture(scope="module")
def constant_run():
    return _constant_run(20)


def test_sup_estimate_closed_form(constant_run):
    report = sup_estimate_ratio(constant_run, Q, s=2.0)
    s_c = 7.0 / 13.0
    expected = 0.7 / (Q.R ** (-s_c) * 1.7**2) ** (1.0 / (2.0 - s_c))
    assert report.status == "inconclusive"
    assert report.params["judged_by"] == "constant_stability"
    assert has_fitted_constant(report)
    assert report.fitted["C"] == pytest.approx(expected, rel=1e-12)
    assert report.params["s_c"] == pytest.approx(s_c)


def test_sup_estimate_hypotheses(constant_run):
    with pytest.raises(HypothesisError):
        sup_estimate_ratio(constant_run, Q, s=0.5)
    with pytest.raises(GeometryError):
        sup_estimate_ratio(
            constant_run, ParabolicCylinder(center=[0.1], t0=0.1, R=0.2), s=2.0
        )
    grid = Grid(dim=1, cells=6, extent=3.0)
    bc = BoundaryData(value=0.7)
    wide = run_simulation(
        SolverConfig(dt=0.5, t_end=1.0, eps=EPS), MODEL, bc, initial_field(grid, bc)
    )
    with pytest.raises(HypothesisError, match="R < 1"):
        sup_estimate_ratio(wide, ParabolicCylinder(center=[1.5], t0=1.0, R=1.0), s=2.0)


def test_reversed_holder_closed_form(constant_run):
    report = reversed_holder_ratio(constant_run, 2.0, Q)
    expected = EPS**2 / (EPS**1.3 + 1.0) * 2.0**-3
    assert report.fitted["C"] == pytest.approx(expected, rel=1e-12)
    with pytest.raises(HypothesisError):
        reversed_holder_ratio(constant_run, 1.2, Q)


def test_sup_vq_closed_form(constant_run):
    report = sup_vq_ratio(constant_run, 2.0, Q)
    expected = EPS / ((1.0 + EPS) ** 2) ** (1.0 / (2.0 - 0.35))
    assert report.fitted["C"] == pytest.approx(expected, rel=1e-12)
    assert report.params["q_c"] == pytest.approx(0.35)


@pytest.mark.parametrize("q", [0.3, 1.5])
def test_sup_vq_hypotheses(constant_run, q):
    with pytest.raises(HypothesisError):
        sup_vq_ratio(constant_run, q, Q)


def test_constants_are_stable_under_refinement(constant_run):
    fine = _constant_run(40)
    reports = [sup_estimate_ratio(r, Q, s=2.0) for r in (constant_run, fine)]
    report = constant_stability(reports)
    assert report.passed
    assert report.check == "constant_stability:sup_estimate"
    assert report.run_ids == ("c20", "c40")


def test_constant_stability_factor():
    def fitted(C):
        return DiagnosticsReport(check="sup_vq", fitted={"C": C})

    assert constant_stability([fitted(1.0), fitted(1.9)]).passed
    assert not constant_stability([fitted(1.0), fitted(2.1)]).passed
    assert constant_stability([fitted(1.0), fitted(2.1)], factor=3.0).passed
    assert not constant_stability([fitted(1.0), fitted(np.inf)]).passed
    assert not constant_stability([fitted(1.0), DiagnosticsReport(check="x")]).passed
    assert not constant_stability([]).passed


def test_unusable_constant_fails(constant_run):
    zero = DiagnosticsReport(check="sup_vq", status="fail", fitted={"C": np.nan})
    assert not has_fitted_constant(zero)
    assert not has_fitted_constant(DiagnosticsReport(check="sup_vq"))
    report = sup_vq_ratio(constant_run, 2.0, Q)
    assert report.status == "inconclusive"
    assert has_fitted_constant(report)
