from pathlib import Path
import numpy as np
import pytest
import facetflow
from facetflow.config import parse_config, parse_config_text
from facetflow.lab import check_max_principle, run_sweep
from facetflow.orchestrate import AnalysisParams, analyze_run, analyze_sweep, cmd_solve
from facetflow.solver import load_run, table_radius

SCENARIOS = Path(facetflow.__file__).parent / "scenarios"


@pytest.mark.slow
@pytest.mark.parametrize("scenario", ["bingham_pipe", "bingham_cavity"])
def test_shipped_scenario(scenario, work_dir):
    config = parse_config(SCENARIOS / f"{scenario}.ini")
    assert cmd_solve(config, work_dir) == 0
    run = load_run(work_dir / config.experiment.name)
    assert check_max_principle(run).passed
    assert np.all(np.diff(run.energy) <= 1e-12)
    assert run.energy[-1] < run.energy[0]
    assert max(run.residuals) <= config.solver.newton_tol


@pytest.mark.slow
def test_cavity_holder_exponent_is_stable():
    text = (SCENARIOS / "bingham_cavity.ini").read_text()
    config = parse_config_text(
        text.replace("eps_list = 0.1, 0.05, 0.025", "eps_list = 0.0125, 0.00625")
    )
    assert config.experiment.delta == 0.1
    initial = config.initial_field(config.build_grid(), config.boundary_data())
    cfg = config.solver_config()
    runs = run_sweep(
        cfg,
        config.energy_model(),
        config.boundary_data(),
        initial,
        config.experiment.eps_list,
        workers=2,
        quad_spec=config.mollifier.quad_spec(
            table_radius(initial, config.boundary_data(), cfg.t_end)
        ),
    )
    params = AnalysisParams(delta=0.1, s=None, q=None)
    single = [analyze_run(run, params) for run in runs]
    holder = [next(r for r in group if r.check == "holder_modulus") for group in single]
    for report in holder:
        assert report.passed, report.to_dict()
        assert report.fitted["alpha"] > 0.0
        assert min(report.margins["pointwise_sup"], report.margins["sup"]) >= -1e-12
    stability = next(
        r
        for r in analyze_sweep(runs, single, params)
        if r.check == "holder_exponent_stability"
    )
    assert stability.passed, stability.to_dict()
    alphas = [r.fitted["alpha"] for r in holder]
    assert abs(alphas[0] - alphas[1]) <= 0.1
