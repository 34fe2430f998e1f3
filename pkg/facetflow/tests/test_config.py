from pathlib import Path
import pytest
import facetflow
from facetflow.exceptions import ConfigError
from facetflow.config import (
    ExperimentConfig,
    parse_config,
    parse_config_text,
    emit_config,
    config_hash,
)

SCENARIOS = Path(facetflow.__file__).parent / "scenarios"

MINIMAL = """
[model]
p = 1.5

[grid]
dim = 1
cells = 16

[time]
t_end = 0.1
dt = 0.02
"""


def test_minimal_config_defaults(work_dir):
    path = work_dir / "minimal.ini"
    path.write_text(MINIMAL)
    config = parse_config(path)
    assert isinstance(config, ExperimentConfig)
    assert config.model.lam is None
    assert config.model.Lam == 2.0
    assert config.mollifier.eps == 0.1
    assert config.mollifier.r_max is None
    assert config.solver.newton_tol == 1e-12
    assert config.boundary.kind == "constant"
    assert config.initial.kind == "trace"
    assert config.experiment.name == "run"
    assert config.experiment.pairs == 10_000
    assert config.eps_list == (0.1,)
    model = config.energy_model()
    assert model.n == 1
    assert model.lam == pytest.approx(0.25)
    grid = config.build_grid()
    assert grid.cells == (16,)
    assert grid.extent == (1.0,)
    cfg = config.solver_config(eps=0.05)
    assert cfg.eps == 0.05
    assert cfg.steps == 5


def test_missing_file(work_dir):
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(work_dir / "absent.ini")


def test_p_must_exceed_one():
    with pytest.raises(ConfigError, match="p must exceed 1") as excinfo:
        parse_config_text(MINIMAL.replace("p = 1.5", "p = 0.9"))
    assert excinfo.value.section == "model"
    assert excinfo.value.key == "p"


def test_subcritical_threshold():
    text = MINIMAL.replace("p = 1.5", "p = 1.3\nsubcritical = true").replace(
        "dim = 1", "dim = 3"
    )
    with pytest.raises(ConfigError, match="2n/\\(n\\+2\\)"):
        parse_config_text(text)
    config = parse_config_text(text.replace("p = 1.3", "p = 1.1"))
    assert config.energy_model().subcritical
    with pytest.raises(ConfigError, match="n >= 3"):
        parse_config_text(MINIMAL.replace("p = 1.5", "p = 1.1\nsubcritical = true"))


@pytest.mark.parametrize(
    "old, new, section, key",
    [
        ("cells = 16", "cells = 16\nwidth = 2", "grid", None),
        ("cells = 16", "cells = many", "grid", "cells"),
        ("dt = 0.02", "", "time", "dt"),
        ("dim = 1", "dim = 4", "grid", None),
        ("p = 1.5", "p = 1.5\nLambda = 0.1\nlambda = 0.2", "model", None),
        ("p = 1.5", "p = 1.5\ndensity = crystalline", "model", "density"),
        ("dt = 0.02", "dt = 0.02\n\n[mollifier]\neps = 1.5", "mollifier", "eps"),
        ("dt = 0.02", "dt = 0.02\n\n[solver]\ndamping = 2", "solver", "damping"),
        (
            "dt = 0.02",
            "dt = 0.02\n\n[boundary]\nkind = affine\nslope = 1, 2",
            "boundary",
            "slope",
        ),
        (
            "dt = 0.02",
            "dt = 0.02\n\n[experiment]\neps_list = 0.05, 0.1",
            "experiment",
            "eps_list",
        ),
        (
            "dt = 0.02",
            "dt = 0.02\n\n[experiment]\ncylinder = 0.1, 0.1, 0.5",
            "experiment",
            "cylinder",
        ),
    ],
)
def test_located_errors(old, new, section, key):
    with pytest.raises(ConfigError) as excinfo:
        parse_config_text(MINIMAL.replace(old, new))
    assert excinfo.value.section == section
    if key is not None:
        assert excinfo.value.key == key
    assert str(excinfo.value).startswith(f"[{section}]")


def test_unknown_and_missing_sections():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config_text(MINIMAL + "\n[plotting]\ncolour = red\n")
    with pytest.raises(ConfigError, match="required section"):
        parse_config_text("[model]\np = 1.5\n")
    with pytest.raises(ConfigError, match="not a valid INI"):
        parse_config_text("p = 1.5\n")


def test_anisotropic_model():
    text = MINIMAL.replace(
        "p = 1.5", "p = 1.5\ndensity = anisotropic\nanisotropy = 2, 0.5, 0.5, 1"
    ).replace("dim = 1", "dim = 2")
    model = parse_config_text(text).energy_model()
    assert model.A.tolist() == [[2.0, 0.5], [0.5, 1.0]]
    with pytest.raises(ConfigError, match="row-major"):
        parse_config_text(text.replace("2, 0.5, 0.5, 1", "2, 0.5, 1"))
    with pytest.raises(ConfigError) as excinfo:
        parse_config_text(text.replace("2, 0.5, 0.5, 1", "1, 2, 2, 1"))
    assert excinfo.value.section == "model"


@pytest.mark.parametrize(
    "text",
    [
        MINIMAL,
        (SCENARIOS / "bingham_cavity.ini").read_text(),
        (SCENARIOS / "bingham_pipe.ini").read_text(),
    ],
)
def test_emit_round_trip(text):
    config = parse_config_text(text)
    emitted = emit_config(config)
    again = parse_config_text(emitted)
    assert again == config
    assert emit_config(again) == emitted
    assert config_hash(again) == config_hash(config)


def test_hash_changes_with_content():
    first = parse_config_text(MINIMAL)
    second = parse_config_text(MINIMAL.replace("cells = 16", "cells = 17"))
    assert len(config_hash(first)) == 64
    assert config_hash(first) != config_hash(second)


def test_shipped_scenarios():
    cavity = parse_config(SCENARIOS / "bingham_cavity.ini")
    assert cavity.model.subcritical
    assert cavity.grid.dim == 3
    assert cavity.experiment.eps_list == (0.1, 0.05, 0.025)
    assert cavity.initial.kind == "bump"
    pipe = parse_config(SCENARIOS / "bingham_pipe.ini")
    assert not pipe.model.subcritical
    assert pipe.energy_model().p == 2.0
    assert pipe.cylinder().check_inside(pipe.build_grid(), pipe.time.t_end) is None
