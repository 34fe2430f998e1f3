"""
Experiment configurations: INI text <-> frozen attrs sections

Every section is a frozen attrs class whose converters accept the raw strings of
the INI file as well as already-typed values, so that
``parse_config_text(emit_config(config)) == config``.
"""
from __future__ import annotations
import typing as ty
import configparser
import hashlib
import logging
from pathlib import Path
import attrs
import numpy as np
from facetflow.exceptions import ConfigError, FacetflowError, GeometryError
from facetflow.energy import EnergyModel, QuadSpec
from facetflow.solver import Grid, BoundaryData, ScalarField, SolverConfig
from facetflow.solver import initial_field as build_initial_field
from facetflow.lab.convergence import check_eps_list
from facetflow.lab.cylinder import ParabolicCylinder

logger = logging.getLogger("facetflow")

TRUE_WORDS = ("true", "yes", "on", "1")
FALSE_WORDS = ("false", "no", "off", "0")


##############
# Converters #
##############


def _blank(value) -> bool:
    return isinstance(value, str) and not value.strip()


def _bool(value) -> bool:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    word = str(value).strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ValueError(f"'{value}' is not a boolean")


def _optional_float(value) -> ty.Optional[float]:
    if value is None or _blank(value):
        return None
    return float(value)


def _split(value) -> ty.List[str]:
    if isinstance(value, str):
        return [v for v in (s.strip() for s in value.split(",")) if v]
    if isinstance(value, (int, float, np.number)):
        return [value]
    return list(value)


def float_list(value) -> ty.Tuple[float, ...]:
    return tuple(float(v) for v in _split(value))


def _int_list(value) -> ty.Tuple[int, ...]:
    return tuple(int(v) for v in _split(value))


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


##############
# Validators #
##############


def _key(attribute) -> str:
    return attribute.metadata.get("key", attribute.name)


def _fail(instance, attribute, msg: str):
    raise ConfigError(msg, type(instance).SECTION, _key(attribute))


def _positive(instance, attribute, value):
    if value is not None and not value > 0:
        _fail(instance, attribute, f"must be positive (got {value})")


def _nonnegative(instance, attribute, value):
    if not value >= 0:
        _fail(instance, attribute, f"must be nonnegative (got {value})")


def _unit_open(instance, attribute, value):
    if not 0.0 < value < 1.0:
        _fail(instance, attribute, f"must lie in (0, 1) (got {value})")


def _one_of(*choices: str):
    def check(instance, attribute, value):
        if value not in choices:
            _fail(instance, attribute, f"must be one of {choices} (got '{value}')")

    return check


############
# Sections #
############


@attrs.define(kw_only=True, frozen=True)
class ModelSection:
    """[model]: the energy density (the dimension is taken from [grid])"""

    SECTION = "model"

    p: float = attrs.field(converter=float)
    lam: ty.Optional[float] = attrs.field(
        default=None,
        converter=_optional_float,
        validator=_positive,
        metadata={"key": "lambda"},
    )
    Lam: float = attrs.field(
        default=2.0, converter=float, validator=_positive, metadata={"key": "Lambda"}
    )
    K: float = attrs.field(default=2.0, converter=float, validator=_positive)
    density: str = attrs.field(
        default="euclidean", validator=_one_of("euclidean", "anisotropic")
    )
    anisotropy: ty.Tuple[float, ...] = attrs.field(default=(), converter=float_list)
    subcritical: bool = attrs.field(default=False, converter=_bool)

    @p.validator
    def _check_p(self, attribute, value):
        if not value > 1:
            _fail(self, attribute, f"p must exceed 1 (got {value})")


@attrs.define(kw_only=True, frozen=True)
class MollifierSection:
    """[mollifier]: mollification radius and density-table quadrature"""

    SECTION = "mollifier"

    eps: float = attrs.field(default=0.1, converter=float, validator=_unit_open)
    radial_nodes: int = attrs.field(default=48, converter=int, validator=_positive)
    angular_nodes: int = attrs.field(default=48, converter=int, validator=_positive)
    quad_tol: float = attrs.field(default=1e-9, converter=float, validator=_positive)
    max_refinements: int = attrs.field(
        default=3, converter=int, validator=_nonnegative
    )
    r_max: ty.Optional[float] = attrs.field(
        default=None, converter=_optional_float, validator=_positive
    )
    calibrate: bool = attrs.field(default=True, converter=_bool)

    def quad_spec(self, r_max: float) -> QuadSpec:
        "The quadrature settings, with `r_max` used unless the section fixes one"
        return QuadSpec(
            radial_nodes=self.radial_nodes,
            angular_nodes=self.angular_nodes,
            tol=self.quad_tol,
            max_refinements=self.max_refinements,
            r_max=self.r_max if self.r_max is not None else r_max,
        )


@attrs.define(kw_only=True, frozen=True)
class GridSection:
    SECTION = "grid"

    dim: int = attrs.field(converter=int)
    cells: ty.Tuple[int, ...] = attrs.field(converter=_int_list)
    extent: ty.Tuple[float, ...] = attrs.field(default=(1.0,), converter=float_list)
    max_nodes: int = attrs.field(
        default=2_000_000, converter=int, validator=_positive
    )


@attrs.define(kw_only=True, frozen=True)
class TimeSection:
    SECTION = "time"

    t_end: float = attrs.field(converter=float, validator=_nonnegative)
    dt: float = attrs.field(converter=float, validator=_nonnegative)


@attrs.define(kw_only=True, frozen=True)
class SolverSection:
    SECTION = "solver"

    newton_tol: float = attrs.field(default=1e-12, converter=float, validator=_positive)
    newton_max_iter: int = attrs.field(default=30, converter=int, validator=_positive)
    damping: float = attrs.field(default=0.5, converter=float, validator=_unit_open)
    picard_fallback: bool = attrs.field(default=True, converter=_bool)
    picard_max_iter: int = attrs.field(default=200, converter=int, validator=_positive)
    snapshot_every: int = attrs.field(default=1, converter=int, validator=_positive)


@attrs.define(kw_only=True, frozen=True)
class BoundarySection:
    """[boundary]: constant (value) or affine (offset + slope·x) lateral data"""

    SECTION = "boundary"

    kind: str = attrs.field(default="constant", validator=_one_of("constant", "affine"))
    value: float = attrs.field(default=0.0, converter=float)
    offset: float = attrs.field(default=0.0, converter=float)
    slope: ty.Tuple[float, ...] = attrs.field(default=(), converter=float_list)


@attrs.define(kw_only=True, frozen=True)
class InitialSection:
    SECTION = "initial"

    kind: str = attrs.field(default="trace", validator=_one_of("trace", "bump", "sine"))
    amplitude: float = attrs.field(default=1.0, converter=float)
    mode: int = attrs.field(default=1, converter=int, validator=_positive)


@attrs.define(kw_only=True, frozen=True)
class ExperimentSection:
    """[experiment]: what the sweep and the analysis of the runs look at

    ``cylinder`` is the comma list cx[,cy[,cz]],ct,R; when empty the cylinder
    centred in the box at the final time is used.
    """

    SECTION = "experiment"

    name: str = attrs.field(default="run")
    eps_list: ty.Tuple[float, ...] = attrs.field(default=(), converter=float_list)
    delta: float = attrs.field(default=0.1, converter=float, validator=_unit_open)
    s: ty.Optional[float] = attrs.field(
        default=None, converter=_optional_float, validator=_positive
    )
    q: ty.Optional[float] = attrs.field(
        default=None, converter=_optional_float, validator=_positive
    )
    cylinder: ty.Tuple[float, ...] = attrs.field(default=(), converter=float_list)
    seed: int = attrs.field(default=0, converter=int, validator=_nonnegative)
    workers: int = attrs.field(default=1, converter=int, validator=_positive)
    tau_fraction: float = attrs.field(
        default=0.1, converter=float, validator=_nonnegative
    )
    pairs: int = attrs.field(default=10_000, converter=int, validator=_positive)

    @name.validator
    def _check_name(self, attribute, value):
        if not value or "/" in value or value.startswith("."):
            _fail(self, attribute, f"'{value}' is not a usable directory name")

    @eps_list.validator
    def _check_eps_list(self, attribute, value):
        if value:
            check_eps_list(value)

    @tau_fraction.validator
    def _check_tau_fraction(self, attribute, value):
        if value >= 1.0:
            _fail(self, attribute, f"must lie in [0, 1) (got {value})")


SECTIONS = {
    "model": ModelSection,
    "mollifier": MollifierSection,
    "grid": GridSection,
    "time": TimeSection,
    "solver": SolverSection,
    "boundary": BoundarySection,
    "initial": InitialSection,
    "experiment": ExperimentSection,
}

REQUIRED_SECTIONS = ("model", "grid", "time")


def _relocated(error: FacetflowError, section: str) -> ConfigError:
    if isinstance(error, ConfigError) and error.section is not None:
        return error
    return ConfigError(str(error), section)


@attrs.define(kw_only=True, frozen=True)
class ExperimentConfig:
    """A complete, validated experiment

    Construction builds every downstream object once (density model, grid, solver
    settings, boundary data, cylinder) so that a configuration that parses can
    also be run.
    """

    model: ModelSection
    grid: GridSection
    time: TimeSection
    mollifier: MollifierSection = attrs.field(factory=MollifierSection)
    solver: SolverSection = attrs.field(factory=SolverSection)
    boundary: BoundarySection = attrs.field(factory=BoundarySection)
    initial: InitialSection = attrs.field(factory=InitialSection)
    experiment: ExperimentSection = attrs.field(factory=ExperimentSection)

    def __attrs_post_init__(self):
        n = self.grid.dim
        if self.model.subcritical:
            if n < 3:
                raise ConfigError(
                    f"the subcritical regime needs n >= 3 (got n = {n})",
                    "model",
                    "subcritical",
                )
            if self.model.p > 2.0 * n / (n + 2.0):
                raise ConfigError(
                    f"p = {self.model.p} exceeds 2n/(n+2) = {2.0 * n / (n + 2.0):g} "
                    "of the subcritical regime",
                    "model",
                    "p",
                )
        if self.model.density == "anisotropic" and len(self.model.anisotropy) != n**2:
            raise ConfigError(
                f"expected {n ** 2} row-major entries for n = {n} "
                f"(got {len(self.model.anisotropy)})",
                "model",
                "anisotropy",
            )
        if self.boundary.kind == "affine" and len(self.boundary.slope) != n:
            raise ConfigError(
                f"expected {n} slope entries (got {len(self.boundary.slope)})",
                "boundary",
                "slope",
            )
        for section, build in (
            ("model", self.energy_model),
            ("grid", self.build_grid),
            ("solver", self.solver_config),
        ):
            try:
                build()
            except FacetflowError as e:
                raise _relocated(e, section) from e
        if self.experiment.cylinder:
            try:
                self.cylinder().check_inside(self.build_grid(), self.time.t_end)
            except GeometryError as e:
                raise ConfigError(str(e), "experiment", "cylinder") from e

    @property
    def eps_list(self) -> ty.Tuple[float, ...]:
        "The swept radii, or the single radius of [mollifier]"
        return self.experiment.eps_list or (self.mollifier.eps,)

    def energy_model(self) -> EnergyModel:
        n = self.grid.dim
        kwargs = {}
        if self.model.lam is not None:
            kwargs["lam"] = self.model.lam
        anisotropy = None
        if self.model.density == "anisotropic":
            anisotropy = np.reshape(self.model.anisotropy, (n, n))
        return EnergyModel(
            n=n,
            p=self.model.p,
            Lam=self.model.Lam,
            K=self.model.K,
            density=self.model.density,
            anisotropy=anisotropy,
            **kwargs,
        )

    def build_grid(self) -> Grid:
        return Grid(**attrs.asdict(self.grid))

    def solver_config(self, eps: ty.Optional[float] = None) -> SolverConfig:
        return SolverConfig(
            dt=self.time.dt,
            t_end=self.time.t_end,
            eps=self.mollifier.eps if eps is None else eps,
            **attrs.asdict(self.solver),
        )

    def boundary_data(self) -> BoundaryData:
        b = self.boundary
        if b.kind == "affine":
            return BoundaryData(kind="affine", offset=b.offset, slope=b.slope)
        return BoundaryData(value=b.value)

    def initial_field(self, grid: Grid, bc: BoundaryData) -> ScalarField:
        return build_initial_field(
            grid,
            bc,
            kind=self.initial.kind,
            amplitude=self.initial.amplitude,
            mode=self.initial.mode,
        )

    def cylinder(self) -> ParabolicCylinder:
        if not self.experiment.cylinder:
            return ParabolicCylinder.default(self.build_grid(), self.time.t_end)
        return ParabolicCylinder.from_sequence(
            self.experiment.cylinder, self.grid.dim
        )


###########
# Parsing #
###########


def _parse_section(cls, section: str, raw: ty.Mapping[str, str]):
    fields = {_key(a): a for a in attrs.fields(cls)}
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}", section)
    kwargs = {}
    for key, attribute in fields.items():
        if key not in raw:
            if attribute.default is attrs.NOTHING:
                raise ConfigError("required key is missing", section, key)
            continue
        try:
            value = raw[key]
            if attribute.converter is not None:
                value = attribute.converter(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"cannot read '{raw[key]}' ({e})", section, key) from e
        kwargs[attribute.name] = value
    return cls(**kwargs)


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parses and validates the INI text of an experiment

    Raises
    ------
    ConfigError
        naming the offending section and key
    """
    parser = configparser.ConfigParser(interpolation=None)
    # keys are case sensitive ("lambda" vs "Lambda")
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source} is not a valid INI file: {e}") from e
    unknown = sorted(set(parser.sections()) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s) {unknown} in {source}")
    missing = [s for s in REQUIRED_SECTIONS if not parser.has_section(s)]
    if missing:
        raise ConfigError(f"{source} lacks the required section(s) {missing}")
    sections = {
        name: _parse_section(cls, name, dict(parser[name]))
        for name, cls in SECTIONS.items()
        if parser.has_section(name)
    }
    config = ExperimentConfig(**sections)
    logger.debug(f"parsed experiment '{config.experiment.name}' from {source}")
    return config


def parse_config(path: ty.Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config_text(path.read_text(), source=str(path))


def emit_config(config: ExperimentConfig) -> str:
    "INI text holding every field of every section"
    lines = []
    for name in SECTIONS:
        section = getattr(config, name)
        lines.append(f"[{name}]")
        for attribute in attrs.fields(type(section)):
            value = _format(getattr(section, attribute.name))
            lines.append(f"{_key(attribute)} = {value}".rstrip())
        lines.append("")
    return "\n".join(lines)


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(emit_config(config).encode("utf-8")).hexdigest()
