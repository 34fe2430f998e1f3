"""
The experiments behind the CLI commands: solve, sweep, verify and analyze

Each ``cmd_*`` function writes its artefacts and returns the exit code of the
command; errors propagate as `FacetflowError`s, whose ``exit_code`` the CLI uses.
"""
from __future__ import annotations
import typing as ty
import json
import logging
import time
from datetime import datetime, timezone
from pathlib import Path
import attrs
import numpy as np
import scipy
from facetflow import __version__
from facetflow.exceptions import (
    ConfigError,
    HypothesisError,
    NonConvergenceError,
)
from facetflow.config import (
    ExperimentConfig,
    config_hash,
    emit_config,
    parse_config_text,
)
from facetflow.energy import (
    SampleSpec,
    StructureReport,
    mollify_density,
    verify_structural,
    verify_exact_structure,
    calibrate_constants,
)
from facetflow.composites import (
    ExponentBook,
    PsiSpec,
    TruncationParams,
    check_composite_inequalities,
    monotone_convergence,
    vw_margins,
)
from facetflow.solver import (
    RunResult,
    run_simulation,
    table_radius,
    save_run,
    load_run,
    load_manifest,
)
from facetflow.solver.persist import MANIFEST
from facetflow.lab import (
    DiagnosticsReport,
    ParabolicCylinder,
    write_reports,
    check_max_principle,
    vw_compatibility,
    euler_identity_residual,
    facet_fraction,
    holder_modulus_estimate,
    exponent_stability,
    sup_estimate_ratio,
    reversed_holder_ratio,
    sup_vq_ratio,
    constant_stability,
    has_fitted_constant,
    run_sweep,
    epsilon_convergence_study,
    gradient_sup_series,
    IterationInstance,
    moser_sequence,
    fuzz_moser,
    fuzz_absorbing,
)

logger = logging.getLogger("facetflow")

VERIFY_TARGETS = ("structure", "composites", "lemmas")
CONVERGENCE_CSV = "convergence.csv"
EXIT_SUCCESS = 0
EXIT_CHECK_FAILED = 3

# (α, M) pairs of the composite functions certified by `verify composites`
COMPOSITE_SPECS = ((2.0, 2.0), (1.0, 4.0), (0.5, 8.0))
COMPOSITE_R = 2.0
COMPOSITE_SAMPLES = 1000
COMPOSITE_LEVELS = (2.0, 4.0, 8.0, 16.0)
# starting value of the recursion along a configured ladder; Y0 ≥ 1 keeps the
# finite-depth iterates below the limit bound for any p0 ≥ mu
LADDER_Y0 = 1.5


############
# Manifest #
############


def _versions() -> ty.Dict[str, str]:
    return {
        "facetflow": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


@attrs.define(kw_only=True, frozen=True)
class RunManifest:
    """Provenance stored next to every run

    Parameters
    ----------
    config_hash : str
        SHA-256 of the emitted configuration
    config : str
        the emitted configuration itself
    versions : dict[str, str]
        versions of facetflow and of its numerical dependencies
    started : str
        UTC start time in ISO format
    wall_clock : float
        seconds spent solving
    outcome : str
        "completed" or "nonconvergence"
    """

    config_hash: str
    config: str
    versions: ty.Dict[str, str] = attrs.field(factory=_versions)
    started: str = ""
    wall_clock: float = 0.0
    outcome: str = "completed"

    @classmethod
    def start(cls, config: ExperimentConfig) -> RunManifest:
        return cls(
            config_hash=config_hash(config),
            config=emit_config(config),
            started=datetime.now(timezone.utc).isoformat(),
        )

    def finished(self, since: float, outcome: str = "completed") -> RunManifest:
        return attrs.evolve(
            self, wall_clock=time.perf_counter() - since, outcome=outcome
        )

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        return attrs.asdict(self)


def verify_manifest(directory: Path) -> ty.Optional[ExperimentConfig]:
    """Recomputes the configuration hash of a stored run

    Returns
    -------
    ExperimentConfig or None
        the configuration the run was produced from, None for runs saved without
        one

    Raises
    ------
    ConfigError
        if the stored hash does not match the stored configuration
    """
    manifest = load_manifest(directory)
    if "config" not in manifest:
        return None
    config = parse_config_text(manifest["config"], source=str(directory / MANIFEST))
    if config_hash(config) != manifest.get("config_hash"):
        raise ConfigError(
            f"configuration hash stored in {directory / MANIFEST} does not match its "
            "configuration"
        )
    return config


def _exit_code(reports: ty.Sequence[DiagnosticsReport]) -> int:
    failed = [r.check for r in reports if r.status == "fail"]
    if failed:
        logger.warning(f"checks failed: {', '.join(failed)}")
        return EXIT_CHECK_FAILED
    return EXIT_SUCCESS


#########
# Solve #
#########


def _problem(config: ExperimentConfig):
    model = config.energy_model()
    grid = config.build_grid()
    bc = config.boundary_data()
    return model, bc, config.initial_field(grid, bc)


def cmd_solve(config: ExperimentConfig, runs_dir: Path = Path("runs")) -> int:
    """Solves the configured problem at the ε of [mollifier] and stores the run in
    ``runs_dir/<name>``"""
    manifest = RunManifest.start(config)
    since = time.perf_counter()
    model, bc, initial = _problem(config)
    cfg = config.solver_config()
    r_max = table_radius(initial, bc, cfg.t_end)
    md = mollify_density(model, cfg.eps, config.mollifier.quad_spec(r_max))
    directory = Path(runs_dir) / config.experiment.name
    try:
        run = run_simulation(
            cfg, model, bc, initial, md=md, run_id=config.experiment.name
        )
    except NonConvergenceError as e:
        _record_failure(directory, manifest.finished(since, "nonconvergence"), e)
        raise
    save_run(run, directory, manifest=manifest.finished(since).to_dict())
    return EXIT_SUCCESS


def _record_failure(
    directory: Path, manifest: RunManifest, error: NonConvergenceError
):
    directory.mkdir(parents=True, exist_ok=True)
    content = manifest.to_dict()
    content.update(error=str(error), residuals=error.residuals, files=[])
    (directory / MANIFEST).write_text(json.dumps(content, indent=2, sort_keys=True))
    logger.error(f"{error} (manifest written to {directory})")


#########
# Sweep #
#########


def cmd_sweep(config: ExperimentConfig, runs_dir: Path = Path("runs")) -> int:
    """Solves the problem once per entry of [experiment] eps_list, stores each run
    under ``runs_dir/<name>/eps_<i>`` and writes the gradient difference matrix
    and the sweep reports next to them"""
    eps_list = config.experiment.eps_list
    if not eps_list:
        raise ConfigError("a sweep needs a list of radii", "experiment", "eps_list")
    manifest = RunManifest.start(config)
    since = time.perf_counter()
    model, bc, initial = _problem(config)
    cfg = config.solver_config()
    runs = run_sweep(
        cfg,
        model,
        bc,
        initial,
        eps_list,
        workers=config.experiment.workers,
        quad_spec=config.mollifier.quad_spec(table_radius(initial, bc, cfg.t_end)),
    )
    directory = Path(runs_dir) / config.experiment.name
    manifest = manifest.finished(since).to_dict()
    for run in runs:
        save_run(run, directory / run.run_id, manifest=manifest)
    study = epsilon_convergence_study(
        cfg,
        model,
        bc,
        eps_list,
        runs=runs,
        tau_fraction=config.experiment.tau_fraction,
    )
    np.savetxt(
        directory / CONVERGENCE_CSV,
        study.margins["matrix"],
        fmt="%.17g",
        delimiter=",",
        header=",".join(f"{e!r}" for e in eps_list),
        comments="",
    )
    reports = [study, gradient_sup_series(runs, config.cylinder())]
    write_reports(reports, directory)
    return _exit_code(reports)


##########
# Verify #
##########


def _from_structure(report: StructureReport) -> DiagnosticsReport:
    return DiagnosticsReport.judged(
        report.passed,
        check=f"structure:{report.subject}",
        params=report.params,
        margins={r.name: r.worst_margin for r in report.results},
        located={r.name: r.worst_point for r in report.results if not r.passed},
    )


def verify_structure(config: ExperimentConfig, seed: int) -> ty.List[DiagnosticsReport]:
    """Certificates of the exact density and, for Euclidean densities, of E^ε at
    every swept ε (after calibrating λ, Λ and K unless disabled)"""
    model = config.energy_model()
    samples = SampleSpec(seed=seed)
    reports = [_from_structure(verify_exact_structure(model, samples))]
    if model.density != "euclidean":
        logger.info("anisotropic densities are certified in their exact form only")
        return reports
    for eps in config.eps_list:
        md = mollify_density(
            model, eps, config.mollifier.quad_spec(samples.radius + 1.0)
        )
        checked = model
        if config.mollifier.calibrate:
            checked = calibrate_constants(md, model)
        reports.append(_from_structure(verify_structural(md, checked, samples)))
    return reports


def verify_composites(
    config: ExperimentConfig, seed: int
) -> ty.List[DiagnosticsReport]:
    """The composite-function inequalities, their monotone convergence in M and the
    V/W compatibility of sampled gradients"""
    rng = np.random.default_rng(seed)
    p = config.model.p
    reports = []
    for alpha, M in COMPOSITE_SPECS:
        spec = PsiSpec(alpha=alpha, M=M)
        sigmas = rng.uniform(0.0, 2.0 * M + 1.0, COMPOSITE_SAMPLES)
        reports.append(
            _from_structure(check_composite_inequalities(spec, COMPOSITE_R, sigmas, p))
        )
        rows = monotone_convergence(spec, sigmas, COMPOSITE_LEVELS)
        margin = min(
            float((np.diff(rows[k], axis=0) / np.maximum(1.0, rows[k][1:])).min())
            for k in ("psi", "Psi")
        )
        reports.append(
            DiagnosticsReport.judged(
                margin >= -1e-12,
                check="composites:monotone_convergence",
                params={"alpha": alpha, "levels": COMPOSITE_LEVELS},
                margins={"increment": margin},
            )
        )
    grads = SampleSpec(count=COMPOSITE_SAMPLES, seed=seed).points(config.grid.dim)
    for eps in config.eps_list:
        margins = {k: float(v.min()) for k, v in vw_margins(grads, eps).items()}
        reports.append(
            DiagnosticsReport.judged(
                min(margins.values()) >= -1e-12,
                check="composites:vw_compatibility",
                params={"eps": eps, "n": config.grid.dim},
                margins=margins,
            )
        )
    return reports


def verify_lemmas(config: ExperimentConfig, seed: int) -> ty.List[DiagnosticsReport]:
    """The equality case of the Moser recursion, the Moser recursion along the
    configured exponent ladder, and the two seeded fuzzers"""
    reports = []
    equality = IterationInstance(A=1.0, B=1.0, kappa=2.0, mu=1.0, p0=1.0, Y0=3.0)
    Y_L, bound, _ = moser_sequence(equality)
    reports.append(
        DiagnosticsReport.judged(
            abs(Y_L - bound) <= 1e-12 * bound,
            check="moser_equality",
            params=attrs.asdict(equality),
            margins={"relative_gap": abs(Y_L - bound) / bound},
        )
    )
    book = ExponentBook.for_model(
        config.energy_model(), s=config.experiment.s, q=config.experiment.q
    )
    ladders = []
    if book.s is not None and book.s > book.s_c:
        ladders.append(book.u_ladder())
    if book.q is not None and book.q > book.q_c:
        ladders.append(book.v_ladder())
    for ladder in ladders:
        inst = IterationInstance.from_ladder(ladder, A=2.0, B=2.0, Y0=LADDER_Y0)
        Y_L, bound, passed = moser_sequence(inst)
        reports.append(
            DiagnosticsReport.judged(
                passed,
                check=f"moser_ladder:{ladder.context}",
                params=attrs.asdict(inst),
                margins={"log_bound": float(np.log(bound) - np.log(Y_L))},
            )
        )
    rng = np.random.default_rng(seed)
    reports.append(fuzz_moser(rng))
    reports.append(fuzz_absorbing(rng))
    return reports


VERIFIERS = {
    "structure": verify_structure,
    "composites": verify_composites,
    "lemmas": verify_lemmas,
}


def cmd_verify(
    config: ExperimentConfig,
    which: str,
    seed: ty.Optional[int] = None,
    out_dir: ty.Optional[Path] = None,
) -> int:
    """Runs one family of sampling certificates and writes their reports to
    `out_dir` (``runs/<name>/verify_<which>`` by default)"""
    if which not in VERIFIERS:
        raise ConfigError(f"can only verify one of {VERIFY_TARGETS} (got '{which}')")
    if seed is None:
        seed = config.experiment.seed
    reports = VERIFIERS[which](config, seed)
    if out_dir is None:
        out_dir = Path("runs") / config.experiment.name / f"verify_{which}"
    write_reports(reports, out_dir)
    return _exit_code(reports)


###########
# Analyze #
###########


@attrs.define(kw_only=True, frozen=True)
class AnalysisParams:
    """What `cmd_analyze` checks on stored runs

    Parameters
    ----------
    delta : float
        truncation level δ of the Hölder estimate and the facet fraction
    cylinder : tuple[float, ...]
        cx[,cy[,cz]],ct,R (empty for the centred default cylinder)
    s : float, optional
        integrability exponent of the sup estimate (skipped when None)
    q : float, optional
        integrability exponent of the gradient estimates (skipped when None)
    seed : int
        seed of the pair sampling of the Hölder estimate
    pairs : int
        number of sampled pairs of the Hölder estimate
    """

    delta: float = attrs.field(converter=float)
    cylinder: ty.Tuple[float, ...] = attrs.field(default=(), converter=tuple)
    s: ty.Optional[float] = None
    q: ty.Optional[float] = None
    seed: int = 0
    pairs: int = 10_000

    @classmethod
    def from_config(cls, config: ExperimentConfig, **overrides) -> AnalysisParams:
        "The [experiment] settings, overridden by every override that is not None"
        e = config.experiment
        values = {
            "delta": e.delta,
            "cylinder": e.cylinder,
            "s": e.s,
            "q": e.q,
            "seed": e.seed,
            "pairs": e.pairs,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def cylinder_for(self, run: RunResult) -> ParabolicCylinder:
        if not self.cylinder:
            return ParabolicCylinder.default(run.grid, float(run.times[-1]))
        return ParabolicCylinder.from_sequence(self.cylinder, run.grid.dim)


def load_runs(
    directory: Path,
) -> ty.Tuple[ty.List[RunResult], ty.Optional[ExperimentConfig]]:
    """Loads a single run, or every run of a sweep directory (ordered by decreasing
    ε), together with the configuration they were produced from

    Raises
    ------
    ConfigError
        if the directory is missing, holds no run or a run whose configuration hash
        does not match
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"run directory {directory} does not exist")
    if (directory / MANIFEST).exists():
        members = [directory]
    else:
        members = sorted(
            d for d in directory.iterdir() if d.is_dir() and (d / MANIFEST).exists()
        )
    if not members:
        raise ConfigError(f"no run found at {directory} (missing {MANIFEST})")
    configs = [verify_manifest(d) for d in members]
    runs = sorted((load_run(d) for d in members), key=lambda r: -r.eps)
    return runs, next((c for c in configs if c is not None), None)


def _guarded(check: str, run: RunResult, compute, *args, **kwargs):
    "Runs a check whose hypotheses may not hold, reporting it inconclusive if so"
    try:
        return compute(run, *args, **kwargs)
    except HypothesisError as e:
        logger.warning(f"{check} on '{run.run_id}' is inconclusive: {e}")
        return DiagnosticsReport(
            check=check,
            run_ids=[run.run_id],
            status="inconclusive",
            located={"reason": str(e)},
        )


def analyze_run(run: RunResult, params: AnalysisParams) -> ty.List[DiagnosticsReport]:
    "Every single-run check of the regularity lab"
    Q = params.cylinder_for(run)
    fractions = facet_fraction(run, params.delta)
    reports = [
        check_max_principle(run),
        vw_compatibility(run),
        euler_identity_residual(run),
        DiagnosticsReport(
            check="facet_fraction",
            run_ids=[run.run_id],
            params={
                "delta": params.delta,
                "eps": run.eps,
                "final": float(fractions[-1]),
                "series": fractions,
            },
        ),
        _guarded(
            "holder_modulus",
            run,
            holder_modulus_estimate,
            TruncationParams(delta=params.delta),
            Q,
            pairs=params.pairs,
            seed=params.seed,
        ),
    ]
    if params.s is not None:
        reports.append(_guarded("sup_estimate", run, sup_estimate_ratio, Q, params.s))
    if params.q is not None:
        reports.append(
            _guarded("reversed_holder", run, reversed_holder_ratio, params.q, Q)
        )
        reports.append(_guarded("sup_vq", run, sup_vq_ratio, params.q, Q))
    return reports


def analyze_sweep(
    runs: ty.Sequence[RunResult],
    single: ty.Sequence[ty.Sequence[DiagnosticsReport]],
    params: AnalysisParams,
    tau_fraction: float = 0.1,
) -> ty.List[DiagnosticsReport]:
    """Checks across the runs of an ε sweep: convergence of the gradients, the
    uniform gradient bound and the stability of the fitted exponents and
    constants"""
    first = runs[0]
    reports = [
        epsilon_convergence_study(
            first.config,
            first.model,
            None,
            [r.eps for r in runs],
            runs=runs,
            tau_fraction=tau_fraction,
        ),
        gradient_sup_series(runs, params.cylinder_for(first)),
    ]
    by_check: ty.Dict[str, ty.List[DiagnosticsReport]] = {}
    for report in (r for group in single for r in group):
        by_check.setdefault(report.check, []).append(report)
    holder = [r for r in by_check.get("holder_modulus", []) if r.passed]
    if len(holder) > 1:
        reports.append(exponent_stability(holder))
    for check in ("sup_estimate", "reversed_holder", "sup_vq"):
        fitted = [r for r in by_check.get(check, []) if has_fitted_constant(r)]
        if len(fitted) > 1:
            reports.append(constant_stability(fitted))
    return reports


def cmd_analyze(
    run_dir: Path, params: ty.Dict[str, ty.Any], out_dir: ty.Optional[Path] = None
) -> int:
    """Runs the regularity checks on the run(s) stored in `run_dir` and writes
    report.csv and report.json (into `run_dir` unless `out_dir` is given)

    Parameters
    ----------
    run_dir : Path
        a run directory, or a sweep directory holding one run per ε
    params : dict
        overrides of the [experiment] settings stored with the runs (delta,
        cylinder, s, q, seed, pairs); None values are ignored
    out_dir : Path, optional
        where the reports go
    """
    runs, config = load_runs(run_dir)
    if config is not None:
        analysis = AnalysisParams.from_config(config, **params)
        tau_fraction = config.experiment.tau_fraction
    else:
        if params.get("delta") is None:
            raise ConfigError(
                f"the runs in {run_dir} carry no configuration; pass delta explicitly"
            )
        analysis = AnalysisParams(**{k: v for k, v in params.items() if v is not None})
        tau_fraction = 0.1
    single = [analyze_run(run, analysis) for run in runs]
    reports = [r for group in single for r in group]
    if len(runs) > 1:
        reports.extend(analyze_sweep(runs, single, analysis, tau_fraction))
    csv_path, _ = write_reports(reports, out_dir if out_dir else run_dir)
    logger.info(f"wrote {len(reports)} reports to {csv_path.parent}")
    return _exit_code(reports)
