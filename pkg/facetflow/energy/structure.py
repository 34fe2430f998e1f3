"""
Sampling certificates of the structural inequalities satisfied by E and E^ε
"""
from __future__ import annotations
import typing as ty
import json
import logging
import attrs
import numpy as np
from .model import EnergyModel, limit_flux, subdifferential_E1
from .mollify import MollifiedDensity, QuadSpec, mollify_density, jensen_gap

logger = logging.getLogger("facetflow")

DEFAULT_TOLERANCE = 1e-6


@attrs.define(kw_only=True, frozen=True)
class SampleSpec:
    """How points (and pairs of points) are drawn for a sampling certificate

    Parameters
    ----------
    count : int
        number of points/pairs
    radius : float
        points are drawn uniformly from the ball of this radius
    seed : int
        seed of the random generator
    """

    count: int = 10_000
    radius: float = 3.0
    seed: int = 0

    def points(self, n: int, rng: ty.Optional[np.random.Generator] = None):
        if rng is None:
            rng = np.random.default_rng(self.seed)
        directions = rng.standard_normal((self.count, n))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = self.radius * rng.uniform(0.0, 1.0, self.count) ** (1.0 / n)
        return directions * radii[:, None]


@attrs.define(kw_only=True, frozen=True)
class InequalityResult:
    """Worst-case margin of one inequality over a sample

    Parameters
    ----------
    name : str
        identifier of the inequality
    samples : int
        number of points/pairs the inequality was evaluated at
    worst_margin : float
        smallest RHS − LHS encountered
    passed : bool
        whether the worst margin is at or above −tolerance
    worst_point : list[float], optional
        the sample at which the worst margin occurred
    """

    name: str
    samples: int
    worst_margin: float
    passed: bool
    worst_point: ty.Optional[ty.Tuple[float, ...]] = attrs.field(
        default=None, converter=attrs.converters.optional(tuple)
    )

    @classmethod
    def from_margins(
        cls,
        name: str,
        margins: np.ndarray,
        points: ty.Optional[np.ndarray] = None,
        tolerance: float = DEFAULT_TOLERANCE,
    ) -> InequalityResult:
        margins = np.atleast_1d(np.asarray(margins, dtype=float))
        worst = int(np.argmin(margins))
        worst_point = None
        if points is not None:
            worst_point = tuple(float(x) for x in np.atleast_1d(points[worst]))
        return cls(
            name=name,
            samples=margins.size,
            worst_margin=float(margins[worst]),
            passed=bool(margins[worst] >= -tolerance),
            worst_point=worst_point,
        )

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        return {
            "inequality": self.name,
            "samples": self.samples,
            "worst_margin": self.worst_margin,
            "pass": self.passed,
            "worst_point": list(self.worst_point) if self.worst_point else None,
        }


@attrs.define(kw_only=True, frozen=True)
class StructureReport:
    """Collected results of a structural certificate"""

    subject: str
    params: ty.Dict[str, ty.Any] = attrs.field(factory=dict)
    results: ty.Tuple[InequalityResult, ...] = attrs.field(converter=tuple)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> InequalityResult:
        try:
            return next(r for r in self.results if r.name == name)
        except StopIteration:
            raise KeyError(
                f"no inequality named '{name}' in {self.subject} report, "
                f"available: {[r.name for r in self.results]}"
            )

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        return {
            "subject": self.subject,
            "params": self.params,
            "results": [r.to_dict() for r in self.results],
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


###########
# Margins #
###########


def gradient_bound_margin(md: MollifiedDensity, model: EnergyModel, z) -> np.ndarray:
    "Λ(ε + |z|²)^{(p−1)/2} + K − |∇E^ε(z)|"
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    bound = model.Lam * (md.eps + r2) ** ((md.p - 1.0) / 2.0) + model.K
    return bound - np.linalg.norm(md.gradient(z), axis=-1)


def eigenvalue_margin(md: MollifiedDensity, model: EnergyModel, z) -> np.ndarray:
    """Smaller of the two gaps in the sandwich
    λ(ε²+|z|²)^{p/2−1} id ≤ ∇²E^ε(z) ≤ (Λ(ε²+|z|²)^{p/2−1} + K/√(ε²+|z|²)) id"""
    z = np.asarray(z, dtype=float)
    s2 = md.eps**2 + np.sum(z * z, axis=-1)
    eig = np.linalg.eigvalsh(md.hessian(z))
    weight = s2 ** (md.p / 2.0 - 1.0)
    lower = eig[..., 0] - model.lam * weight
    upper = model.Lam * weight + model.K / np.sqrt(s2) - eig[..., -1]
    return np.minimum(lower, upper)


def monotonicity_margin(
    md: MollifiedDensity, model: EnergyModel, z, w, part: str = "total"
) -> np.ndarray:
    "⟨∇E(z) − ∇E(w)|z − w⟩ − λ(ε² + |z|² + |w|²)^{p/2−1}|z − w|²"
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    diff = z - w
    pairing = np.sum((md.gradient(z, part) - md.gradient(w, part)) * diff, axis=-1)
    s2 = md.eps**2 + np.sum(z * z, axis=-1) + np.sum(w * w, axis=-1)
    return pairing - model.lam * s2 ** (md.p / 2.0 - 1.0) * np.sum(diff * diff, -1)


def coercivity_margin(md: MollifiedDensity, model: EnergyModel, z) -> np.ndarray:
    "⟨∇E^ε(z)|z⟩ − λ(|z|^p − ε^p)"
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(z, axis=-1)
    pairing = np.sum(md.gradient(z) * z, axis=-1)
    return pairing - model.lam * (r**md.p - md.eps**md.p)


def euler_residual(md: MollifiedDensity, z) -> np.ndarray:
    "|⟨∇E_{1,ε}(z)|z⟩ − E₁(z)| for the Euclidean E₁"
    z = np.asarray(z, dtype=float)
    pairing = np.sum(md.gradient(z, "one") * z, axis=-1)
    return np.abs(pairing - np.linalg.norm(z, axis=-1))


def _sample_pairs(md: MollifiedDensity, samples: SampleSpec):
    rng = np.random.default_rng(samples.seed)
    z = samples.points(md.n, rng)
    w = samples.points(md.n, rng)
    # a few degenerate and near-facet pairs
    w[:4] = z[:4]
    z[4:8] = 0.0
    near = w[8:12]
    w[8:12] = md.eps * near / np.linalg.norm(near, axis=1, keepdims=True)
    return z, w


def verify_structural(
    md: MollifiedDensity,
    model: EnergyModel,
    samples: ty.Optional[SampleSpec] = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> StructureReport:
    """Certifies the structural inequalities of E^ε on a sample of points and pairs

    Parameters
    ----------
    md : MollifiedDensity
        the tabulated density
    model : EnergyModel
        supplies the constants λ, Λ and K
    samples : SampleSpec, optional
        where to sample; the ball must lie inside the table
    tolerance : float
        an inequality passes if its worst margin is ≥ −tolerance

    Returns
    -------
    StructureReport
        one result per inequality; failures are reported, never raised
    """
    if samples is None:
        samples = SampleSpec()
    z, w = _sample_pairs(md, samples)
    pairs = np.concatenate([z, w], axis=1)
    results = [
        InequalityResult.from_margins(
            "gradient_bound", gradient_bound_margin(md, model, z), z, tolerance
        ),
        InequalityResult.from_margins(
            "eigenvalue_sandwich", eigenvalue_margin(md, model, z), z, tolerance
        ),
        InequalityResult.from_margins(
            "monotonicity_power",
            monotonicity_margin(md, model, z, w, part="power"),
            pairs,
            tolerance,
        ),
        InequalityResult.from_margins(
            "monotonicity_total",
            monotonicity_margin(md, model, z, w),
            pairs,
            tolerance,
        ),
        InequalityResult.from_margins(
            "coercivity", coercivity_margin(md, model, z), z, tolerance
        ),
        InequalityResult.from_margins(
            "jensen", jensen_gap(md), md.r_grid[:, None], tolerance
        ),
        InequalityResult.from_margins(
            "euler_identity",
            2.0 * model.K * md.eps - euler_residual(md, z),
            z,
            tolerance,
        ),
    ]
    report = StructureReport(
        subject="mollified",
        params={
            "n": md.n,
            "p": md.p,
            "eps": md.eps,
            "lambda": model.lam,
            "Lambda": model.Lam,
            "K": model.K,
            "samples": samples.count,
            "radius": samples.radius,
            "seed": samples.seed,
        },
        results=results,
    )
    for result in report.results:
        if not result.passed:
            logger.warning(
                f"{result.name} fails for eps={md.eps}, p={md.p}: worst margin "
                f"{result.worst_margin:.3g} at {result.worst_point}"
            )
    return report


def calibrate_constants(
    md: MollifiedDensity, model: EnergyModel, safety: float = 1.1
) -> EnergyModel:
    """Adjusts λ, Λ and K of a model so that the radial forms of the gradient bound
    and of the eigenvalue sandwich hold on every table radius of `md`

    λ is only ever lowered, Λ and K are only ever raised (jointly), in each case
    with a margin of `safety`. λ is also capped by 1/p, below which the
    coercivity form follows from convexity and Jensen, and for p > 2 by the
    factor relating the segment average of (ε² + |·|²)^{p/2−1} to its endpoint
    form, so that strong monotonicity follows from the eigenvalue bound.
    """
    r = md.r_grid
    eps, p = md.eps, md.p
    s2 = eps**2 + r**2
    weight = s2 ** (p / 2.0 - 1.0)
    lam_fit = np.inf
    for part in ("power", "total"):
        radial, tangential = md.spectrum(r, part)
        lam_fit = min(lam_fit, float((np.minimum(radial, tangential) / weight).min()))
    lam = min(model.lam, lam_fit / safety, 1.0 / p)
    if p > 2.0:
        lam *= (9.0 / 32.0) ** (p / 2.0 - 1.0) / 8.0
    radial, tangential = md.spectrum(r)
    grad_ratio = np.abs(md.total(r, 1)) / (
        model.Lam * (eps + r**2) ** ((p - 1.0) / 2.0) + model.K
    )
    eig_ratio = np.maximum(radial, tangential) / (
        model.Lam * weight + model.K / np.sqrt(s2)
    )
    scale = float(max(grad_ratio.max(), eig_ratio.max()))
    Lam, K = model.Lam, model.K
    if scale > 1.0:
        Lam *= scale * safety
        K *= scale * safety
    calibrated = attrs.evolve(model, lam=lam, Lam=Lam, K=K)
    logger.info(
        f"calibrated constants for eps={eps}, p={p}: lambda={lam:.4g}, "
        f"Lambda={Lam:.4g}, K={K:.4g}"
    )
    return calibrated


###################
# Exact densities #
###################


def verify_exact_structure(
    model: EnergyModel,
    samples: ty.Optional[SampleSpec] = None,
    tolerance: float = 1e-10,
) -> StructureReport:
    """Certifies Euler's identity, |∂E₁| ≤ K and 0 ≤ ∇²E₁(z) ≤ (K/|z|) id for the
    exact (Euclidean or anisotropic) one-homogeneous density"""
    if samples is None:
        samples = SampleSpec()
    rng = np.random.default_rng(samples.seed)
    z = samples.points(model.n, rng)
    z = z[np.linalg.norm(z, axis=1) > 0]
    norm = np.linalg.norm(z, axis=1)
    grad = model.grad_e1(z)
    euler = np.abs(np.sum(grad * z, axis=1) - model.e1(z)) / (1.0 + model.e1(z))
    eig = np.linalg.eigvalsh(model.hess_e1(z))
    ball = subdifferential_E1(model, np.zeros(model.n))
    members = ball.sample(rng, min(samples.count, 1000))
    results = [
        InequalityResult.from_margins("euler_identity", -euler, z, tolerance),
        InequalityResult.from_margins(
            "subgradient_bound",
            model.K - np.linalg.norm(grad, axis=1),
            z,
            tolerance,
        ),
        InequalityResult.from_margins(
            "origin_subgradient_bound",
            model.K - np.linalg.norm(members, axis=1),
            members,
            tolerance,
        ),
        InequalityResult.from_margins(
            "hessian_lower", eig[:, 0] / (1.0 + np.abs(eig[:, -1])), z, tolerance
        ),
        InequalityResult.from_margins(
            "hessian_upper", model.K - norm * eig[:, -1], z, tolerance
        ),
    ]
    return StructureReport(
        subject=f"exact-{model.density}",
        params={"n": model.n, "K": model.K, "K0": model.K0, "seed": samples.seed},
        results=results,
    )


def ellipticity_ratio_mollified(md: MollifiedDensity, z) -> np.ndarray:
    """Ratio of the largest to the smallest eigenvalue of ∇²E^ε(z); bounded for each
    ε but growing as ε shrinks on the facet"""
    z = np.asarray(z, dtype=float)
    radial, tangential = md.spectrum(np.linalg.norm(z, axis=-1))
    return np.maximum(radial, tangential) / np.minimum(radial, tangential)


@attrs.define(kw_only=True, frozen=True)
class FluxConvergence:
    """sup |∇E^ε(z) − A₀(z)| over a sample, per ε"""

    eps: ty.Tuple[float, ...] = attrs.field(converter=tuple)
    errors: ty.Tuple[float, ...] = attrs.field(converter=tuple)

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.errors) <= 0.0))

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        return {
            "eps": list(self.eps),
            "errors": list(self.errors),
            "pass": self.decreasing,
        }


def flux_convergence_study(
    model: EnergyModel,
    eps_list: ty.Sequence[float],
    samples: ty.Optional[SampleSpec] = None,
    quad_spec: ty.Optional[QuadSpec] = None,
    min_radius: float = 0.25,
) -> FluxConvergence:
    """Measures how fast ∇E^ε approaches the limit map A₀ away from the facet

    The convergence is only locally uniform off the origin, so sample points with
    |z| < `min_radius` are replaced by the origin, where A₀ and every ∇E^ε vanish.
    """
    if samples is None:
        samples = SampleSpec(count=1000)
    if quad_spec is None:
        quad_spec = QuadSpec(r_max=samples.radius + 1.0)
    z = samples.points(model.n)
    z[np.linalg.norm(z, axis=1) < min_radius] = 0.0
    reference = limit_flux(model, z)
    errors = []
    for eps in eps_list:
        md = mollify_density(model, eps, quad_spec)
        errors.append(float(np.abs(md.gradient(z) - reference).max()))
        logger.debug(f"sup |grad E^eps - A0| = {errors[-1]:.4g} for eps={eps}")
    return FluxConvergence(eps=eps_list, errors=errors)
