"""
Friedrichs mollification of radial energy densities.

E^ε = ρ_ε ∗ E is radial whenever E and ρ are, so it is stored as a table of its
radial profile g(r) = E^ε(r e₁) together with the radial derivatives g1, g2, g3.
Derivatives are moved onto the mollifier,

    g1(r) = ∫ ρ_ε(r e₁ − y) ∂₁E(y) dy
    g2(r) = ∫ ∂₁ρ_ε(r e₁ − y) ∂₁E(y) dy
    g3(r) = ∫ ∂₁₁ρ_ε(r e₁ − y) ∂₁E(y) dy

so every integrand is bounded, and the integrals are taken in polar coordinates
(t, φ) about the origin, where ∂₁E(y) = e'(t) cos φ is smooth.
"""
from __future__ import annotations
import typing as ty
import logging
import attrs
import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicHermiteSpline
from facetflow.exceptions import OutOfTableError, QuadratureError, ConfigError
from .model import EnergyModel

logger = logging.getLogger("facetflow")

PARTS = ("total", "one", "power")
_COLUMNS = ("g", "g1", "g2", "g3")


#############
# Mollifier #
#############


def _bump(x: np.ndarray) -> ty.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """f(x) = exp(−1/(1−x)) and its first two derivatives, where x = |w|², so that
    the standard bump is ρ̂(w) = f(|w|²). Vanishes identically for x ≥ 1"""
    inside = x < 1.0
    q = np.where(inside, 1.0 / np.where(inside, 1.0 - x, 1.0), 0.0)
    f = np.where(inside, np.exp(-q), 0.0)
    f1 = -f * q**2
    f2 = f * (q**4 - 2.0 * q**3)
    return f, f1, f2


def sphere_area(n: int) -> float:
    "Surface measure of the unit sphere S^{n−1} ⊂ ℝⁿ (2 for n = 1)"
    return float(2.0 * np.pi ** (n / 2.0) / special.gamma(n / 2.0))


def _bump_moment(n: int, k: float) -> float:
    "∫₀¹ f(s²) s^{n−1+k} ds"
    value, _ = integrate.quad(
        lambda s: float(_bump(np.array(s * s))[0]) * s ** (n - 1 + k),
        0.0,
        1.0,
        epsabs=1e-15,
        epsrel=1e-13,
        limit=200,
    )
    return value


def mollifier_normalisation(n: int) -> float:
    "The constant c making ρ = c·exp(−1/(1−|w|²)) a unit-mass density on ℝⁿ"
    return 1.0 / (sphere_area(n) * _bump_moment(n, 0.0))


def mollifier_moment(n: int, k: float) -> float:
    """∫ρ(w)|w|^k dw for the normalised bump; with k = 1 this is c_ρ and
    E_{1,ε}(0) = ε c_ρ"""
    return _bump_moment(n, k) / _bump_moment(n, 0.0)


##############
# Quadrature #
##############


@attrs.define(kw_only=True, frozen=True)
class QuadSpec:
    """Quadrature and tabulation settings of a mollified density

    Parameters
    ----------
    radial_nodes : int
        Gauss-Legendre nodes in |y|
    angular_nodes : int
        Gauss-Legendre nodes in the polar angle (ignored for n = 1)
    tol : float
        tolerance of the adaptive refinement, relative to max(1, sup|g_k|)
    max_refinements : int
        number of node doublings attempted before giving up
    r_max : float
        largest tabulated radius
    spacing_fraction : float
        table spacing as a fraction of ε
    grading : int
        exponent of the graded substitution t ∝ u^grading used when the
        mollifier support contains the origin
    chunk_elements : int
        bound on radii × nodes integrated at once
    """

    radial_nodes: int = 48
    angular_nodes: int = 48
    tol: float = 1e-9
    max_refinements: int = 3
    r_max: float = 16.0
    spacing_fraction: float = 1.0 / 16.0
    grading: int = 6
    chunk_elements: int = 2**20

    def refined(self, factor: int = 2) -> "QuadSpec":
        return attrs.evolve(
            self,
            radial_nodes=self.radial_nodes * factor,
            angular_nodes=self.angular_nodes * factor,
        )


def _radial_profiles(
    radii: np.ndarray, eps: float, n: int, p: float, spec: QuadSpec, norm: float
) -> ty.Dict[str, np.ndarray]:
    """Integrates g, g1, g2, g3 of both E₁ = |·| and E_p = |·|^p/p at the given
    radii. Returns arrays of shape (4, len(radii)) keyed by part"""
    u, wu = np.polynomial.legendre.leggauss(spec.radial_nodes)
    u, wu = 0.5 * (u + 1.0), 0.5 * wu
    if n == 1:
        cos_phi = np.array([1.0, -1.0])
        w_phi = np.ones(2)
    else:
        x, wx = np.polynomial.legendre.leggauss(spec.angular_nodes)
        x, wx = 0.5 * (x + 1.0), 0.5 * wx
    results = {part: np.zeros((4, radii.size)) for part in ("one", "power")}
    nodes = spec.radial_nodes * (spec.angular_nodes if n > 1 else 2)
    chunk = max(1, spec.chunk_elements // nodes)
    for start in range(0, radii.size, chunk):
        r = radii[start : start + chunk][:, None, None]
        inner = r <= eps
        t_lo = np.where(inner, 0.0, r - eps)
        length = np.where(inner, r + eps, 2.0 * eps)
        k = np.where(inner, float(spec.grading), 1.0)
        uu = u[None, :, None]
        t = t_lo + length * uu**k
        dt = length * k * uu ** (k - 1.0) * wu[None, :, None]
        if n == 1:
            cphi = cos_phi[None, None, :]
            ang = w_phi[None, None, :]
        else:
            # the sphere |y| = t meets supp ρ_ε(r e₁ − ·) in the cap φ ≤ φ_max(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                cos_max = (r * r + t * t - eps * eps) / (2.0 * r * t)
            cos_max = np.where((r > 0) & (t > 0), cos_max, -1.0)
            phi_max = np.arccos(np.clip(cos_max, -1.0, 1.0))
            phi = phi_max * x[None, None, :]
            cphi = np.cos(phi)
            ang = (
                phi_max
                * wx[None, None, :]
                * np.sin(phi) ** (n - 2)
                * sphere_area(n - 1)
            )
        jac = t ** (n - 1) * dt * ang
        v1 = r - t * cphi
        xx = (r * r - 2.0 * r * t * cphi + t * t) / eps**2
        f, f1, f2 = _bump(xx)
        rho = norm * f / eps**n
        d_rho = norm * 2.0 * f1 * v1 / eps ** (n + 2)
        dd_rho = norm * (4.0 * f2 * v1**2 / eps**2 + 2.0 * f1) / eps ** (n + 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            tp1 = np.where(t > 0, t ** (p - 1.0), 0.0)
        for part, e, de in (
            ("one", t, np.ones_like(t)),
            ("power", t**p / p, tp1),
        ):
            flux = de * cphi * jac
            block = slice(start, start + r.shape[0])
            results[part][0, block] = np.sum(rho * e * jac, axis=(1, 2))
            results[part][1, block] = np.sum(rho * flux, axis=(1, 2))
            results[part][2, block] = np.sum(d_rho * flux, axis=(1, 2))
            results[part][3, block] = np.sum(dd_rho * flux, axis=(1, 2))
    for part in results:
        # odd radial derivatives vanish at the origin by symmetry
        zero = radii == 0.0
        results[part][1, zero] = 0.0
        results[part][3, zero] = 0.0
    return results


def _probe_radii(radii: np.ndarray, eps: float, stride: int = 64) -> np.ndarray:
    near = radii[radii <= 2.0 * eps]
    far = radii[radii > 2.0 * eps][::stride]
    return np.concatenate([near, far, radii[-1:]])


def _quadrature_error(
    coarse: ty.Dict[str, np.ndarray], fine: ty.Dict[str, np.ndarray]
) -> float:
    error = 0.0
    for part in coarse:
        scale = np.maximum(1.0, np.abs(fine[part]).max(axis=1))
        diff = np.abs(fine[part] - coarse[part]).max(axis=1)
        error = max(error, float((diff / scale).max()))
    return error


##########
# Tables #
##########


@attrs.define(kw_only=True, frozen=True, eq=False)
class RadialProfile:
    """Tabulated radial profile g of a radial function and its radial derivatives
    g1, g2, g3, each interpolated by a cubic Hermite spline that carries the next
    derivative"""

    r: np.ndarray
    g: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    _splines: ty.Tuple[CubicHermiteSpline, ...] = attrs.field(init=False)

    @_splines.default
    def _make_splines(self):
        return (
            CubicHermiteSpline(self.r, self.g, self.g1, extrapolate=False),
            CubicHermiteSpline(self.r, self.g1, self.g2, extrapolate=False),
            CubicHermiteSpline(self.r, self.g2, self.g3, extrapolate=False),
        )

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    def __add__(self, other: "RadialProfile") -> "RadialProfile":
        return RadialProfile(
            r=self.r,
            g=self.g + other.g,
            g1=self.g1 + other.g1,
            g2=self.g2 + other.g2,
            g3=self.g3 + other.g3,
        )

    def __call__(self, r, order: int = 0) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if r.size and r.max() > self.r_max:
            raise OutOfTableError(
                f"radius {r.max():.6g} exceeds the table range [0, {self.r_max:.6g}]"
            )
        return self._splines[order](r)

    def ratio(self, r) -> np.ndarray:
        "g1(r)/r, continued by g2(0) at the origin"
        r = np.asarray(r, dtype=float)
        tiny = r <= 1e-12 * self.r_max
        safe = np.where(tiny, 1.0, r)
        return np.where(tiny, self.g2[0], self(r, 1) / safe)


@attrs.define(kw_only=True, frozen=True, eq=False)
class MollifiedDensity:
    """The mollified density E^ε = ρ_ε ∗ (E₁ + E_p) of a Euclidean model

    Parameters
    ----------
    eps : float
        mollification radius
    n : int
        spatial dimension
    p : float
        growth exponent
    one : RadialProfile
        radial profile of E_{1,ε}
    power : RadialProfile
        radial profile of E_{p,ε}
    quad_spec : QuadSpec
        the quadrature settings that passed the refinement test
    quad_error : float
        the estimated relative quadrature error of the table
    """

    eps: float
    n: int
    p: float
    one: RadialProfile
    power: RadialProfile
    quad_spec: QuadSpec
    quad_error: float = 0.0
    total: RadialProfile = attrs.field(init=False)

    @total.default
    def _sum_profiles(self):
        return self.one + self.power

    @property
    def r_grid(self) -> np.ndarray:
        return self.one.r

    @property
    def r_max(self) -> float:
        return self.one.r_max

    @property
    def g(self) -> np.ndarray:
        return self.total.g

    @property
    def g1(self) -> np.ndarray:
        return self.total.g1

    @property
    def g2(self) -> np.ndarray:
        return self.total.g2

    def profile(self, part: str = "total") -> RadialProfile:
        if part not in PARTS:
            raise ValueError(f"part must be one of {PARTS} (got '{part}')")
        return getattr(self, part)

    def value(self, z, part: str = "total") -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.profile(part)(np.linalg.norm(z, axis=-1))

    def gradient(self, z, part: str = "total") -> np.ndarray:
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1)
        return self.profile(part).ratio(r)[..., None] * z

    def hessian(self, z, part: str = "total") -> np.ndarray:
        z = np.asarray(z, dtype=float)
        prof = self.profile(part)
        r = np.linalg.norm(z, axis=-1)
        radial = prof(r, 2)[..., None, None]
        tangential = prof.ratio(r)[..., None, None]
        safe = np.where(r > 0, r, 1.0)[..., None]
        unit = np.where(r[..., None] > 0, z / safe, 0.0)
        proj = unit[..., :, None] * unit[..., None, :]
        return radial * proj + tangential * (np.eye(self.n) - proj)

    def spectrum(self, r, part: str = "total") -> ty.Tuple[np.ndarray, np.ndarray]:
        """Radial and tangential eigenvalues of ∇²E^ε at radius r"""
        prof = self.profile(part)
        return prof(r, 2), prof.ratio(r)


def mollify_density(
    model: EnergyModel, eps: float, quad_spec: ty.Optional[QuadSpec] = None
) -> MollifiedDensity:
    """Tabulates E^ε = ρ_ε ∗ E on [0, r_max] with spacing ≤ ε/16

    Parameters
    ----------
    model : EnergyModel
        a Euclidean density model
    eps : float
        mollification radius in (0, 1)
    quad_spec : QuadSpec, optional
        quadrature/tabulation settings

    Returns
    -------
    MollifiedDensity
        the tabulated density

    Raises
    ------
    QuadratureError
        if doubling the quadrature nodes `max_refinements` times does not bring
        successive tables within the requested tolerance
    """
    if quad_spec is None:
        quad_spec = QuadSpec()
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"eps must lie in (0, 1) (got {eps})")
    if model.density != "euclidean":
        raise ConfigError(
            "only the Euclidean density is radial and can be mollified into a table"
        )
    spacing = quad_spec.spacing_fraction * eps
    count = int(np.ceil(quad_spec.r_max / spacing)) + 1
    radii = np.linspace(0.0, quad_spec.r_max, count)
    norm = mollifier_normalisation(model.n)
    probe = _probe_radii(radii, eps)
    spec = quad_spec
    coarse = _radial_profiles(probe, eps, model.n, model.p, spec, norm)
    for refinement in range(quad_spec.max_refinements + 1):
        fine_spec = spec.refined()
        fine = _radial_profiles(probe, eps, model.n, model.p, fine_spec, norm)
        error = _quadrature_error(coarse, fine)
        logger.debug(
            f"mollify eps={eps}: {spec.radial_nodes}x{spec.angular_nodes} nodes, "
            f"refinement error {error:.3g}"
        )
        if error <= quad_spec.tol:
            break
        if refinement == quad_spec.max_refinements:
            raise QuadratureError(
                f"radial quadrature for eps={eps} did not reach tol={quad_spec.tol} "
                f"after {quad_spec.max_refinements} refinements (error {error:.3g})"
            )
        spec, coarse = fine_spec, fine
    tables = _radial_profiles(radii, eps, model.n, model.p, spec, norm)
    logger.info(
        f"tabulated E^eps for eps={eps}, n={model.n}, p={model.p}: {count} radii "
        f"up to {quad_spec.r_max}"
    )
    return MollifiedDensity(
        eps=eps,
        n=model.n,
        p=model.p,
        one=RadialProfile(r=radii, **dict(zip(_COLUMNS, tables["one"]))),
        power=RadialProfile(r=radii, **dict(zip(_COLUMNS, tables["power"]))),
        quad_spec=spec,
        quad_error=error,
    )


def eval_mollified(md: MollifiedDensity, z, part: str = "total") -> np.ndarray:
    return md.value(z, part)


def grad_mollified(md: MollifiedDensity, z, part: str = "total") -> np.ndarray:
    """∇E^ε(z) = g1(|z|) z/|z|, the zero vector at the origin

    Raises
    ------
    OutOfTableError
        if |z| exceeds the tabulated range
    """
    return md.gradient(z, part)


def hess_mollified(md: MollifiedDensity, z, part: str = "total") -> np.ndarray:
    """∇²E^ε(z) = g2 P_z + (g1/r)(id − P_z), g2(0) id at the origin

    Raises
    ------
    OutOfTableError
        if |z| exceeds the tabulated range
    """
    return md.hessian(z, part)


def jensen_gap(
    md: MollifiedDensity, radii: ty.Optional[np.ndarray] = None
) -> np.ndarray:
    """E^ε(r e₁) − E(r e₁) at the given radii (the table radii by default), which is
    nonnegative for a convex E and decays linearly in ε at fixed r"""
    if radii is None:
        radii = md.r_grid
    radii = np.asarray(radii, dtype=float)
    return md.total(radii) - (radii + radii**md.p / md.p)
