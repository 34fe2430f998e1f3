"""
Exact energy densities of the (1,p)-Laplace operator
"""
from __future__ import annotations
import typing as ty
import logging
import attrs
import numpy as np
from facetflow.exceptions import ConfigError

logger = logging.getLogger("facetflow")

DENSITY_KINDS = ("euclidean", "anisotropic")


def _as_matrix(value) -> ty.Optional[ty.Tuple[ty.Tuple[float, ...], ...]]:
    if value is None:
        return None
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        size = int(round(np.sqrt(arr.size)))
        if size * size != arr.size:
            raise ConfigError(
                f"anisotropy with {arr.size} entries is not a square matrix"
            )
        arr = arr.reshape(size, size)
    return tuple(tuple(float(x) for x in row) for row in arr)


def _positive(instance, attribute, value):
    if not value > 0:
        raise ConfigError(f"{attribute.name} must be positive (got {value})")


def _exceeds_one(instance, attribute, value):
    if not value > 1:
        raise ConfigError(f"p must exceed 1 (got {value})")


@attrs.define(kw_only=True, frozen=True)
class EnergyModel:
    """Parameters of the density E = E₁ + E_p, E₁ positively one-homogeneous and
    E_p(z) = |z|^p/p

    Parameters
    ----------
    n : int
        spatial dimension
    p : float
        growth exponent of the viscous part, p > 1
    lam : float
        lower ellipticity constant λ
    Lam : float
        upper ellipticity constant Λ ≥ λ
    K : float
        bound on the one-homogeneous part, |∇E₁| ≤ K
    density : str
        "euclidean" (E₁(z) = |z|) or "anisotropic" (E₁(z) = √(zᵀAz))
    anisotropy : tuple[tuple[float, ...], ...], optional
        the symmetric positive definite matrix A of the anisotropic density
    """

    n: int = attrs.field(converter=int)
    p: float = attrs.field(converter=float, validator=_exceeds_one)
    lam: float = attrs.field(converter=float, validator=_positive)
    Lam: float = attrs.field(default=2.0, converter=float)
    K: float = attrs.field(default=2.0, converter=float, validator=_positive)
    density: str = attrs.field(default="euclidean")
    anisotropy: ty.Optional[ty.Tuple[ty.Tuple[float, ...], ...]] = attrs.field(
        default=None, converter=_as_matrix
    )

    @lam.default
    def _lam_default(self):
        return min(self.p - 1.0, 1.0) / 2.0

    @n.validator
    def _check_n(self, attribute, value):
        if value < 1:
            raise ConfigError(f"dimension n must be at least 1 (got {value})")

    @Lam.validator
    def _check_Lam(self, attribute, value):
        if value < self.lam:
            raise ConfigError(f"Lambda ({value}) must not be below lambda ({self.lam})")

    @density.validator
    def _check_density(self, attribute, value):
        if value not in DENSITY_KINDS:
            raise ConfigError(
                f"density must be one of {DENSITY_KINDS} (got '{value}')"
            )

    @anisotropy.validator
    def _check_anisotropy(self, attribute, value):
        if self.density == "euclidean":
            return
        if value is None:
            raise ConfigError("an anisotropic density requires an anisotropy matrix")
        A = np.asarray(value)
        if A.shape != (self.n, self.n):
            raise ConfigError(
                f"anisotropy must be {self.n}x{self.n} (got {A.shape[0]}x{A.shape[1]})"
            )
        if not np.allclose(A, A.T):
            raise ConfigError("anisotropy matrix must be symmetric")
        if np.linalg.eigvalsh(A).min() <= 0:
            raise ConfigError("anisotropy matrix must be positive definite")

    @property
    def A(self) -> np.ndarray:
        if self.density == "euclidean":
            return np.eye(self.n)
        return np.array(self.anisotropy, dtype=float)

    @property
    def critical_p(self) -> float:
        "2n/(n+2), the upper end of the subcritical range"
        return 2.0 * self.n / (self.n + 2.0)

    @property
    def subcritical(self) -> bool:
        return self.n >= 3 and self.p <= self.critical_p

    @property
    def K0(self) -> float:
        """Smallest K for which |∂E₁| ≤ K and ∇²E₁(z) ≤ (K/|z|) id hold for the
        exact density"""
        if self.density == "euclidean":
            return 1.0
        eig = np.linalg.eigvalsh(self.A)
        return float(max(np.sqrt(eig[-1]), eig[-1] / np.sqrt(eig[0])))

    ##################
    # E₁ derivatives #
    ##################

    def e1(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.density == "euclidean":
            return np.linalg.norm(z, axis=-1)
        return np.sqrt(np.einsum("...i,ij,...j->...", z, self.A, z))

    def grad_e1(self, z) -> np.ndarray:
        "∇E₁(z) off the origin; the zero vector is returned at z = 0"
        z = np.asarray(z, dtype=float)
        Az = z @ self.A
        norm = self.e1(z)[..., None]
        safe = np.where(norm > 0, norm, 1.0)
        return np.where(norm > 0, Az / safe, 0.0)

    def hess_e1(self, z) -> np.ndarray:
        "∇²E₁(z) for z ≠ 0 (infinite at the origin, returned as NaN there)"
        z = np.asarray(z, dtype=float)
        Az = z @ self.A
        norm = self.e1(z)[..., None, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            hess = self.A / norm - np.einsum("...i,...j->...ij", Az, Az) / norm**3
        return np.where(norm > 0, hess, np.nan)

    ##################
    # E_p derivatives #
    ##################

    def ep(self, z) -> np.ndarray:
        return np.linalg.norm(np.asarray(z, dtype=float), axis=-1) ** self.p / self.p

    def grad_ep(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            grad = r ** (self.p - 2.0) * z
        return np.where(r > 0, grad, 0.0)

    def hess_ep(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1)[..., None, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            unit = z[..., :, None] * z[..., None, :] / r**2
            hess = r ** (self.p - 2.0) * (np.eye(self.n) + (self.p - 2.0) * unit)
        return np.where(r > 0, hess, np.nan)


@attrs.define(kw_only=True, frozen=True)
class SubgradientSet:
    """The subdifferential ∂E₁(z): a single vector off the origin, the dual unit
    ball {ζ : ζᵀ M ζ ≤ radius²} at the origin

    Parameters
    ----------
    kind : str
        "singleton" or "dual_ball"
    vector : tuple[float, ...], optional
        the unique subgradient of a singleton
    radius : float
        radius of the dual ball
    norm_matrix : tuple[tuple[float, ...], ...], optional
        matrix M describing the dual norm (the inverse of the anisotropy)
    """

    kind: str = attrs.field(validator=attrs.validators.in_(["singleton", "dual_ball"]))
    vector: ty.Optional[ty.Tuple[float, ...]] = attrs.field(
        default=None, converter=attrs.converters.optional(tuple)
    )
    radius: float = 1.0
    norm_matrix: ty.Optional[ty.Tuple[ty.Tuple[float, ...], ...]] = attrs.field(
        default=None, converter=_as_matrix
    )

    @property
    def max_norm(self) -> float:
        "Largest Euclidean norm of a member"
        if self.kind == "singleton":
            return float(np.linalg.norm(self.vector))
        M = np.asarray(self.norm_matrix)
        return float(self.radius / np.sqrt(np.linalg.eigvalsh(M)[0]))

    def contains(self, zeta, tol: float = 1e-12) -> bool:
        zeta = np.asarray(zeta, dtype=float)
        if self.kind == "singleton":
            return bool(np.allclose(zeta, self.vector, atol=tol))
        M = np.asarray(self.norm_matrix)
        return bool(zeta @ M @ zeta <= self.radius**2 * (1 + tol))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draws members of the set, half of them on the boundary of the dual ball"""
        if self.kind == "singleton":
            return np.tile(np.asarray(self.vector), (count, 1))
        M = np.asarray(self.norm_matrix)
        n = M.shape[0]
        directions = rng.standard_normal((count, n))
        scale = np.sqrt(np.einsum("ki,ij,kj->k", directions, M, directions))
        boundary = directions / scale[:, None] * self.radius
        shrink = np.ones(count)
        shrink[count // 2 :] = rng.uniform(0.0, 1.0, count - count // 2)
        return boundary * shrink[:, None]


def eval_energy(model: EnergyModel, z) -> np.ndarray:
    """Evaluates E(z) = E₁(z) + |z|^p/p

    Parameters
    ----------
    model : EnergyModel
        the density parameters
    z : array-like, shape (..., n)
        points to evaluate at

    Returns
    -------
    np.ndarray
        the density at every point, nonnegative and zero only at the origin
    """
    return model.e1(z) + model.ep(z)


def subdifferential_E1(model: EnergyModel, z) -> SubgradientSet:
    "∂E₁(z); every member ζ satisfies ⟨ζ|z⟩ = E₁(z) and |ζ| ≤ K"
    z = np.asarray(z, dtype=float)
    if np.any(z != 0):
        return SubgradientSet(kind="singleton", vector=model.grad_e1(z))
    return SubgradientSet(
        kind="dual_ball", radius=1.0, norm_matrix=np.linalg.inv(model.A)
    )


def grad_energy(model: EnergyModel, z) -> np.ndarray:
    return model.grad_e1(z) + model.grad_ep(z)


def hess_energy(model: EnergyModel, z) -> np.ndarray:
    return model.hess_e1(z) + model.hess_ep(z)


def limit_flux(model: EnergyModel, z) -> np.ndarray:
    """The pointwise limit A₀ of ∇E^ε as ε → 0: ∇E(z) off the origin and
    (ρ∗∇E₁)(0) at the origin, which vanishes for a radial mollifier"""
    return grad_energy(model, z)


def ellipticity_ratio(model: EnergyModel, z) -> np.ndarray:
    """Ratio of the largest to the smallest eigenvalue of ∇²E(z), z ≠ 0.

    For the Euclidean density and p ≤ 2 this equals (1 + |z|^{1−p})/(p−1), which
    blows up on the facet."""
    eig = np.linalg.eigvalsh(hess_energy(model, z))
    return eig[..., -1] / eig[..., 0]
