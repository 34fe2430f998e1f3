"""
Composite test functions ψ_{α,M}, ψ̃_{α,M} and their weighted primitives Ψ
"""
from __future__ import annotations
import typing as ty
import logging
import attrs
import numpy as np
from facetflow.exceptions import ConfigError
from facetflow.energy.structure import InequalityResult, StructureReport

logger = logging.getLogger("facetflow")

VARIANTS = ("plain", "tilde")


@attrs.define(kw_only=True, frozen=True)
class PsiSpec:
    """Parameters of a composite function

    Parameters
    ----------
    variant : str
        "plain" for ψ(σ) = (σ∧M)^α, "tilde" for ψ̃(σ) = σ^α(1−1/σ)_+ capped at its
        value at M
    alpha : float
        the exponent α ≥ 0
    M : float
        truncation level M > 1
    """

    variant: str = attrs.field(default="plain")
    alpha: float = attrs.field(converter=float)
    M: float = attrs.field(converter=float)

    @variant.validator
    def _check_variant(self, attribute, value):
        if value not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS} (got '{value}')")

    @alpha.validator
    def _check_alpha(self, attribute, value):
        if value < 0:
            raise ConfigError(f"alpha must be nonnegative (got {value})")

    @M.validator
    def _check_M(self, attribute, value):
        if not value > 1:
            raise ConfigError(f"M must exceed 1 (got {value})")

    @property
    def kinks(self) -> ty.Tuple[float, ...]:
        return (self.M,) if self.variant == "plain" else (1.0, self.M)

    def as_variant(self, variant: str) -> PsiSpec:
        return attrs.evolve(self, variant=variant)


def _tilde(sigma: np.ndarray, alpha: float) -> np.ndarray:
    "σ^α(1 − 1/σ)_+ = σ^α − σ^{α−1} for σ > 1, zero otherwise"
    above = sigma > 1.0
    safe = np.where(above, sigma, 2.0)
    return np.where(above, safe**alpha - safe ** (alpha - 1.0), 0.0)


def _tilde_prime(sigma: np.ndarray, alpha: float) -> np.ndarray:
    above = sigma > 1.0
    safe = np.where(above, sigma, 2.0)
    value = alpha * safe ** (alpha - 1.0) - (alpha - 1.0) * safe ** (alpha - 2.0)
    return np.where(above, value, 0.0)


def psi_eval(spec: PsiSpec, sigma) -> np.ndarray:
    """Evaluates ψ_{α,M} or ψ̃_{α,M} at σ ≥ 0"""
    sigma = np.asarray(sigma, dtype=float)
    capped = np.minimum(sigma, spec.M)
    if spec.variant == "plain":
        return capped**spec.alpha
    return _tilde(capped, spec.alpha)


def psi_prime(spec: PsiSpec, sigma) -> np.ndarray:
    """Derivative of ψ in σ; the left derivative at the kinks {1, M}

    For α < 1 the plain derivative is infinite at σ = 0.
    """
    sigma = np.asarray(sigma, dtype=float)
    below = sigma <= spec.M
    if spec.variant == "plain":
        with np.errstate(divide="ignore"):
            value = spec.alpha * sigma ** (spec.alpha - 1.0) if spec.alpha else 0.0
        return np.where(below, value, 0.0)
    return np.where(below, _tilde_prime(sigma, spec.alpha), 0.0)


def Psi_eval(spec: PsiSpec, sigma) -> np.ndarray:
    """Ψ(σ) = ∫₀^σ τ ψ(τ) dτ in closed form

    Parameters
    ----------
    spec : PsiSpec
        the composite function
    sigma : array-like
        upper limits of integration, σ ≥ 0

    Returns
    -------
    np.ndarray
        the primitive, exact to rounding
    """
    sigma = np.asarray(sigma, dtype=float)
    M = spec.M
    # below M the primitive coincides with that of the untruncated function, above
    # it ψ is constant
    outer = Psi_limit(spec, M) + psi_eval(spec, M) * (sigma**2 - M**2) / 2.0
    return np.where(sigma <= M, Psi_limit(spec, sigma), outer)


def psi_limit(spec: PsiSpec, sigma) -> np.ndarray:
    "The pointwise limit of ψ_{α,M} as M → ∞"
    sigma = np.asarray(sigma, dtype=float)
    if spec.variant == "plain":
        return sigma**spec.alpha
    return _tilde(sigma, spec.alpha)


def Psi_limit(spec: PsiSpec, sigma) -> np.ndarray:
    "The pointwise limit of Ψ_{α,M} as M → ∞"
    sigma = np.asarray(sigma, dtype=float)
    a = spec.alpha
    if spec.variant == "plain":
        return sigma ** (a + 2.0) / (a + 2.0)
    capped = np.maximum(sigma, 1.0)
    return (capped ** (a + 2.0) - 1.0) / (a + 2.0) - (capped ** (a + 1.0) - 1.0) / (
        a + 1.0
    )


def monotone_convergence(
    spec: PsiSpec, sigma, levels: ty.Sequence[float]
) -> ty.Dict[str, np.ndarray]:
    """ψ_{α,M}(σ) and Ψ_{α,M}(σ) along increasing truncation levels M, followed by
    their limits. Both rows are nondecreasing in M"""
    levels = sorted(levels)
    specs = [attrs.evolve(spec, M=M) for M in levels]
    psi = [psi_eval(s, sigma) for s in specs] + [psi_limit(spec, sigma)]
    Psi = [Psi_eval(s, sigma) for s in specs] + [Psi_limit(spec, sigma)]
    return {"levels": np.asarray(levels), "psi": np.array(psi), "Psi": np.array(Psi)}


def _relative(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return (rhs - lhs) / np.maximum(1.0, np.abs(rhs))


def check_composite_inequalities(
    spec: PsiSpec,
    r: float,
    sigmas,
    p: float,
    tolerance: float = 1e-12,
) -> StructureReport:
    """Evaluates the inequalities satisfied by the composite functions with the α and
    M of `spec` at the sample `sigmas`

    * power_product: ψ^{1−r}(ψ')^r σ^r ≤ α^r ψ, equality for σ < M
    * tilde_derivative: ψ̃ + σψ̃' ≤ (α+1)ψ χ_{σ>1}
    * limit_domination: σ^{α+2} ≤ 1 + σ^{α+p} + σ² lim_M ψ̃_{α,M}(σ)
    * primitive_bound: Ψ ≤ σ²ψ for both variants

    The form with the exponents of ψ and ψ' exchanged is recorded in the report
    parameters as the number of samples at which it fails.

    Parameters
    ----------
    spec : PsiSpec
        α and M of the functions (the variant is ignored)
    r : float
        exponent of the product inequality, r > 1
    sigmas : array-like
        sample points; points at the kinks {1, M} are dropped
    p : float
        growth exponent entering the domination inequality, p > 1
    tolerance : float
        margins are relative, (RHS − LHS)/max(1, |RHS|), and pass at ≥ −tolerance

    Returns
    -------
    StructureReport
        one result per inequality
    """
    if not r > 1:
        raise ConfigError(f"r must exceed 1 (got {r})")
    if not p > 1:
        raise ConfigError(f"p must exceed 1 (got {p})")
    sigmas = np.asarray(sigmas, dtype=float)
    dropped = np.isclose(sigmas[:, None], [1.0, spec.M], rtol=0, atol=1e-12).any(1)
    dropped |= sigmas <= 0.0
    if dropped.any():
        logger.debug(f"dropping {int(dropped.sum())} samples at 0 or the kinks 1, M")
    sigmas = sigmas[~dropped]
    plain, tilde = spec.as_variant("plain"), spec.as_variant("tilde")
    a = spec.alpha
    psi, dpsi = psi_eval(plain, sigmas), psi_prime(plain, sigmas)
    tpsi, dtpsi = psi_eval(tilde, sigmas), psi_prime(tilde, sigmas)
    with np.errstate(divide="ignore", invalid="ignore"):
        product = psi ** (1.0 - r) * dpsi**r * sigmas**r
        literal = psi**r * dpsi ** (1.0 - r) * sigmas**r
    product = np.where(dpsi > 0, product, 0.0)
    literal = np.where(dpsi > 0, literal, 0.0)
    literal_failures = int(np.sum(_relative(literal, a**r * psi) < -tolerance))
    if literal_failures:
        logger.info(
            f"exchanged-exponent form of the product inequality fails at "
            f"{literal_failures} of {sigmas.size} samples"
        )
    points = sigmas[:, None]
    results = [
        InequalityResult.from_margins(
            "power_product", _relative(product, a**r * psi), points, tolerance
        ),
        InequalityResult.from_margins(
            "tilde_derivative",
            _relative(tpsi + sigmas * dtpsi, (a + 1.0) * psi * (sigmas > 1.0)),
            points,
            tolerance,
        ),
        InequalityResult.from_margins(
            "limit_domination",
            _relative(
                sigmas ** (a + 2.0),
                1.0 + sigmas ** (a + p) + sigmas**2 * psi_limit(tilde, sigmas),
            ),
            points,
            tolerance,
        ),
        InequalityResult.from_margins(
            "primitive_bound",
            np.minimum(
                _relative(Psi_eval(plain, sigmas), sigmas**2 * psi),
                _relative(Psi_eval(tilde, sigmas), sigmas**2 * tpsi),
            ),
            points,
            tolerance,
        ),
    ]
    return StructureReport(
        subject="composites",
        params={
            "alpha": a,
            "M": spec.M,
            "r": r,
            "p": p,
            "literal_form_failures": literal_failures,
        },
        results=results,
    )
