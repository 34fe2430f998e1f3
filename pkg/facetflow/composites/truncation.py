"""
Truncated gradients and the regularised gradient moduli V_ε and W_ε
"""
from __future__ import annotations
import typing as ty
import attrs
import numpy as np
from facetflow.exceptions import ConfigError, HypothesisError

MODES = ("exact", "regularized")
HOLDER_REGIME_RTOL = 1e-12


@attrs.define(kw_only=True, frozen=True)
class TruncationParams:
    """Parameters of the truncation maps

    Parameters
    ----------
    delta : float
        truncation radius δ ∈ (0, 1)
    eps : float
        regularisation ε ≥ 0 of the map 𝒢_{2δ,ε}
    """

    delta: float = attrs.field(converter=float)
    eps: float = attrs.field(default=0.0, converter=float)

    @delta.validator
    def _check_delta(self, attribute, value):
        if not 0.0 < value < 1.0:
            raise ConfigError(f"delta must lie in (0, 1) (got {value})")

    @eps.validator
    def _check_eps(self, attribute, value):
        if value < 0:
            raise ConfigError(f"eps must be nonnegative (got {value})")

    def require_holder_regime(self):
        """Raises HypothesisError unless ε ≤ δ/8, the regime in which the truncated
        gradient 𝒢_{2δ,ε} is Hölder continuous

        The endpoint ε = δ/8 is admitted up to rounding, so that δ = 0.1 can be
        paired with ε = 0.0125.
        """
        bound = self.delta / 8.0
        if self.eps > bound * (1.0 + HOLDER_REGIME_RTOL):
            raise HypothesisError(f"eps ({self.eps}) must not exceed delta/8 ({bound})")


def truncate_gradient(z, params: TruncationParams, mode: str = "exact") -> np.ndarray:
    """Applies 𝒢_δ(z) = (|z| − δ)_+ z/|z| ("exact") or
    𝒢_{2δ,ε}(z) = (√(ε² + |z|²) − 2δ)_+ z/|z| ("regularized") to the vectors along
    the last axis of `z`; the origin is mapped to itself"""
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES} (got '{mode}')")
    z = np.asarray(z, dtype=float)
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    if mode == "exact":
        length = np.maximum(norm - params.delta, 0.0)
    else:
        length = np.maximum(np.sqrt(params.eps**2 + norm**2) - 2.0 * params.delta, 0.0)
    safe = np.where(norm > 0, norm, 1.0)
    return np.where(norm > 0, length * z / safe, 0.0)


def v_eps_field(grad, eps: float) -> np.ndarray:
    "V_ε = √(ε² + |∇u|²) of a gradient field whose last axis holds the components"
    grad = np.asarray(grad, dtype=float)
    return np.sqrt(eps**2 + np.sum(grad * grad, axis=-1))


def w_components(grad) -> np.ndarray:
    "w_j = (∂_j u − 1)_+ − (−∂_j u − 1)_+"
    grad = np.asarray(grad, dtype=float)
    return np.sign(grad) * np.maximum(np.abs(grad) - 1.0, 0.0)


def w_eps_field(grad) -> np.ndarray:
    "W_ε = √(1 + Σ_j w_j²)"
    w = w_components(grad)
    return np.sqrt(1.0 + np.sum(w * w, axis=-1))


def compatibility_constant(n: int) -> float:
    """c_n = √n + 1, for which V_ε ≤ c_n W_ε ≤ c_n(1 + V_ε) whenever ε ≤ 0.2 and
    n ≤ 3"""
    return float(np.sqrt(n) + 1.0)


def vw_margins(grad, eps: float) -> ty.Dict[str, np.ndarray]:
    """Pointwise margins of the compatibility chain between V_ε and W_ε

    Returns
    -------
    dict[str, np.ndarray]
        "lower": c_n W − V, "upper": c_n(1 + V) − c_n W, and "facet": √2 V − W on
        {|∇u| > 1} (+inf elsewhere)
    """
    grad = np.asarray(grad, dtype=float)
    c_n = compatibility_constant(grad.shape[-1])
    V = v_eps_field(grad, eps)
    W = w_eps_field(grad)
    steep = np.linalg.norm(grad, axis=-1) > 1.0
    return {
        "lower": c_n * W - V,
        "upper": c_n * (1.0 + V) - c_n * W,
        "facet": np.where(steep, np.sqrt(2.0) * V - W, np.inf),
    }
