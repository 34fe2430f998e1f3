"""
Critical exponents and Moser ladders of the subcritical regime
"""
from __future__ import annotations
import typing as ty
from fractions import Fraction
import attrs
import numpy as np
from facetflow.exceptions import HypothesisError
from facetflow.energy.model import EnergyModel


def _fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    # str() keeps decimal inputs such as 1.1 exact
    return Fraction(str(value))


@attrs.define(kw_only=True, frozen=True)
class MoserLadder:
    """Exponents of one Moser iteration

    Parameters
    ----------
    context : str
        "u" (local boundedness of u) or "V" (boundedness of the gradient modulus)
    kappa : Fraction
        gain factor κ > 1 of one step
    gamma : Fraction
        exponent γ of the Sobolev-type embedding used in one step
    mu : Fraction
        distance μ > 0 of the starting exponent from its critical value
    critical : Fraction
        the critical exponent the ladder is anchored on
    """

    context: str
    kappa: Fraction
    gamma: Fraction
    mu: Fraction
    critical: Fraction

    def exponent(self, level: int) -> Fraction:
        "q_l = κ^l μ + critical"
        return self.kappa**level * self.mu + self.critical

    def exponents(self, levels: int) -> np.ndarray:
        return np.array([float(self.exponent(k)) for k in range(levels)])


@attrs.define(kw_only=True, frozen=True)
class ExponentBook:
    """Exact critical exponents s_c = n(2−p)/p and q_c = n(2−p)/2 of a model

    Parameters
    ----------
    n : int
        spatial dimension
    p : Fraction
        growth exponent
    s : Fraction, optional
        integrability exponent of the solution
    q : Fraction, optional
        integrability exponent of the gradient modulus
    """

    n: int
    p: Fraction = attrs.field(converter=_fraction)
    s: ty.Optional[Fraction] = attrs.field(
        default=None, converter=attrs.converters.optional(_fraction)
    )
    q: ty.Optional[Fraction] = attrs.field(
        default=None, converter=attrs.converters.optional(_fraction)
    )

    @classmethod
    def for_model(cls, model: EnergyModel, s=None, q=None) -> ExponentBook:
        return cls(n=model.n, p=model.p, s=s, q=q)

    @property
    def s_c(self) -> Fraction:
        return self.n * (2 - self.p) / self.p

    @property
    def q_c(self) -> Fraction:
        return self.n * (2 - self.p) / 2

    @property
    def subcritical(self) -> bool:
        return self.n >= 3 and self.p <= Fraction(2 * self.n, self.n + 2)

    def require_s(self) -> Fraction:
        if self.s is None:
            raise HypothesisError("an integrability exponent s is required")
        if self.s <= self.s_c:
            raise HypothesisError(
                f"s = {float(self.s):g} must exceed s_c = {float(self.s_c):g}"
            )
        return self.s

    def require_q(self, minimum: ty.Optional[float] = None) -> Fraction:
        if self.q is None:
            raise HypothesisError("an integrability exponent q is required")
        if self.q <= self.q_c:
            raise HypothesisError(
                f"q = {float(self.q):g} must exceed q_c = {float(self.q_c):g}"
            )
        if minimum is not None and self.q < _fraction(minimum):
            raise HypothesisError(f"q = {float(self.q):g} must be at least {minimum}")
        return self.q

    def u_ladder(self) -> MoserLadder:
        "κ = 1 + p/n, γ = p(1 + 1/(n+p)), μ = s − s_c"
        s = self.require_s()
        return MoserLadder(
            context="u",
            kappa=1 + self.p / self.n,
            gamma=self.p * (1 + 1 / (self.n + self.p)),
            mu=s - self.s_c,
            critical=self.s_c,
        )

    def v_ladder(self) -> MoserLadder:
        "κ = 1 + 2/n, γ = 2(1 + 1/(n+2)), μ = q − q_c"
        q = self.require_q()
        return MoserLadder(
            context="V",
            kappa=1 + Fraction(2, self.n),
            gamma=2 * (1 + Fraction(1, self.n + 2)),
            mu=q - self.q_c,
            critical=self.q_c,
        )
