"""
The two iteration lemmata as executable checks, plus seeded fuzzers drawing
admissible instances of each
"""
from __future__ import annotations
import typing as ty
import logging
import attrs
import numpy as np
from scipy.optimize import minimize_scalar
from facetflow.exceptions import HypothesisError
from facetflow.composites import MoserLadder
from .report import DiagnosticsReport

logger = logging.getLogger("facetflow")

BOUND_SLACK = 1e-9
PAIR_SLACK = 1e-12


#########
# Moser #
#########


@attrs.define(kw_only=True, frozen=True)
class IterationInstance:
    """An instance of the recursion Y_{l+1}^{p_{l+1}} ≤ (A B^l Y_l^{p_l})^κ with
    exponents p_l = μ(κ^l − 1) + p₀

    Parameters
    ----------
    A : float
        constant factor, ≥ 1
    B : float
        geometric factor, ≥ 1
    kappa : float
        gain of one step, > 1
    mu : float
        growth rate of the exponents, > 0
    p0 : float
        first exponent, ≥ 1
    Y0 : float
        starting value, ≥ 0
    depth : int
        number of steps L the recursion is iterated
    """

    A: float = attrs.field(converter=float)
    B: float = attrs.field(converter=float)
    kappa: float = attrs.field(converter=float)
    mu: float = attrs.field(converter=float)
    p0: float = attrs.field(converter=float)
    Y0: float = attrs.field(converter=float)
    depth: int = attrs.field(default=40, converter=int)

    @classmethod
    def from_ladder(
        cls, ladder: MoserLadder, A: float, B: float, Y0: float, depth: int = 40
    ) -> IterationInstance:
        "The recursion run along the exponents of a Moser ladder"
        return cls(
            A=A,
            B=B,
            kappa=float(ladder.kappa),
            mu=float(ladder.mu),
            p0=float(ladder.exponent(0)),
            Y0=Y0,
            depth=depth,
        )

    def exponent(self, level: int) -> float:
        return self.mu * (self.kappa**level - 1.0) + self.p0

    def require_admissible(self):
        problems = []
        if not (self.A >= 1.0 and self.B >= 1.0):
            problems.append(f"A ({self.A}) and B ({self.B}) must be at least 1")
        if not self.kappa > 1.0:
            problems.append(f"kappa ({self.kappa}) must exceed 1")
        if not self.mu > 0.0:
            problems.append(f"mu ({self.mu}) must be positive")
        if not self.p0 >= 1.0:
            problems.append(f"p0 ({self.p0}) must be at least 1")
        if not self.Y0 >= 0.0:
            problems.append(f"Y0 ({self.Y0}) must be nonnegative")
        if self.depth < 0:
            problems.append(f"depth ({self.depth}) must be nonnegative")
        if problems:
            raise HypothesisError("inadmissible Moser instance: " + "; ".join(problems))

    @property
    def kappa_prime(self) -> float:
        return self.kappa / (self.kappa - 1.0)

    def log_bound(self) -> float:
        "log of A^{κ'/μ} B^{κ'²/μ} Y₀^{p₀/μ}"
        k = self.kappa_prime
        return (
            k / self.mu * np.log(self.A)
            + k**2 / self.mu * np.log(self.B)
            + self.p0 / self.mu * np.log(self.Y0)
        )


def _log_iterate(inst: IterationInstance) -> float:
    "log Y_L of the recursion iterated with equality"
    log_A, log_B = np.log(inst.A), np.log(inst.B)
    # z_l = p_l log Y_l
    z = inst.p0 * np.log(inst.Y0)
    for level in range(inst.depth):
        z = inst.kappa * (log_A + level * log_B + z)
    return float(z / inst.exponent(inst.depth))


def moser_sequence(inst: IterationInstance) -> ty.Tuple[float, float, bool]:
    """Iterates the recursion with equality to depth L

    Returns
    -------
    Y_L : float
        the last iterate
    bound : float
        the limit bound A^{κ'/μ} B^{κ'²/μ} Y₀^{p₀/μ}, κ' = κ/(κ − 1)
    passed : bool
        whether Y_L ≤ bound·(1 + 1e−9)

    Raises
    ------
    HypothesisError
        if the instance is not admissible
    """
    inst.require_admissible()
    if inst.Y0 == 0.0:
        return 0.0, 0.0, True
    log_Y = _log_iterate(inst)
    log_bound = inst.log_bound()
    with np.errstate(over="ignore"):
        Y_L, bound = float(np.exp(log_Y)), float(np.exp(log_bound))
    return Y_L, bound, bool(log_Y <= log_bound + np.log1p(BOUND_SLACK))


def random_moser_instance(
    rng: np.random.Generator, depth: int = 40
) -> IterationInstance:
    """Draws κ ∈ (1, 3), A, B ∈ (1, 10), Y₀ ∈ (0, 5) and μ = p₀ ∈ (1, 4)

    With p₀ = μ the exponents are p_l = μκ^l, for which the finite-depth iterates
    stay below the limit bound.
    """
    mu = rng.uniform(1.0, 4.0)
    return IterationInstance(
        A=rng.uniform(1.0, 10.0),
        B=rng.uniform(1.0, 10.0),
        kappa=rng.uniform(1.0, 3.0),
        mu=mu,
        p0=mu,
        Y0=rng.uniform(0.0, 5.0),
        depth=depth,
    )


def fuzz_moser(
    rng: np.random.Generator, count: int = 100, depth: int = 40
) -> DiagnosticsReport:
    "Runs `moser_sequence` on `count` random admissible instances"
    worst_margin, worst = np.inf, None
    failures = 0
    for _ in range(count):
        inst = random_moser_instance(rng, depth)
        _, _, passed = moser_sequence(inst)
        failures += not passed
        if inst.Y0 > 0:
            margin = inst.log_bound() - _log_iterate(inst)
            if margin < worst_margin:
                worst_margin, worst = float(margin), inst
    logger.debug(f"fuzzed {count} Moser instances of depth {depth}: {failures} failed")
    return DiagnosticsReport.judged(
        failures == 0,
        check="moser_iteration",
        params={"count": count, "depth": depth},
        margins={"log_bound": worst_margin},
        located={
            "failures": failures,
            "instance": None if worst is None else attrs.asdict(worst),
        },
    )


#############
# Absorbing #
#############


@attrs.define(kw_only=True, frozen=True, eq=False)
class AbsorbingInstance:
    """A sampled function f ≥ 0 on [R₁, R₂] for the absorbing lemma

    f is the piecewise-linear interpolant of `values` at `radii`; the hypothesis
    reads f(r₁) ≤ θ f(r₂) + A/(r₂ − r₁)^α + B for R₁ ≤ r₁ < r₂ ≤ R₂.

    Parameters
    ----------
    theta : float
        absorption factor in [0, 1)
    A : float
        singular coefficient, ≥ 0
    alpha : float
        singular exponent, > 0
    B : float
        additive constant, ≥ 0
    radii : np.ndarray
        strictly increasing sample radii, from R₁ to R₂
    values : np.ndarray
        f at the radii
    """

    theta: float = attrs.field(converter=float)
    A: float = attrs.field(converter=float)
    alpha: float = attrs.field(converter=float)
    B: float = attrs.field(converter=float)
    radii: np.ndarray = attrs.field(converter=lambda a: np.asarray(a, dtype=float))
    values: np.ndarray = attrs.field(converter=lambda a: np.asarray(a, dtype=float))

    def __attrs_post_init__(self):
        if not 0.0 <= self.theta < 1.0:
            raise HypothesisError(f"theta ({self.theta}) must lie in [0, 1)")
        if self.A < 0 or self.B < 0 or not self.alpha > 0:
            raise HypothesisError("A and B must be nonnegative and alpha positive")
        if self.radii.ndim != 1 or self.radii.size < 2:
            raise HypothesisError("at least two sample radii are required")
        if np.any(np.diff(self.radii) <= 0):
            raise HypothesisError("sample radii must increase strictly")
        if self.values.shape != self.radii.shape or np.any(self.values < 0):
            raise HypothesisError("one nonnegative value per radius is required")

    @property
    def R1(self) -> float:
        return float(self.radii[0])

    @property
    def R2(self) -> float:
        return float(self.radii[-1])

    def f(self, r) -> np.ndarray:
        return np.interp(r, self.radii, self.values)

    def scale(self) -> float:
        "A/(R₂ − R₁)^α + B"
        return self.A / (self.R2 - self.R1) ** self.alpha + self.B

    def hypothesis_margins(self) -> np.ndarray:
        "θ f(r₂) + A/(r₂ − r₁)^α + B − f(r₁) over every sampled pair r₁ < r₂"
        i, j = np.triu_indices(self.radii.size, k=1)
        gap = self.radii[j] - self.radii[i]
        rhs = self.theta * self.values[j] + self.A / gap**self.alpha + self.B
        return rhs - self.values[i]


def absorbing_constant(alpha: float, theta: float) -> float:
    """C(α, θ) = min over τ ∈ (θ^{1/α}, 1) of (1 − τ)^{−α}/(1 − θτ^{−α})

    Iterating the hypothesis along r_{i+1} − r_i = (1 − τ)τ^i (R₂ − R₁) gives
    f(R₁) ≤ C(α, θ)(A/(R₂ − R₁)^α + B) for any such τ.
    """
    if theta == 0.0:
        return 1.0
    lo = theta ** (1.0 / alpha)

    def objective(tau: float) -> float:
        denominator = 1.0 - theta * tau ** (-alpha)
        if denominator <= 0.0:
            return np.inf
        return (1.0 - tau) ** (-alpha) / denominator

    span = 1.0 - lo
    result = minimize_scalar(
        objective,
        bounds=(lo + 1e-9 * span, 1.0 - 1e-9 * span),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(result.fun)


def absorbing_lemma_check(inst: AbsorbingInstance) -> DiagnosticsReport:
    """Verifies f(R₁) ≤ C(α, θ)(A/(R₂ − R₁)^α + B) after checking the hypothesis on
    every sampled pair

    Raises
    ------
    HypothesisError
        if a sampled pair violates the hypothesis
    """
    margins = inst.hypothesis_margins()
    if margins.min() < -PAIR_SLACK * (1.0 + inst.values.max()):
        raise HypothesisError(
            f"sampled f violates the hypothesis by {-margins.min():.3g}"
        )
    C = absorbing_constant(inst.alpha, inst.theta)
    rhs = C * inst.scale()
    margin = rhs - float(inst.values[0])
    return DiagnosticsReport.judged(
        margin >= -PAIR_SLACK * (1.0 + rhs),
        check="absorbing_iteration",
        params={"theta": inst.theta, "alpha": inst.alpha, "A": inst.A, "B": inst.B},
        margins={"conclusion": margin, "hypothesis": float(margins.min())},
        fitted={"C": C},
    )


def random_absorbing_instance(
    rng: np.random.Generator, samples: int = 20, kind: str = "monotone"
) -> AbsorbingInstance:
    """Draws an admissible instance

    "monotone" instances are nondecreasing with values below
    (A/(R₂ − R₁)^α + B)/(1 − θ); "bounded" instances are arbitrary below
    A/(R₂ − R₁)^α + B. Both satisfy the hypothesis on every pair.
    """
    theta = rng.uniform(0.0, 0.9)
    alpha = rng.uniform(0.5, 3.0)
    A = rng.uniform(0.0, 5.0)
    B = rng.uniform(0.0, 5.0)
    R1 = rng.uniform(0.1, 1.0)
    R2 = R1 + rng.uniform(0.1, 1.0)
    inner = np.unique(rng.uniform(R1, R2, samples))
    radii = np.concatenate([[R1], inner[(inner > R1) & (inner < R2)], [R2]])
    scale = A / (R2 - R1) ** alpha + B
    if kind == "monotone":
        values = np.sort(rng.uniform(0.0, scale / (1.0 - theta), radii.size))
    elif kind == "bounded":
        values = rng.uniform(0.0, scale, radii.size)
    else:
        raise ValueError(f"kind must be 'monotone' or 'bounded' (got '{kind}')")
    return AbsorbingInstance(
        theta=theta, A=A, alpha=alpha, B=B, radii=radii, values=values
    )


def fuzz_absorbing(rng: np.random.Generator, count: int = 100) -> DiagnosticsReport:
    "Runs `absorbing_lemma_check` on `count` random admissible instances"
    reports = [
        absorbing_lemma_check(
            random_absorbing_instance(rng, kind=("monotone", "bounded")[i % 2])
        )
        for i in range(count)
    ]
    failures = sum(not r.passed for r in reports)
    logger.debug(f"fuzzed {count} absorbing instances: {failures} failed")
    worst = min(reports, key=lambda r: r.margins["conclusion"])
    return DiagnosticsReport.judged(
        failures == 0,
        check="absorbing_iteration",
        params={"count": count},
        margins={"conclusion": worst.margins["conclusion"]},
        located={"failures": failures, "instance": worst.params},
    )
