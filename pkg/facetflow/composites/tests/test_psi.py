import numpy as np
import pytest
from numpy.testing import assert_allclose
from hypothesis import given, settings, strategies as st
from facetflow.composites import (
    PsiSpec,
    psi_eval,
    psi_prime,
    Psi_eval,
    monotone_convergence,
    check_composite_inequalities,
)
from facetflow.exceptions import ConfigError

specs = st.builds(
    PsiSpec,
    variant=st.sampled_from(["plain", "tilde"]),
    alpha=st.floats(min_value=0.0, max_value=6.0),
    M=st.floats(min_value=1.01, max_value=50.0),
)
sigmas = st.floats(min_value=0.0, max_value=100.0)


def test_psi_values():
    plain = PsiSpec(alpha=2, M=10)
    assert psi_eval(plain, 3.0) == 9.0
    assert psi_eval(plain, 12.0) == 100.0
    tilde = PsiSpec(variant="tilde", alpha=1, M=5)
    assert psi_eval(tilde, 2.0) == pytest.approx(1.0)
    assert_allclose(psi_eval(tilde, [0.0, 0.5, 1.0]), 0.0)


def test_psi_prime_left_derivative_at_kinks():
    plain = PsiSpec(alpha=2, M=3)
    assert psi_prime(plain, 3.0) == pytest.approx(6.0)
    assert psi_prime(plain, 3.5) == 0.0
    tilde = PsiSpec(variant="tilde", alpha=2, M=3)
    assert psi_prime(tilde, 1.0) == 0.0
    # σ² − σ has derivative 2σ − 1
    assert psi_prime(tilde, 3.0) == pytest.approx(5.0)


def test_Psi_closed_forms():
    assert Psi_eval(PsiSpec(alpha=0, M=4), 2.0) == pytest.approx(2.0)
    assert Psi_eval(PsiSpec(alpha=1.5, M=4), 2.0) == pytest.approx(2.0**3.5 / 3.5)
    # 2⁴/4 + 2²(3² − 2²)/2
    assert Psi_eval(PsiSpec(alpha=2, M=2), 3.0) == pytest.approx(14.0)


@pytest.mark.parametrize(
    "spec",
    [
        PsiSpec(alpha=2, M=2),
        PsiSpec(variant="tilde", alpha=1.5, M=3),
        PsiSpec(variant="tilde", alpha=0, M=1.5),
    ],
)
def test_Psi_matches_quadrature(spec):
    from scipy import integrate

    for sigma in (0.5, 1.7, 2.5, 6.0):
        expected, _ = integrate.quad(
            lambda t: t * float(psi_eval(spec, t)),
            0.0,
            sigma,
            points=[x for x in (1.0, spec.M) if x < sigma] or None,
        )
        assert Psi_eval(spec, sigma) == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_invalid_specs():
    with pytest.raises(ConfigError):
        PsiSpec(alpha=1, M=1)
    with pytest.raises(ConfigError):
        PsiSpec(alpha=-1, M=2)
    with pytest.raises(ConfigError):
        PsiSpec(variant="orlicz", alpha=1, M=2)


@settings(max_examples=300, deadline=None)
@given(specs, sigmas, sigmas)
def test_nonnegative_nondecreasing(spec, a, b):
    lo, hi = sorted([a, b])
    assert psi_eval(spec, lo) >= 0.0
    assert psi_eval(spec, lo) <= psi_eval(spec, hi) * (1 + 1e-12) + 1e-12
    assert Psi_eval(spec, lo) <= Psi_eval(spec, hi) * (1 + 1e-12) + 1e-12
    assert psi_prime(spec, lo) >= 0.0


@settings(max_examples=300, deadline=None)
@given(specs, sigmas)
def test_constant_beyond_M(spec, sigma):
    assert psi_eval(spec, spec.M + sigma) == psi_eval(spec, spec.M)


@settings(max_examples=300, deadline=None)
@given(specs, sigmas)
def test_Psi_bound(spec, sigma):
    bound = sigma**2 * psi_eval(spec, sigma)
    assert Psi_eval(spec, sigma) <= bound * (1 + 1e-12) + 1e-12


@settings(max_examples=300, deadline=None)
@given(specs, sigmas, sigmas, st.floats(min_value=0.0, max_value=1.0))
def test_Psi_midpoint_convexity(spec, a, b, weight):
    mid = weight * a + (1 - weight) * b
    combo = weight * Psi_eval(spec, a) + (1 - weight) * Psi_eval(spec, b)
    assert Psi_eval(spec, mid) <= combo * (1 + 1e-10) + 1e-12


@pytest.mark.parametrize("variant", ["plain", "tilde"])
def test_monotone_convergence(variant):
    spec = PsiSpec(variant=variant, alpha=1.5, M=2)
    sigma = np.linspace(0.0, 20.0, 201)
    rows = monotone_convergence(spec, sigma, [2, 4, 8, 16, 32])
    assert np.all(np.diff(rows["psi"], axis=0) >= -1e-12)
    assert np.all(np.diff(rows["Psi"], axis=0) >= -1e-9)
    # levels above the largest σ reproduce the limit
    assert_allclose(rows["psi"][-2], rows["psi"][-1])
    assert_allclose(rows["Psi"][-2], rows["Psi"][-1])


def test_limit_of_plain_primitive():
    rows = monotone_convergence(PsiSpec(alpha=2, M=2), 3.0, [2, 100])
    assert rows["Psi"][-1] == pytest.approx(3.0**4 / 4)


@pytest.mark.parametrize(
    "alpha,M", [(0.0, 2.0), (0.5, 3.0), (1.0, 5.0), (2.0, 10.0), (4.5, 50.0)]
)
def test_composite_inequalities(alpha, M):
    rng = np.random.default_rng(17)
    samples = np.concatenate([rng.uniform(0.0, 2 * M, 1000), [1.0, M, 0.0]])
    report = check_composite_inequalities(PsiSpec(alpha=alpha, M=M), 1.3, samples, 1.1)
    assert report.passed, report.to_json()
    assert report["power_product"].samples == 1000


def test_power_product_is_an_identity_below_M():
    spec = PsiSpec(alpha=2.5, M=40.0)
    samples = np.linspace(0.05, 39.0, 1000)
    report = check_composite_inequalities(spec, 1.5, samples, 1.2)
    assert abs(report["power_product"].worst_margin) < 1e-12


def test_tilde_derivative_margin():
    report = check_composite_inequalities(PsiSpec(alpha=1, M=5), 2.0, [2.0], 1.5)
    # ψ̃ + σψ̃' = 3 against (α+1)ψ = 4, relative to max(1, 4)
    assert report["tilde_derivative"].worst_margin == pytest.approx(0.25)


def test_domination_at_origin_neighbourhood():
    report = check_composite_inequalities(PsiSpec(alpha=1, M=5), 2.0, [1e-9], 1.5)
    assert report["limit_domination"].worst_margin == pytest.approx(1.0)


def test_exchanged_exponents_fail():
    spec = PsiSpec(alpha=2, M=1000)
    report = check_composite_inequalities(spec, 2.0, np.linspace(2.0, 900.0, 50), 1.5)
    assert report.passed
    assert report.params["literal_form_failures"] > 0
