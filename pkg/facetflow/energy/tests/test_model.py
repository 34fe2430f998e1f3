import numpy as np
import pytest
from numpy.testing import assert_allclose
from hypothesis import given, settings, strategies as st
from facetflow.energy import (
    EnergyModel,
    eval_energy,
    subdifferential_E1,
    grad_energy,
    ellipticity_ratio,
    verify_exact_structure,
    SampleSpec,
)
from facetflow.exceptions import ConfigError

ANISOTROPY = ((2.0, 0.5), (0.5, 1.0))


def test_eval_energy_values():
    assert eval_energy(EnergyModel(n=2, p=1.5), [0.0, 0.0]) == 0.0
    assert eval_energy(EnergyModel(n=2, p=1.5), [1.0, 0.0]) == pytest.approx(
        1.0 + 1.0 / 1.5
    )
    assert eval_energy(EnergyModel(n=2, p=1.2), [3.0, 4.0]) == pytest.approx(
        5.0 + 5.0**1.2 / 1.2, rel=1e-14
    )


def test_model_defaults():
    model = EnergyModel(n=3, p=1.1)
    assert model.lam == pytest.approx(0.05)
    assert model.Lam == 2.0
    assert model.K == 2.0
    assert model.subcritical
    assert not EnergyModel(n=3, p=1.3).subcritical
    assert not EnergyModel(n=2, p=1.1).subcritical


def test_model_validation():
    with pytest.raises(ConfigError, match="p must exceed 1"):
        EnergyModel(n=2, p=0.9)
    with pytest.raises(ConfigError, match="Lambda"):
        EnergyModel(n=2, p=1.5, lam=3.0, Lam=2.0)
    with pytest.raises(ConfigError, match="anisotropy"):
        EnergyModel(n=2, p=1.5, density="anisotropic")
    with pytest.raises(ConfigError, match="positive definite"):
        EnergyModel(n=2, p=1.5, density="anisotropic", anisotropy=[1, 0, 0, -1])


def test_subdifferential_singleton():
    model = EnergyModel(n=2, p=1.5)
    subgrad = subdifferential_E1(model, [3.0, 4.0])
    assert subgrad.kind == "singleton"
    assert_allclose(subgrad.vector, [0.6, 0.8])
    assert np.dot(subgrad.vector, [3.0, 4.0]) == pytest.approx(5.0)


def test_subdifferential_at_origin():
    model = EnergyModel(n=2, p=1.5)
    ball = subdifferential_E1(model, [0.0, 0.0])
    assert ball.kind == "dual_ball"
    assert ball.radius == 1.0
    assert ball.max_norm == pytest.approx(1.0)
    members = ball.sample(np.random.default_rng(1), 100)
    assert all(ball.contains(m) for m in members)
    assert np.linalg.norm(members, axis=1).max() <= model.K


def test_anisotropic_subdifferential_at_origin():
    model = EnergyModel(n=2, p=1.5, density="anisotropic", anisotropy=ANISOTROPY)
    ball = subdifferential_E1(model, np.zeros(2))
    members = ball.sample(np.random.default_rng(2), 200)
    A_inv = np.linalg.inv(np.array(ANISOTROPY))
    quad = np.einsum("ki,ij,kj->k", members, A_inv, members)
    assert quad.max() <= 1.0 + 1e-12
    assert ball.max_norm <= model.K0 + 1e-12


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=3, max_size=3
    ).filter(lambda z: np.linalg.norm(z) > 1e-6)
)
def test_euler_identity(z):
    for model in (
        EnergyModel(n=3, p=1.1),
        EnergyModel(
            n=3,
            p=1.1,
            density="anisotropic",
            anisotropy=np.diag([1.0, 2.0, 3.0]),
            K=4.0,
        ),
    ):
        zeta = subdifferential_E1(model, z).vector
        assert np.dot(zeta, z) == pytest.approx(model.e1(z), rel=1e-12)
        assert np.linalg.norm(zeta) <= model.K


def test_grad_energy_matches_finite_differences():
    model = EnergyModel(n=2, p=1.3, density="anisotropic", anisotropy=ANISOTROPY)
    z = np.array([0.7, -0.4])
    step = 1e-6
    fd = [
        (eval_energy(model, z + step * e) - eval_energy(model, z - step * e))
        / (2 * step)
        for e in np.eye(2)
    ]
    assert_allclose(grad_energy(model, z), fd, rtol=1e-7)


def test_ellipticity_ratio_blows_up_on_facet():
    model = EnergyModel(n=2, p=1.5)
    radii = np.array([1.0, 1e-2, 1e-4])
    z = np.stack([radii, np.zeros(3)], axis=1)
    ratio = ellipticity_ratio(model, z)
    assert_allclose(ratio, (1 + radii ** (1 - model.p)) / (model.p - 1), rtol=1e-10)
    assert np.all(np.diff(ratio) > 0)


@pytest.mark.parametrize(
    "model",
    [
        EnergyModel(n=2, p=1.1),
        EnergyModel(n=3, p=1.3),
        EnergyModel(n=2, p=1.5, density="anisotropic", anisotropy=ANISOTROPY, K=3.0),
    ],
)
def test_exact_structure(model):
    report = verify_exact_structure(model, SampleSpec(count=2000, seed=5))
    assert report.passed, report.to_json()


def test_exact_structure_flags_small_K():
    model = EnergyModel(
        n=2,
        p=1.5,
        lam=0.1,
        density="anisotropic",
        anisotropy=np.diag([9.0, 1.0]),
        K=1.0,
    )
    report = verify_exact_structure(model, SampleSpec(count=2000, seed=5))
    assert not report["subgradient_bound"].passed
    assert not report.passed
