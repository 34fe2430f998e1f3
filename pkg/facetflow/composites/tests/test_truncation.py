import numpy as np
import pytest
from numpy.testing import assert_allclose
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from facetflow.composites import (
    TruncationParams,
    truncate_gradient,
    v_eps_field,
    w_eps_field,
    w_components,
    compatibility_constant,
    vw_margins,
)
from facetflow.exceptions import ConfigError, HypothesisError


def gradients(max_dim=3, bound=20.0):
    return st.integers(min_value=1, max_value=max_dim).flatmap(
        lambda n: arrays(
            float,
            (16, n),
            elements=st.floats(min_value=-bound, max_value=bound),
        )
    )


def test_exact_truncation():
    params = TruncationParams(delta=0.5)
    z = np.array([[3.0, 4.0], [0.3, 0.0], [0.0, 0.0], [0.0, -2.0]])
    truncated = truncate_gradient(z, TruncationParams(delta=0.999))
    assert_allclose(truncated[0], [3.0 * 4.001 / 5, 4.0 * 4.001 / 5])
    truncated = truncate_gradient(z, params)
    assert_allclose(truncated, [[2.7, 3.6], [0.0, 0.0], [0.0, 0.0], [0.0, -1.5]])


def test_regularized_without_eps_doubles_radius():
    rng = np.random.default_rng(4)
    z = rng.normal(size=(50, 3))
    assert_allclose(
        truncate_gradient(z, TruncationParams(delta=0.2), mode="regularized"),
        truncate_gradient(z, TruncationParams(delta=0.4)),
        atol=1e-14,
    )


def test_invalid_truncation():
    with pytest.raises(ConfigError):
        TruncationParams(delta=1.0)
    with pytest.raises(ConfigError):
        TruncationParams(delta=0.5, eps=-0.1)
    with pytest.raises(ConfigError):
        truncate_gradient([1.0, 0.0], TruncationParams(delta=0.5), mode="smooth")


def test_holder_regime():
    TruncationParams(delta=0.4, eps=0.01).require_holder_regime()
    with pytest.raises(HypothesisError):
        TruncationParams(delta=0.4, eps=0.1).require_holder_regime()


def test_holder_regime_admits_endpoint():
    TruncationParams(delta=0.1, eps=0.0125).require_holder_regime()
    TruncationParams(delta=0.1, eps=0.1 / 8.0).require_holder_regime()
    with pytest.raises(HypothesisError, match="must not exceed"):
        TruncationParams(delta=0.1, eps=0.0126).require_holder_regime()


@settings(max_examples=200, deadline=None)
@given(gradients(), st.floats(min_value=0.01, max_value=0.99))
def test_truncation_moves_at_most_delta(z, delta):
    params = TruncationParams(delta=delta)
    shift = np.linalg.norm(truncate_gradient(z, params) - z, axis=-1)
    assert np.all(shift <= delta + 1e-12 * (1 + np.linalg.norm(z, axis=-1)))


@settings(max_examples=200, deadline=None)
@given(gradients(), st.floats(min_value=0.01, max_value=0.99))
def test_regularized_truncation_moves_at_most_two_delta(z, delta):
    params = TruncationParams(delta=delta, eps=delta / 10)
    shift = np.linalg.norm(truncate_gradient(z, params, "regularized") - z, axis=-1)
    assert np.all(shift <= 2 * delta + 1e-12 * (1 + np.linalg.norm(z, axis=-1)))


def test_v_and_w_values():
    grad = np.array([[0.0, 0.0], [2.0, 0.0], [0.5, 0.5], [-3.0, 1.5]])
    assert_allclose(v_eps_field(grad, 0.1)[0], 0.1)
    assert_allclose(v_eps_field(grad, 0.0)[1], 2.0)
    assert_allclose(w_components(grad)[3], [-2.0, 0.5])
    assert_allclose(w_eps_field(grad), [1.0, np.sqrt(2.0), 1.0, np.sqrt(5.25)])


def test_compatibility_constant():
    assert compatibility_constant(1) == 2.0
    assert compatibility_constant(4) == 3.0


@settings(max_examples=300, deadline=None)
@given(gradients(), st.floats(min_value=0.0, max_value=0.2))
def test_vw_chain(grad, eps):
    margins = vw_margins(grad, eps)
    for name in ("lower", "upper", "facet"):
        assert np.all(margins[name] >= -1e-12), name


def test_facet_margin_only_on_steep_set():
    margins = vw_margins(np.array([[0.5, 0.0], [3.0, 0.0]]), 0.1)
    assert margins["facet"][0] == np.inf
    assert np.isfinite(margins["facet"][1])
