import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reflected_mcmc.field import (
    BasisSpec,
    CoefficientVector,
    default_gamma,
    evaluate_field,
    evaluate_field_on_mesh,
    field_min_bound,
    field_on_uniform_grid,
    sample_prior,
)
from reflected_mcmc.seeding import generator


def test_default_weights():
    g = default_gamma(3)
    assert np.allclose(g, [1, 1, 1, 1 / 4, 1 / 4, 1 / 9, 1 / 9])
    assert BasisSpec(3).J == 7


def test_zero_coefficients_give_mean():
    spec = BasisSpec(5)
    for x in (0.0, 0.3, 1.0):
        assert evaluate_field(spec, np.zeros(11), x) == pytest.approx(4.38, abs=1e-15)


def test_constant_term_only():
    assert evaluate_field(BasisSpec(0), np.array([-1.0]), 0.7) == pytest.approx(3.38)


def test_cosine_at_origin():
    assert evaluate_field(BasisSpec(1), np.array([0.0, 1.0, 0.0]), 0.0) == pytest.approx(5.38)


def test_mesh_examples():
    spec = BasisSpec(1)
    assert np.allclose(evaluate_field_on_mesh(spec, np.zeros(3), np.array([0.0, 0.5, 1.0])), 4.38)
    assert evaluate_field_on_mesh(spec, np.array([0.0, 0.0, 1.0]), np.array([0.25]))[0] == pytest.approx(5.38)


def test_mesh_matches_pointwise():
    rng = generator(1)
    spec = BasisSpec(7)
    for _ in range(1000):
        u = sample_prior(rng, spec.J)
        x = rng.uniform()
        assert evaluate_field_on_mesh(spec, u, np.array([x]))[0] == pytest.approx(evaluate_field(spec, u, x), abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(K=st.integers(0, 200), seed=st.integers(0, 2**32 - 1))
def test_fft_matches_direct_sum(K, seed):
    spec = BasisSpec(K)
    u = sample_prior(generator(seed), spec.J)
    n = 512
    direct = evaluate_field_on_mesh(spec, u, np.arange(n + 1) / n)
    assert np.max(np.abs(field_on_uniform_grid(spec, u, n) - direct)) < 1e-12


def test_fft_rejects_aliasing():
    with pytest.raises(ValueError):
        field_on_uniform_grid(BasisSpec(8), np.zeros(17), 16)


@settings(max_examples=50, deadline=None)
@given(alpha=st.floats(0, 1), seed=st.integers(0, 2**32 - 1))
def test_affine_in_u(alpha, seed):
    rng = generator(seed)
    spec = BasisSpec(4)
    u, v = sample_prior(rng, 9), sample_prior(rng, 9)
    x = np.linspace(0, 1, 33)
    lhs = evaluate_field_on_mesh(spec, alpha * u + (1 - alpha) * v, x)
    rhs = alpha * evaluate_field_on_mesh(spec, u, x) + (1 - alpha) * evaluate_field_on_mesh(spec, v, x)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_min_bound_small_cases():
    assert field_min_bound(BasisSpec(0)) == pytest.approx(3.38)
    assert field_min_bound(BasisSpec(1)) == pytest.approx(3.38 - math.sqrt(2))


def test_min_bound_limit_closed_form():
    # K -> infinity: 4.38 - 1 - sqrt(2) * pi^2 / 6
    limit = 4.38 - 1.0 - math.sqrt(2.0) * math.pi**2 / 6.0
    assert limit == pytest.approx(1.0537119, abs=1e-7)
    # tail of the series beyond K is sqrt(2) * sum_{j>K} j^-2 ~ sqrt(2) / K
    b = field_min_bound(BasisSpec(2000))
    assert b - limit == pytest.approx(math.sqrt(2.0) / 2000.5, rel=1e-3)


@pytest.mark.parametrize("K", [0, 1, 3, 25, 250, 5000])
def test_min_bound_at_least_one(K):
    assert field_min_bound(BasisSpec(K)) >= 1.0


def test_min_bound_against_worst_case_search():
    # worst case u per frequency pair at each x: -(|cos| + |sin|) / j^2
    K = 40
    spec = BasisSpec(K)
    x = np.linspace(0, 1, 10_001)
    j = np.arange(1, K + 1)
    arg = 2 * np.pi * np.outer(x, j)
    worst = 4.38 - 1.0 - (np.abs(np.cos(arg)) + np.abs(np.sin(arg))) @ (1.0 / j**2)
    assert worst.min() >= field_min_bound(spec) - 1e-9


def test_field_above_bound_on_random_draws():
    rng = generator(3)
    spec = BasisSpec(25)
    x = np.linspace(0, 1, 10_000)
    bound = field_min_bound(spec)
    for _ in range(50):
        assert evaluate_field_on_mesh(spec, sample_prior(rng, spec.J), x).min() >= bound - 1e-9


def test_prior_determinism_and_moments():
    a = sample_prior(generator(7), 5)
    b = sample_prior(generator(7), 5)
    assert np.array_equal(a, b)
    # coordinates are i.i.d., so one long vector stands in for 10^6 draws of u_0
    many = np.asarray(sample_prior(generator(12), 1_000_000))
    assert abs(many.mean()) < 0.003
    assert many.var() == pytest.approx(1 / 3, rel=0.01)


def test_coefficient_vector_validates():
    with pytest.raises(ValueError):
        CoefficientVector([0.0, 1.0001])
    with pytest.raises(ValueError):
        CoefficientVector([np.nan])
    cv = CoefficientVector([0.5, -1.0])
    with pytest.raises(ValueError):
        cv[0] = 0.1
    # arithmetic may leave the cube and returns a plain array
    shifted = cv + 1.0
    assert type(shifted) is np.ndarray and shifted[0] == 1.5


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate_field(BasisSpec(2), np.zeros(3), 0.5)
    with pytest.raises(ValueError):
        BasisSpec(2, gamma=np.ones(4))
