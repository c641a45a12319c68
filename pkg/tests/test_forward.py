import numpy as np
import pytest
from scipy.linalg import solve_banded

from reflected_mcmc.field import BasisSpec, evaluate_field_on_mesh, sample_prior
from reflected_mcmc.forward import (
    ForwardModel,
    Mesh,
    ObservationOperator,
    SourceTerm,
    flux_at_nodes,
    forward_map,
    n_observations,
    observe,
    solve_pressure,
)
from reflected_mcmc.seeding import generator


def fd_oracle(a_fn, n):
    """Independent solve: conservative finite differences with a at cell midpoints, g = 1."""
    h = 1.0 / n
    am = a_fn((np.arange(n) + 0.5) * h)
    diag = (am[:-1] + am[1:]) / h**2
    off = -am[1:-1] / h**2
    ab = np.zeros((3, n - 1))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    p = np.zeros(n + 1)
    p[1:-1] = solve_banded((1, 1), ab, np.ones(n - 1))
    return p


def solve(a_values, n):
    mesh = Mesh(n)
    return solve_pressure(a_values, SourceTerm.constant(mesh), mesh).p_values


def test_constant_coefficient_midpoint():
    n = 4096
    p = solve(np.ones(n + 1), n)
    assert p[n // 2] == pytest.approx(0.125, abs=1e-7)
    x = Mesh(n).nodes
    assert np.max(np.abs(p - x * (1 - x) / 2)) < 1e-7
    assert p[0] == 0.0 and p[-1] == 0.0


def test_scaling_in_a():
    n = 4096
    p2 = solve(np.full(n + 1, 2.0), n)
    assert p2[n // 2] == pytest.approx(0.0625, abs=1e-7)
    rng = generator(0)
    a = 1.0 + rng.uniform(size=n + 1)
    for c in (0.5, 2.0, 7.0):
        assert np.max(np.abs(solve(c * a, n) - solve(a, n) / c)) < 1e-10


def test_piecewise_coefficient_hand_value():
    # a = 1 on [0, 1/2], 2 after; flux continuity gives C = 5/12 and p(1/2) = 1/12
    n = 4096
    x = Mesh(n).nodes
    a = np.where(x <= 0.5, 1.0, 2.0)
    p = solve(a, n)
    assert p[n // 2] == pytest.approx(1 / 12, abs=1e-5)
    oracle = fd_oracle(lambda s: np.where(s <= 0.5, 1.0, 2.0), 1 << 14)
    assert oracle[1 << 13] == pytest.approx(1 / 12, abs=1e-6)


def test_agrees_with_finite_difference_oracle():
    spec = BasisSpec(6)
    u = sample_prior(generator(5), spec.J)
    n = 2048
    p = solve(evaluate_field_on_mesh(spec, u, Mesh(n).nodes), n)
    ref = fd_oracle(lambda s: evaluate_field_on_mesh(spec, u, s), 1 << 15)
    assert np.max(np.abs(p - ref[:: (1 << 15) // n])) < 1e-7


def test_flux_matches_a_dp_at_midpoints():
    spec = BasisSpec(4)
    u = sample_prior(generator(9), spec.J)
    errs = []
    for n in (512, 1024):
        mesh = Mesh(n)
        a = evaluate_field_on_mesh(spec, u, mesh.nodes)
        p = solve(a, n)
        flux = flux_at_nodes(a, SourceTerm.constant(mesh), mesh)
        mid_flux = 0.5 * (flux[1:] + flux[:-1])
        mid_a = evaluate_field_on_mesh(spec, u, (np.arange(n) + 0.5) / n)
        errs.append(np.max(np.abs(mid_a * np.diff(p) * n - mid_flux)))
    assert errs[0] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)


def test_richardson_ratio():
    spec = BasisSpec(5)
    u = sample_prior(generator(21), spec.J)
    obs = ObservationOperator(1 / 32)

    def g_of(n):
        return forward_map(spec, u, SourceTerm.constant(Mesh(n)), Mesh(n), obs)

    ref = g_of(1 << 16)
    e1 = np.max(np.abs(g_of(1024) - ref))
    e2 = np.max(np.abs(g_of(2048) - ref))
    assert 3.5 <= e1 / e2 <= 4.5


def test_observation_counts_and_values():
    assert n_observations(0.1) == 11
    assert n_observations(1 / 32) == 33
    assert n_observations(0.03) == 34
    assert n_observations(1.0) == 2
    mesh = Mesh(4096)
    p = solve_pressure(np.ones(4097), SourceTerm.constant(mesh), mesh)
    assert np.allclose(observe(p, ObservationOperator(1.0)), [0.0, 0.0])
    assert np.allclose(observe(p, ObservationOperator(0.5)), [0.0, 0.125, 0.0], atol=1e-7)
    assert len(observe(p, ObservationOperator(0.1))) == 11
    assert np.all((ObservationOperator(0.03).locations >= 0) & (ObservationOperator(0.03).locations <= 1))


def test_forward_map_mean_field():
    n = 4096
    mesh = Mesh(n)
    obs = ObservationOperator(0.1)
    spec = BasisSpec(25)
    G = forward_map(spec, np.zeros(spec.J), SourceTerm.constant(mesh), mesh, obs)
    x = obs.locations
    assert np.max(np.abs(G - x * (1 - x) / (2 * 4.38))) < 1e-6
    again = forward_map(spec, np.zeros(spec.J), SourceTerm.constant(mesh), mesh, obs)
    assert np.array_equal(G, again)


def test_forward_model_paths_agree():
    spec = BasisSpec(30)
    u = sample_prior(generator(2), spec.J)
    mesh = Mesh(256)
    obs = ObservationOperator(1 / 32)
    fast = ForwardModel(spec, mesh, obs)(u)
    slow = forward_map(spec, u, SourceTerm.constant(mesh), mesh, obs)
    assert np.max(np.abs(fast - slow)) < 1e-13
    # K too large for the FFT grid falls back to direct summation
    big = BasisSpec(200)
    v = sample_prior(generator(3), big.J)
    assert np.max(np.abs(ForwardModel(big, mesh, obs)(v)
                         - forward_map(big, v, SourceTerm.constant(mesh), mesh, obs))) < 1e-13


def test_rejects_nonpositive_field():
    mesh = Mesh(8)
    a = np.ones(9)
    a[3] = 0.0
    with pytest.raises(ValueError):
        solve_pressure(a, SourceTerm.constant(mesh), mesh)
    with pytest.raises(ValueError):
        Mesh(1)
    with pytest.raises(ValueError):
        ObservationOperator(0.0)
