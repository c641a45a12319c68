import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from reflected_mcmc.field import BasisSpec, evaluate_field
from reflected_mcmc.forward import ForwardModel, Mesh, ObservationOperator
from reflected_mcmc.posterior import FlatPosterior, GaussianPosterior, make_synthetic_data
from reflected_mcmc.samplers import (
    ChainState,
    Proposal,
    ProposalKind,
    acceptance_prob,
    folded_density,
    make_functional,
    mh_step,
    propose,
    reflect,
    run_chain,
    rurwm_density,
    uniform_step_pdf,
)
from reflected_mcmc.seeding import generator


def bounce(x: float) -> float:
    """Move from 0 a distance |x| in direction sign(x), bouncing off the walls at +-1."""
    pos, left, direction = 0.0, abs(x), 1.0 if x >= 0 else -1.0
    while True:
        to_wall = 1.0 - pos * direction
        if left <= to_wall:
            return pos + direction * left
        pos, left, direction = direction, left - to_wall, -direction


def test_reflect_examples():
    assert reflect(0.5) == 0.5
    assert reflect(1.5) == pytest.approx(0.5)
    assert reflect(-1.2) == pytest.approx(-0.8)
    assert bounce(-1.2) == pytest.approx(-0.8)
    assert reflect(3.5) == pytest.approx(-0.5)
    assert reflect(1.0) == 1.0 and reflect(-1.0) == -1.0


@settings(max_examples=300, deadline=None)
@given(st.floats(-50, 50, allow_nan=False))
def test_reflect_matches_unfolded_path(x):
    assert reflect(x) == pytest.approx(bounce(x), abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_reflect_idempotent_and_in_range(x):
    r = reflect(x)
    assert -1.0 <= r <= 1.0
    assert reflect(r) == r


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 1))
def test_reflect_identity_on_cube(x):
    assert reflect(x) == x


def test_reflect_rejects_non_finite():
    for bad in (math.inf, -math.inf, math.nan):
        with pytest.raises(ValueError):
            reflect(bad)


def test_proposal_validation():
    with pytest.raises(ValueError):
        Proposal(ProposalKind.RWM)
    with pytest.raises(ValueError):
        Proposal("RURWM", math.inf)
    assert Proposal("IS", 0.3).epsilon is None
    assert Proposal("RSRWM", 0.2).label == "RSRWM(eps=0.2)"


def test_zero_step_returns_state():
    u = np.array([0.3, -0.7, 1.0])
    assert np.array_equal(propose(Proposal("RURWM", 0.0), u, generator(0)), u)


@pytest.mark.parametrize("kind", ["RURWM", "RSRWM"])
def test_reflected_candidates_stay_in_cube(kind):
    rng = generator(1)
    u = np.full(1_000_000, 0.95)
    cand = propose(Proposal(kind, 0.8), u, rng)
    assert np.all(np.abs(cand) <= 1.0)


def test_independence_candidates_uniform():
    cand = propose(Proposal("IS"), np.zeros(1_000_000), generator(2))
    counts, _ = np.histogram(cand, bins=np.linspace(-1, 1, 51))
    assert stats.chisquare(counts).pvalue > 0.001


def test_rwm_may_leave_cube():
    cand = propose(Proposal("RWM", 0.5), np.full(1000, 0.99), generator(3))
    assert np.any(np.abs(cand) > 1.0)


def test_acceptance_examples():
    p = Proposal("RURWM", 0.1)
    assert acceptance_prob(p, -3.0, -1.0, np.zeros(2)) == 1.0
    assert acceptance_prob(p, 0.0, math.log(0.3), np.zeros(2)) == pytest.approx(0.3)
    rwm = Proposal("RWM", 0.1)
    assert acceptance_prob(rwm, 0.0, 5.0, np.array([1.0001, 0.0])) == 0.0
    assert acceptance_prob(rwm, 0.0, 5.0, np.array([1.0, 0.0])) == 1.0


class ConstantLikelihood:
    def __init__(self, value):
        self.value = value

    def log_likelihood(self, u):
        return self.value


def test_mh_step_always_and_never():
    state = ChainState(np.zeros(2), 0.0)
    rng = generator(4)
    for _ in range(100):
        assert mh_step(Proposal("IS"), state, rng, ConstantLikelihood(1.0))[1]
        assert not mh_step(Proposal("IS"), state, rng, ConstantLikelihood(-math.inf))[1]


def test_mh_step_accept_fraction():
    state = ChainState(np.zeros(1), 0.0)
    rng = generator(5)
    post = ConstantLikelihood(math.log(0.3))
    hits = sum(mh_step(Proposal("IS"), state, rng, post)[1] for _ in range(100_000))
    assert hits / 100_000 == pytest.approx(0.3, abs=0.005)


def test_mh_step_rwm_outside_never_moves():
    state = ChainState(np.full(3, 0.999), 0.0)
    rng = generator(6)
    moved = [mh_step(Proposal("RWM", 5.0), state, rng, ConstantLikelihood(0.0)) for _ in range(200)]
    for new, ok in moved:
        if ok:
            assert np.all(np.abs(new.u) <= 1.0)
    assert sum(ok for _, ok in moved) < 50


def test_flat_independence_sampler_accepts_everything():
    out = run_chain(Proposal("IS"), np.zeros(4), 2000, 100, FlatPosterior(), seed=1, functionals=("u0",))
    assert out.accept_rate == 1.0
    assert out.accept_count == out.n_retained == 1900


def test_run_chain_is_deterministic():
    model = ForwardModel(BasisSpec(3), Mesh(128), ObservationOperator(0.1))
    post = GaussianPosterior(model, make_synthetic_data(1, model, 0.05))
    args = (Proposal("RSRWM", 0.2), np.zeros(7), 3000, 300, post)
    a = run_chain(*args, seed=9, spec=model.spec)
    b = run_chain(*args, seed=9, spec=model.spec)
    for fid in a.series:
        assert np.array_equal(a.series[fid], b.series[fid])
    assert a.accept_count == b.accept_count
    c = run_chain(*args, seed=10, spec=model.spec)
    assert not np.array_equal(a.series["u0"], c.series["u0"])


def test_cached_likelihood_in_debug_mode():
    model = ForwardModel(BasisSpec(2), Mesh(64), ObservationOperator(0.25))
    post = GaussianPosterior(model, make_synthetic_data(2, model, 0.05))
    for kind, eps in (("IS", None), ("RWM", 0.3), ("RURWM", 0.3), ("RSRWM", 0.3)):
        out = run_chain(Proposal(kind, eps), np.zeros(5), 500, 0, post, seed=3, spec=model.spec, debug=True)
        assert 0 <= out.accept_count <= out.n_steps


def test_functionals():
    spec = BasisSpec(2)
    u = np.array([0.1, 0.5, -0.2, 0.3, 0.4])
    assert make_functional("u3")(u, -1.0) == 0.3
    assert make_functional("loglik")(u, -1.25) == -1.25
    assert make_functional("a_mid", spec)(u, 0.0) == pytest.approx(evaluate_field(spec, u, 0.5), abs=1e-14)
    with pytest.raises(ValueError):
        make_functional("bogus")
    with pytest.raises(ValueError):
        run_chain(Proposal("IS"), np.zeros(1), 10, 0, FlatPosterior(), 0, functionals=("nope",))


def test_state_dump_every_k():
    out = run_chain(Proposal("RURWM", 0.5), np.zeros(3), 100, 0, FlatPosterior(), 0, functionals=("u0",), state_every=10)
    assert out.states.shape == (10, 3)


@pytest.mark.parametrize("kind,eps", [("IS", None), ("RWM", 0.4), ("RURWM", 0.4), ("RSRWM", 0.4)])
def test_flat_chains_keep_prior_two_sample(kind, eps):
    # thin so the retained states are close to independent
    out = run_chain(Proposal(kind, eps), np.zeros(3), 200_000, 1000, FlatPosterior(), seed=17,
                    functionals=("u0", "u2"))
    fresh = generator(18).uniform(-1, 1, size=10_000)
    for fid in ("u0", "u2"):
        assert stats.ks_2samp(out.series[fid][::20], fresh).pvalue > 0.001


# --- transition density of the reflected uniform proposal ---------------------------


def test_rurwm_density_examples():
    assert rurwm_density(0.0, 0.0, 0.5) == pytest.approx(1.0)
    assert rurwm_density(-1.0, -1.0, 0.5) == pytest.approx(2.0)
    assert rurwm_density(0.0, 0.9, 0.5) == 0.0
    with pytest.raises(ValueError):
        rurwm_density(0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        rurwm_density(1.2, 0.0, 0.5)


@pytest.mark.parametrize("eps", [0.1, 0.37, 0.5, 0.9])
def test_rurwm_density_symmetric(eps):
    g = np.linspace(-1, 1, 201)
    X, Y = np.meshgrid(g, g, indexing="ij")
    assert np.max(np.abs(rurwm_density(X, Y, eps) - rurwm_density(Y, X, eps))) <= 1e-14


@pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
def test_rurwm_density_matches_folded_sum(eps):
    rng = generator(7)
    x = rng.uniform(-1, 1, 5000)
    y = rng.uniform(-1, 1, 5000)
    closed = rurwm_density(x, y, eps)
    folded = folded_density(x, y, uniform_step_pdf(eps))
    # the two can only disagree on measure-zero boundaries
    assert np.mean(np.isclose(closed, folded, atol=1e-12)) == 1.0


def _breaks(x, eps):
    pts = [x - eps, x + eps, -2 + eps - x, 2 - eps - x]
    return sorted(p for p in pts if -1 < p < 1)


def test_rurwm_density_integrates_to_one():
    rng = generator(8)
    for _ in range(100):
        x, eps = rng.uniform(-1, 1), rng.uniform(0.01, 0.99)
        val, _ = integrate.quad(lambda y: rurwm_density(x, y, eps), -1, 1, points=_breaks(x, eps),
                                epsabs=1e-13, epsrel=1e-13, limit=200)
        assert val == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("x,eps", [(-0.9, 0.5), (0.2, 0.3), (0.95, 0.8)])
def test_rurwm_histogram_matches_density(x, eps):
    edges = np.linspace(-1, 1, 51)
    probs = np.array([
        integrate.quad(lambda y: rurwm_density(x, y, eps), a, b,
                       points=[p for p in _breaks(x, eps) if a < p < b] or None)[0]
        for a, b in zip(edges[:-1], edges[1:])
    ])
    draws = propose(Proposal("RURWM", eps), np.full(1_000_000, x), generator(9))
    counts, _ = np.histogram(draws, bins=edges)
    keep = probs > 0
    assert counts[~keep].sum() == 0
    expected = probs[keep] / probs[keep].sum() * counts.sum()
    assert stats.chisquare(counts[keep], expected).pvalue > 0.001
