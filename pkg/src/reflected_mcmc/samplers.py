"""Metropolis-Hastings on the cube [-1, 1]^J with prior-reversible proposals.

Proposals:

* ``IS``    -- independence sampler, a fresh draw from U(-1, 1)^J.
* ``RWM``   -- u + eps * xi, xi standard normal; candidates leaving the cube
               are rejected.
* ``RURWM`` -- R(u_j + eps * xi_j), xi_j ~ U(-1, 1), coordinatewise.
* ``RSRWM`` -- R(u_j + eps * xi_j), xi_j ~ N(0, 1), coordinatewise.

R folds the real line onto [-1, 1] by repeated reflection at +-1. All four
proposals are reversible for the uniform prior (RWM on the cube after the
cube-exit rejection), so acceptance only involves the likelihood ratio.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.random import Generator

from .field import BasisSpec, CoefficientVector
from .posterior import LogLikelihood
from .seeding import generator

BLOCK = 4096


class ProposalKind(str, enum.Enum):
    IS = "IS"
    RWM = "RWM"
    RURWM = "RURWM"
    RSRWM = "RSRWM"


@dataclass(frozen=True)
class Proposal:
    kind: ProposalKind
    epsilon: Optional[float] = None

    def __post_init__(self) -> None:
        kind = ProposalKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is ProposalKind.IS:
            object.__setattr__(self, "epsilon", None)
        elif self.epsilon is None or not self.epsilon >= 0.0 or not math.isfinite(self.epsilon):
            # eps = 0 is allowed as a degenerate walk for testing
            raise ValueError(f"{kind.value} needs a finite step size eps > 0, got {self.epsilon}")

    @property
    def label(self) -> str:
        if self.kind is ProposalKind.IS:
            return "IS"
        return f"{self.kind.value}(eps={self.epsilon:g})"

    @property
    def prior_reversible(self) -> bool:
        return self.kind is not ProposalKind.RWM


def reflect(x):
    """Fold x onto [-1, 1] by reflecting at the boundaries.

    With y = x mod 4 in [0, 4): y if y <= 1, 2 - y if 1 < y < 3, y - 4 otherwise.
    Values already in [-1, 1] are returned unchanged.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("reflect needs finite input")
    out = _fold(arr)
    if out.ndim == 0:
        return float(out)
    return out


def _fold(arr: np.ndarray) -> np.ndarray:
    y = np.mod(arr, 4.0)
    out = np.where(y <= 1.0, y, np.where(y < 3.0, 2.0 - y, y - 4.0))
    return np.where(np.abs(arr) <= 1.0, arr, out)


def _innovations(kind: ProposalKind, rng: Generator, shape) -> np.ndarray:
    if kind is ProposalKind.RURWM:
        return rng.uniform(-1.0, 1.0, size=shape)
    if kind is ProposalKind.IS:
        return rng.uniform(-1.0, 1.0, size=shape)
    return rng.standard_normal(size=shape)


def _candidate(proposal: Proposal, u: np.ndarray, innovation: np.ndarray) -> np.ndarray:
    kind = proposal.kind
    if kind is ProposalKind.IS:
        return innovation
    step = u + proposal.epsilon * innovation
    if kind is ProposalKind.RWM:
        return step
    return reflect(step)


def propose(proposal: Proposal, u: np.ndarray, rng: Generator, J: Optional[int] = None) -> np.ndarray:
    """One candidate from Q(u, .). RWM candidates may lie outside the cube."""
    u = np.asarray(u, dtype=float)
    J = u.size if J is None else J
    return _candidate(proposal, u, _innovations(proposal.kind, rng, J))


def in_cube(v: np.ndarray) -> bool:
    return bool(np.all(np.abs(v) <= 1.0))


def acceptance_prob(
    proposal: Proposal, ll_current: float, ll_candidate: float, candidate: np.ndarray
) -> float:
    if proposal.kind is ProposalKind.RWM and not in_cube(candidate):
        return 0.0
    diff = ll_candidate - ll_current
    if diff >= 0.0:
        return 1.0
    return math.exp(diff)


@dataclass(frozen=True)
class ChainState:
    u: CoefficientVector
    log_likelihood: float


def initial_state(u: np.ndarray, posterior: LogLikelihood) -> ChainState:
    cv = CoefficientVector(u)
    return ChainState(cv, posterior.log_likelihood(cv))


def mh_step(
    proposal: Proposal, state: ChainState, rng: Generator, posterior: LogLikelihood
) -> Tuple[ChainState, bool]:
    """Propose, draw U ~ U(0, 1), move iff alpha > U."""
    candidate = propose(proposal, state.u, rng)
    if proposal.kind is ProposalKind.RWM and not in_cube(candidate):
        rng.uniform()
        return state, False
    ll_cand = posterior.log_likelihood(candidate)
    alpha = acceptance_prob(proposal, state.log_likelihood, ll_cand, candidate)
    if alpha > rng.uniform():
        return ChainState(CoefficientVector(candidate), ll_cand), True
    return state, False


# --- functionals -----------------------------------------------------------

Functional = Callable[[np.ndarray, float], float]
DEFAULT_FUNCTIONALS = ("u0", "loglik", "a_mid")


def make_functional(fid: str, spec: Optional[BasisSpec] = None) -> Functional:
    """Resolve a functional id.

    ``u<j>`` is coordinate j, ``loglik`` the cached log-likelihood, and
    ``a_mid`` the field value a(u)(0.5), which needs ``spec``.
    """
    if fid == "loglik":
        return lambda u, ll: ll
    if fid.startswith("u") and fid[1:].isdigit():
        j = int(fid[1:])
        return lambda u, ll: float(u[j])
    if fid == "a_mid":
        if spec is None:
            raise ValueError("functional 'a_mid' needs a BasisSpec")
        if spec.abar_profile is not None:
            raise ValueError("functional 'a_mid' needs a scalar abar")
        weights = np.empty(spec.J)
        weights[0] = 1.0
        j = np.arange(1, spec.K + 1)
        weights[1::2] = np.cos(np.pi * j)
        weights[2::2] = np.sin(np.pi * j)
        weights *= spec.gamma
        abar = spec.abar
        return lambda u, ll: float(abar + weights @ u)
    raise ValueError(f"unknown functional id {fid!r}")


@dataclass
class ChainOutput:
    """Post-burn-in functional traces and acceptance statistics of one run."""

    proposal: Proposal
    series: Dict[str, np.ndarray]
    accept_count: int
    n_steps: int
    burn_in: int
    seed: int
    config_hash: str = ""
    states: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_retained(self) -> int:
        return self.n_steps - self.burn_in

    @property
    def accept_rate(self) -> float:
        return self.accept_count / self.n_retained


def run_chain(
    proposal: Proposal,
    init: np.ndarray,
    n_steps: int,
    burn_in: int,
    posterior: LogLikelihood,
    seed: int,
    functionals: Sequence[str] = DEFAULT_FUNCTIONALS,
    spec: Optional[BasisSpec] = None,
    state_every: Optional[int] = None,
    config_hash: str = "",
    debug: bool = False,
) -> ChainOutput:
    """Run ``n_steps`` MH transitions and keep the last ``n_steps - burn_in``.

    Random numbers are drawn in blocks from ``generator(seed)``, so the output
    is a deterministic function of the arguments. One likelihood evaluation is
    spent per proposal, except for RWM candidates outside the cube.
    """
    if not n_steps > burn_in >= 0:
        raise ValueError(f"need n_steps > burn_in >= 0, got {n_steps}, {burn_in}")
    fns = {fid: make_functional(fid, spec) for fid in functionals}
    rng = generator(seed)
    state = initial_state(init, posterior)
    u = np.array(state.u)
    ll = state.log_likelihood
    J = u.size

    n_keep = n_steps - burn_in
    series = {fid: np.empty(n_keep) for fid in fns}
    states = [] if state_every else None
    kind = proposal.kind
    eps = proposal.epsilon
    check_cube = kind is ProposalKind.RWM
    accepted = 0
    step = 0
    while step < n_steps:
        m = min(BLOCK, n_steps - step)
        innov = _innovations(kind, rng, (m, J))
        log_uniforms = np.log(rng.uniform(size=m))
        for b in range(m):
            if kind is ProposalKind.IS:
                cand = innov[b]
            elif kind is ProposalKind.RWM:
                cand = u + eps * innov[b]
            else:
                cand = _fold(u + eps * innov[b])
            moved = False
            if not check_cube or np.all(np.abs(cand) <= 1.0):
                ll_cand = posterior.log_likelihood(cand)
                # alpha > U  <=>  min(0, dll) > log U
                if min(0.0, ll_cand - ll) > log_uniforms[b]:
                    u = np.array(cand)
                    ll = ll_cand
                    moved = True
            if debug:
                assert ll == posterior.log_likelihood(u), "stale log-likelihood cache"
            if step >= burn_in:
                k = step - burn_in
                accepted += moved
                for fid, fn in fns.items():
                    series[fid][k] = fn(u, ll)
                if states is not None and k % state_every == 0:
                    states.append(u.copy())
            step += 1
    return ChainOutput(
        proposal=proposal,
        series=series,
        accept_count=int(accepted),
        n_steps=n_steps,
        burn_in=burn_in,
        seed=seed,
        config_hash=config_hash,
        states=None if states is None else np.array(states),
    )


# --- closed-form proposal density -------------------------------------------


def rurwm_density(x, y, eps: float):
    """Transition density of y = R(x + eps * xi), xi ~ U(-1, 1), for 0 < eps < 1.

    Equal to 1/(2 eps) times 1 on the band |x - y| <= eps away from the
    corners, 2 in the corners x + y <= -2 + eps or x + y >= 2 - eps, and 0
    elsewhere.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"closed form needs 0 < eps < 1, got {eps}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(x) > 1.0) or np.any(np.abs(y) > 1.0):
        raise ValueError("x and y must lie in [-1, 1]")
    s = x + y
    corner = (s <= -2.0 + eps) | (s >= 2.0 - eps)
    band = np.abs(x - y) <= eps
    w = np.where(corner, 2.0, np.where(band, 1.0, 0.0))
    out = w / (2.0 * eps)
    if out.ndim == 0:
        return float(out)
    return out


def folded_density(x, y, step_pdf: Callable[[np.ndarray], np.ndarray], k_max: int = 2):
    """sum_k q(x - y + 4k) + q(x + y + 4k + 2) for a symmetric step density q.

    The first sum covers landings after an even number of reflections, the
    second after an odd number; truncation at |k| <= k_max is exact when q
    has no mass beyond 4 k_max - 2.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = np.zeros(np.broadcast(x, y).shape)
    for k in range(-k_max, k_max + 1):
        total = total + step_pdf(x - y + 4 * k) + step_pdf(x + y + 4 * k + 2)
    return total


def uniform_step_pdf(eps: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda t: np.where(np.abs(t) <= eps, 1.0 / (2.0 * eps), 0.0)
