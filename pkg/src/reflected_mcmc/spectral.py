"""Finite-state laboratory for spectral gaps of reversible Markov kernels.

Two gap conventions are carried side by side:

* ``gap_abs = 1 - max_{k>=2} |lambda_k|`` -- the L^2 operator-norm gap, which
  is what the error bounds use and what tensorizes;
* ``gap_l2 = 1 - lambda_2`` -- the gap that Cheeger's inequality controls.

Reflected walks have negative eigenvalues, so the two differ in general.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from numpy.random import Generator
from scipy.special import ndtr

from .seeding import task_generator

MAX_DENSE = 5000
MAX_ENUM = 22
ROW_TOL = 1e-12
REV_TOL = 1e-10


@dataclass(frozen=True)
class FiniteKernel:
    """Row-stochastic ``P`` with strictly positive stationary weights ``pi``."""

    P: np.ndarray
    pi: np.ndarray

    def __post_init__(self) -> None:
        P = np.array(self.P, dtype=float)
        pi = np.array(self.pi, dtype=float)
        n = pi.size
        if P.shape != (n, n):
            raise ValueError(f"P has shape {P.shape}, pi has {n} entries")
        if np.any(P < 0.0):
            raise ValueError("transition probabilities must be non-negative")
        if np.max(np.abs(P.sum(axis=1) - 1.0)) > ROW_TOL:
            raise ValueError("rows of P must sum to 1")
        if np.any(pi <= 0.0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("pi must be positive and sum to 1")
        P.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "pi", pi)

    @property
    def n(self) -> int:
        return self.pi.size

    def reversibility_residual(self) -> float:
        F = self.pi[:, None] * self.P
        return float(np.max(np.abs(F - F.T)))

    def assert_reversible(self, tol: float = REV_TOL) -> "FiniteKernel":
        res = self.reversibility_residual()
        if res > tol:
            raise ValueError(f"kernel is not reversible (residual {res:.3g} > {tol:g})")
        return self

    def stationarity_residual(self) -> float:
        return float(np.max(np.abs(self.pi @ self.P - self.pi)))


@dataclass
class GapReport:
    gap: float
    beta: float
    gap_l2: float
    lambda2: float
    conductance: Optional[float] = None
    eigenvalues: np.ndarray = field(default=None, repr=False)

    @property
    def gap_abs(self) -> float:
        return self.gap


def _symmetrized(kernel: FiniteKernel, tol: float = 1e-8) -> np.ndarray:
    s = np.sqrt(kernel.pi)
    S = s[:, None] * kernel.P / s[None, :]
    res = float(np.max(np.abs(S - S.T)))
    if res > tol:
        raise ValueError(f"kernel is not reversible (symmetrization residual {res:.3g})")
    return 0.5 * (S + S.T)


def spectral_gap(kernel: FiniteKernel) -> GapReport:
    """Both gap conventions from one dense symmetric eigendecomposition."""
    if kernel.n > MAX_DENSE:
        raise ValueError(f"dense eigendecomposition limited to n <= {MAX_DENSE}")
    if kernel.n == 1:
        return GapReport(gap=1.0, beta=0.0, gap_l2=1.0, lambda2=0.0, eigenvalues=np.ones(1))
    lam = np.linalg.eigh(_symmetrized(kernel))[0]
    # eigh sorts ascending; the top eigenvalue is the copy of 1 we drop
    rest = lam[:-1]
    beta = float(min(1.0, np.max(np.abs(rest))))
    lambda2 = float(min(1.0, rest[-1]))
    return GapReport(
        gap=1.0 - beta, beta=beta, gap_l2=1.0 - lambda2, lambda2=lambda2, eigenvalues=lam
    )


def conductance_exact(kernel: FiniteKernel, chunk: int = 1 << 15) -> float:
    """min over nonempty A with pi(A) <= 1/2 of sum_{i in A} pi_i P(i, A^c) / pi(A)."""
    n = kernel.n
    if n > MAX_ENUM:
        raise ValueError(f"exhaustive conductance limited to n <= {MAX_ENUM}, got {n}")
    flow = kernel.pi[:, None] * kernel.P
    bits = 1 << np.arange(n)
    best = math.inf
    for start in range(1, 1 << n, chunk):
        masks = np.arange(start, min(start + chunk, 1 << n))
        M = ((masks[:, None] & bits[None, :]) > 0).astype(float)
        mass = M @ kernel.pi
        keep = mass <= 0.5 + 1e-12
        if not np.any(keep):
            continue
        M = M[keep]
        out = np.einsum("si,ij,sj->s", M, flow, 1.0 - M)
        best = min(best, float(np.min(out / mass[keep])))
    return best


@dataclass
class CheegerReport:
    conductance: float
    gap_l2: float
    gap_abs: float
    lower: float
    upper: float

    @property
    def lower_slack(self) -> float:
        return self.gap_l2 - self.lower

    @property
    def upper_slack(self) -> float:
        return self.upper - self.gap_l2

    def holds(self, tol: float = 1e-10) -> bool:
        return self.lower_slack >= -tol and self.upper_slack >= -tol

    @property
    def tightness(self) -> tuple:
        """(lower / gap, gap / upper); 1 means the inequality is attained."""
        lo = self.lower / self.gap_l2 if self.gap_l2 > 0 else float("nan")
        hi = self.gap_l2 / self.upper if self.upper > 0 else float("nan")
        return lo, hi


def cheeger_check(kernel: FiniteKernel) -> CheegerReport:
    """C^2 / 2 <= 1 - lambda_2 <= 2 C for a reversible kernel."""
    kernel.assert_reversible()
    C = conductance_exact(kernel)
    g = spectral_gap(kernel)
    return CheegerReport(C, g.gap_l2, g.gap, C * C / 2.0, 2.0 * C)


def mh_finite(Q: FiniteKernel, L_values: np.ndarray) -> FiniteKernel:
    """Metropolis-Hastings kernel for mu ~ L * pi_Q built on the proposal Q."""
    L = np.asarray(L_values, dtype=float)
    if L.shape != (Q.n,):
        raise ValueError("L must have one entry per state")
    if np.any(L <= 0.0) or not np.all(np.isfinite(L)):
        raise ValueError("L must be finite and strictly positive")
    mu = L * Q.pi
    mu = mu / mu.sum()
    fwd = mu[:, None] * Q.P
    back = fwd.T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(fwd > 0.0, back / np.where(fwd > 0.0, fwd, 1.0), 0.0)
    P = Q.P * np.minimum(1.0, ratio)
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return FiniteKernel(P, mu).assert_reversible(1e-12)


@dataclass
class TransferReport:
    """Gap of the MH kernel against the bounds built from the proposal gap.

    ``ratio`` is L_min / L_max. Bound fields are indexed by convention:
    ``"l2"`` (1 - lambda_2) or ``"abs"`` (1 - max |lambda|).
    """

    ratio: float
    gap_prop: Dict[str, float]
    gap_mh: Dict[str, float]
    lower: Dict[str, float]
    upper: Dict[str, float]

    def lower_holds(self, conv: str = "l2", tol: float = 1e-10) -> bool:
        return self.gap_mh[conv] >= self.lower[conv] - tol

    def upper_holds(self, conv: str = "l2", tol: float = 1e-10) -> bool:
        return self.gap_mh[conv] <= self.upper[conv] + tol

    def tightness(self, conv: str = "l2") -> tuple:
        g = self.gap_mh[conv]
        lo = self.lower[conv] / g if g > 0 else float("nan")
        hi = g / self.upper[conv] if self.upper[conv] > 0 else float("nan")
        return lo, hi


def _gaps(kernel: FiniteKernel) -> Dict[str, float]:
    rep = spectral_gap(kernel)
    return {"l2": rep.gap_l2, "abs": rep.gap}


def gap_transfer_check(Q: FiniteKernel, L_values: np.ndarray) -> TransferReport:
    """Lower bound r^4 g_Q^2 / 8 and upper bound 2 g_Q^{1/2} / r^2, r = L_min / L_max."""
    L = np.asarray(L_values, dtype=float)
    r = float(L.min() / L.max())
    gq = _gaps(Q)
    gp = _gaps(mh_finite(Q, L))
    lower = {c: r**4 * gq[c] ** 2 / 8.0 for c in gq}
    upper = {c: 2.0 * math.sqrt(gq[c]) / r**2 for c in gq}
    return TransferReport(r, gq, gp, lower, upper)


def conjectured_transfer_probe(Q: FiniteKernel, L_values: np.ndarray) -> TransferReport:
    """Conjectured r g_Q <= g_P <= g_Q / r. Reported, never asserted."""
    L = np.asarray(L_values, dtype=float)
    r = float(L.min() / L.max())
    gq = _gaps(Q)
    gp = _gaps(mh_finite(Q, L))
    return TransferReport(
        r, gq, gp, {c: r * gq[c] for c in gq}, {c: gq[c] / r for c in gq}
    )


# --- reflected walks on [-1, 1] -------------------------------------------------


def _second_antiderivative(step_kind: str, scale: float):
    """t -> int_{-inf}^t F(s) ds for the step CDF F."""
    if step_kind == "uniform":

        def q2(t):
            inside = (t + scale) ** 2 / (4.0 * scale)
            return np.where(t < -scale, 0.0, np.where(t > scale, t, inside))

    elif step_kind == "gaussian":

        def q2(t):
            z = t / scale
            return t * ndtr(z) + scale * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    else:
        raise ValueError(f"unknown step kind {step_kind!r}")
    return q2


def _gaussian_k_max(scale: float, tail: float = 1e-14, cap: int = 10_000) -> int:
    k = 1
    while 2.0 * ndtr(-4.0 * k / scale) >= tail:
        k += 1
        if k > cap:
            raise ValueError(f"cannot certify wrapped-sum tail < {tail:g} for scale {scale}")
    return k


def discretize_reflected_walk(eps: float, step_kind: str = "uniform", n_grid: int = 2001) -> FiniteKernel:
    """Cell-averaged kernel of x -> R(x + eps xi) on n_grid equal cells of [-1, 1].

    Entry (i, j) is the probability of landing in cell j when starting
    uniformly in cell i, summed over every preimage interval of cell j under
    the fold R. The integrals are exact via the second antiderivative of the
    step CDF; xi is U(-1, 1) for ``"uniform"`` and N(0, 1) for ``"gaussian"``.
    """
    if n_grid < 64:
        raise ValueError(f"n_grid must be >= 64, got {n_grid}")
    if step_kind == "uniform":
        if not 0.0 < eps < 1.0:
            raise ValueError(f"uniform steps need 0 < eps < 1, got {eps}")
        k_max = 1
    elif step_kind == "gaussian":
        if not eps > 0.0:
            raise ValueError(f"eps must be positive, got {eps}")
        k_max = _gaussian_k_max(eps)
    else:
        raise ValueError(f"unknown step kind {step_kind!r}")
    q2 = _second_antiderivative(step_kind, eps)
    edges = np.linspace(-1.0, 1.0, n_grid + 1)
    h = 2.0 / n_grid
    lo, hi = edges[:-1], edges[1:]

    def mass(c: np.ndarray, d: np.ndarray) -> np.ndarray:
        # (1/h) int_{a_i}^{b_i} P(x + xi in [c_j, d_j]) dx
        return (
            q2(d[None, :] - lo[:, None])
            - q2(d[None, :] - hi[:, None])
            - q2(c[None, :] - lo[:, None])
            + q2(c[None, :] - hi[:, None])
        ) / h

    P = np.zeros((n_grid, n_grid))
    for k in range(-k_max, k_max + 1):
        shift = 4.0 * k
        P += mass(lo + shift, hi + shift)
        P += mass(2.0 - hi + shift, 2.0 - lo + shift)
    np.maximum(P, 0.0, out=P)
    P /= P.sum(axis=1, keepdims=True)
    pi = np.full(n_grid, 1.0 / n_grid)
    return FiniteKernel(P, pi).assert_reversible()


def reflected_uniform_gap_fourier(eps: float) -> float:
    """1 - sin(pi eps / 2) / (pi eps / 2).

    cos(pi (x + 1) / 2) is an eigenfunction of the continuous reflected
    uniform walk with eigenvalue E cos(pi eps xi / 2), xi ~ U(-1, 1), and
    this is the largest non-unit eigenvalue in modulus.
    """
    z = 0.5 * math.pi * eps
    return 1.0 - math.sin(z) / z


@dataclass
class ProposalGapRow:
    eps: float
    numeric_gap: float
    numeric_gap_l2: float
    intermediate_bound: float
    linear_bound: float
    fourier_gap: float

    @property
    def numeric_ge_intermediate(self) -> bool:
        return self.numeric_gap >= self.intermediate_bound

    @property
    def intermediate_ge_linear(self) -> bool:
        return self.intermediate_bound >= self.linear_bound

    @property
    def numeric_ge_linear(self) -> bool:
        return self.numeric_gap >= self.linear_bound


def claimed_proposal_gap_bounds(eps: float) -> tuple:
    """(1 - (4/5)^{1/ceil(4/eps)}, 4 eps / 25)."""
    n = math.ceil(4.0 / eps)
    return 1.0 - 0.8 ** (1.0 / n), 4.0 * eps / 25.0


def proposal_gap_table(eps_list: Sequence[float], n_grid: int = 2001) -> List[ProposalGapRow]:
    """Numeric reflected-uniform gaps next to the claimed lower bounds (no assertion)."""
    rows = []
    for eps in eps_list:
        rep = spectral_gap(discretize_reflected_walk(eps, "uniform", n_grid))
        inter, lin = claimed_proposal_gap_bounds(eps)
        rows.append(
            ProposalGapRow(eps, rep.gap, rep.gap_l2, inter, lin, reflected_uniform_gap_fourier(eps))
        )
    return rows


def tensor_product(k1: FiniteKernel, k2: FiniteKernel) -> FiniteKernel:
    """Independent moves in both factors; state (i, a) has index i * n2 + a."""
    size = k1.n * k2.n
    if size > MAX_DENSE:
        raise ValueError(f"product space too large ({size} > {MAX_DENSE})")
    return FiniteKernel(np.kron(k1.P, k2.P), np.kron(k1.pi, k2.pi))


@dataclass
class MinorizationReport:
    eps: float
    n_steps: int
    n_grid: int
    min_density: float
    claimed: float = 0.1
    max_row_error: float = 0.0

    @property
    def claim_holds(self) -> bool:
        return self.min_density >= self.claimed


def minorization_probe(
    eps: float, n_grid: int = 2001, n_steps: Optional[int] = None, kernel: Optional[FiniteKernel] = None
) -> MinorizationReport:
    """Smallest n-step transition density of the reflected uniform walk.

    Default n = ceil(4 / eps). The density of cell j is (P^n)_{ij} / h.
    """
    n = math.ceil(4.0 / eps) if n_steps is None else n_steps
    K = discretize_reflected_walk(eps, "uniform", n_grid) if kernel is None else kernel
    Pn = np.linalg.matrix_power(K.P, n)
    h = 2.0 / K.n
    row_err = float(np.max(np.abs(Pn.sum(axis=1) - 1.0)))
    return MinorizationReport(eps, n, K.n, float(Pn.min() / h), max_row_error=row_err)


# --- random instances ----------------------------------------------------------


def random_reversible_kernel(rng: Generator, n: int, pi: Optional[np.ndarray] = None) -> FiniteKernel:
    """Metropolised symmetric random-graph walk, reversible for ``pi``.

    ``pi`` defaults to a flat Dirichlet draw. The graph is a random spanning
    tree plus Erdos-Renyi edges of random density, with random symmetric
    edge weights scaled so every row keeps some holding mass.
    """
    if pi is None:
        pi = rng.dirichlet(np.ones(n))
    density = rng.uniform(0.0, 1.0)
    upper = np.triu(rng.random((n, n)) < density, 1)
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = order[k], order[rng.integers(k)]
        upper[min(a, b), max(a, b)] = True
    weights = rng.uniform(0.05, 1.0, size=(n, n))
    W = np.where(upper, weights, 0.0)
    W = W + W.T
    scale = rng.uniform(0.3, 1.0) / max(W.sum(axis=1).max(), 1e-300)
    K = W * scale
    with np.errstate(divide="ignore"):
        accept = np.minimum(1.0, pi[None, :] / pi[:, None])
    P = K * accept
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return FiniteKernel(P, pi)


def random_likelihood(rng: Generator, n: int, max_ratio: float) -> np.ndarray:
    """Entries log-uniform on [1 / max_ratio, 1]."""
    return np.exp(rng.uniform(-math.log(max_ratio), 0.0, size=n))


@dataclass
class Instance:
    index: int
    seed_key: str
    Q: FiniteKernel
    L: Optional[np.ndarray] = None


def suite_instance(
    master_seed: int, suite: str, index: int, n_min: int = 2, n_max: int = 12, max_ratio: float = 10.0
) -> Instance:
    """Instance ``index`` of a named suite; reproducible from (master_seed, suite, index)."""
    key = f"{suite}:{index}"
    rng = task_generator(master_seed, key)
    n = int(rng.integers(n_min, n_max + 1))
    Q = random_reversible_kernel(rng, n)
    L = random_likelihood(rng, n, max_ratio)
    return Instance(index, key, Q, L)


def dump_instance(inst: Instance, master_seed: int, note: str = "") -> str:
    """Plain-text dump of an instance with the seed that regenerates it."""
    lines = [
        f"# master_seed={master_seed} key={inst.seed_key}",
        f"# n={inst.Q.n} {note}".rstrip(),
        "# pi",
        " ".join(f"{v:.17g}" for v in inst.Q.pi),
        "# P",
    ]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in inst.Q.P]
    if inst.L is not None:
        lines += ["# L", " ".join(f"{v:.17g}" for v in inst.L)]
    return "\n".join(lines) + "\n"
