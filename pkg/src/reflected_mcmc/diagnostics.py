"""Chain diagnostics and Monte Carlo error bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from numpy.random import Generator

from .spectral import FiniteKernel


@dataclass(frozen=True)
class AcfSeries:
    rho: np.ndarray
    n: int


def _centered(series) -> np.ndarray:
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 2 or np.ptp(x) == 0.0:
        raise ValueError("autocorrelation is undefined for a zero-variance series")
    return x - x.mean()


def _autocovariance(x: np.ndarray, max_lag: int) -> np.ndarray:
    n = x.size
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, nfft)
    return np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1]


def acf(series, max_lag: int) -> AcfSeries:
    """Biased autocorrelation with one shared mean and denominator.

    rho[k] = sum_t (x_t - m)(x_{t+k} - m) / sum_t (x_t - m)^2.
    """
    x = _centered(series)
    if max_lag < 0 or x.size < 4 * max_lag:
        raise ValueError(f"need 0 <= max_lag and len(series) >= 4 * max_lag, got {max_lag}, {x.size}")
    cov = _autocovariance(x, max_lag)
    rho = cov / cov[0]
    rho[0] = 1.0
    return AcfSeries(rho, x.size)


def iat(series) -> float:
    """Integrated autocorrelation time with Geyer's initial positive sequence.

    Pair sums Gamma_m = rho[2m] + rho[2m+1] are accumulated while positive;
    tau = -1 + 2 sum Gamma_m = 1 + 2 sum_{k>=1} rho[k] over the kept lags.
    """
    x = np.asarray(series, dtype=float).ravel()
    max_lag = x.size // 4
    rho = acf(x, max_lag).rho
    total = 0.0
    for m in range((max_lag + 1) // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        total += pair
    return -1.0 + 2.0 * total


def ess(series) -> float:
    return np.asarray(series).size / iat(series)


def kv_variance_bound(f_variance: float, gap: float) -> float:
    """Upper bound 2 Var_mu(f) / gap on the CLT asymptotic variance."""
    if not gap > 0.0:
        raise ValueError(f"gap must be positive, got {gap}")
    if f_variance < 0.0:
        raise ValueError("variance must be non-negative")
    return 2.0 * f_variance / gap


def rudolf_mse_bound(n: int, gap: float) -> float:
    """2 / (n gap) + 2 / (n gap)^2.

    Bounds the mean squared error of an n-sample average of any f with
    ||f||_2 <= 1, once the chain is started in (or burnt in to) stationarity.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not gap > 0.0:
        raise ValueError(f"gap must be positive, got {gap}")
    ng = n * gap
    return 2.0 / ng + 2.0 / (ng * ng)


def burnin_steps(p: float, gap: float, nu_norm: float) -> int:
    """Smallest integer n0 with n0 >= c(p) * nu_norm / log(1 / beta), beta = 1 - gap.

    c(p) = p / (2 (p - 2)) * log(32 p / (p - 2)) for 2 < p < 4 and log(64)
    for p >= 4 (including p = inf).
    """
    if not p > 2.0:
        raise ValueError(f"moment index p must exceed 2, got {p}")
    if not 0.0 < gap <= 1.0:
        raise ValueError(f"gap must lie in (0, 1], got {gap}")
    if nu_norm < 0.0:
        raise ValueError("nu_norm must be non-negative")
    if nu_norm == 0.0 or gap == 1.0:
        return 0
    if p < 4.0:
        c = p / (2.0 * (p - 2.0)) * math.log(32.0 * p / (p - 2.0))
    else:
        c = math.log(64.0)
    value = c * nu_norm / -math.log1p(-gap)
    # absorb rounding so exact integers are not bumped up
    return int(math.ceil(value - 1e-9 * max(1.0, value)))


def asymptotic_variance_exact(kernel: FiniteKernel, f: np.ndarray) -> float:
    """<(1 + P)(1 - P)^{-1} f0, f0>_pi with f0 = f - pi(f), via the fundamental matrix."""
    f = np.asarray(f, dtype=float)
    pi = kernel.pi
    f0 = f - pi @ f
    n = kernel.n
    Z = np.eye(n) - kernel.P + np.outer(np.ones(n), pi)
    g = np.linalg.solve(Z, f0)
    return float(pi @ ((g + kernel.P @ g) * f0))


def empirical_mse(
    kernel: FiniteKernel, f: np.ndarray, n: int, n_rep: int, rng: Generator
) -> float:
    """Mean of (pi(f) - (1/n) sum_{i<n} f(X_i))^2 over replicates started from pi."""
    f = np.asarray(f, dtype=float)
    cum = np.cumsum(kernel.P, axis=1)
    cum[:, -1] = 1.0
    state = rng.choice(kernel.n, size=n_rep, p=kernel.pi)
    total = np.zeros(n_rep)
    for _ in range(n):
        total += f[state]
        r = rng.random(n_rep)
        state = (r[:, None] >= cum[state]).sum(axis=1)
    est = total / n
    return float(np.mean((est - kernel.pi @ f) ** 2))


def posterior_quadrature_oracle(
    log_likelihood: Callable[[np.ndarray], float], J: int, n_grid: int = 2001
) -> Tuple[np.ndarray, np.ndarray]:
    """Normalised posterior density of u_0 on a uniform grid of [-1, 1] (J = 1 only)."""
    if J != 1:
        raise ValueError(f"quadrature oracle needs J = 1, got {J}")
    grid = np.linspace(-1.0, 1.0, n_grid)
    ll = np.array([log_likelihood(np.array([u])) for u in grid])
    dens = np.exp(ll - ll.max())
    dens /= np.trapezoid(dens, grid)
    return grid, dens


def bin_probabilities(grid: np.ndarray, density: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Integrate a tabulated density over bins (trapezoid, linear interpolation at edges)."""
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(grid))])
    return np.diff(np.interp(edges, grid, cum))


def histogram_tv(samples: np.ndarray, grid: np.ndarray, density: np.ndarray, bins: int = 50) -> float:
    """Total variation between a binned sample on [-1, 1] and a tabulated density."""
    edges = np.linspace(-1.0, 1.0, bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    p_hat = counts / counts.sum()
    p = bin_probabilities(grid, density, edges)
    return 0.5 * float(np.abs(p_hat - p / p.sum()).sum())
