"""Uniform-series prior on the diffusion coefficient.

The coefficient field is

    a(u)(x) = abar + gamma_0 u_0 + sum_{j=1}^{K} ( gamma_{2j-1} u_{2j-1} cos(2 pi j x)
                                                  + gamma_{2j}   u_{2j}   sin(2 pi j x) )

with u in the cube [-1, 1]^J, J = 2K + 1, and u_j i.i.d. U(-1, 1) under the prior.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.random import Generator

DEFAULT_ABAR = 4.38


def default_gamma(K: int) -> np.ndarray:
    """Weights gamma_0 = 1, gamma_{2j-1} = gamma_{2j} = j^-2."""
    gamma = np.empty(2 * K + 1)
    gamma[0] = 1.0
    j = np.arange(1, K + 1, dtype=float)
    gamma[1::2] = j**-2
    gamma[2::2] = j**-2
    return gamma


@dataclass(frozen=True)
class BasisSpec:
    """Truncated expansion: K frequency pairs, constant mean ``abar``, weights ``gamma``.

    ``abar`` is normally a scalar. A per-node mean profile may be given as
    ``abar_profile``; it is only meaningful on a mesh of matching size.
    """

    K: int
    abar: float = DEFAULT_ABAR
    gamma: Optional[np.ndarray] = None
    abar_profile: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.K < 0:
            raise ValueError(f"K must be non-negative, got {self.K}")
        if self.gamma is None:
            gamma = default_gamma(self.K)
        else:
            gamma = np.asarray(self.gamma, dtype=float).copy()
            if gamma.shape != (2 * self.K + 1,):
                raise ValueError(
                    f"gamma must have length 2K+1 = {2 * self.K + 1}, got {gamma.shape}"
                )
        if not np.all(gamma > 0) or not np.all(np.isfinite(gamma)):
            raise ValueError("gamma entries must be finite and positive")
        gamma.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        if self.abar_profile is not None:
            prof = np.asarray(self.abar_profile, dtype=float).copy()
            prof.setflags(write=False)
            object.__setattr__(self, "abar_profile", prof)

    @property
    def J(self) -> int:
        return 2 * self.K + 1

    def mean_on(self, n_nodes: int) -> np.ndarray | float:
        if self.abar_profile is None:
            return self.abar
        if self.abar_profile.shape != (n_nodes,):
            raise ValueError(
                f"abar_profile has {self.abar_profile.size} entries, mesh has {n_nodes} nodes"
            )
        return self.abar_profile


class CoefficientVector(np.ndarray):
    """Read-only float vector with every entry in [-1, 1].

    Construction validates; an out-of-range entry raises ``ValueError``
    instead of being clamped.
    """

    def __new__(cls, values: Sequence[float] | np.ndarray) -> "CoefficientVector":
        arr = np.array(values, dtype=float).reshape(-1)
        if arr.size == 0:
            raise ValueError("coefficient vector must be non-empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficient vector contains non-finite entries")
        if np.any(arr < -1.0) or np.any(arr > 1.0):
            bad = arr[(arr < -1.0) | (arr > 1.0)]
            raise ValueError(f"coefficients outside [-1, 1]: {bad[:5]}")
        obj = arr.view(cls)
        obj.setflags(write=False)
        return obj

    def __array_wrap__(self, obj, context=None, return_scalar=False):
        # arithmetic results are plain arrays; they may leave the cube
        if return_scalar:
            return obj[()]
        return np.asarray(obj)


def _check_dim(spec: BasisSpec, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (spec.J,):
        raise ValueError(f"u has shape {u.shape}, basis expects ({spec.J},)")
    return u


def evaluate_field(spec: BasisSpec, u: np.ndarray, x: float) -> float:
    """Evaluate a(u)(x) at a single point of [0, 1] by direct summation."""
    u = _check_dim(spec, u)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if spec.abar_profile is not None:
        raise ValueError("pointwise evaluation needs a scalar abar; use evaluate_field_on_mesh")
    g = spec.gamma
    total = spec.abar + g[0] * u[0]
    for j in range(1, spec.K + 1):
        arg = 2.0 * np.pi * j * x
        total += g[2 * j - 1] * u[2 * j - 1] * np.cos(arg) + g[2 * j] * u[2 * j] * np.sin(arg)
    return float(total)


def evaluate_field_on_mesh(spec: BasisSpec, u: np.ndarray, mesh_nodes: np.ndarray) -> np.ndarray:
    """Vectorised :func:`evaluate_field` over arbitrary nodes."""
    u = _check_dim(spec, u)
    x = np.asarray(mesh_nodes, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("mesh nodes must lie in [0, 1]")
    g = spec.gamma
    out = np.full(x.shape, 0.0) + spec.mean_on(x.size) + g[0] * u[0]
    if spec.K:
        j = np.arange(1, spec.K + 1)
        arg = 2.0 * np.pi * np.outer(x, j)
        out += np.cos(arg) @ (g[1::2] * u[1::2]) + np.sin(arg) @ (g[2::2] * u[2::2])
    return out


def field_on_uniform_grid(spec: BasisSpec, u: np.ndarray, n_cells: int) -> np.ndarray:
    """a(u) at the nodes i / n_cells, i = 0..n_cells, via one real inverse FFT.

    Requires K < n_cells / 2 so that no frequency aliases. Agrees with
    :func:`evaluate_field_on_mesh` to rounding.
    """
    K = spec.K
    if 2 * K >= n_cells:
        raise ValueError(f"FFT evaluation needs 2K < n_cells (K={K}, n_cells={n_cells})")
    g = spec.gamma
    spectrum = np.zeros(n_cells // 2 + 1, dtype=complex)
    spectrum[0] = n_cells * g[0] * u[0]
    if K:
        spectrum[1 : K + 1] = (0.5 * n_cells) * (g[1::2] * u[1::2] - 1j * (g[2::2] * u[2::2]))
    periodic = np.fft.irfft(spectrum, n_cells)
    values = np.empty(n_cells + 1)
    values[:-1] = periodic
    values[-1] = periodic[0]
    return values + spec.mean_on(n_cells + 1)


def field_min_bound(spec: BasisSpec) -> float:
    """Lower bound on a(u)(x) over x in [0, 1] and u in the cube.

    Each cos/sin pair contributes at least -sqrt(gamma_c^2 + gamma_s^2),
    i.e. -sqrt(2) j^-2 with the default weights.
    """
    g = spec.gamma
    mean = spec.abar if spec.abar_profile is None else float(np.min(spec.abar_profile))
    pairs = np.hypot(g[1::2], g[2::2])
    return float(mean - g[0] - pairs.sum())


def sample_prior(rng: Generator, J: int) -> CoefficientVector:
    """Draw u with i.i.d. U(-1, 1) entries."""
    if J < 1:
        raise ValueError(f"J must be >= 1, got {J}")
    return CoefficientVector(rng.uniform(-1.0, 1.0, size=J))
