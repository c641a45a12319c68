"""1D Darcy forward model: -(a p')' = g on [0, 1], p(0) = p(1) = 0.

The solve uses the flux representation a p' = C - G(x), G(x) = int_0^x g,
with C fixed by p(1) = 0, and composite trapezoid quadrature throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .field import BasisSpec, evaluate_field_on_mesh, field_on_uniform_grid

DEFAULT_N_CELLS = 4096


@dataclass(frozen=True)
class Mesh:
    n_cells: int

    def __post_init__(self) -> None:
        if self.n_cells < 2:
            raise ValueError(f"n_cells must be >= 2, got {self.n_cells}")

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) / self.n_cells


@dataclass(frozen=True)
class SourceTerm:
    g_values: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.g_values, dtype=float).copy()
        if not np.all(np.isfinite(g)):
            raise ValueError("source values must be finite")
        g.setflags(write=False)
        object.__setattr__(self, "g_values", g)

    @classmethod
    def constant(cls, mesh: Mesh, value: float = 1.0) -> "SourceTerm":
        return cls(np.full(mesh.n_cells + 1, float(value)))


@dataclass(frozen=True)
class PressureSolution:
    p_values: np.ndarray
    mesh: Mesh


def n_observations(d: float) -> int:
    """floor(1/d) + 1, robust to 1/d landing just below an integer."""
    return int(math.floor(1.0 / d + 1e-9)) + 1


@dataclass(frozen=True)
class ObservationOperator:
    """Point evaluations at x = i d, i = 0..floor(1/d)."""

    d: float

    def __post_init__(self) -> None:
        if not 0.0 < self.d <= 1.0:
            raise ValueError(f"observation spacing must lie in (0, 1], got {self.d}")

    @property
    def locations(self) -> np.ndarray:
        x = np.arange(n_observations(self.d)) * self.d
        return np.minimum(x, 1.0)

    def __len__(self) -> int:
        return n_observations(self.d)


def _trapezoid_weights(n_nodes: int, h: float) -> np.ndarray:
    w = np.full(n_nodes, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _cumulative_trapezoid(f: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(f)
    out[0] = 0.0
    np.cumsum((f[1:] + f[:-1]) * (0.5 * h), out=out[1:])
    return out


def source_antiderivative(g: SourceTerm, mesh: Mesh) -> np.ndarray:
    """G(x_i) = int_0^{x_i} g by cumulative trapezoid."""
    if g.g_values.shape != (mesh.n_cells + 1,):
        raise ValueError("source term does not match mesh")
    return _cumulative_trapezoid(g.g_values, mesh.h)


def _solve_with_antiderivative(a: np.ndarray, G: np.ndarray, mesh: Mesh) -> np.ndarray:
    h = mesh.h
    inv_a = 1.0 / a
    w = _trapezoid_weights(a.size, h)
    flux_const = np.dot(w, G * inv_a) / np.dot(w, inv_a)
    p = _cumulative_trapezoid((flux_const - G) * inv_a, h)
    # the residual at x = 1 is rounding-level; remove it with a ramp
    p -= p[-1] * (np.arange(a.size) / (a.size - 1))
    p[0] = 0.0
    p[-1] = 0.0
    return p


def solve_pressure(a_values: np.ndarray, g: SourceTerm, mesh: Mesh) -> PressureSolution:
    a = np.asarray(a_values, dtype=float)
    if a.shape != (mesh.n_cells + 1,):
        raise ValueError(f"a has shape {a.shape}, mesh has {mesh.n_cells + 1} nodes")
    if np.any(a <= 0.0):
        raise ValueError(f"diffusion coefficient must be positive (min {a.min():.3g})")
    G = source_antiderivative(g, mesh)
    return PressureSolution(_solve_with_antiderivative(a, G, mesh), mesh)


def flux_at_nodes(a_values: np.ndarray, g: SourceTerm, mesh: Mesh) -> np.ndarray:
    """Discrete flux C - G(x_i) used by :func:`solve_pressure`."""
    a = np.asarray(a_values, dtype=float)
    G = source_antiderivative(g, mesh)
    w = _trapezoid_weights(a.size, mesh.h)
    return np.dot(w, G / a) / np.dot(w, 1.0 / a) - G


def observe(p: PressureSolution, obs: ObservationOperator) -> np.ndarray:
    return np.interp(obs.locations, p.mesh.nodes, p.p_values)


def forward_map(
    spec: BasisSpec,
    u: np.ndarray,
    g: SourceTerm,
    mesh: Mesh,
    obs: ObservationOperator,
) -> np.ndarray:
    a = evaluate_field_on_mesh(spec, u, mesh.nodes)
    return observe(solve_pressure(a, g, mesh), obs)


class ForwardModel:
    """Cached forward map u -> G(u) for one (basis, mesh, source, observation) setup.

    Field values come from an inverse FFT when the mesh resolves every
    frequency, otherwise from direct summation.
    """

    def __init__(
        self,
        spec: BasisSpec,
        mesh: Mesh,
        obs: ObservationOperator,
        source: Optional[SourceTerm] = None,
    ):
        self.spec = spec
        self.mesh = mesh
        self.obs = obs
        self.source = source if source is not None else SourceTerm.constant(mesh)
        self._G = source_antiderivative(self.source, mesh)
        self._nodes = mesh.nodes
        self._locations = obs.locations
        self._use_fft = 2 * spec.K < mesh.n_cells

    def field(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.spec.J,):
            raise ValueError(f"u has shape {u.shape}, basis expects ({self.spec.J},)")
        if self._use_fft:
            return field_on_uniform_grid(self.spec, u, self.mesh.n_cells)
        return evaluate_field_on_mesh(self.spec, u, self._nodes)

    def pressure(self, u: np.ndarray) -> np.ndarray:
        a = self.field(u)
        if a.min() <= 0.0:
            raise ValueError(f"diffusion coefficient must be positive (min {a.min():.3g})")
        return _solve_with_antiderivative(a, self._G, self.mesh)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return np.interp(self._locations, self._nodes, self.pressure(u))

    @property
    def source_sup(self) -> float:
        """max |G| over the mesh, the quantity entering the likelihood bound."""
        return float(np.max(np.abs(self._G)))
