"""Gaussian-noise likelihood, synthetic data and explicit likelihood bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np

from .field import BasisSpec, CoefficientVector, field_min_bound, sample_prior
from .forward import ForwardModel, n_observations
from .seeding import generator


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    sigma: float
    d: float
    truth_seed: int
    truth_u: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float).copy()
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if y.shape != (n_observations(self.d),):
            raise ValueError(
                f"expected {n_observations(self.d)} observations for d={self.d}, got {y.size}"
            )


@dataclass(frozen=True)
class LikelihoodBounds:
    """L_lower <= L(u) <= L_upper = 1. Stored in log form; L_lower may underflow."""

    L_upper: float
    log_L_lower: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.log_L_lower) and self.log_L_lower <= math.log(self.L_upper)):
            raise ValueError(f"need 0 < L_lower <= L_upper, got log L_lower = {self.log_L_lower}")

    @property
    def L_lower(self) -> float:
        return math.exp(self.log_L_lower)

    @property
    def log_ratio(self) -> float:
        """log(L_lower / L_upper)."""
        return self.log_L_lower - math.log(self.L_upper)


class LogLikelihood(Protocol):
    def log_likelihood(self, u: np.ndarray) -> float: ...


def make_synthetic_data(seed: int, model: ForwardModel, sigma: float) -> Dataset:
    """Draw a truth u ~ prior, return y = G(u) + sigma * xi.

    The truth and the noise come from one generator seeded with ``seed``.
    """
    rng = generator(seed)
    truth = sample_prior(rng, model.spec.J)
    noise = rng.standard_normal(len(model.obs))
    y = model(truth) + sigma * noise
    return Dataset(y=y, sigma=sigma, d=model.obs.d, truth_seed=seed, truth_u=np.asarray(truth))


def misfit_log_likelihood(y: np.ndarray, predicted: np.ndarray, sigma: float) -> float:
    r = y - predicted
    return float(-np.dot(r, r) / (2.0 * sigma * sigma))


class GaussianPosterior:
    """Log-likelihood -|y - G(u)|^2 / (2 sigma^2); the normalising constant is never needed."""

    def __init__(self, model: ForwardModel, dataset: Dataset):
        if len(model.obs) != dataset.y.size:
            raise ValueError("dataset and observation operator disagree on the number of points")
        self.model = model
        self.dataset = dataset
        self._y = dataset.y
        self._scale = 1.0 / (2.0 * dataset.sigma**2)

    def log_likelihood(self, u: np.ndarray) -> float:
        r = self._y - self.model(u)
        return float(-self._scale * np.dot(r, r))


class FlatPosterior:
    """L == 1: the posterior equals the prior."""

    def log_likelihood(self, u: np.ndarray) -> float:
        return 0.0


def log_likelihood(dataset: Dataset, u: np.ndarray, model: ForwardModel) -> float:
    return misfit_log_likelihood(dataset.y, model(CoefficientVector(u)), dataset.sigma)


def pressure_sup_bound(source_sup: float, a_min: float) -> float:
    """|p| <= 2 max|G| / a_min, since the flux constant is a weighted mean of G."""
    if a_min <= 0.0:
        raise ValueError(f"field lower bound must be positive, got {a_min}")
    return 2.0 * source_sup / a_min


def likelihood_lower_bound(
    dataset: Dataset,
    spec: BasisSpec,
    model: Optional[ForwardModel] = None,
    source_sup: Optional[float] = None,
) -> LikelihoodBounds:
    """Bounds L_lower <= L(u) <= 1 valid for every u in the cube.

    ``source_sup`` is max |int_0^x g|; it is taken from ``model`` when given
    and defaults to 1 (g == 1).
    """
    if source_sup is None:
        source_sup = model.source_sup if model is not None else 1.0
    p_max = pressure_sup_bound(source_sup, field_min_bound(spec))
    worst = np.sum((np.abs(dataset.y) + p_max) ** 2)
    return LikelihoodBounds(L_upper=1.0, log_L_lower=float(-worst / (2.0 * dataset.sigma**2)))
