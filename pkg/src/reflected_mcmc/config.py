"""Experiment configuration: a flat ``key = value`` text file.

Lines starting with ``#`` are comments. Lists are comma separated; tables
(``fixed_epsilon``) are comma-separated ``NAME:value`` pairs. Unknown keys
are rejected. Every key has a default, listed in ``FIELDS``.
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .samplers import ProposalKind


class ConfigError(ValueError):
    pass


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _names(text: str) -> Tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _table(text: str) -> Tuple[Tuple[str, float], ...]:
    out = []
    for item in _names(text):
        name, sep, value = item.partition(":")
        if not sep:
            raise ConfigError(f"table entry {item!r} must look like NAME:value")
        out.append((name.strip(), float(value)))
    return tuple(sorted(out))


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _optional_floats(text: str) -> Optional[Tuple[float, ...]]:
    return _floats(text) if text.strip() else None


@dataclass(frozen=True)
class ExperimentConfig:
    # problem
    K: Tuple[int, ...] = (25, 250)
    abar: float = 4.38
    gamma_override: Optional[Tuple[float, ...]] = None
    sigma: float = 0.05
    d: float = 0.03125
    n_cells: int = 4096
    source_profile: Optional[Tuple[float, ...]] = None
    truth_K: int = 0  # 0 means max(K)
    # chains
    algorithms: Tuple[str, ...] = ("IS", "RWM", "RURWM", "RSRWM")
    epsilon: Tuple[float, ...] = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
    n_steps: int = 200_000
    burn_in: int = 20_000
    init: str = "prior"
    functionals: Tuple[str, ...] = ("u0", "loglik", "a_mid")
    # autocorrelation runs
    target_accept: float = 0.135
    accept_tolerance: float = 0.05
    fixed_epsilon: Tuple[Tuple[str, float], ...] = ()
    tune_epsilon: Tuple[float, ...] = (0.0005, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5)
    tune_steps: int = 5000
    tune_refine: int = 4
    max_lag: int = 1000
    save_chains: bool = False
    # spectral verification
    suite_instances: int = 1000
    suite_n_max: int = 12
    suite_ratio: float = 10.0
    tensor_instances: int = 100
    tensor_n_max: int = 30
    gap_epsilon: Tuple[float, ...] = (0.1, 0.25, 0.5)
    gap_n_grid: int = 2001
    minorization_n_grid: int = 401
    # bookkeeping
    master_seed: int = 0
    output_dir: str = "out"
    workers: int = 1
    label: str = ""

    def __post_init__(self) -> None:
        try:
            self._validate()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def _validate(self) -> None:
        if not self.K or any(k < 0 for k in self.K):
            raise ConfigError("K must be a non-empty list of non-negative integers")
        if self.gamma_override is not None:
            if len(set(self.K)) != 1 or len(self.gamma_override) != 2 * self.K[0] + 1:
                raise ConfigError("gamma_override needs a single K and 2K+1 weights")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if not 0 < self.d <= 1:
            raise ConfigError("d must lie in (0, 1]")
        if self.n_cells < 2:
            raise ConfigError("n_cells must be >= 2")
        if self.source_profile is not None and len(self.source_profile) not in (1, self.n_cells + 1):
            raise ConfigError("source_profile needs 1 or n_cells + 1 values")
        for name in self.algorithms:
            ProposalKind(name)
        for name, eps in self.fixed_epsilon:
            ProposalKind(name)
            if not eps > 0:
                raise ConfigError(f"fixed_epsilon for {name} must be positive")
        if any(not e > 0 for e in self.epsilon + self.tune_epsilon):
            raise ConfigError("step sizes must be positive")
        if not self.n_steps > self.burn_in >= 0:
            raise ConfigError("need n_steps > burn_in >= 0")
        if self.init not in ("prior", "truth"):
            raise ConfigError("init must be 'prior' or 'truth'")
        if any(not 0 < e < 1 for e in self.gap_epsilon):
            raise ConfigError("gap_epsilon values must lie in (0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.tune_steps < 10:
            raise ConfigError("tune_steps must be >= 10")

    @property
    def data_K(self) -> int:
        return self.truth_K or max(self.K)

    def epsilon_for(self, algorithm: str) -> Optional[float]:
        return dict(self.fixed_epsilon).get(algorithm)

    def canonical(self) -> str:
        """Sorted ``key=value`` lines for every field that affects results."""
        lines = []
        for f in dataclasses.fields(self):
            if f.name in _NOT_HASHED:
                continue
            lines.append(f"{f.name}={_render(getattr(self, f.name))}")
        return "\n".join(sorted(lines)) + "\n"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()[:16]

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_NOT_HASHED = {"output_dir", "workers"}


def _render(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ",".join(f"{k}:{v!r}" for k, v in value)
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_PARSERS = {
    "K": _ints,
    "abar": float,
    "gamma_override": _optional_floats,
    "sigma": float,
    "d": float,
    "n_cells": int,
    "source_profile": _optional_floats,
    "truth_K": int,
    "algorithms": _names,
    "epsilon": _floats,
    "n_steps": int,
    "burn_in": int,
    "init": str.strip,
    "functionals": _names,
    "target_accept": float,
    "accept_tolerance": float,
    "fixed_epsilon": _table,
    "tune_epsilon": _floats,
    "tune_steps": int,
    "tune_refine": int,
    "max_lag": int,
    "save_chains": _bool,
    "suite_instances": int,
    "suite_n_max": int,
    "suite_ratio": float,
    "tensor_instances": int,
    "tensor_n_max": int,
    "gap_epsilon": _floats,
    "gap_n_grid": int,
    "minorization_n_grid": int,
    "master_seed": int,
    "output_dir": str.strip,
    "workers": int,
    "label": str.strip,
}
FIELDS = tuple(_PARSERS)


def parse_config_text(text: str) -> Dict[str, object]:
    values: Dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value.strip())
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return values


def load_config(path: Optional[str | Path] = None, preset: Optional[str] = None, **overrides) -> ExperimentConfig:
    """Defaults, then a preset, then a config file, then explicit overrides."""
    values: Dict[str, object] = {}
    if preset is not None:
        values.update(parse_config_text(preset_text(preset)))
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_config_text(text))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def preset_names() -> List[str]:
    files = resources.files("reflected_mcmc").joinpath("presets")
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    path = resources.files("reflected_mcmc").joinpath("presets", f"{name}.cfg")
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path.read_text(encoding="utf-8")
