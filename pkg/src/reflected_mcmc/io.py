"""Plain-text outputs: CSV tables with a provenance comment line, JSON sidecars.

Every CSV starts with ``# reflected_mcmc <version> config_hash=<h> master_seed=<s>``.
Floats are written with 17 significant digits so files round-trip exactly
and reruns are byte-identical.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from . import __version__
from .posterior import Dataset
from .samplers import ChainOutput

ARTIFACT = "reflected_mcmc"


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Provenance:
    config_hash: str
    master_seed: int
    version: str = __version__

    def header(self) -> str:
        return f"# {ARTIFACT} {self.version} config_hash={self.config_hash} master_seed={self.master_seed}"

    def as_dict(self) -> Dict[str, object]:
        return {"artifact": ARTIFACT, "version": self.version,
                "config_hash": self.config_hash, "master_seed": self.master_seed}


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if value is None:
        return ""
    return str(value)


def render_csv(prov: Provenance, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(prov.header() + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise SchemaError(f"row has {len(row)} fields, header has {len(columns)}")
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, prov: Provenance, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    text = render_csv(prov, columns, rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    return path


def read_csv(path: str | Path) -> Tuple[Dict[str, str], List[str], List[Dict[str, str]]]:
    """Return (provenance fields, column names, rows as dicts)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta: Dict[str, str] = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            for token in line[1:].split():
                key, sep, value = token.partition("=")
                if sep:
                    meta[key] = value
            continue
        body.append(line)
    if not body:
        raise SchemaError(f"{path}: no header row")
    reader = csv.reader(body)
    columns = next(reader)
    rows = [dict(zip(columns, r)) for r in reader if r]
    return meta, columns, rows


def write_json(path: str | Path, payload: Dict[str, object]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# --- domain files ------------------------------------------------------------

DATASET_COLUMNS = ("index", "location", "y")


def write_dataset(out_dir: str | Path, dataset: Dataset, locations: np.ndarray, prov: Provenance,
                  stem: str = "dataset") -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    rows = [(i, x, y) for i, (x, y) in enumerate(zip(locations, dataset.y))]
    csv_path = write_csv(out_dir / f"{stem}.csv", prov, DATASET_COLUMNS, rows)
    meta = dict(prov.as_dict())
    meta.update({
        "sigma": dataset.sigma,
        "d": dataset.d,
        "n_observations": len(dataset.y),
        "truth_seed": dataset.truth_seed,
        "truth_u": None if dataset.truth_u is None else [float(v) for v in dataset.truth_u],
    })
    json_path = write_json(out_dir / f"{stem}.json", meta)
    return csv_path, json_path


def read_dataset(csv_path: str | Path) -> Dataset:
    csv_path = Path(csv_path)
    _, columns, rows = read_csv(csv_path)
    if tuple(columns) != DATASET_COLUMNS:
        raise SchemaError(f"{csv_path}: expected columns {DATASET_COLUMNS}, got {tuple(columns)}")
    meta = json.loads(csv_path.with_suffix(".json").read_text(encoding="utf-8"))
    truth = meta.get("truth_u")
    return Dataset(
        y=np.array([float(r["y"]) for r in rows]),
        sigma=float(meta["sigma"]),
        d=float(meta["d"]),
        truth_seed=int(meta["truth_seed"]),
        truth_u=None if truth is None else np.array(truth, dtype=float),
    )


CHAIN_COLUMNS = ("step", "functional_id", "value")


def write_chain(path: str | Path, chain: ChainOutput, prov: Provenance) -> Path:
    """Long-format trace (post-burn-in step index) followed by summary rows."""
    rows: List[Tuple] = []
    for fid in sorted(chain.series):
        for k, v in enumerate(chain.series[fid]):
            rows.append((chain.burn_in + k, fid, v))
    rows.append(("summary", "accept_rate", chain.accept_rate))
    rows.append(("summary", "n_steps", chain.n_steps))
    rows.append(("summary", "seed", chain.seed))
    return write_csv(path, prov, CHAIN_COLUMNS, rows)


ACCEPTANCE_COLUMNS = ("algorithm", "K", "epsilon", "accept_rate", "n_steps", "burn_in", "seed")
ACF_COLUMNS = ("algorithm", "K", "epsilon", "functional_id", "lag", "rho")
SUMMARY_COLUMNS = ("algorithm", "K", "epsilon", "functional_id", "accept_rate", "iat", "ess", "seed")
