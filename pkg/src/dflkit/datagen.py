"""Synthetic data generation and dataset persistence.

Cost model: a fixed binary mixing matrix ``B`` (entries Bernoulli(0.5)) maps
features to clean costs

    c_clean_i = (max((B z)_i / sqrt(m) + 3, 0)) ** deg + 1

and observed costs multiply each clean coefficient by an independent
``Uniform(1 - eps, 1 + eps)`` factor, so ``E[c | z] = c_clean`` exactly.
The base is clamped at zero before exponentiation so odd degrees cannot flip
signs.  Noise is drawn per coefficient by default; ``noise_shared=True``
draws one factor per sample instead.

Draw order per split (fixed contract): all feature vectors first (row-major
normals), then all noise factors.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
import numpy as np

from .core import Dataset, DatasetMeta, DimensionError, RngStream, STREAM_GEN_MODEL


@dataclass(frozen=True)
class GenParams:
    m: int = 5
    deg: int = 6
    noise_halfwidth: float = 0.5
    t_train: int = 100
    t_val: int = 100
    t_test: int = 1000
    seed: int = 0
    noise_shared: bool = False

    def __post_init__(self):
        if self.deg < 1:
            raise ValueError("polynomial degree must be at least 1")
        if self.noise_halfwidth < 0:
            raise ValueError("noise half-width must be non-negative")
        if self.m < 1:
            raise ValueError("need at least one feature")


@dataclass(frozen=True)
class GenModel:
    B: np.ndarray   # (n, m) binary mixing matrix, fixed per dataset family
    inst: object

    def __post_init__(self):
        if self.B.shape[0] != self.inst.n:
            raise DimensionError("mixing matrix rows must equal instance size")


def make_gen_model(inst, m: int, seed: int) -> GenModel:
    stream = RngStream(seed, STREAM_GEN_MODEL)
    B = stream.bernoulli_array(0.5, (inst.n, m))
    return GenModel(B=B, inst=inst)


def clean_costs(gm: GenModel, features: np.ndarray, deg: int) -> np.ndarray:
    """Noiseless costs for the given feature rows (see module docstring)."""
    m = gm.B.shape[1]
    base = features @ gm.B.T / math.sqrt(m) + 3.0
    return np.maximum(base, 0.0) ** deg + 1.0


def apply_noise(clean: np.ndarray, halfwidth: float, stream: RngStream,
                shared: bool = False) -> np.ndarray:
    if halfwidth == 0.0:
        return clean * 1.0
    if shared:
        eps = stream.uniform_array(1.0 - halfwidth, 1.0 + halfwidth, (clean.shape[0], 1))
    else:
        eps = stream.uniform_array(1.0 - halfwidth, 1.0 + halfwidth, clean.shape)
    return clean * eps


def generate_samples(gm: GenModel, count: int, params: GenParams,
                     stream: RngStream, split: str = "") -> Dataset:
    if count < 1:
        raise ValueError("need at least one sample")
    Z = stream.normal((count, params.m))
    clean = clean_costs(gm, Z, params.deg)
    costs = apply_noise(clean, params.noise_halfwidth, stream, params.noise_shared)
    meta = DatasetMeta(
        problem=gm.inst.kind,
        instance=gm.inst.descriptor(),
        m=params.m,
        n=gm.inst.n,
        t=count,
        seed=params.seed,
        noise_halfwidth=params.noise_halfwidth,
        degree=params.deg,
        split=split,
        noise_shared=params.noise_shared,
    )
    return Dataset(features=Z, costs=costs, clean_costs=clean, meta=meta)


# ---------------------------------------------------------------------------
# On-disk layout: features.csv / costs.csv / clean_costs.csv + meta.json.
# Floats are written in shortest round-trip decimal form, so a save/load
# cycle is bit-identical for every numeric field.
# ---------------------------------------------------------------------------

def _write_matrix(path: Path, header_prefix: str, matrix: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"{header_prefix}_{j}" for j in range(matrix.shape[1])])
        for row in matrix:
            writer.writerow([repr(float(x)) for x in row])


def _read_matrix(path: Path, header_prefix: str, rows: int, cols: int) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = [f"{header_prefix}_{j}" for j in range(cols)]
        if header != expected:
            raise ValueError(f"{path.name}: unexpected header {header[:3]}...")
        data = [[float(x) for x in row] for row in reader]
    arr = np.array(data, dtype=np.float64)
    if arr.shape != (rows, cols):
        raise DimensionError(
            f"{path.name}: shape {arr.shape} disagrees with meta {(rows, cols)}")
    return arr


def save_dataset(ds: Dataset, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_matrix(directory / "features.csv", "z", ds.features)
    _write_matrix(directory / "costs.csv", "c", ds.costs)
    if ds.clean_costs is not None:
        _write_matrix(directory / "clean_costs.csv", "c", ds.clean_costs)
    with open(directory / "meta.json", "w") as fh:
        json.dump(ds.meta.to_dict(), fh, sort_keys=True, indent=1)


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"no meta.json under {directory}")
    with open(meta_path) as fh:
        meta = DatasetMeta.from_dict(json.load(fh))
    features = _read_matrix(directory / "features.csv", "z", meta.t, meta.m)
    costs = _read_matrix(directory / "costs.csv", "c", meta.t, meta.n)
    clean_path = directory / "clean_costs.csv"
    clean = (_read_matrix(clean_path, "c", meta.t, meta.n)
             if clean_path.exists() else None)
    return Dataset(features=features, costs=costs, clean_costs=clean, meta=meta)
