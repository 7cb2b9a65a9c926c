"""Disturbance sampling, prediction-map images, and the sample-size bound.

The number of scenarios needed for a (delta, beta) guarantee comes from a
Hoeffding concentration argument: K >= -ln(beta) / (2 delta^2). Sampling
uses one spawned RNG stream per scenario index so growing K extends a set
without reshuffling earlier rows.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linops import as_matrix, as_vector

__all__ = ["HoeffdingQuery", "NoiseModel", "PredictionSet", "ScenarioSet",
           "load_noise", "load_scenarios", "noise_from_json", "predict",
           "required_scenarios", "sample", "save_noise", "save_scenarios"]

GAUSSIAN_DIAG = "gaussian_diag"
GAUSSIAN_FULL = "gaussian_full"
CUSTOM_TABLE = "custom_table"


@dataclass(frozen=True)
class NoiseModel:
    """Per-step disturbance distribution.

    Gaussian kinds carry a mean and covariance; the custom kind resamples
    rows of an empirical table uniformly at random.
    """

    kind: str
    mean: np.ndarray
    covariance: np.ndarray | None = None
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (GAUSSIAN_DIAG, GAUSSIAN_FULL, CUSTOM_TABLE):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        mean = as_vector(self.mean)
        object.__setattr__(self, "mean", mean)
        if self.kind == CUSTOM_TABLE:
            if self.table is None:
                raise ValueError("custom_table noise needs a sample table")
            table = as_matrix(self.table, cols=mean.shape[0])
            if table.shape[0] < 1:
                raise ValueError("empty sample table")
            object.__setattr__(self, "table", table)
        else:
            cov = as_matrix(self.covariance, rows=mean.shape[0], cols=mean.shape[0])
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise ValueError("covariance must be symmetric")
            if self.kind == GAUSSIAN_DIAG and np.any(cov - np.diag(np.diag(cov))):
                raise ValueError("gaussian_diag covariance must be diagonal")
            object.__setattr__(self, "covariance", cov)
            object.__setattr__(self, "_factor", _psd_factor(cov))

    @staticmethod
    def gaussian_diag(mean, variances) -> "NoiseModel":
        variances = as_vector(variances)
        return NoiseModel(kind=GAUSSIAN_DIAG, mean=mean, covariance=np.diag(variances))

    @staticmethod
    def gaussian_full(mean, covariance) -> "NoiseModel":
        return NoiseModel(kind=GAUSSIAN_FULL, mean=mean, covariance=covariance)

    @staticmethod
    def custom_table(table) -> "NoiseModel":
        table = as_matrix(table)
        return NoiseModel(kind=CUSTOM_TABLE, mean=np.zeros(table.shape[1]), table=table)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """count i.i.d. samples, shape (count, dim)."""
        if self.kind == CUSTOM_TABLE:
            idx = rng.integers(0, self.table.shape[0], size=count)
            return self.table[idx]
        z = rng.standard_normal((count, self.dim))
        return self.mean + z @ self._factor.T


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """A factor L with L L^T = cov; Cholesky with a PSD eigen fallback."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        scale = max(1.0, float(np.max(np.abs(w))))
        if np.min(w) < -1e-10 * scale:
            raise ValueError("covariance is not positive semidefinite")
        return v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


@dataclass(frozen=True)
class HoeffdingQuery:
    """Violation parameter delta and risk of failure beta, both in (0, 1]."""

    delta: float
    beta: float

    def __post_init__(self):
        if not (0.0 < self.delta <= 1.0):
            raise ValueError("delta must lie in (0, 1]")
        if not (0.0 < self.beta <= 1.0):
            raise ValueError("beta must lie in (0, 1]")


def required_scenarios(q: HoeffdingQuery) -> int:
    """Smallest K with K >= -ln(beta) / (2 delta^2), floored at 1."""
    k = math.ceil(-math.log(q.beta) / (2.0 * q.delta ** 2))
    return max(1, k)


@dataclass(frozen=True)
class ScenarioSet:
    """K sampled concatenated disturbances, one per row (K x N*n_x)."""

    w: np.ndarray
    rng_seed: int
    horizon: int
    n_x: int

    def __post_init__(self):
        w = as_matrix(self.w, cols=self.horizon * self.n_x)
        if w.shape[0] < 1:
            raise ValueError("scenario set must hold at least one scenario")
        object.__setattr__(self, "w", w)

    @property
    def count(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class PredictionSet:
    """Row-wise images Phi with row i = G_w W^(i)."""

    phi: np.ndarray

    @property
    def count(self) -> int:
        return self.phi.shape[0]


def sample(noise: NoiseModel, horizon: int, count: int, seed: int) -> ScenarioSet:
    """Draw count scenarios of horizon i.i.d. steps each.

    Scenario i uses the stream spawned at key (i,) from the master seed,
    so the first rows of sample(..., K) and sample(..., K') coincide.
    """
    if count < 1:
        raise ValueError("need at least one scenario")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    rows = np.empty((count, horizon * noise.dim))
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        rows[i] = noise.draw(rng, horizon).reshape(-1)
    return ScenarioSet(w=rows, rng_seed=seed, horizon=horizon, n_x=noise.dim)


def predict(ss: ScenarioSet, g_w: np.ndarray) -> PredictionSet:
    """Map every scenario through the disturbance block matrix."""
    g_w = as_matrix(g_w, rows=ss.w.shape[1], cols=ss.w.shape[1])
    return PredictionSet(phi=ss.w @ g_w.T)


def _float_cell(v: float) -> str:
    return repr(float(v))


def save_scenarios(ss: ScenarioSet, noise: NoiseModel, path) -> None:
    """CSV of scenario rows plus a JSON sidecar with the generation metadata."""
    path = Path(path)
    header = [f"w_{t}_{j}" for t in range(ss.horizon) for j in range(ss.n_x)]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in ss.w:
            writer.writerow([_float_cell(v) for v in row])
    meta = {
        "seed": ss.rng_seed,
        "K": ss.count,
        "N": ss.horizon,
        "n_x": ss.n_x,
        "noise": _noise_to_json(noise),
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")


def load_scenarios(path) -> tuple[ScenarioSet, NoiseModel]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        rows = [[float(v) for v in row] for row in reader]
    ss = ScenarioSet(w=np.asarray(rows), rng_seed=int(meta["seed"]),
                     horizon=int(meta["N"]), n_x=int(meta["n_x"]))
    return ss, noise_from_json(meta["noise"])


def _noise_to_json(noise: NoiseModel) -> dict:
    d = {"kind": noise.kind, "mean": noise.mean.tolist()}
    if noise.kind == CUSTOM_TABLE:
        d["table"] = noise.table.tolist()
    else:
        d["covariance"] = noise.covariance.tolist()
    return d


def noise_from_json(d: dict) -> NoiseModel:
    kind = d["kind"]
    mean = np.asarray(d["mean"], dtype=float)
    if kind == CUSTOM_TABLE:
        return NoiseModel(kind=kind, mean=mean,
                          table=np.asarray(d["table"], dtype=float))
    return NoiseModel(kind=kind, mean=mean,
                      covariance=np.asarray(d["covariance"], dtype=float))


def load_noise(path) -> NoiseModel:
    return noise_from_json(json.loads(Path(path).read_text()))


def save_noise(noise: NoiseModel, path) -> None:
    Path(path).write_text(json.dumps(_noise_to_json(noise), indent=2) + "\n")
