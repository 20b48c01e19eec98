"""Embedding-space distribution metrics and composite scores.

Operates purely on caller-supplied embedding matrices; the feature networks
that produce them are someone else's problem. Provides the Fréchet distance
between Gaussian fits (the FVD/FAD family), polynomial-kernel MMD (the KVD
family), mean paired cosine consistency, and the three composite roll-ups:

    S_AVQ = 0.01 * FVD + KVD + 0.1 * FAD
    S_AVC = AV_IB + CAVP + AVHScore
    S_AVS = JavisScore

All compositions are exact weighted sums; no normalization is hidden here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .embeddings import STORE_MAGIC, cosine_similarity, read_embedding_store
from .errors import ParameterError, StoreError

MATRIX_MAGIC = b"JVMAT1\n"


@dataclass(frozen=True)
class SampleSet:
    """An n x d matrix of embedding vectors.

    Singleton sets are allowed (the biased MMD estimator is defined for
    them); operations that need n >= 2, such as the Gaussian fit and the
    unbiased estimator, enforce it themselves.
    """

    vectors: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ParameterError(f"sample set must be n x d with n >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("sample set must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "vectors", arr)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class GaussianStats:
    """Mean vector and symmetric covariance matrix of a sample set."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        cov = np.ascontiguousarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (len(mean), len(mean)):
            raise ParameterError("mean must be d and cov d x d")
        if np.abs(cov - cov.T).max() > 1e-9:
            raise ParameterError("covariance must be symmetric within 1e-9")
        if np.diag(cov).min() < -1e-12:
            raise ParameterError("covariance diagonal must be non-negative")
        for arr in (mean, cov):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def gaussian_stats(sample_set: SampleSet) -> GaussianStats:
    """Column means and the 1/(n-1) sample covariance, symmetrized."""
    if sample_set.n < 2:
        raise ParameterError("gaussian_stats needs at least 2 samples")
    x = sample_set.vectors
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (sample_set.n - 1)
    return GaussianStats(mean=mean, cov=(cov + cov.T) / 2.0)


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Squared 2-Wasserstein distance between two Gaussians.

    |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2), with
    matrix square roots taken through symmetric eigendecomposition and
    eigenvalues clamped at 0 to absorb finite-sample non-PSD drift. The
    result is clamped to be non-negative.
    """
    if a.mean.shape != b.mean.shape:
        raise ParameterError(
            f"dimension mismatch: {a.mean.shape[0]} vs {b.mean.shape[0]}"
        )
    vals_a, vecs_a = np.linalg.eigh(a.cov)
    if not np.all(np.isfinite(vals_a)):
        raise ParameterError("non-finite eigenvalues in covariance")
    root_a = (vecs_a * np.sqrt(np.maximum(vals_a, 0.0))) @ vecs_a.T
    inner = root_a @ b.cov @ root_a
    inner = (inner + inner.T) / 2.0
    vals_inner = np.linalg.eigh(inner)[0]
    if not np.all(np.isfinite(vals_inner)):
        raise ParameterError("non-finite eigenvalues in covariance product")
    mean_term = float(np.sum((a.mean - b.mean) ** 2))
    trace_term = float(np.trace(a.cov) + np.trace(b.cov)) - 2.0 * float(
        np.sum(np.sqrt(np.maximum(vals_inner, 0.0)))
    )
    return max(0.0, mean_term + trace_term)


@dataclass(frozen=True)
class MmdConfig:
    """Polynomial kernel (scale * <u, v> + coef)^degree; scale None = 1/d."""

    degree: int = 3
    coef: float = 1.0
    scale: float | None = None
    estimator: str = "biased"

    def __post_init__(self):
        if self.degree < 1:
            raise ParameterError("kernel degree must be >= 1")
        if self.estimator not in ("biased", "unbiased"):
            raise ParameterError(f"unknown estimator {self.estimator!r}")


def mmd_poly(x: SampleSet, y: SampleSet, cfg: MmdConfig | None = None) -> float:
    """Maximum mean discrepancy (squared) under a polynomial kernel.

    The biased V-statistic keeps kernel diagonals; the unbiased U-statistic
    drops them. Accumulation is row-major and deterministic.
    """
    cfg = cfg or MmdConfig()
    if x.dim != y.dim:
        raise ParameterError(f"dimension mismatch: {x.dim} vs {y.dim}")
    scale = cfg.scale if cfg.scale is not None else 1.0 / x.dim
    m, n = x.n, y.n

    def kernel(u, v):
        return (scale * (u @ v.T) + cfg.coef) ** cfg.degree

    kxx = kernel(x.vectors, x.vectors)
    kyy = kernel(y.vectors, y.vectors)
    kxy = kernel(x.vectors, y.vectors)
    if cfg.estimator == "biased":
        return float(kxx.sum() / (m * m) + kyy.sum() / (n * n) - 2.0 * kxy.sum() / (m * n))
    if m < 2 or n < 2:
        raise ParameterError("unbiased estimator needs at least 2 samples per set")
    sum_xx = float(kxx.sum() - np.trace(kxx))
    sum_yy = float(kyy.sum() - np.trace(kyy))
    return sum_xx / (m * (m - 1)) + sum_yy / (n * (n - 1)) - 2.0 * float(kxy.sum()) / (m * n)


def cosine_consistency(paired) -> float:
    """Mean cosine similarity over (embedding, embedding) pairs."""
    sims = [cosine_similarity(a, b) for a, b in paired]
    if not sims:
        raise ParameterError("cosine_consistency needs at least one pair")
    return math.fsum(sims) / len(sims)


# --- composite scores -----------------------------------------------------------


@dataclass(frozen=True)
class MetricTable:
    """Named metric values; any subset may be present (None = absent)."""

    FVD: float | None = None
    KVD: float | None = None
    FAD: float | None = None
    AV_IB: float | None = None
    CAVP: float | None = None
    AVHScore: float | None = None
    JavisScore: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and not math.isfinite(v):
                raise ParameterError(f"metric {f.name} must be finite, got {v}")

    def require(self, *names: str) -> list[float]:
        values = []
        for name in names:
            v = getattr(self, name)
            if v is None:
                raise ParameterError(f"composite score needs metric {name!r}")
            values.append(v)
        return values


@dataclass(frozen=True)
class CompositeScores:
    S_AVQ: float | None = None
    S_AVC: float | None = None
    S_AVS: float | None = None

    def to_json_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def composite_scores(
    table: MetricTable, which: tuple = ("AVQ", "AVC", "AVS")
) -> CompositeScores:
    """Exact weighted sums rolling the table up to quality/consistency/synchrony."""
    out = {}
    if "AVQ" in which:
        fvd, kvd, fad = table.require("FVD", "KVD", "FAD")
        out["S_AVQ"] = 0.01 * fvd + kvd + 0.1 * fad
    if "AVC" in which:
        av_ib, cavp, avh = table.require("AV_IB", "CAVP", "AVHScore")
        out["S_AVC"] = av_ib + cavp + avh
    if "AVS" in which:
        (js,) = table.require("JavisScore")
        out["S_AVS"] = js
    return CompositeScores(**out)


# --- sample-set files -----------------------------------------------------------


def write_matrix_file(path, vectors: np.ndarray) -> None:
    """Write an n x d float32 matrix with the JVMAT1 header convention."""
    import json as _json

    arr = np.ascontiguousarray(vectors, dtype="<f4")
    if arr.ndim != 2:
        raise ParameterError("matrix file payload must be 2-D")
    header = {"dim": int(arr.shape[1]), "count": int(arr.shape[0]), "dtype": "f32le"}
    Path(path).write_bytes(
        MATRIX_MAGIC + (_json.dumps(header, sort_keys=True) + "\n").encode() + arr.tobytes()
    )


def load_sample_set(path) -> SampleSet:
    """Load a SampleSet from an embedding-store or a plain matrix file.

    Store files contribute their vectors in file order; matrix files are a
    raw row-major float32 payload behind the same header convention.
    """
    import json as _json

    head = Path(path).open("rb").read(7)
    if head == STORE_MAGIC:
        table = read_embedding_store(path)
        return SampleSet(vectors=np.stack(list(table.values())))
    if head != MATRIX_MAGIC:
        raise StoreError(f"{path}: neither an embedding store nor a matrix file")
    data = Path(path).read_bytes()
    nl = data.find(b"\n", len(MATRIX_MAGIC))
    if nl < 0:
        raise StoreError(f"{path}: missing header line")
    try:
        header = _json.loads(data[len(MATRIX_MAGIC) : nl])
        dim, count = int(header["dim"]), int(header["count"])
    except (ValueError, KeyError, TypeError) as exc:
        raise StoreError(f"{path}: malformed header") from exc
    if header.get("dtype") != "f32le":
        raise StoreError(f"{path}: unsupported dtype {header.get('dtype')!r}")
    payload = data[nl + 1 :]
    if len(payload) != dim * count * 4:
        raise StoreError(f"{path}: payload length does not match {count} x {dim} float32")
    return SampleSet(vectors=np.frombuffer(payload, dtype="<f4").reshape(count, dim))
