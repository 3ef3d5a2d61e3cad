"""Numerical primitives: z-normalization stats, symmetric matrix powers, 2-D projection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._fileio import atomic_write_text, comment_block, fmt_float
from .vectorstore import VectorSet

STD_FLOOR = 1e-8
EIGEN_FLOOR = 1e-10
SYMMETRY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DomainStats:
    """Per-dimension mean/std and regularized covariance of a vector sample.

    The covariance is computed on z-normalized data (so it is the sample
    correlation matrix plus any ridge term) and stored symmetrized.
    """

    mean: np.ndarray
    std: np.ndarray
    covariance: np.ndarray
    sample_count: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        d = mean.size
        if std.shape != (d,) or cov.shape != (d, d):
            raise ValueError("mean, std and covariance dimensions disagree")
        if np.any(std <= 0):
            raise ValueError("std entries must be positive (flooring happens in fit_stats)")
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL:
            raise ValueError("covariance must be symmetric")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")
        for name, arr in (("mean", mean), ("std", std), ("covariance", cov)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dimension(self) -> int:
        return self.mean.size

    def __eq__(self, other):
        if not isinstance(other, DomainStats):
            return NotImplemented
        return (self.sample_count == other.sample_count
                and np.array_equal(self.mean, other.mean)
                and np.array_equal(self.std, other.std)
                and np.array_equal(self.covariance, other.covariance))


def fit_stats(sample: VectorSet, lam: float = 0.0, std_floor: float = STD_FLOOR) -> DomainStats:
    """Estimate per-dimension mean/std and the covariance of the z-normalized sample.

    Std uses the unbiased n-1 denominator and is floored at ``std_floor`` so a
    constant dimension normalizes to centered raw values instead of dividing by
    zero. The covariance (also n-1) is ridge-regularized as C + lam*I and
    symmetrized.
    """
    if lam < 0:
        raise ValueError(f"regularization must be nonnegative, got {lam}")
    n = len(sample)
    if n < 2:
        raise ValueError(f"need at least 2 vectors to fit stats, got {n}")
    x = sample.matrix
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0, ddof=1), std_floor)
    z = (x - mean) / std
    cov = (z.T @ z) / (n - 1)
    cov = cov + lam * np.eye(sample.dimension)
    cov = 0.5 * (cov + cov.T)
    return DomainStats(mean=mean, std=std, covariance=cov, sample_count=n)


def znorm(values: np.ndarray, stats: DomainStats) -> np.ndarray:
    """(v - mean) / std, elementwise; accepts a (d,) vector or an (n, d) batch."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape[-1] != stats.dimension:
        raise ValueError(f"dimension mismatch: values {v.shape[-1]}, stats {stats.dimension}")
    return (v - stats.mean) / stats.std


def denorm(values: np.ndarray, stats: DomainStats) -> np.ndarray:
    """Inverse of znorm: v * std + mean."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape[-1] != stats.dimension:
        raise ValueError(f"dimension mismatch: values {v.shape[-1]}, stats {stats.dimension}")
    return v * stats.std + stats.mean


def sym_power(m: np.ndarray, exponent: float, eigen_floor: float = EIGEN_FLOOR) -> np.ndarray:
    """Fractional power (+1/2 or -1/2) of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues are floored at ``eigen_floor`` so the -1/2 power stays bounded
    on near-singular inputs. The result is symmetrized.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if exponent not in (0.5, -0.5):
        raise ValueError(f"exponent must be +0.5 or -0.5, got {exponent}")
    if eigen_floor <= 0:
        raise ValueError("eigen_floor must be positive")
    asym = np.max(np.abs(m - m.T), initial=0.0)
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric (max|m - m^T| = {asym:.3e})")
    w, q = np.linalg.eigh(m)
    w = np.maximum(w, eigen_floor)
    out = (q * w**exponent) @ q.T
    return 0.5 * (out + out.T)


def project_2d(sets: Iterable[VectorSet] | VectorSet) -> list[tuple[str, str, float, float]]:
    """Project pooled vectors onto their top-2 principal axes.

    Rows come back in pooled input order as (utterance_id, domain, x, y).
    Eigenvector signs follow a fixed convention: the largest-magnitude loading
    of each axis is positive, so the output is deterministic.
    """
    if isinstance(sets, VectorSet):
        sets = [sets]
    sets = list(sets)
    if not sets:
        raise ValueError("need at least one vector set")
    d = sets[0].dimension
    for s in sets:
        if s.dimension != d:
            raise ValueError(f"all sets must share a dimension ({s.dimension} != {d})")
    labels = [(v.utterance_id, v.domain) for s in sets for v in s]
    x = np.concatenate([s.matrix for s in sets], axis=0)
    n = x.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 pooled vectors, got {n}")
    centered = x - x.mean(axis=0)
    cov = (centered.T @ centered) / (n - 1)
    w, q = np.linalg.eigh(cov)
    w = w[::-1]
    q = q[:, ::-1]
    rank = int(np.sum(w > max(w[0], 0.0) * 1e-9)) if w[0] > 0 else 0
    if rank < 2:
        raise ValueError(f"data has rank {rank}, need rank >= 2 for a 2-D projection")
    axes = q[:, :2].copy()
    for j in range(2):
        lead = np.argmax(np.abs(axes[:, j]))
        if axes[lead, j] < 0:
            axes[:, j] = -axes[:, j]
    coords = centered @ axes
    return [(utt, dom, float(cx), float(cy))
            for (utt, dom), (cx, cy) in zip(labels, coords)]


def save_projection(rows: Sequence[tuple[str, str, float, float]], path,
                    comments: Iterable[str] = ()) -> None:
    """Write projection rows as TSV: utterance_id, domain, x, y."""
    lines = comment_block(comments)
    lines += [f"{utt}\t{dom}\t{fmt_float(x)}\t{fmt_float(y)}" for utt, dom, x, y in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")
