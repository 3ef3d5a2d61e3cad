"""Covariance alignment between embedding domains.

Fits the linear map that takes z-normalized source-domain vectors to the
target domain's second-order statistics: the closed-form minimizer of
``|| A^T C_s A - C_t ||_F^2`` is ``A = C_s^(-1/2) C_t^(1/2)``, computed here by
whitening with the inverse square root of the source covariance and recoloring
with the square root of the target covariance. Exact, deterministic, O(d^3).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._fileio import (FormatError, atomic_write_text, comment_block, content_lines,
                      fmt_float, fmt_vector, parse_float)
from .statslinalg import DomainStats, denorm, fit_stats, sym_power, znorm
from .vectorstore import SpeakerVector, VectorSet

DENORM_TARGET = "target"
DENORM_NONE = "none"
DEFAULT_LAMBDA = 1.0


@dataclass(frozen=True, eq=False)
class CoralTransform:
    """Transfer matrix plus the source/target stats it was fit from."""

    matrix: np.ndarray
    source_stats: DomainStats
    target_stats: DomainStats
    lam: float
    target_domain: str
    seed_provenance: str | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        d = self.source_stats.dimension
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match stats dimension {d}")
        if self.target_stats.dimension != d:
            raise ValueError("source and target stats dimensions disagree")
        if not np.all(np.isfinite(m)):
            raise ValueError("transfer matrix has non-finite entries")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dimension(self) -> int:
        return self.source_stats.dimension

    @property
    def fit_sample_count(self) -> tuple[int, int]:
        return (self.source_stats.sample_count, self.target_stats.sample_count)

    def __eq__(self, other):
        if not isinstance(other, CoralTransform):
            return NotImplemented
        return (np.array_equal(self.matrix, other.matrix)
                and self.source_stats == other.source_stats
                and self.target_stats == other.target_stats
                and self.lam == other.lam
                and self.target_domain == other.target_domain
                and self.seed_provenance == other.seed_provenance)


def coral_fit(source_sample: VectorSet, target_sample: VectorSet,
              lam: float = DEFAULT_LAMBDA, seed_provenance: str | None = None) -> CoralTransform:
    """Fit the covariance-aligning transfer matrix from two domain samples."""
    if source_sample.dimension != target_sample.dimension:
        raise ValueError(
            f"dimension mismatch: source {source_sample.dimension}, "
            f"target {target_sample.dimension}")
    source_stats = fit_stats(source_sample, lam)
    target_stats = fit_stats(target_sample, lam)
    matrix = sym_power(source_stats.covariance, -0.5) @ sym_power(target_stats.covariance, 0.5)
    return CoralTransform(matrix=matrix, source_stats=source_stats, target_stats=target_stats,
                          lam=lam, target_domain=target_sample.domain_label(),
                          seed_provenance=seed_provenance)


def transform_values(t: CoralTransform, values: np.ndarray,
                     denorm_mode: str = DENORM_TARGET) -> np.ndarray:
    """Three-step transform at the raw-vector level: znorm, matrix, optional denorm.

    Vectors are z-normalized with the *source* stats (the input is composed from
    source-pool vectors), multiplied by the transfer matrix, and optionally
    rescaled into the target domain's natural range with the target stats.
    Accepts a (d,) vector or an (n, d) batch.
    """
    if denorm_mode not in (DENORM_TARGET, DENORM_NONE):
        raise ValueError(f"denorm_mode must be '{DENORM_TARGET}' or '{DENORM_NONE}', "
                         f"got {denorm_mode!r}")
    out = znorm(values, t.source_stats) @ t.matrix
    if denorm_mode == DENORM_TARGET:
        out = denorm(out, t.target_stats)
    return out


def coral_apply(t: CoralTransform, v: SpeakerVector,
                denorm_mode: str = DENORM_TARGET) -> SpeakerVector:
    """Transform one vector; identity fields are kept, domain is relabeled to the target."""
    if v.dimension != t.dimension:
        raise ValueError(f"dimension mismatch: vector {v.dimension}, transform {t.dimension}")
    out = transform_values(t, v.values, denorm_mode)
    return SpeakerVector(v.utterance_id, v.speaker_id, t.target_domain, out)


def coral_apply_set(t: CoralTransform, vs: VectorSet,
                    denorm_mode: str = DENORM_TARGET) -> VectorSet:
    if vs.dimension != t.dimension:
        raise ValueError(f"dimension mismatch: set {vs.dimension}, transform {t.dimension}")
    out = transform_values(t, vs.matrix, denorm_mode)
    vectors = tuple(SpeakerVector(v.utterance_id, v.speaker_id, t.target_domain, row)
                    for v, row in zip(vs.vectors, out))
    return VectorSet(vs.dimension, vectors)


# ---------------------------------------------------------------------------
# serialization
#
# Text format, round-trip exact:
#   dim=<d> lambda=<lam>
#   source_count=<n> / target_count=<n> / target_domain=<label>
#   seed_provenance=<text>            (only if present)
#   source_mean / source_std / target_mean / target_std rows (label TAB csv)
#   source_cov / target_cov / matrix rows, d each (label TAB csv)
# ---------------------------------------------------------------------------

def save_transform(t: CoralTransform, path, comments: Iterable[str] = ()) -> None:
    d = t.dimension
    lines = [f"dim={d} lambda={fmt_float(t.lam)}"]
    lines += comment_block(comments)
    lines.append(f"source_count={t.source_stats.sample_count}")
    lines.append(f"target_count={t.target_stats.sample_count}")
    lines.append(f"target_domain={t.target_domain}")
    if t.seed_provenance is not None:
        lines.append(f"seed_provenance={t.seed_provenance}")
    lines.append(f"source_mean\t{fmt_vector(t.source_stats.mean)}")
    lines.append(f"source_std\t{fmt_vector(t.source_stats.std)}")
    lines.append(f"target_mean\t{fmt_vector(t.target_stats.mean)}")
    lines.append(f"target_std\t{fmt_vector(t.target_stats.std)}")
    for row in t.source_stats.covariance:
        lines.append(f"source_cov\t{fmt_vector(row)}")
    for row in t.target_stats.covariance:
        lines.append(f"target_cov\t{fmt_vector(row)}")
    for row in t.matrix:
        lines.append(f"matrix\t{fmt_vector(row)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_transform(path) -> CoralTransform:
    d = None
    lam = None
    scalars: dict[str, str] = {}
    rows: dict[str, list[np.ndarray]] = {}
    for line_no, line in content_lines(path):
        if d is None:
            parts = line.split()
            if len(parts) != 2 or not parts[0].startswith("dim=") \
                    or not parts[1].startswith("lambda="):
                raise FormatError(f"expected header 'dim=<d> lambda=<l>', got {line!r}",
                                  path, line_no)
            try:
                d = int(parts[0][4:])
            except ValueError:
                raise FormatError("malformed dimension in header", path, line_no) from None
            lam = parse_float(parts[1][7:], path, line_no)
            continue
        if "\t" in line:
            label, _, blob = line.partition("\t")
            tokens = blob.split(",") if blob else []
            if len(tokens) != d:
                raise FormatError(f"{label} row has {len(tokens)} values, expected {d}",
                                  path, line_no)
            rows.setdefault(label, []).append(
                np.array([parse_float(tok, path, line_no) for tok in tokens]))
        elif "=" in line:
            key, _, value = line.partition("=")
            scalars[key.strip()] = value.strip()
        else:
            raise FormatError(f"unrecognized line {line!r}", path, line_no)
    if d is None:
        raise FormatError("missing 'dim=<d> lambda=<l>' header", path)

    def one_row(label: str) -> np.ndarray:
        got = rows.get(label, [])
        if len(got) != 1:
            raise FormatError(f"expected exactly one {label} row, found {len(got)}", path)
        return got[0]

    def square(label: str) -> np.ndarray:
        got = rows.get(label, [])
        if len(got) != d:
            raise FormatError(f"expected {d} {label} rows, found {len(got)}", path)
        return np.stack(got)

    for key in ("source_count", "target_count", "target_domain"):
        if key not in scalars:
            raise FormatError(f"missing {key}= line", path)
    try:
        source_count = int(scalars["source_count"])
        target_count = int(scalars["target_count"])
    except ValueError:
        raise FormatError("sample counts must be integers", path) from None

    source_stats = DomainStats(one_row("source_mean"), one_row("source_std"),
                               square("source_cov"), source_count)
    target_stats = DomainStats(one_row("target_mean"), one_row("target_std"),
                               square("target_cov"), target_count)
    return CoralTransform(matrix=square("matrix"), source_stats=source_stats,
                          target_stats=target_stats, lam=lam,
                          target_domain=scalars["target_domain"],
                          seed_provenance=scalars.get("seed_provenance"))
