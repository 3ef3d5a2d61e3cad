"""Synthetic multi-domain embedding corpora for desk-scale protocol verification.

Each domain is a Gaussian cluster model: speaker means are drawn around the
domain mean with between-speaker spread shaped by the domain covariance, and
utterances add isotropic within-speaker noise. Everything is deterministic
under the spec seed; per-domain streams are derived so domains could be
generated in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._fileio import FormatError, fmt_float, parse_kv_file
from .seeding import TAG_SYNTH, check_seed, hash64, make_rng
from .vectorstore import DEFAULT_DIMENSION, SpeakerVector, VectorSet


@dataclass(frozen=True)
class Isotropic:
    """Covariance sigma^2 * I."""

    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def factor(self, d: int) -> np.ndarray:
        return self.sigma * np.eye(d)

    def describe(self) -> str:
        return f"isotropic:{fmt_float(self.sigma)}"


@dataclass(frozen=True)
class Diagonal:
    """Covariance diag(variances)."""

    variances: tuple[float, ...]

    def __post_init__(self):
        if any(v <= 0 for v in self.variances):
            raise ValueError("diagonal variances must be positive")

    def factor(self, d: int) -> np.ndarray:
        if len(self.variances) != d:
            raise ValueError(f"diagonal has {len(self.variances)} entries, dimension is {d}")
        return np.diag(np.sqrt(np.asarray(self.variances)))

    def describe(self) -> str:
        return "diagonal:" + ",".join(fmt_float(v) for v in self.variances)


@dataclass(frozen=True)
class RandomSPD:
    """Seeded random SPD shape: orthogonal basis, eigenvalues log-uniform in [1, cap]."""

    seed: int
    condition_cap: float

    def __post_init__(self):
        check_seed(self.seed, "random_spd seed")
        if self.condition_cap < 1:
            raise ValueError("condition_cap must be >= 1")

    def factor(self, d: int) -> np.ndarray:
        rng = make_rng(self.seed, TAG_SYNTH, "spd")
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        q = q * np.sign(np.diag(r))  # fix the QR sign ambiguity
        eigs = np.exp(rng.uniform(0.0, np.log(self.condition_cap), size=d))
        return q @ np.diag(np.sqrt(eigs))

    def describe(self) -> str:
        return f"random_spd:{self.seed}:{fmt_float(self.condition_cap)}"


CovarianceShape = Isotropic | Diagonal | RandomSPD


@dataclass(frozen=True)
class DomainSpec:
    label: str
    mean_shift: float | tuple[float, ...] = 0.0
    covariance_shape: CovarianceShape = field(default_factory=lambda: Isotropic(1.0))

    def __post_init__(self):
        if not self.label:
            raise ValueError("domain label must be nonempty")

    def mean_vector(self, d: int) -> np.ndarray:
        """Scalar shifts move along a unit direction derived from the label alone."""
        if isinstance(self.mean_shift, (int, float)):
            if self.mean_shift == 0:
                return np.zeros(d)
            direction = make_rng(hash64(self.label), TAG_SYNTH, "dir").standard_normal(d)
            return float(self.mean_shift) * direction / np.linalg.norm(direction)
        shift = np.asarray(self.mean_shift, dtype=np.float64)
        if shift.shape != (d,):
            raise ValueError(f"mean_shift has shape {shift.shape}, dimension is {d}")
        return shift

    def describe(self) -> str:
        if isinstance(self.mean_shift, (int, float)):
            shift = fmt_float(self.mean_shift)
        else:
            shift = ",".join(fmt_float(v) for v in self.mean_shift)
        return f"domain = {self.label} shift={shift} cov={self.covariance_shape.describe()}"


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    domains: tuple[DomainSpec, ...]
    dimension: int = DEFAULT_DIMENSION
    speakers_per_domain: int = 20
    utterances_per_speaker: int = 5
    between_speaker_std: float = 1.0
    within_speaker_std: float = 0.1

    def __post_init__(self):
        check_seed(self.seed)
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if not self.domains:
            raise ValueError("need at least one domain")
        labels = [d.label for d in self.domains]
        if len(set(labels)) != len(labels):
            raise ValueError("domain labels must be unique")
        if self.speakers_per_domain < 1 or self.utterances_per_speaker < 1:
            raise ValueError("speakers_per_domain and utterances_per_speaker must be positive")
        if self.between_speaker_std <= 0:
            raise ValueError("between_speaker_std must be positive")
        if self.within_speaker_std <= 0:
            raise ValueError("within_speaker_std must be positive")

    def describe_lines(self) -> list[str]:
        lines = [
            f"seed = {self.seed}",
            f"dimension = {self.dimension}",
            f"speakers_per_domain = {self.speakers_per_domain}",
            f"utterances_per_speaker = {self.utterances_per_speaker}",
            f"between_speaker_std = {fmt_float(self.between_speaker_std)}",
            f"within_speaker_std = {fmt_float(self.within_speaker_std)}",
        ]
        lines += [d.describe() for d in self.domains]
        return lines


def generate(spec: SynthSpec) -> dict[str, VectorSet]:
    """Generate one VectorSet per domain, keyed by domain label.

    Speaker ids are namespaced by domain label so sets never collide. The
    measure-zero event of an all-zero row is resampled.
    """
    out: dict[str, VectorSet] = {}
    d = spec.dimension
    n_spk = spec.speakers_per_domain
    n_utt = spec.utterances_per_speaker
    for dom in spec.domains:
        rng = make_rng(spec.seed, TAG_SYNTH, dom.label)
        mu = dom.mean_vector(d)
        shape_factor = dom.covariance_shape.factor(d)
        speaker_means = mu + spec.between_speaker_std * (
            rng.standard_normal((n_spk, d)) @ shape_factor.T)
        rows = (np.repeat(speaker_means, n_utt, axis=0)
                + spec.within_speaker_std * rng.standard_normal((n_spk * n_utt, d)))
        zero = ~np.any(rows, axis=1)
        while np.any(zero):
            rows[zero] = (np.repeat(speaker_means, n_utt, axis=0)[zero]
                          + spec.within_speaker_std * rng.standard_normal((int(zero.sum()), d)))
            zero = ~np.any(rows, axis=1)
        vectors = []
        for s in range(n_spk):
            spk_id = f"{dom.label}-s{s:04d}"
            for u in range(n_utt):
                vectors.append(SpeakerVector(f"{spk_id}-u{u:03d}", spk_id, dom.label,
                                             rows[s * n_utt + u]))
        out[dom.label] = VectorSet(d, tuple(vectors))
    return out


# ---------------------------------------------------------------------------
# spec-file parsing (flat key = value; repeated `domain` lines)
# ---------------------------------------------------------------------------

def _parse_shift(token: str, path, line_no) -> float | tuple[float, ...]:
    if "," in token:
        return tuple(float(v) for v in token.split(","))
    return float(token)


def _parse_cov(token: str, path, line_no) -> CovarianceShape:
    parts = token.split(":")
    kind = parts[0]
    try:
        if kind == "isotropic" and len(parts) == 2:
            return Isotropic(float(parts[1]))
        if kind == "diagonal" and len(parts) == 2:
            return Diagonal(tuple(float(v) for v in parts[1].split(",")))
        if kind == "random_spd" and len(parts) == 3:
            return RandomSPD(int(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise FormatError(f"bad covariance spec {token!r}: {exc}", path, line_no) from None
    raise FormatError(
        f"covariance spec must be isotropic:<sigma>, diagonal:<v1,..>, or "
        f"random_spd:<seed>:<cap>; got {token!r}", path, line_no)


def _parse_domain(value: str, path, line_no) -> DomainSpec:
    parts = value.split()
    if not parts:
        raise FormatError("empty domain line", path, line_no)
    label = parts[0]
    shift: float | tuple[float, ...] = 0.0
    cov: CovarianceShape = Isotropic(1.0)
    for token in parts[1:]:
        if token.startswith("shift="):
            try:
                shift = _parse_shift(token[6:], path, line_no)
            except ValueError:
                raise FormatError(f"bad shift {token!r}", path, line_no) from None
        elif token.startswith("cov="):
            cov = _parse_cov(token[4:], path, line_no)
        else:
            raise FormatError(f"unknown domain attribute {token!r}", path, line_no)
    return DomainSpec(label=label, mean_shift=shift, covariance_shape=cov)


_SCALAR_KEYS = {"seed", "dimension", "speakers_per_domain", "utterances_per_speaker",
                "between_speaker_std", "within_speaker_std"}


def parse_synth_spec(path) -> SynthSpec:
    scalars: dict[str, str] = {}
    domains: list[DomainSpec] = []
    for line_no, key, value in parse_kv_file(path):
        if key == "domain":
            domains.append(_parse_domain(value, path, line_no))
        elif key in _SCALAR_KEYS:
            if key in scalars:
                raise FormatError(f"duplicate key {key!r}", path, line_no)
            scalars[key] = value
        else:
            raise FormatError(f"unknown key {key!r}", path, line_no)
    if "seed" not in scalars:
        raise FormatError("spec must state an explicit seed", path)
    if not domains:
        raise FormatError("spec must declare at least one domain", path)
    try:
        return SynthSpec(
            seed=int(scalars["seed"]),
            domains=tuple(domains),
            dimension=int(scalars.get("dimension", DEFAULT_DIMENSION)),
            speakers_per_domain=int(scalars.get("speakers_per_domain", 20)),
            utterances_per_speaker=int(scalars.get("utterances_per_speaker", 5)),
            between_speaker_std=float(scalars.get("between_speaker_std", 1.0)),
            within_speaker_std=float(scalars.get("within_speaker_std", 0.1)),
        )
    except ValueError as exc:
        raise FormatError(str(exc), path) from None
