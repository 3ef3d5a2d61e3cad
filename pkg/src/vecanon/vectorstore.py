"""Speaker-embedding containers and their on-disk formats.

Dataset format (UTF-8 text, one record per line):

    dim=<d>
    utterance_id<TAB>speaker_id<TAB>domain<TAB>v1,v2,...,vd

The ``dim=`` header is the first non-comment line. Lines starting with ``#``
and blank lines are ignored. Floats are written with shortest round-trip
precision, so save -> load -> save is byte-identical.

Trial-list format: ``enroll_utt<TAB>test_utt<TAB>genuine|impostor`` per line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._fileio import (FORMAT_VERSION, FormatError, atomic_write_text, comment_block,
                      content_lines, fmt_vector, parse_float)
from .seeding import TAG_TRIALS, check_seed, make_rng

GENUINE = "genuine"
IMPOSTOR = "impostor"

DEFAULT_DIMENSION = 192


@dataclass(frozen=True, eq=False)
class SpeakerVector:
    """One fixed-dimension embedding with utterance/speaker/domain identity."""

    utterance_id: str
    speaker_id: str
    domain: str
    values: np.ndarray

    def __post_init__(self):
        if not self.utterance_id:
            raise ValueError("utterance_id must be nonempty")
        if not self.speaker_id:
            raise ValueError("speaker_id must be nonempty")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError(f"values must be a nonempty 1-D vector, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite value in vector {self.utterance_id!r}")
        if not np.any(vals):
            raise ValueError(f"all-zero vector {self.utterance_id!r} (cosine needs nonzero norm)")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dimension(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpeakerVector):
            return NotImplemented
        return (self.utterance_id == other.utterance_id
                and self.speaker_id == other.speaker_id
                and self.domain == other.domain
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True, eq=False)
class VectorSet:
    """Ordered collection of SpeakerVectors sharing one dimension.

    Iteration order is file/insertion order; selection tie-breaking relies on it.
    """

    dimension: int
    vectors: tuple[SpeakerVector, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.dimension <= 0:
            raise ValueError(f"dimension must be positive, got {self.dimension}")
        object.__setattr__(self, "vectors", tuple(self.vectors))
        seen = set()
        for v in self.vectors:
            if v.dimension != self.dimension:
                raise ValueError(
                    f"vector {v.utterance_id!r} has dimension {v.dimension}, set requires "
                    f"{self.dimension}")
            if v.utterance_id in seen:
                raise ValueError(f"duplicate utterance_id {v.utterance_id!r}")
            seen.add(v.utterance_id)

    def __len__(self) -> int:
        return len(self.vectors)

    def __iter__(self) -> Iterator[SpeakerVector]:
        return iter(self.vectors)

    def __getitem__(self, i: int) -> SpeakerVector:
        return self.vectors[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, VectorSet):
            return NotImplemented
        return self.dimension == other.dimension and self.vectors == other.vectors

    @cached_property
    def matrix(self) -> np.ndarray:
        """(n, d) float64 view of all vectors, row order = set order."""
        if not self.vectors:
            m = np.empty((0, self.dimension), dtype=np.float64)
        else:
            m = np.stack([v.values for v in self.vectors])
        m.setflags(write=False)
        return m

    @cached_property
    def _index(self) -> dict[str, int]:
        return {v.utterance_id: i for i, v in enumerate(self.vectors)}

    def get(self, utterance_id: str) -> SpeakerVector:
        try:
            return self.vectors[self._index[utterance_id]]
        except KeyError:
            raise KeyError(f"unknown utterance_id {utterance_id!r}") from None

    def __contains__(self, utterance_id: str) -> bool:
        return utterance_id in self._index

    def utterance_ids(self) -> list[str]:
        return [v.utterance_id for v in self.vectors]

    def speaker_ids(self) -> list[str]:
        return sorted({v.speaker_id for v in self.vectors})

    def subset(self, indices: Sequence[int]) -> "VectorSet":
        return VectorSet(self.dimension, tuple(self.vectors[i] for i in indices))

    def domain_label(self) -> str:
        """Single shared domain label, or the '+'-joined sorted labels of a mixed set."""
        labels = sorted({v.domain for v in self.vectors})
        if not labels:
            return ""
        return labels[0] if len(labels) == 1 else "+".join(labels)


def load_vector_set(path) -> VectorSet:
    """Load a dataset file; every malformed line is reported with its line number."""
    dimension = None
    vectors: list[SpeakerVector] = []
    seen: dict[str, int] = {}
    for line_no, line in content_lines(path):
        if dimension is None:
            if not line.startswith("dim="):
                raise FormatError(f"expected header 'dim=<d>', got {line!r}", path, line_no)
            try:
                dimension = int(line[4:])
            except ValueError:
                raise FormatError(f"malformed dimension in header {line!r}", path,
                                  line_no) from None
            if dimension <= 0:
                raise FormatError(f"dimension must be positive, got {dimension}", path, line_no)
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise FormatError(f"expected 4 tab-separated fields, got {len(parts)}", path, line_no)
        utt, spk, domain, blob = parts
        if utt in seen:
            raise FormatError(
                f"duplicate utterance_id {utt!r} (first seen on line {seen[utt]})", path, line_no)
        tokens = blob.split(",") if blob else []
        if len(tokens) != dimension:
            raise FormatError(
                f"row has {len(tokens)} values, header says dim={dimension}", path, line_no)
        values = np.array([parse_float(t, path, line_no) for t in tokens], dtype=np.float64)
        try:
            vec = SpeakerVector(utt, spk, domain, values)
        except ValueError as exc:
            raise FormatError(str(exc), path, line_no) from None
        seen[utt] = line_no
        vectors.append(vec)
    if dimension is None:
        raise FormatError("missing 'dim=<d>' header", path)
    return VectorSet(dimension, tuple(vectors))


def save_vector_set(vs: VectorSet, path, comments: Iterable[str] = ()) -> None:
    """Write a dataset file. Output is a deterministic function of (vs, comments)."""
    lines = [f"dim={vs.dimension}"]
    lines += comment_block(comments)
    for v in vs.vectors:
        lines.append(f"{v.utterance_id}\t{v.speaker_id}\t{v.domain}\t{fmt_vector(v.values)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass(frozen=True, eq=False)
class TrialSet:
    """Enrollment/test pairings with genuine/impostor labels."""

    pairs: tuple[tuple[str, str, str], ...]

    def __post_init__(self):
        seen = set()
        for enroll, test, label in self.pairs:
            if label not in (GENUINE, IMPOSTOR):
                raise ValueError(f"label must be {GENUINE!r} or {IMPOSTOR!r}, got {label!r}")
            key = (enroll, test)
            if key in seen:
                raise ValueError(f"duplicate trial pair {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __eq__(self, other):
        if not isinstance(other, TrialSet):
            return NotImplemented
        return self.pairs == other.pairs

    @property
    def n_genuine(self) -> int:
        return sum(1 for _, _, label in self.pairs if label == GENUINE)

    @property
    def n_impostor(self) -> int:
        return sum(1 for _, _, label in self.pairs if label == IMPOSTOR)


def load_trials(path) -> TrialSet:
    pairs = []
    for line_no, line in content_lines(path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"expected 3 tab-separated fields, got {len(parts)}", path, line_no)
        if parts[2] not in (GENUINE, IMPOSTOR):
            raise FormatError(f"bad label {parts[2]!r}", path, line_no)
        pairs.append((parts[0], parts[1], parts[2]))
    try:
        return TrialSet(tuple(pairs))
    except ValueError as exc:
        raise FormatError(str(exc), path) from None


def save_trials(trials: TrialSet, path, comments: Iterable[str] = ()) -> None:
    lines = comment_block(comments)
    lines += [f"{e}\t{t}\t{label}" for e, t, label in trials.pairs]
    atomic_write_text(path, "\n".join(lines) + "\n")


def generate_trials(vs: VectorSet, enroll_ids: Sequence[str], test_ids: Sequence[str],
                    impostors: str = "exhaustive", count: int | None = None,
                    seed: int | None = None) -> TrialSet:
    """Pair enrollment and test utterances into genuine/impostor trials.

    Genuine pairs are every (enroll, test) combination with a shared speaker.
    Impostor pairs are either all cross-speaker combinations (``exhaustive``) or
    a seeded uniform sample without replacement (``sampled``). The result only
    depends on the *sets* of ids, not their input order.
    """
    enroll_ids = list(enroll_ids)
    test_ids = list(test_ids)
    for utt in (*enroll_ids, *test_ids):
        if utt not in vs:
            raise ValueError(f"unknown utterance_id {utt!r}")
    overlap = set(enroll_ids) & set(test_ids)
    if overlap:
        raise ValueError(f"enroll and test ids must be disjoint; both contain {sorted(overlap)[:3]}")
    if not enroll_ids or not test_ids:
        raise ValueError("enroll_ids and test_ids must be nonempty")

    genuine = []
    candidates = []
    for e in sorted(set(enroll_ids)):
        spk_e = vs.get(e).speaker_id
        for t in sorted(set(test_ids)):
            if spk_e == vs.get(t).speaker_id:
                genuine.append((e, t, GENUINE))
            else:
                candidates.append((e, t))
    if not genuine:
        raise ValueError("no genuine pairs (no speaker appears on both sides)")
    if not candidates:
        raise ValueError("no impostor pairs (only one speaker in play)")

    if impostors == "exhaustive":
        impostor_pairs = candidates
    elif impostors == "sampled":
        if count is None or count <= 0:
            raise ValueError("sampled impostor policy requires a positive count")
        if seed is None:
            raise ValueError("sampled impostor policy requires an explicit seed")
        if count > len(candidates):
            raise ValueError(
                f"requested {count} impostor pairs but only {len(candidates)} exist")
        rng = make_rng(check_seed(seed), TAG_TRIALS)
        idx = rng.choice(len(candidates), size=count, replace=False)
        impostor_pairs = [candidates[i] for i in sorted(idx)]
    else:
        raise ValueError(f"impostor policy must be 'exhaustive' or 'sampled', got {impostors!r}")

    pairs = genuine + [(e, t, IMPOSTOR) for e, t in impostor_pairs]
    return TrialSet(tuple(pairs))
