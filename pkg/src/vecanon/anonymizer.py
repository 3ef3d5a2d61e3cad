"""Pseudo-identity composition from an embedding pool.

Given a source vector, rank the pool by cosine distance, keep the ``farthest_k``
entries, draw ``select_n`` of them with a seeded generator, and average the
drawn vectors. Ties in the ranking break toward the smaller pool index so the
selection is reproducible; the subset draw is keyed per utterance (or per
speaker) so batches can be processed in any order or in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import cosine_distances
from .seeding import TAG_ANON_DRAW, check_seed, make_rng
from .vectorstore import SpeakerVector, VectorSet

DEFAULT_FARTHEST_K = 200
DEFAULT_SELECT_N = 100
DEFAULT_ID_SUFFIX = "~anon"


@dataclass(frozen=True)
class AnonymizationPolicy:
    """How a pseudo-vector is composed: ranking depth, subset size, randomness."""

    seed: int
    farthest_k: int = DEFAULT_FARTHEST_K
    select_n: int = DEFAULT_SELECT_N
    per_speaker: bool = False
    id_suffix: str = DEFAULT_ID_SUFFIX

    def __post_init__(self):
        check_seed(self.seed)
        if self.farthest_k < 1:
            raise ValueError(f"farthest_k must be positive, got {self.farthest_k}")
        if not 1 <= self.select_n <= self.farthest_k:
            raise ValueError(
                f"select_n must be in [1, farthest_k={self.farthest_k}], got {self.select_n}")

    def check_pool(self, pool: VectorSet) -> None:
        if self.farthest_k > len(pool):
            raise ValueError(
                f"farthest_k={self.farthest_k} exceeds pool size {len(pool)}")


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cosine similarity; 0 for parallel, 1 for orthogonal, 2 for opposite."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine distance undefined for zero-norm input")
    return float(1.0 - (a @ b) / (na * nb))


def select_farthest(source: SpeakerVector, pool: VectorSet, k: int) -> np.ndarray:
    """Indices of the k pool vectors farthest from ``source`` by cosine distance.

    Sorted by (distance desc, pool index asc); exact distance ties keep the
    smaller index first.
    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if k > len(pool):
        raise ValueError(f"k={k} exceeds pool size {len(pool)}")
    if source.dimension != pool.dimension:
        raise ValueError(
            f"dimension mismatch: source {source.dimension}, pool {pool.dimension}")
    dist = cosine_distances(source.values, pool.matrix)
    order = np.lexsort((np.arange(len(pool)), -dist))
    return order[:k]


def _draw_key(source: SpeakerVector, policy: AnonymizationPolicy) -> str:
    return source.speaker_id if policy.per_speaker else source.utterance_id


def chosen_pool_indices(source: SpeakerVector, pool: VectorSet,
                        policy: AnonymizationPolicy) -> np.ndarray:
    """Pool indices whose mean becomes the pseudo-vector, in ascending order.

    Deterministic in (source, pool, policy): the draw RNG is seeded from
    policy.seed mixed with the utterance id (or the speaker id when
    ``per_speaker`` is set, which reuses one draw across a speaker's
    utterances).
    """
    policy.check_pool(pool)
    ranked = select_farthest(source, pool, policy.farthest_k)
    rng = make_rng(policy.seed, TAG_ANON_DRAW, _draw_key(source, policy))
    positions = rng.choice(policy.farthest_k, size=policy.select_n, replace=False)
    return np.sort(ranked[positions])


def anonymize(source: SpeakerVector, pool: VectorSet,
              policy: AnonymizationPolicy) -> SpeakerVector:
    """Replace a vector's values with the mean of a seeded farthest-pool subset.

    The utterance id gains ``policy.id_suffix``, the speaker id is preserved for
    bookkeeping, and the domain becomes the pool's label.
    """
    chosen = chosen_pool_indices(source, pool, policy)
    sub = pool.matrix[chosen]
    if not np.all(np.any(sub, axis=1)):
        raise ValueError("pool contains an all-zero vector")
    values = sub.mean(axis=0)
    return SpeakerVector(source.utterance_id + policy.id_suffix, source.speaker_id,
                         pool.domain_label(), values)


def anonymize_set(sources: VectorSet, pool: VectorSet,
                  policy: AnonymizationPolicy) -> VectorSet:
    """Anonymize every vector of a set; per-vector draws are independent streams."""
    if sources.dimension != pool.dimension:
        raise ValueError(
            f"dimension mismatch: sources {sources.dimension}, pool {pool.dimension}")
    policy.check_pool(pool)
    return VectorSet(sources.dimension,
                     tuple(anonymize(v, pool, policy) for v in sources))
