"""Deterministic seed derivation shared by every randomized operation.

All randomness in this package flows from explicit user-supplied 64-bit base
seeds. Derived streams are obtained by feeding the base seed plus integer tags
and stable 64-bit string hashes into ``numpy.random.SeedSequence``, whose
mixing is documented as stable across numpy releases. Generators are PCG64
(``RNG_ID``); reports record this identifier because reproducing a run on a
different build requires the same generator algorithm.

Tag registry (keep values stable; they are part of the reproducibility
contract):

    TAG_ANON_DRAW   draw of the anonymization subset (n of the farthest k)
    TAG_CORAL_SRC   draw of source-domain vectors for a covariance-alignment fit
    TAG_CORAL_TGT   draw of target-domain vectors for a covariance-alignment fit
    TAG_SYNTH       synthetic-corpus domain streams
    TAG_TRIALS      impostor-pair sampling
"""

from __future__ import annotations

import hashlib

import numpy as np

RNG_ID = "numpy-pcg64"

TAG_ANON_DRAW = 0xA1
TAG_CORAL_SRC = 0xC1
TAG_CORAL_TGT = 0xC2
TAG_SYNTH = 0x51
TAG_TRIALS = 0x7A

_U64 = 2**64


def hash64(text: str) -> int:
    """Stable 64-bit hash of a string (little-endian blake2b digest)."""
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(),
                          "little")


def mix_seed(base_seed: int, *parts: int | str) -> int:
    """Mix a base seed with integer tags / string keys into one derived 64-bit seed."""
    entropy = [int(base_seed) % _U64]
    for p in parts:
        entropy.append(hash64(p) if isinstance(p, str) else int(p) % _U64)
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def make_rng(base_seed: int, *parts: int | str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(mix_seed(base_seed, *parts)))


def check_seed(seed: int, what: str = "seed") -> int:
    if not isinstance(seed, (int, np.integer)):
        raise ValueError(f"{what} must be an integer, got {type(seed).__name__}")
    if not 0 <= int(seed) < _U64:
        raise ValueError(f"{what} must be an unsigned 64-bit integer, got {seed}")
    return int(seed)
