import numpy as np
import pytest

from vecanon.vectorstore import SpeakerVector, VectorSet


def random_vector_set(rng, n=10, d=4, n_speakers=3, domain="dom", prefix="u"):
    vectors = []
    for i in range(n):
        vectors.append(SpeakerVector(f"{prefix}{i:03d}", f"spk{i % n_speakers}", domain,
                                     rng.normal(size=d)))
    return VectorSet(d, tuple(vectors))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def make_set():
    return random_vector_set
