import numpy as np
import pytest

from stylespace.audio import AudioClip
from stylespace.latent import EmbeddingSet


def pulse_train(f0=220.0, sr=22050, seconds=2.0):
    """Periodic pulse train with a known fundamental."""
    n = int(sr * seconds)
    t = np.arange(n)
    period = sr / f0
    phase = (t % period) / period
    # narrow raised-cosine pulse each period, harmonically rich
    samples = np.where(phase < 0.1, 0.5 * (1 - np.cos(2 * np.pi * phase / 0.1)), 0.0)
    return AudioClip(samples=samples - samples.mean(), sample_rate=sr, id="pulse")


def white_noise(sr=22050, seconds=2.0, seed=7):
    rng = np.random.default_rng(seed)
    return AudioClip(samples=0.5 * rng.standard_normal(int(sr * seconds)),
                     sample_rate=sr, id="noise")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def planted_embeddings(n=100, dim=8, seed=0, spread=(3.0, 1.5)):
    """Embeddings whose variance is concentrated in a known 2-D subspace."""
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.normal(size=(dim, 2)))
    coords = rng.normal(size=(n, 2)) * np.asarray(spread)
    vectors = coords @ basis.T + 0.05 * rng.normal(size=(n, dim))
    ids = [f"utt{i:04d}" for i in range(n)]
    return EmbeddingSet(ids=ids, vectors=vectors), basis, coords
