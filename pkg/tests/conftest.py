import numpy as np
import pytest
import torch
from hypothesis import HealthCheck, settings

from stegofill import build_models, synthesize, train_adversarial
from stegofill.models import TrainingConfig

settings.register_profile(
    "suite",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

torch.set_num_threads(1)  # keeps optimizer traces byte-identical across runs


@pytest.fixture(scope="session")
def covers32():
    return [r.pixels for r in synthesize(6, 32, seed=101)]


@pytest.fixture(scope="session")
def untrained32():
    """Seeded but never-trained 32px pair. Enough for hard mode."""
    return build_models(latent_dim=64, image_shape=(32, 32, 3), seed=20, feature_maps=32)


@pytest.fixture(scope="session")
def covers32_binary():
    """Two-level covers matched to the trained32 corpus statistics."""
    return [
        np.clip(0.8 * np.sign(r.pixels - r.pixels.mean()), -1.0, 1.0)
        for r in synthesize(6, 32, seed=101)
    ]


@pytest.fixture(scope="session")
def trained32():
    """Toy pair trained on two-level noise images.

    Soft-mode decoding needs a generator whose individual output pixels
    respond to the latent vector. Training on high-contrast per-pixel
    noise gives the latent steerable local texture; smooth blob corpora
    collapse to low-contrast outputs whose pixels cannot be pulled onto
    message targets at all.
    """
    rng = np.random.default_rng(77)
    corpus = (0.8 * np.sign(rng.standard_normal((300, 32, 32, 3)))).astype(np.float32)
    config = TrainingConfig(
        epochs=40,
        batch_size=32,
        latent_dim=100,
        seed=5,
        dataset_ref="noise:300:77",
        feature_maps=32,
    )
    G, D, _log = train_adversarial(corpus, config)
    return G, D
