import numpy as np
import pytest
import torch

from jscckit.channel import uniform_profile
from jscckit.codec import ShapeConfig, TrainedModel, build_decoder, build_encoder
from jscckit.data import DatasetSpec, load_dataset, to_float
from jscckit.training import TrainConfig, train_model


def make_untrained(k=8, alpha=2, hidden=(8, 16), seed=0, profile=None) -> TrainedModel:
    """Randomly initialized model; enough for codec/evaluation plumbing tests."""
    shape = ShapeConfig(k=k, alpha=alpha)
    torch.manual_seed(seed)
    enc = build_encoder(3, shape.latent_channels, hidden)
    dec = build_decoder(3, shape.latent_channels, hidden)
    model = TrainedModel(
        encoder=enc,
        decoder=dec,
        profile=profile or uniform_profile(k, 0.0),
        shape=shape,
        seed=seed,
        hidden=hidden,
    )
    return model.eval_mode()


@pytest.fixture(scope="session")
def tiny_train_config():
    return TrainConfig(
        profile=uniform_profile(8, 0.1),
        epochs=2,
        learning_rate=1e-3,
        batch_size=64,
        dataset=DatasetSpec(name="patches32", split="train", subset=256),
        seed=3,
        shape=ShapeConfig(),
        hidden=(16, 32),
        torch_threads=2,
    )


@pytest.fixture(scope="session")
def tiny_model(tiny_train_config):
    return train_model(tiny_train_config)


@pytest.fixture(scope="session")
def test_images():
    return to_float(load_dataset(DatasetSpec(name="patches32", split="test", subset=12)))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
