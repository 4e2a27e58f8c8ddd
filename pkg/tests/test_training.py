import math

import numpy as np
import pytest
import torch

from jscckit.channel import ErasureProfile, sample_mask, uniform_profile
from jscckit.codec import ShapeConfig, encode, quantize_call_count
from jscckit.data import DatasetSpec, load_dataset, to_float
from jscckit.errors import InvalidConfigError, TrainingDivergedError
from jscckit.training import (
    TrainConfig,
    _check_divergence,
    _epoch_keep_bits,
    load_sr_chain,
    save_sr_chain,
    sr_decode_prefix,
    sr_encode_blocks,
    train_genie_baseline,
    train_model,
    train_plain_compression,
    train_successive_refinement,
)


def micro_cfg(profile=None, k=8, epochs=1, seed=5, subset=128):
    return TrainConfig(
        profile=profile or uniform_profile(k, 0.1),
        epochs=epochs,
        learning_rate=1e-3,
        batch_size=64,
        dataset=DatasetSpec(name="patches32", split="train", subset=subset),
        seed=seed,
        shape=ShapeConfig(k=k),
        hidden=(8, 16),
        torch_threads=2,
    )


def params_equal(m1, m2) -> bool:
    s1 = list(m1.encoder.state_dict().values()) + list(m1.decoder.state_dict().values())
    s2 = list(m2.encoder.state_dict().values()) + list(m2.decoder.state_dict().values())
    return all(torch.equal(a, b) for a, b in zip(s1, s2))


class TestTrainModel:
    def test_loss_decreases_on_smoke_run(self, tiny_model):
        losses = tiny_model.training_meta["epoch_loss"]
        assert losses[-1] < losses[0]
        assert all(math.isfinite(l) for l in losses)

    def test_two_runs_same_seed_are_parameter_identical(self):
        a = train_model(micro_cfg())
        b = train_model(micro_cfg())
        assert params_equal(a, b)

    def test_different_seed_differs(self):
        a = train_model(micro_cfg(seed=5))
        b = train_model(micro_cfg(seed=6))
        assert not params_equal(a, b)

    def test_zero_profile_plain_and_full_genie_are_identical(self):
        cfg = micro_cfg(profile=uniform_profile(8, 0.0))
        zero = train_model(cfg)
        plain = train_plain_compression(micro_cfg())  # zeroes the profile itself
        genie = train_genie_baseline(micro_cfg(), blocks_kept=8)
        assert params_equal(zero, plain)
        assert params_equal(zero, genie)
        assert plain.kind == "plain" and genie.kind == "genie"

    def test_quantizer_untouched_by_training(self):
        before = quantize_call_count()
        train_model(micro_cfg())
        assert quantize_call_count() == before

    def test_config_validation(self):
        with pytest.raises(InvalidConfigError):
            TrainConfig(profile=uniform_profile(8, 0.1), epochs=0)
        with pytest.raises(InvalidConfigError):
            TrainConfig(profile=uniform_profile(4, 0.1), shape=ShapeConfig(k=8))
        with pytest.raises(InvalidConfigError):
            TrainConfig(profile=uniform_profile(8, 0.1), learning_rate=0.0)


class TestGenie:
    def test_reduced_latent_shape(self):
        model = train_genie_baseline(micro_cfg(subset=64), blocks_kept=4)
        assert model.shape.k == 4
        x = to_float(load_dataset(DatasetSpec(name="patches32", split="test", subset=1)))[0]
        assert encode(model, x).shape == (8, 8, 8)

    def test_blocks_kept_bounds(self):
        with pytest.raises(InvalidConfigError):
            train_genie_baseline(micro_cfg(), blocks_kept=0)
        with pytest.raises(InvalidConfigError):
            train_genie_baseline(micro_cfg(), blocks_kept=9)


class TestErasureLayerStatistics:
    def test_epoch_bits_match_profile_within_3_sigma(self):
        profile = ErasureProfile((0.0, 0.25, 0.5, 0.75, 1.0))
        n = 10_000
        bits = _epoch_keep_bits(profile, seed=2, epoch=0, n=n)
        erased = (~bits).mean(axis=0)
        for i, eps in enumerate(profile.eps):
            sigma = math.sqrt(eps * (1 - eps) / n)
            assert abs(erased[i] - eps) <= 3 * sigma + 1e-12

    def test_epoch_bits_agree_with_sample_mask(self):
        profile = ErasureProfile((0.3, 0.7, 0.1))
        bits = _epoch_keep_bits(profile, seed=11, epoch=4, n=50)
        for idx in range(50):
            m = sample_mask(profile, 11, sample_id=str(idx), counter=4)
            assert tuple(bits[idx]) == m.bits

    def test_masks_vary_across_epochs(self):
        profile = uniform_profile(8, 0.5)
        b0 = _epoch_keep_bits(profile, seed=1, epoch=0, n=64)
        b1 = _epoch_keep_bits(profile, seed=1, epoch=1, n=64)
        assert not np.array_equal(b0, b1)


class TestDivergenceGuard:
    def test_non_finite_loss_raises(self):
        with pytest.raises(TrainingDivergedError):
            _check_divergence([0.5, float("nan")])
        with pytest.raises(TrainingDivergedError):
            _check_divergence([float("inf")])

    def test_tenfold_growth_raises(self):
        with pytest.raises(TrainingDivergedError):
            _check_divergence([0.01, 0.01, 0.02, 0.03, 0.04, 0.5])

    def test_normal_descent_passes(self):
        _check_divergence([0.5, 0.4, 0.3, 0.25, 0.22, 0.2])


@pytest.fixture(scope="module")
def chain():
    return train_successive_refinement(micro_cfg(k=4, subset=96))


class TestSuccessiveRefinement:
    def test_stage_count_and_shapes(self, chain):
        assert chain.k == 4
        for i, stage in enumerate(chain.stages, start=1):
            assert stage.training_meta["sr_stage"] == i
            assert stage.training_meta["decoder_latent_channels"] == i * 2
        assert chain.mean_image.shape == (3, 32, 32)

    def test_prefix_table_is_calibrated_envelope(self, chain):
        quality = chain.training_meta["stage_train_neg_mse"]
        assert len(chain.stage_choice) == 4
        for j, s in enumerate(chain.stage_choice, start=1):
            assert 1 <= s <= j
            assert quality[s - 1] == max(quality[:j])
        # chosen quality never regresses as the prefix grows
        chosen = [quality[s - 1] for s in chain.stage_choice]
        assert all(b >= a for a, b in zip(chosen, chosen[1:]))

    def test_prefix_decoding_shapes_and_fallback(self, chain):
        xs = to_float(load_dataset(DatasetSpec(name="patches32", split="test", subset=6)))
        blocks = sr_encode_blocks(chain, xs)
        assert blocks.shape == (6, 8, 8, 8)
        for j in range(5):
            ys = sr_decode_prefix(chain, blocks, j)
            assert ys.shape == xs.shape
        fallback = sr_decode_prefix(chain, blocks, 0)
        assert np.allclose(fallback[0], chain.mean_image)
        assert np.array_equal(fallback[0], fallback[5])

    def test_chain_round_trip_through_disk(self, chain, tmp_path):
        save_sr_chain(chain, tmp_path / "chain")
        again = load_sr_chain(tmp_path / "chain")
        xs = to_float(load_dataset(DatasetSpec(name="patches32", split="test", subset=3)))
        assert np.array_equal(sr_encode_blocks(chain, xs), sr_encode_blocks(again, xs))
        assert np.array_equal(again.mean_image, chain.mean_image)

    def test_deterministic(self):
        a = train_successive_refinement(micro_cfg(k=2, subset=64))
        b = train_successive_refinement(micro_cfg(k=2, subset=64))
        for s1, s2 in zip(a.stages, b.stages):
            assert params_equal(s1, s2)
