import math

import numpy as np
import pytest
import torch

from jscckit.channel import (
    ErasureProfile,
    SurvivalMask,
    apply_channel_training,
    compose_masks,
    erase_latent_channels,
    fixed_count_mask,
    profile_preset,
    sample_mask,
    scale_profile,
    tail_keep_mask,
    uniform_profile,
)
from jscckit.errors import InvalidConfigError, InvalidInputError


class TestProfiles:
    def test_classification_is_derivable(self):
        assert uniform_profile(8, 0.2).is_uniform()
        assert not uniform_profile(8, 0.2).is_increasing()
        inc = ErasureProfile((0.0, 0.1, 0.2, 0.5))
        assert inc.is_increasing() and not inc.is_uniform()
        # non-strict growth is not "increasing"
        assert not ErasureProfile((0.0, 0.1, 0.1)).is_increasing()

    def test_entries_validated(self):
        with pytest.raises(InvalidInputError):
            ErasureProfile((0.5, 1.2))
        with pytest.raises(InvalidInputError):
            ErasureProfile((-0.1,))

    def test_presets(self):
        assert profile_preset("uniform:0.3", 5).eps == (0.3,) * 5
        # shallow/steep are strictly increasing with a guaranteed first block
        assert profile_preset("shallow").is_increasing()
        assert profile_preset("steep").is_increasing()
        assert profile_preset("shallow").eps[0] == 0.0
        assert profile_preset("steep").eps[0] == 0.0
        assert profile_preset("video-ladder").eps == (0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07)
        with pytest.raises(InvalidConfigError):
            profile_preset("nope")
        with pytest.raises(InvalidConfigError):
            profile_preset("shallow", k=4)


class TestSampleMask:
    def test_all_zero_profile_receives_everything(self):
        m = sample_mask(uniform_profile(8, 0.0), 1)
        assert m.bits == (True,) * 8

    def test_all_one_profile_erases_everything(self):
        m = sample_mask(uniform_profile(8, 1.0), 1)
        assert m.bits == (False,) * 8

    def test_deterministic_given_key(self):
        a = sample_mask(uniform_profile(8, 0.5), 42, sample_id="s", counter=3)
        b = sample_mask(uniform_profile(8, 0.5), 42, sample_id="s", counter=3)
        assert a == b
        c = sample_mask(uniform_profile(8, 0.5), 42, sample_id="s", counter=4)
        assert a != c

    def test_empirical_rate_within_3_sigma(self):
        # spec example: eps = 0.5, 10,000 draws, frequency in [0.485, 0.515]
        profile = uniform_profile(8, 0.5)
        n = 10_000
        erased = np.zeros(8)
        for d in range(n):
            m = sample_mask(profile, 99, sample_id=str(d))
            erased += ~np.asarray(m.bits)
        freq = erased / n
        assert (freq >= 0.485).all() and (freq <= 0.515).all()


class TestTrainingChannel:
    def test_received_blocks_pass_through_bit_exact(self):
        blocks = [np.random.default_rng(i).random((2, 4, 4), dtype=np.float32) for i in range(4)]
        out = apply_channel_training(blocks, SurvivalMask((True,) * 4))
        for b, o in zip(blocks, out):
            assert o is b  # literal identity on the received branch

    def test_erased_blocks_become_minus_one(self):
        blocks = [np.full((2, 2, 2), 0.5, dtype=np.float32)] * 3
        out = apply_channel_training(blocks, SurvivalMask((False, True, False)))
        assert (out[0] == -1.0).all() and (out[2] == -1.0).all()
        assert (out[1] == 0.5).all()

    def test_spec_value_example(self):
        # r = 0, entry 0.5 -> 0 * (1.5) - 1 = -1
        out = apply_channel_training([np.array([0.5])], SurvivalMask((False,)))
        assert out[0][0] == -1.0

    def test_gradient_equals_mask_bit_via_finite_differences(self):
        torch.manual_seed(0)
        k = 4
        blocks = [torch.rand(2, 3, 3, dtype=torch.float64, requires_grad=True) for _ in range(k)]
        mask = SurvivalMask((True, False, True, False))
        out = apply_channel_training(blocks, mask)
        total = sum(o.sum() for o in out)
        total.backward()
        eps = 1e-6
        for b, bit in zip(blocks, mask.bits):
            expected = 1.0 if bit else 0.0
            assert torch.allclose(b.grad, torch.full_like(b, expected))
            # central finite differences on the scalar sum
            with torch.no_grad():
                probe = b.detach().clone()
                probe[0, 0, 0] += eps
                plus = sum(
                    o.sum()
                    for o in apply_channel_training(
                        [probe if x is b else x.detach() for x in blocks], mask
                    )
                )
                probe2 = b.detach().clone()
                probe2[0, 0, 0] -= eps
                minus = sum(
                    o.sum()
                    for o in apply_channel_training(
                        [probe2 if x is b else x.detach() for x in blocks], mask
                    )
                )
            fd = (plus - minus).item() / (2 * eps)
            assert abs(fd - expected) < 1e-6

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            apply_channel_training([np.zeros(2)], SurvivalMask((True, True)))


class TestFixedCountMask:
    def test_extremes(self):
        assert fixed_count_mask(8, 0, 5).bits == (True,) * 8
        assert fixed_count_mask(8, 8, 5).bits == (False,) * 8

    def test_erases_exactly_e(self):
        for e in range(9):
            m = fixed_count_mask(8, e, 17, sample_id="z")
            assert sum(1 for b in m.bits if not b) == e

    def test_e_larger_than_k_rejected(self):
        with pytest.raises(InvalidInputError):
            fixed_count_mask(4, 5, 0)

    def test_subsets_uniform_over_all_56(self):
        # spec example: k=8, e=3, 56,000 draws -> each subset 1000 +- 120
        counts = {}
        for d in range(56_000):
            m = fixed_count_mask(8, 3, 123, sample_id=str(d))
            key = tuple(i for i, b in enumerate(m.bits) if not b)
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 56
        assert all(880 <= c <= 1120 for c in counts.values())


class TestTailKeepMask:
    def test_definition(self):
        assert tail_keep_mask(8, 5).bits == (True,) * 5 + (False,) * 3
        assert tail_keep_mask(8, 8).bits == (True,) * 8
        assert tail_keep_mask(8, 0).bits == (False,) * 8

    def test_m_larger_than_k_rejected(self):
        with pytest.raises(InvalidInputError):
            tail_keep_mask(3, 4)


class TestScaleProfile:
    def test_identity_at_one(self):
        p = ErasureProfile((0.0, 0.1, 0.5))
        assert scale_profile(p, 1.0).eps == p.eps

    def test_video_ladder_times_ten(self):
        p = profile_preset("video-ladder")
        scaled = scale_profile(p, 10.0)
        assert scaled.eps == pytest.approx((0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7), abs=1e-15)

    def test_cap_at_one(self):
        assert scale_profile(ErasureProfile((0.3,)), 5.0).eps == (1.0,)

    def test_zero_stays_zero_and_monotone_in_a(self):
        p = ErasureProfile((0.0, 0.2, 0.9))
        prev = scale_profile(p, 0.0)
        assert prev.eps[0] == 0.0
        for a in (0.5, 1.0, 2.0, 4.0, 8.0):
            cur = scale_profile(p, a)
            assert cur.eps[0] == 0.0
            assert all(c >= q for c, q in zip(cur.eps, prev.eps))
            prev = cur

    def test_negative_rejected(self):
        with pytest.raises(InvalidInputError):
            scale_profile(ErasureProfile((0.1,)), -0.5)


class TestComposeMasks:
    def test_identity_with_all_true(self):
        m1 = fixed_count_mask(8, 3, 7)
        assert compose_masks(m1, SurvivalMask((True,) * 8)).bits == m1.bits

    def test_spec_example(self):
        # tail_keep(8,5) AND a mask erasing index 2 -> indices {2,5,6,7} erased
        m1 = tail_keep_mask(8, 5)
        m2 = SurvivalMask(tuple(i != 2 for i in range(8)))
        out = compose_masks(m1, m2)
        assert {i for i, b in enumerate(out.bits) if not b} == {2, 5, 6, 7}

    def test_commutative(self):
        a = fixed_count_mask(6, 2, 1)
        b = fixed_count_mask(6, 3, 2)
        assert compose_masks(a, b).bits == compose_masks(b, a).bits

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            compose_masks(SurvivalMask((True,)), SurvivalMask((True, False)))


def test_erase_latent_channels_matches_blockwise_map():
    z = np.random.default_rng(0).random((8, 4, 4)).astype(np.float32)
    bits = (True, False, True, False)
    out = erase_latent_channels(z, bits, alpha=2)
    assert (out[2:4] == -1.0).all() and (out[6:8] == -1.0).all()
    assert (out[0:2] == z[0:2]).all() and (out[4:6] == z[4:6]).all()
