"""End-to-end training of the erasure-aware codec and its baselines.

The training path is: encode -> per-sample survival mask -> differentiable
erasure -> decode -> MSE.  Quantization never runs here; it is applied only
at inference.  Everything is deterministic given the config seed: weight
init comes from torch's seeded RNG, batch order from a keyed permutation
stream, and mask draws from the keyed hash stream (so they do not depend on
batch order at all).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
import torch
from torch import nn

from .channel import ErasureProfile, uniform_profile
from .codec import (
    ShapeConfig,
    TrainedModel,
    build_decoder,
    build_encoder,
    load_model,
    quantize_call_count,
    save_model,
)
from .data import DatasetSpec, load_dataset, to_float
from .errors import InvalidConfigError, TrainingDivergedError
from .maskrng import iid_unit, keyed_u64

_PERM_TAG = 0x7065726D  # "perm"
_SR_TAG = 0x7372  # "sr"


@dataclass(frozen=True)
class TrainConfig:
    profile: ErasureProfile
    epochs: int = 20
    learning_rate: float = 1e-4
    batch_size: int = 128
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    seed: int = 0
    shape: ShapeConfig = field(default_factory=ShapeConfig)
    hidden: tuple[int, ...] = (32, 64)
    torch_threads: int | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise InvalidConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise InvalidConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.profile.k != self.shape.k:
            raise InvalidConfigError(
                f"profile has {self.profile.k} entries but shape.k = {self.shape.k}"
            )


def resolve_threads(requested: int | None) -> int:
    if requested is not None:
        return requested
    return min(os.cpu_count() or 1, 4)


def epoch_permutation(seed: int, epoch: int, n: int, stage: int = 0) -> np.ndarray:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, _PERM_TAG, stage, epoch])
    return np.random.Generator(np.random.Philox(ss)).permutation(n)


def _epoch_keep_bits(profile: ErasureProfile, seed: int, epoch: int, n: int) -> np.ndarray:
    """Per-sample, per-block survival bits for one epoch, keyed by dataset index."""
    eps = profile.as_array()
    bits = np.ones((n, profile.k), dtype=bool)
    if eps.max() == 0.0:
        return bits
    for idx in range(n):
        sid = str(idx)
        for i in range(profile.k):
            if eps[i] > 0.0 and iid_unit(seed, sid, i + 1, epoch) < eps[i]:
                bits[idx, i] = False
    return bits


def _erase_channels(z: torch.Tensor, keep: torch.Tensor, alpha: int) -> torch.Tensor:
    """Differentiable erasure on a batched latent; keep is (B, k) bool."""
    mask = keep.repeat_interleave(alpha, dim=1)[:, :, None, None]
    return torch.where(mask, z, torch.full_like(z, -1.0))


def _check_divergence(losses: list[float]) -> None:
    cur = losses[-1]
    if not math.isfinite(cur):
        raise TrainingDivergedError(f"loss became non-finite at epoch {len(losses)}")
    window = losses[-6:-1]
    if window and cur > 10.0 * min(window):
        raise TrainingDivergedError(
            f"loss grew more than 10x over 5 epochs ({min(window):.4g} -> {cur:.4g})"
        )


def train_model(cfg: TrainConfig, kind: str = "erasure", progress=None) -> TrainedModel:
    """Train the erasure-aware autoencoder described by `cfg`.

    A profile of all zeros degenerates to a plain autoencoder: the erasure
    layer passes every block through exactly.
    """
    torch.set_num_threads(resolve_threads(cfg.torch_threads))
    images = load_dataset(cfg.dataset)
    n = len(images)
    data = torch.from_numpy(images)

    torch.manual_seed(cfg.seed & (2**63 - 1))
    c = cfg.shape.sample_shape[0]
    encoder = build_encoder(c, cfg.shape.latent_channels, cfg.hidden)
    decoder = build_decoder(c, cfg.shape.latent_channels, cfg.hidden)
    opt = torch.optim.Adam(
        list(encoder.parameters()) + list(decoder.parameters()), lr=cfg.learning_rate
    )

    quantize_calls_before = quantize_call_count()
    losses: list[float] = []
    for epoch in range(cfg.epochs):
        keep = torch.from_numpy(_epoch_keep_bits(cfg.profile, cfg.seed, epoch, n))
        perm = epoch_permutation(cfg.seed, epoch, n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            x = data[idx].to(torch.float32) / 255.0
            z = encoder(x)
            z = _erase_channels(z, keep[idx], cfg.shape.alpha)
            loss = nn.functional.mse_loss(decoder(z), x)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        losses.append(total / n)
        if progress is not None:
            progress(epoch + 1, losses[-1])
        _check_divergence(losses)
    if quantize_call_count() != quantize_calls_before:
        raise RuntimeError("quantizer was invoked during training")

    meta = {
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "dataset": cfg.dataset.to_dict(),
        "torch_threads": resolve_threads(cfg.torch_threads),
        "epoch_loss": losses,
    }
    model = TrainedModel(
        encoder=encoder,
        decoder=decoder,
        profile=cfg.profile,
        shape=cfg.shape,
        seed=cfg.seed,
        kind=kind,
        hidden=cfg.hidden,
        training_meta=meta,
    )
    return model.eval_mode()


def train_plain_compression(cfg: TrainConfig, progress=None) -> TrainedModel:
    """All-blocks compression with no erasure awareness; evaluation later
    applies mean fill instead of the sentinel for this model kind."""
    zero = replace(cfg, profile=uniform_profile(cfg.shape.k, 0.0))
    return train_model(zero, kind="plain", progress=progress)


def train_genie_baseline(cfg: TrainConfig, blocks_kept: int, progress=None) -> TrainedModel:
    """Upper-bound model: sized for exactly `blocks_kept` blocks, trained clean."""
    if not (1 <= blocks_kept <= cfg.shape.k):
        raise InvalidConfigError(
            f"blocks_kept must be in [1, {cfg.shape.k}], got {blocks_kept}"
        )
    shape = replace(cfg.shape, k=blocks_kept)
    cfg2 = replace(cfg, shape=shape, profile=uniform_profile(blocks_kept, 0.0))
    return train_model(cfg2, kind="genie", progress=progress)


# --------------------------------------------------------------------------
# Successive refinement: K separate codes.  Stage i's encoder sees the image
# plus the frozen blocks 1..i-1 (upsampled to image resolution) and emits
# block i; its decoder reconstructs from blocks 1..i.
# --------------------------------------------------------------------------


@dataclass
class SRChain:
    stages: list[TrainedModel]
    shape: ShapeConfig
    seed: int
    mean_image: np.ndarray
    # stage_choice[j-1]: which stage decodes a j-block prefix.  Calibrated on
    # training data so refinement never regresses; empty = always stage j.
    stage_choice: tuple[int, ...] = ()
    training_meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.stages)

    def stage_for_prefix(self, j: int) -> int:
        if j < 1:
            return 0
        if self.stage_choice:
            return self.stage_choice[j - 1]
        return j


def _sr_stage_seed(seed: int, stage: int) -> int:
    return keyed_u64(seed, "sr-stage", stage) & (2**63 - 1)


def _upsample_blocks(prev: torch.Tensor, hw: tuple[int, int]) -> torch.Tensor:
    return nn.functional.interpolate(prev, size=hw, mode="nearest")


def train_successive_refinement(cfg: TrainConfig, progress=None) -> SRChain:
    torch.set_num_threads(resolve_threads(cfg.torch_threads))
    images = load_dataset(cfg.dataset)
    n = len(images)
    data = torch.from_numpy(images)
    mean_image = to_float(images).mean(axis=0)

    shp = cfg.shape
    c, h, w = shp.sample_shape
    alpha = shp.alpha
    stages: list[TrainedModel] = []
    # Frozen blocks of all previous stages for every training sample.
    prev_all = torch.zeros((n, 0, shp.beta, shp.gamma), dtype=torch.float32)

    for stage in range(1, shp.k + 1):
        torch.manual_seed(_sr_stage_seed(cfg.seed, stage))
        enc_in = c + (stage - 1) * alpha
        encoder = build_encoder(enc_in, alpha, cfg.hidden)
        decoder = build_decoder(c, stage * alpha, cfg.hidden)
        opt = torch.optim.Adam(
            list(encoder.parameters()) + list(decoder.parameters()), lr=cfg.learning_rate
        )
        losses: list[float] = []
        for epoch in range(cfg.epochs):
            perm = epoch_permutation(cfg.seed, epoch, n, stage=stage)
            total = 0.0
            for lo in range(0, n, cfg.batch_size):
                idx = perm[lo : lo + cfg.batch_size]
                x = data[idx].to(torch.float32) / 255.0
                prev = prev_all[idx]
                if stage > 1:
                    enc_input = torch.cat([x, _upsample_blocks(prev, (h, w))], dim=1)
                else:
                    enc_input = x
                b = encoder(enc_input)
                y = decoder(torch.cat([prev, b], dim=1))
                loss = nn.functional.mse_loss(y, x)
                opt.zero_grad()
                loss.backward()
                opt.step()
                total += loss.item() * len(idx)
            losses.append(total / n)
            if progress is not None:
                progress(stage, epoch + 1, losses[-1])
            _check_divergence(losses)

        meta = {
            "sr_stage": stage,
            "encoder_in_channels": enc_in,
            "encoder_latent_channels": alpha,
            "decoder_latent_channels": stage * alpha,
            "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "epoch_loss": losses,
        }
        model = TrainedModel(
            encoder=encoder,
            decoder=decoder,
            profile=uniform_profile(shp.k, 0.0),
            shape=shp,
            seed=cfg.seed,
            kind="sr-stage",
            hidden=cfg.hidden,
            training_meta=meta,
        ).eval_mode()
        stages.append(model)

        # Materialize this stage's blocks for the whole set, then freeze.
        with torch.no_grad():
            outs = []
            for lo in range(0, n, 512):
                x = data[lo : lo + 512].to(torch.float32) / 255.0
                prev = prev_all[lo : lo + 512]
                if stage > 1:
                    enc_input = torch.cat([x, _upsample_blocks(prev, (h, w))], dim=1)
                else:
                    enc_input = x
                outs.append(encoder(enc_input))
            prev_all = torch.cat([prev_all, torch.cat(outs, dim=0)], dim=1)

    # Calibrate prefix -> stage on training data: a receiver holding j blocks
    # uses the best stage <= j, so refinement never regresses at decode time
    # even when independently trained stages wobble.
    calib = to_float(images[:1000])
    calib_blocks = np.floor(prev_all[:1000].numpy().astype(np.float64) * 255.0 + 0.5)
    calib_blocks = (calib_blocks / 255.0).astype(np.float32)
    stage_quality = []
    with torch.no_grad():
        for stage in range(1, shp.k + 1):
            dec = stages[stage - 1].decoder
            outs = []
            for lo in range(0, len(calib), 512):
                z = torch.from_numpy(calib_blocks[lo : lo + 512, : stage * alpha])
                outs.append(dec(z).numpy())
            recon = np.concatenate(outs, axis=0)
            mse = np.mean((recon.astype(np.float64) - calib.astype(np.float64)) ** 2)
            stage_quality.append(float(-mse))
    stage_choice = []
    for j in range(1, shp.k + 1):
        best = max(range(1, j + 1), key=lambda i: (stage_quality[i - 1], i))
        stage_choice.append(best)

    meta = {
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "dataset": cfg.dataset.to_dict(),
        "torch_threads": resolve_threads(cfg.torch_threads),
        "stage_train_neg_mse": stage_quality,
    }
    return SRChain(
        stages=stages,
        shape=shp,
        seed=cfg.seed,
        mean_image=mean_image,
        stage_choice=tuple(stage_choice),
        training_meta=meta,
    )


def sr_encode_blocks(chain: SRChain, xs: np.ndarray, batch: int = 512) -> np.ndarray:
    """Float blocks of every stage for a batch of samples, shape (N, k*alpha, b, g).

    Conditioning uses the transmitter-side float blocks; quantization is
    applied separately by the receiver path.
    """
    shp = chain.shape
    _, h, w = shp.sample_shape
    n = len(xs)
    data = torch.from_numpy(np.asarray(xs, dtype=np.float32))
    prev_all = torch.zeros((n, 0, shp.beta, shp.gamma), dtype=torch.float32)
    with torch.no_grad():
        for stage_model in chain.stages:
            outs = []
            for lo in range(0, n, batch):
                x = data[lo : lo + batch]
                prev = prev_all[lo : lo + batch]
                if prev.shape[1]:
                    enc_input = torch.cat([x, _upsample_blocks(prev, (h, w))], dim=1)
                else:
                    enc_input = x
                outs.append(stage_model.encoder(enc_input))
            prev_all = torch.cat([prev_all, torch.cat(outs, dim=0)], dim=1)
    return prev_all.numpy()


def sr_decode_prefix(chain: SRChain, blocks: np.ndarray, j: int, batch: int = 512) -> np.ndarray:
    """Decode samples from their first j blocks; j = 0 falls back to the
    dataset-mean image.

    The decoding stage comes from the chain's calibrated prefix table (the
    best stage <= j on training data), so more received blocks never decode
    worse."""
    n = len(blocks)
    s = chain.stage_for_prefix(j)
    if s == 0:
        return np.repeat(chain.mean_image[None], n, axis=0)
    alpha = chain.shape.alpha
    dec = chain.stages[s - 1].decoder
    outs = []
    with torch.no_grad():
        for lo in range(0, n, batch):
            z = torch.from_numpy(blocks[lo : lo + batch, : s * alpha])
            outs.append(dec(z).numpy())
    return np.concatenate(outs, axis=0)


# --------------------------------------------------------------------------
# Persistence helpers.
# --------------------------------------------------------------------------


def write_loss_log(path, losses: list[float]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("epoch,mean_mse\n")
        for i, v in enumerate(losses, start=1):
            f.write(f"{i},{v:.10f}\n")


def save_sr_chain(chain: SRChain, out_dir) -> None:
    import json
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, stage in enumerate(chain.stages, start=1):
        save_model(stage, out / f"stage{i}.ckpt")
    np.save(out / "mean_image.npy", chain.mean_image)
    doc = {
        "format": "jscckit-sr-chain",
        "format_version": 1,
        "k": chain.k,
        "seed": chain.seed,
        "shape": chain.shape.to_dict(),
        "stages": [f"stage{i}.ckpt" for i in range(1, chain.k + 1)],
        "stage_choice": list(chain.stage_choice),
        "mean_image": "mean_image.npy",
        "training": chain.training_meta,
    }
    with open(out / "chain.json", "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def load_sr_chain(in_dir) -> SRChain:
    import json
    from pathlib import Path

    d = Path(in_dir)
    with open(d / "chain.json", encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format_version") != 1:
        from .errors import VersionError

        raise VersionError(f"unsupported SR chain version {doc.get('format_version')}")
    stages = [load_model(d / name) for name in doc["stages"]]
    mean_image = np.load(d / doc["mean_image"])
    return SRChain(
        stages=stages,
        shape=ShapeConfig.from_dict(doc["shape"]),
        seed=int(doc["seed"]),
        mean_image=mean_image,
        stage_choice=tuple(doc.get("stage_choice", ())),
        training_meta=doc.get("training", {}),
    )
