"""Learned block codec: encoder/decoder nets, latent partitioning, quantization.

The encoder maps an image in [0,1] to a (k*alpha, beta, gamma) latent in
[0,1] (saturating final activation).  The latent splits channel-wise into k
blocks of alpha channels each; erased blocks are presented to the decoder as
the -1 sentinel so it can tell loss apart from content.  Quantization to 8
bits happens only on the inference path, never during training.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .channel import ERASED_VALUE, ErasureProfile
from .errors import (
    FormatError,
    InvalidConfigError,
    InvalidInputError,
    VersionError,
)

RECEIVED = "received"
ERASED = "erased"

CKPT_MAGIC = b"JSCCKIT1"
CKPT_VERSION = 1

# Incremented on every quantize() call; the trainer asserts it never moves
# during a training run (quantization is inference-only).
_QUANTIZE_CALLS = 0


def quantize_call_count() -> int:
    return _QUANTIZE_CALLS


@dataclass(frozen=True)
class ShapeConfig:
    """Block geometry plus the sample shape a model is built for."""

    k: int = 8
    alpha: int = 2
    beta: int = 8
    gamma: int = 8
    sample_shape: tuple[int, int, int] = (3, 32, 32)
    activation: str = "sigmoid"

    def __post_init__(self):
        if self.k < 1 or self.alpha < 1 or self.beta < 1 or self.gamma < 1:
            raise InvalidConfigError("shape dimensions must be positive")
        if self.activation != "sigmoid":
            raise InvalidConfigError(f"unsupported activation {self.activation!r}")

    @property
    def latent_channels(self) -> int:
        return self.k * self.alpha

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        return (self.latent_channels, self.beta, self.gamma)

    @property
    def block_dims(self) -> tuple[int, int, int]:
        return (self.alpha, self.beta, self.gamma)

    @property
    def block_size(self) -> int:
        return self.alpha * self.beta * self.gamma

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "sample_shape": list(self.sample_shape),
            "activation": self.activation,
        }

    @staticmethod
    def from_dict(d: dict) -> "ShapeConfig":
        return ShapeConfig(
            k=int(d["k"]),
            alpha=int(d["alpha"]),
            beta=int(d["beta"]),
            gamma=int(d["gamma"]),
            sample_shape=tuple(int(v) for v in d["sample_shape"]),
            activation=d.get("activation", "sigmoid"),
        )


@dataclass
class Block:
    """One latent block plus its delivery status."""

    values: np.ndarray
    status: str = RECEIVED

    def __post_init__(self):
        if self.status not in (RECEIVED, ERASED):
            raise InvalidInputError(f"bad block status {self.status!r}")
        values = np.asarray(self.values)
        if not np.issubdtype(values.dtype, np.floating):
            values = values.astype(np.float64)
        self.values = values


def erased_block(dims: tuple[int, int, int]) -> Block:
    return Block(np.full(dims, ERASED_VALUE, dtype=np.float32), status=ERASED)


@dataclass
class QuantizedBlock:
    """8-bit block payload plus its position and importance rank."""

    values: np.ndarray  # uint8, shape (alpha, beta, gamma)
    index: int  # 1-based block position
    importance_level: int  # lower = more important

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.uint8)
        if self.index < 1:
            raise InvalidInputError(f"block index must be >= 1, got {self.index}")
        if self.importance_level < 1:
            raise InvalidInputError(
                f"importance level must be >= 1, got {self.importance_level}"
            )

    @property
    def payload(self) -> bytes:
        return self.values.tobytes()


# --------------------------------------------------------------------------
# Networks.  Three convolutional stages map 32x32 -> 8x8 (two stride-2 plus
# one stride-1 head); the decoder mirrors them with transposed convolutions.
# Both ends saturate with a sigmoid so samples and latents live in [0, 1].
# --------------------------------------------------------------------------


def build_encoder(in_channels: int, latent_channels: int, hidden: tuple[int, ...]) -> nn.Module:
    if len(hidden) != 2:
        raise InvalidConfigError("encoder expects exactly two hidden widths")
    w1, w2 = hidden
    return nn.Sequential(
        nn.Conv2d(in_channels, w1, kernel_size=5, stride=2, padding=2),
        nn.PReLU(),
        nn.Conv2d(w1, w2, kernel_size=5, stride=2, padding=2),
        nn.PReLU(),
        nn.Conv2d(w2, latent_channels, kernel_size=3, stride=1, padding=1),
        # Per-channel normalization keeps the pre-sigmoid activations in the
        # active region; narrow latents otherwise saturate and stop learning.
        # Purely input-dependent, so encoding stays a deterministic function.
        nn.GroupNorm(latent_channels, latent_channels),
        nn.Sigmoid(),
    )


def build_decoder(out_channels: int, latent_channels: int, hidden: tuple[int, ...]) -> nn.Module:
    if len(hidden) != 2:
        raise InvalidConfigError("decoder expects exactly two hidden widths")
    w1, w2 = hidden
    return nn.Sequential(
        nn.ConvTranspose2d(latent_channels, w2, kernel_size=3, stride=1, padding=1),
        nn.PReLU(),
        nn.ConvTranspose2d(w2, w1, kernel_size=5, stride=2, padding=2, output_padding=1),
        nn.PReLU(),
        nn.ConvTranspose2d(w1, out_channels, kernel_size=5, stride=2, padding=2, output_padding=1),
        nn.Sigmoid(),
    )


@dataclass
class TrainedModel:
    """Encoder/decoder pair plus the channel profile it was trained under.

    Immutable once training finishes; all codec operations treat it as
    read-only so concurrent use on distinct samples is safe.
    """

    encoder: nn.Module
    decoder: nn.Module
    profile: ErasureProfile
    shape: ShapeConfig
    seed: int
    kind: str = "erasure"  # erasure | plain | genie | sr-stage
    hidden: tuple[int, ...] = (32, 64)
    training_meta: dict = field(default_factory=dict)

    def eval_mode(self) -> "TrainedModel":
        self.encoder.eval()
        self.decoder.eval()
        for p in self.encoder.parameters():
            p.requires_grad_(False)
        for p in self.decoder.parameters():
            p.requires_grad_(False)
        return self


def _check_sample(x: np.ndarray, shape: ShapeConfig) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != shape.sample_shape:
        raise InvalidInputError(
            f"sample shape {x.shape} does not match model {shape.sample_shape}"
        )
    if x.min() < 0.0 or x.max() > 1.0:
        raise InvalidInputError("sample entries must lie in [0, 1]")
    return x.astype(np.float32, copy=False)


def encode(model: TrainedModel, x: np.ndarray) -> np.ndarray:
    """Encode one sample to its (k*alpha, beta, gamma) latent."""
    return encode_batch(model, _check_sample(x, model.shape)[None])[0]


def encode_batch(model: TrainedModel, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float32)
    with torch.no_grad():
        z = model.encoder(torch.from_numpy(xs))
    return z.numpy()


def decode(model: TrainedModel, latent: np.ndarray) -> np.ndarray:
    """Decode a latent-shaped array whose entries are in [0,1] or the sentinel."""
    latent = np.asarray(latent, dtype=np.float32)
    if latent.shape != model.shape.latent_shape:
        raise InvalidInputError(
            f"latent shape {latent.shape} does not match model {model.shape.latent_shape}"
        )
    ok = ((latent >= 0.0) & (latent <= 1.0)) | (latent == ERASED_VALUE)
    if not ok.all():
        raise InvalidInputError("latent entries must lie in [0, 1] or equal the sentinel")
    return decode_batch(model, latent[None])[0]


def decode_batch(model: TrainedModel, latents: np.ndarray) -> np.ndarray:
    latents = np.asarray(latents, dtype=np.float32)
    with torch.no_grad():
        y = model.decoder(torch.from_numpy(latents))
    return y.numpy()


def partition_latent(z: np.ndarray, k: int) -> list[Block]:
    """Split a latent channel-wise into k equal received blocks."""
    z = np.asarray(z)
    if z.ndim != 3:
        raise InvalidInputError(f"latent must be 3-D, got shape {z.shape}")
    if k < 1 or z.shape[0] % k != 0:
        raise InvalidConfigError(
            f"latent with {z.shape[0]} channels cannot split into {k} blocks"
        )
    alpha = z.shape[0] // k
    return [
        Block(z[i * alpha : (i + 1) * alpha].copy(), status=RECEIVED) for i in range(k)
    ]


def assemble_decoder_input(blocks: list[Block], k: int | None = None) -> np.ndarray:
    """Concatenate blocks into a decoder input, writing the sentinel over
    erased positions."""
    if k is not None and len(blocks) != k:
        raise InvalidInputError(f"expected {k} blocks, got {len(blocks)}")
    if not blocks:
        raise InvalidInputError("no blocks to assemble")
    dims = blocks[0].values.shape
    for i, b in enumerate(blocks):
        if b.values.shape != dims:
            raise InvalidInputError(f"block {i + 1} has shape {b.values.shape}, expected {dims}")
    parts = [
        b.values if b.status == RECEIVED else np.full(dims, ERASED_VALUE, dtype=np.float32)
        for b in blocks
    ]
    return np.concatenate(parts, axis=0)


def quantize(block: Block, index: int = 1, importance_level: int | None = None) -> QuantizedBlock:
    """Map a received block to 8-bit bytes: round(255*v), half away from zero."""
    global _QUANTIZE_CALLS
    _QUANTIZE_CALLS += 1
    if block.status != RECEIVED:
        raise InvalidInputError("cannot quantize an erased block; erasures travel as masks")
    v = block.values.astype(np.float64)
    if v.min() < 0.0 or v.max() > 1.0:
        raise InvalidInputError("block entries must lie in [0, 1]")
    q = np.floor(v * 255.0 + 0.5).astype(np.uint8)
    return QuantizedBlock(q, index=index, importance_level=importance_level or index)


def dequantize(qb: QuantizedBlock) -> Block:
    """Inverse map byte -> byte/255; the result is always a received block.

    Computed in float64 so the uniform-quantizer error bound of 1/510 holds
    exactly; downstream torch code casts to float32 at its boundary.
    """
    return Block(qb.values.astype(np.float64) / 255.0, status=RECEIVED)


def quantize_latent(z: np.ndarray, k: int) -> list[QuantizedBlock]:
    """Partition + quantize, with importance defaulting to block order."""
    return [quantize(b, index=i + 1) for i, b in enumerate(partition_latent(z, k))]


def quantized_block_from_bytes(
    raw: bytes, dims: tuple[int, int, int], index: int, importance_level: int
) -> QuantizedBlock:
    expected = int(np.prod(dims))
    if len(raw) != expected:
        raise FormatError(f"block {index}: payload is {len(raw)} bytes, expected {expected}")
    values = np.frombuffer(raw, dtype=np.uint8).reshape(dims)
    return QuantizedBlock(values.copy(), index=index, importance_level=importance_level)


# --------------------------------------------------------------------------
# Checkpoint container: a self-describing header followed by raw float32
# parameter bytes.  Writing the same model twice yields identical bytes,
# which is what makes re-runs reproducible at the file level.
# --------------------------------------------------------------------------


def _module_entry(module: nn.Module, blob: io.BytesIO, offset: int) -> tuple[list[dict], int]:
    params = []
    for name, tensor in module.state_dict().items():
        arr = tensor.detach().numpy().astype("<f4", copy=False)
        raw = arr.tobytes()
        params.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blob.write(raw)
        offset += len(raw)
    return params, offset


def save_model(model: TrainedModel, path) -> None:
    blob = io.BytesIO()
    enc_params, offset = _module_entry(model.encoder, blob, 0)
    dec_params, offset = _module_entry(model.decoder, blob, offset)
    in_ch = model.shape.sample_shape[0]
    header = {
        "format": "jscckit-model",
        "format_version": CKPT_VERSION,
        "kind": model.kind,
        "seed": model.seed,
        "profile": list(model.profile.eps),
        "shape": model.shape.to_dict(),
        "hidden": list(model.hidden),
        "training": model.training_meta,
        "modules": {
            "encoder": {
                "in_channels": model.training_meta.get("encoder_in_channels", in_ch),
                "latent_channels": model.training_meta.get(
                    "encoder_latent_channels", model.shape.latent_channels
                ),
                "params": enc_params,
            },
            "decoder": {
                "out_channels": in_ch,
                "latent_channels": model.training_meta.get(
                    "decoder_latent_channels", model.shape.latent_channels
                ),
                "params": dec_params,
            },
        },
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack(">Q", len(head)))
        f.write(head)
        f.write(blob.getvalue())


def _load_state(module: nn.Module, entries: list[dict], blob: bytes) -> None:
    state = {}
    for p in entries:
        raw = blob[p["offset"] : p["offset"] + p["nbytes"]]
        if len(raw) != p["nbytes"]:
            raise FormatError(f"checkpoint truncated at parameter {p['name']}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(p["shape"]).copy()
        state[p["name"]] = torch.from_numpy(arr)
    module.load_state_dict(state)


def load_model(path) -> TrainedModel:
    with open(path, "rb") as f:
        magic = f.read(len(CKPT_MAGIC))
        if magic != CKPT_MAGIC:
            raise FormatError(f"{path}: not a jscckit checkpoint")
        (head_len,) = struct.unpack(">Q", f.read(8))
        header = json.loads(f.read(head_len).decode("utf-8"))
        blob = f.read()
    if header.get("format_version") != CKPT_VERSION:
        raise VersionError(f"unsupported checkpoint version {header.get('format_version')}")
    shape = ShapeConfig.from_dict(header["shape"])
    hidden = tuple(int(h) for h in header["hidden"])
    enc_info = header["modules"]["encoder"]
    dec_info = header["modules"]["decoder"]
    encoder = build_encoder(enc_info["in_channels"], enc_info["latent_channels"], hidden)
    decoder = build_decoder(dec_info["out_channels"], dec_info["latent_channels"], hidden)
    _load_state(encoder, enc_info["params"], blob)
    _load_state(decoder, dec_info["params"], blob)
    model = TrainedModel(
        encoder=encoder,
        decoder=decoder,
        profile=ErasureProfile(tuple(header["profile"])),
        shape=shape,
        seed=int(header["seed"]),
        kind=header["kind"],
        hidden=hidden,
        training_meta=header.get("training", {}),
    )
    return model.eval_mode()
