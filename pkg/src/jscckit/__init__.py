"""Block-erasure-aware learned image codec and its evaluation harness."""

__version__ = "0.1.0"

from .channel import (
    ErasureProfile,
    SurvivalMask,
    apply_channel_training,
    compose_masks,
    fixed_count_mask,
    profile_preset,
    sample_mask,
    scale_profile,
    tail_keep_mask,
    uniform_profile,
)
from .codec import (
    Block,
    QuantizedBlock,
    ShapeConfig,
    TrainedModel,
    assemble_decoder_input,
    decode,
    dequantize,
    encode,
    load_model,
    partition_latent,
    quantize,
    save_model,
)
from .data import DatasetSpec, load_dataset
from .errors import JsccError
from .evaluate import SweepResult, decode_with_mask, emit_report, psnr
from .manifest import BlockManifest, MaskRecord, apply_mask_record, read_manifest, write_manifest
from .training import (
    SRChain,
    TrainConfig,
    train_genie_baseline,
    train_model,
    train_plain_compression,
    train_successive_refinement,
)
