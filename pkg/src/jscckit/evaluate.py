"""PSNR evaluation and the four experiment sweeps.

Sweeps are pure functions of (checkpoints, config, seed): every mask draw is
keyed by (experiment, "channel", variable, sample, trial), so re-running a
sweep reproduces its CSV byte for byte.  All systems compared within one
sweep point see the same channel realizations.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    SurvivalMask,
    compose_masks,
    fixed_count_mask,
    sample_mask,
    scale_profile,
    tail_keep_mask,
    uniform_profile,
)
from .codec import (
    RECEIVED,
    Block,
    TrainedModel,
    assemble_decoder_input,
    decode,
    decode_batch,
    encode,
    encode_batch,
    erased_block,
    partition_latent,
    quantize,
    dequantize,
)
from .errors import InvalidInputError, UndefinedFillError
from .maskrng import keyed_u64
from .training import SRChain, sr_decode_prefix, sr_encode_blocks

PSNR_CAP_DB = 100.0
DEFAULT_TRIALS = 4


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for unit-peak images."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise InvalidInputError(f"shape mismatch: {x.shape} vs {y.shape}")
    for name, a in (("x", x), ("y", y)):
        if a.min() < 0.0 or a.max() > 1.0:
            raise InvalidInputError(f"{name} entries must lie in [0, 1]")
    mse = float(np.mean((x.astype(np.float64) - y.astype(np.float64)) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(1.0 / mse))


def psnr_batch(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Per-image PSNR over matching batches (no input validation)."""
    diff = xs.astype(np.float64) - ys.astype(np.float64)
    mse = np.mean(diff * diff, axis=tuple(range(1, xs.ndim)))
    out = np.full(len(xs), PSNR_CAP_DB)
    nz = mse > 0.0
    out[nz] = 10.0 * np.log10(1.0 / mse[nz])
    return out


def quantize_roundtrip(z: np.ndarray) -> np.ndarray:
    """Vectorized 8-bit quantize/dequantize returning float32.

    Matches quantize -> dequantize -> float32 cast (the decoder-boundary
    path) bit for bit: bytes are floor(255 v + 0.5) in float64 and the
    inverse divides in float64 before the final cast.
    """
    q = np.floor(z.astype(np.float64) * 255.0 + 0.5).astype(np.uint8)
    return (q.astype(np.float64) / 255.0).astype(np.float32)


def decode_with_mask(
    model: TrainedModel,
    x: np.ndarray,
    mask: SurvivalMask,
    fill: str = "sentinel",
) -> np.ndarray:
    """Full receive-side pipeline for one sample under a given mask.

    Received blocks are quantized and dequantized (the inference path always
    pays the 8-bit cost); erased blocks are substituted per `fill`:
    "sentinel" writes the -1 placeholder, "mean" writes the elementwise mean
    of the received blocks.
    """
    if fill not in ("sentinel", "mean"):
        raise InvalidInputError(f"unknown fill rule {fill!r}")
    k = model.shape.k
    if mask.k != k:
        raise InvalidInputError(f"mask has {mask.k} bits, model expects {k}")
    z = encode(model, x)
    received = {}
    for i, block in enumerate(partition_latent(z, k)):
        if mask.bits[i]:
            received[i] = dequantize(quantize(block, index=i + 1))
    if fill == "mean" and not received:
        raise UndefinedFillError("mean fill needs at least one received block")
    if fill == "mean":
        mean_values = np.mean([b.values for b in received.values()], axis=0).astype(np.float32)
    blocks = []
    for i in range(k):
        if i in received:
            blocks.append(received[i])
        elif fill == "sentinel":
            blocks.append(erased_block(model.shape.block_dims))
        else:
            blocks.append(Block(mean_values.copy(), status=RECEIVED))
    return decode(model, assemble_decoder_input(blocks, k))


def full_reception_psnr(
    model: TrainedModel, xs: np.ndarray, quantized: bool = True, batch: int = 256
) -> float:
    """Mean PSNR with every block delivered."""
    vals = []
    for lo in range(0, len(xs), batch):
        x = xs[lo : lo + batch]
        z = encode_batch(model, x)
        if quantized:
            z = quantize_roundtrip(z)
        vals.append(psnr_batch(x, decode_batch(model, z)))
    return float(np.concatenate(vals).mean())


# --------------------------------------------------------------------------
# Sweeps.
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    experiment: str
    model: str
    variable: float
    psnr_db: float
    n: int
    seed: int


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def _point_seed(seed: int, experiment: str, variable) -> int:
    return keyed_u64(seed, "sweep", experiment, "channel", variable) & (2**63 - 1)


def _encode_quantized(model: TrainedModel, xs: np.ndarray, batch: int = 256) -> np.ndarray:
    outs = []
    for lo in range(0, len(xs), batch):
        outs.append(quantize_roundtrip(encode_batch(model, xs[lo : lo + batch])))
    return np.concatenate(outs, axis=0)


def _draw_masks(k: int, n: int, trials: int, point_seed: int, draw) -> np.ndarray:
    """Boolean (trials, n, k) survival bits; draw(point_seed, sample_id, counter)."""
    bits = np.empty((trials, n, k), dtype=bool)
    for t in range(trials):
        for s in range(n):
            bits[t, s] = draw(point_seed, str(s), t).bits
    return bits


def _sentinel_fill(zq: np.ndarray, keep: np.ndarray, alpha: int) -> np.ndarray:
    mask = np.repeat(keep, alpha, axis=1)[:, :, None, None]
    return np.where(mask, zq, np.float32(-1.0))


def _mean_fill(zq: np.ndarray, keep: np.ndarray, k: int, alpha: int) -> np.ndarray:
    n, ka, b, g = zq.shape
    blocks = zq.reshape(n, k, alpha, b, g)
    counts = keep.sum(axis=1)
    if (counts == 0).any():
        raise UndefinedFillError("mean fill needs at least one received block")
    w = keep[:, :, None, None, None]
    mean_block = (blocks * w).sum(axis=1) / counts[:, None, None, None]
    filled = np.where(w, blocks, mean_block[:, None].astype(np.float32))
    return filled.reshape(n, ka, b, g).astype(np.float32)


def _masked_mean_psnr(
    model: TrainedModel,
    xs: np.ndarray,
    zq: np.ndarray,
    bits: np.ndarray,
    fill: str,
    batch: int = 256,
) -> tuple[float, int]:
    k, alpha = model.shape.k, model.shape.alpha
    vals = []
    for t in range(len(bits)):
        keep = bits[t]
        if fill == "mean":
            zfill = _mean_fill(zq, keep, k, alpha)
        else:
            zfill = _sentinel_fill(zq, keep, alpha)
        for lo in range(0, len(xs), batch):
            ys = decode_batch(model, zfill[lo : lo + batch])
            vals.append(psnr_batch(xs[lo : lo + batch], ys))
    flat = np.concatenate(vals)
    return float(flat.mean()), int(flat.size)


def sweep_subset_decoding(
    models: dict[str, TrainedModel],
    e_values: list[int],
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    test_images: np.ndarray | None = None,
    genie_models: dict[int, TrainedModel] | None = None,
    plain_model: TrainedModel | None = None,
) -> SweepResult:
    """Random E-of-K erasure: erasure-trained models (sentinel fill) against
    the genie bound and the mean-fill compression baseline."""
    xs = test_images
    first = next(iter(models.values())) if models else plain_model
    k = first.shape.k
    rows: list[SweepRow] = []
    exp = "subset"

    cache = {mid: _encode_quantized(m, xs) for mid, m in models.items()}
    plain_zq = _encode_quantized(plain_model, xs) if plain_model is not None else None

    for e in sorted(e_values):
        ps = _point_seed(seed, exp, e)
        bits = _draw_masks(
            k, len(xs), trials, ps,
            lambda s, sid, t: fixed_count_mask(k, e, s, sample_id=sid, counter=t),
        )
        blocks_used = k - e
        for mid, model in models.items():
            mean_db, n = _masked_mean_psnr(model, xs, cache[mid], bits, "sentinel")
            rows.append(SweepRow(exp, mid, blocks_used, mean_db, n, seed))
        if plain_model is not None:
            mean_db, n = _masked_mean_psnr(plain_model, xs, plain_zq, bits, "mean")
            rows.append(SweepRow(exp, "plain-meanfill", blocks_used, mean_db, n, seed))
        if genie_models is not None:
            genie = genie_models.get(blocks_used)
            if genie is None:
                from .errors import DependencyError

                raise DependencyError(f"missing genie checkpoint for {blocks_used} blocks")
            db = full_reception_psnr(genie, xs)
            rows.append(SweepRow(exp, "genie", blocks_used, db, len(xs), seed))

    meta = {
        "experiment": exp,
        "seed": seed,
        "trials": trials,
        "n_images": len(xs),
        "k": k,
        "e_values": sorted(int(e) for e in e_values),
        "models": sorted(models),
        "baselines": {
            "genie": sorted(genie_models) if genie_models else [],
            "plain_meanfill": plain_model is not None,
        },
        "xlabel": "blocks used for decoding",
    }
    return SweepResult(rows=rows, metadata=meta)


def sweep_mismatch(
    models: dict[str, TrainedModel],
    eps_test_grid: list[float],
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    test_images: np.ndarray | None = None,
    matched: dict[str, float] | None = None,
) -> SweepResult:
    """Uniform-rate mismatch: every model evaluated on every test rate."""
    xs = test_images
    k = next(iter(models.values())).shape.k
    rows: list[SweepRow] = []
    exp = "mismatch"
    cache = {mid: _encode_quantized(m, xs) for mid, m in models.items()}
    for eps in eps_test_grid:
        profile = uniform_profile(k, eps)
        ps = _point_seed(seed, exp, f"{eps:g}")
        bits = _draw_masks(
            k, len(xs), trials, ps,
            lambda s, sid, t: sample_mask(profile, s, sample_id=sid, counter=t),
        )
        for mid, model in models.items():
            mean_db, n = _masked_mean_psnr(model, xs, cache[mid], bits, "sentinel")
            rows.append(SweepRow(exp, mid, float(eps), mean_db, n, seed))
    meta = {
        "experiment": exp,
        "seed": seed,
        "trials": trials,
        "n_images": len(xs),
        "k": k,
        "eps_test_grid": [float(e) for e in eps_test_grid],
        "models": sorted(models),
        "matched_points": matched or {},
        "xlabel": "test erasure rate",
    }
    return SweepResult(rows=rows, metadata=meta)


def sweep_congestion(
    model_shallow: TrainedModel,
    model_steep: TrainedModel,
    sr_chain: SRChain,
    per_block_eps: float,
    m_values: list[int],
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    test_images: np.ndarray | None = None,
) -> SweepResult:
    """Tail drop to m blocks plus residual i.i.d. erasure; the SR baseline
    decodes only its longest received prefix."""
    xs = test_images
    k = model_shallow.shape.k
    exp = f"congestion-r{per_block_eps:g}"
    rows: list[SweepRow] = []
    residual = uniform_profile(k, per_block_eps)

    systems = {"shallow": model_shallow, "steep": model_steep}
    cache = {mid: _encode_quantized(m, xs) for mid, m in systems.items()}
    sr_blocks_f = sr_encode_blocks(sr_chain, xs)
    sr_blocks = quantize_roundtrip(sr_blocks_f)

    for m in sorted(m_values):
        policy = tail_keep_mask(k, m)
        ps = _point_seed(seed, exp, m)
        bits = _draw_masks(
            k, len(xs), trials, ps,
            lambda s, sid, t: compose_masks(
                policy, sample_mask(residual, s, sample_id=sid, counter=t)
            ),
        )
        for mid, model in systems.items():
            mean_db, n = _masked_mean_psnr(model, xs, cache[mid], bits, "sentinel")
            rows.append(SweepRow(exp, mid, m, mean_db, n, seed))
        # SR: group samples by usable prefix length and decode per group.
        vals = []
        for t in range(trials):
            prefix = np.zeros(len(xs), dtype=int)
            for s in range(len(xs)):
                j = 0
                for b in bits[t, s]:
                    if not b:
                        break
                    j += 1
                prefix[s] = j
            ys = np.empty_like(xs)
            for j in np.unique(prefix):
                sel = prefix == j
                ys[sel] = sr_decode_prefix(sr_chain, sr_blocks[sel], int(j))
            vals.append(psnr_batch(xs, ys))
        flat = np.concatenate(vals)
        rows.append(SweepRow(exp, "sr", m, float(flat.mean()), int(flat.size), seed))

    meta = {
        "experiment": exp,
        "seed": seed,
        "trials": trials,
        "n_images": len(xs),
        "k": k,
        "per_block_eps": float(per_block_eps),
        "m_values": sorted(int(m) for m in m_values),
        "models": ["shallow", "sr", "steep"],
        "xlabel": "max transmitted blocks",
    }
    return SweepResult(rows=rows, metadata=meta)


def sweep_uep(
    model: TrainedModel,
    a_values: list[float],
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    test_images: np.ndarray | None = None,
    model_id: str = "uep",
) -> SweepResult:
    """Scaled-profile testing: the test channel follows the training profile
    shape with severity a."""
    xs = test_images
    k = model.shape.k
    exp = "uep"
    rows: list[SweepRow] = []
    zq = _encode_quantized(model, xs)
    for a in a_values:
        profile = scale_profile(model.profile, a)
        ps = _point_seed(seed, exp, f"{a:g}")
        bits = _draw_masks(
            k, len(xs), trials, ps,
            lambda s, sid, t: sample_mask(profile, s, sample_id=sid, counter=t),
        )
        mean_db, n = _masked_mean_psnr(model, xs, zq, bits, "sentinel")
        rows.append(SweepRow(exp, model_id, float(a), mean_db, n, seed))
    meta = {
        "experiment": exp,
        "seed": seed,
        "trials": trials,
        "n_images": len(xs),
        "k": k,
        "a_values": [float(a) for a in a_values],
        "train_profile": list(model.profile.eps),
        "models": [model_id],
        "xlabel": "test severity a",
    }
    return SweepResult(rows=rows, metadata=meta)


# --------------------------------------------------------------------------
# Report emission.
# --------------------------------------------------------------------------


def config_hash(metadata: dict) -> str:
    blob = json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def _fmt_variable(v) -> str:
    f = float(v)
    return str(int(f)) if f.is_integer() else f"{f:g}"


def emit_report(result: SweepResult, out_dir) -> list:
    """Write the experiment CSV (source of truth) and its derived plot."""
    from pathlib import Path

    if not result.rows:
        raise InvalidInputError("cannot emit a report for an empty sweep result")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    exp = result.rows[0].experiment
    stem = f"{exp}_{config_hash(result.metadata)}"
    csv_path = out / f"{stem}.csv"
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write("experiment,model,variable,psnr_db,n,seed\n")
        for r in result.rows:
            f.write(
                f"{r.experiment},{r.model},{_fmt_variable(r.variable)},"
                f"{r.psnr_db:.6f},{r.n},{r.seed}\n"
            )
    plot_path = out / f"{stem}.png"
    _plot(result, plot_path)
    return [csv_path, plot_path]


def _plot(result: SweepResult, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series: dict[str, list[tuple[float, float]]] = {}
    for r in result.rows:
        series.setdefault(r.model, []).append((r.variable, r.psnr_db))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for model in sorted(series):
        pts = sorted(series[model])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=model)
    for model, x in (result.metadata.get("matched_points") or {}).items():
        ax.axvline(x, linestyle="--", linewidth=0.8, alpha=0.5)
    ax.set_xlabel(result.metadata.get("xlabel", "sweep variable"))
    ax.set_ylabel("mean PSNR (dB)")
    ax.set_title(result.rows[0].experiment)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
