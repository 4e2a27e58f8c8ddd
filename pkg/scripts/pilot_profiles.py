"""Pilot: choose the increasing-profile presets against the warm-start SR chain."""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
import test_acceptance as acc  # reuses the acceptance cache and protocol

import numpy as np
from jscckit.channel import ErasureProfile, tail_keep_mask
from jscckit.data import DatasetSpec, load_dataset, to_float
from jscckit.evaluate import (
    _encode_quantized, _sentinel_fill, psnr_batch, quantize_roundtrip,
    sweep_congestion, decode_batch,
)
from jscckit.training import sr_decode_prefix, sr_encode_blocks

CANDS = {
    "candA": (0.0, 0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70),
    "candB": (0.0, 0.20, 0.33, 0.45, 0.56, 0.66, 0.75, 0.84),
    "candC": (0.0, 0.35, 0.45, 0.55, 0.63, 0.70, 0.77, 0.84),
    "candD": (0.0, 0.50, 0.57, 0.64, 0.70, 0.76, 0.82, 0.88),
    "candE": (0.0, 0.65, 0.70, 0.75, 0.79, 0.83, 0.87, 0.91),
}

def prefix_curve(model, xs):
    zq = _encode_quantized(model, xs)
    out = []
    for m in range(1, 9):
        keep = np.tile(np.array(tail_keep_mask(8, m).bits), (len(xs), 1))
        zf = _sentinel_fill(zq, keep, model.shape.alpha)
        out.append(float(psnr_batch(xs, decode_batch(model, zf)).mean()))
    return out

def main():
    xs = to_float(load_dataset(DatasetSpec(name=acc.DATASET, split="test", subset=acc.TEST_N)))
    chain = acc._sr_chain(acc._cfg(acc.uniform_profile(8, 0.0)))
    blocks = quantize_roundtrip(sr_encode_blocks(chain, xs))
    sr_clean = [float(psnr_batch(xs, sr_decode_prefix(chain, blocks, j)).mean()) for j in range(1, 9)]
    print("SR clean stages:", " ".join(f"{v:.2f}" for v in sr_clean), flush=True)

    for name, eps in CANDS.items():
        model = acc._trained(name, acc._cfg(ErasureProfile(eps)))
        curve = prefix_curve(model, xs)
        print(f"{name} prefix curve:", " ".join(f"{v:.2f}" for v in curve), flush=True)
        for r in (0.1, 0.01):
            res = sweep_congestion(model, model, chain, r, list(range(1, 9)),
                                   trials=4, seed=13, test_images=xs)
            sh = {int(row.variable): row.psnr_db for row in res.rows if row.model == "shallow"}
            sr = {int(row.variable): row.psnr_db for row in res.rows if row.model == "sr"}
            margins = [sh[m] - sr[m] for m in range(1, 9)]
            print(f"{name} r={r}: margins " + " ".join(f"{v:+.2f}" for v in margins), flush=True)

if __name__ == "__main__":
    main()
