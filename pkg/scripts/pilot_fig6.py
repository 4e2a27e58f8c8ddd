"""Pilot: congestion experiment orderings (shallow/steep vs successive refinement)."""
import sys
import time

import numpy as np

from jscckit.channel import ErasureProfile, profile_preset, uniform_profile
from jscckit.codec import ShapeConfig
from jscckit.data import DatasetSpec, load_dataset, to_float
from jscckit.evaluate import psnr_batch, quantize_roundtrip, sweep_congestion, sweep_uep
from jscckit.training import (
    TrainConfig,
    sr_decode_prefix,
    sr_encode_blocks,
    train_model,
    train_successive_refinement,
)

TRAIN_N, TEST_N, EPOCHS, BATCH, SEED, LR = 5000, 1000, 20, 128, 7, 1e-3


def cfg(profile):
    return TrainConfig(
        profile=profile,
        epochs=EPOCHS,
        learning_rate=LR,
        batch_size=BATCH,
        dataset=DatasetSpec(name="patches32", split="train", subset=TRAIN_N),
        seed=SEED,
        shape=ShapeConfig(),
        hidden=(32, 64),
        torch_threads=2,
    )


def main():
    xs = to_float(load_dataset(DatasetSpec(name="patches32", split="test", subset=TEST_N)))
    shallow_eps = profile_preset("shallow")
    steep_eps = profile_preset("steep")
    t0 = time.time()
    shallow = train_model(cfg(shallow_eps))
    print(f"shallow trained {time.time()-t0:.0f}s", flush=True)
    steep = train_model(cfg(steep_eps))
    print(f"steep trained {time.time()-t0:.0f}s", flush=True)
    chain = train_successive_refinement(cfg(uniform_profile(8, 0.0)))
    print(f"sr trained {time.time()-t0:.0f}s", flush=True)

    # SR clean refinement curve
    blocks = quantize_roundtrip(sr_encode_blocks(chain, xs))
    for j in range(1, 9):
        db = psnr_batch(xs, sr_decode_prefix(chain, blocks, j)).mean()
        print(f"SR clean stage {j}: {db:.2f} dB", flush=True)

    for eps in (0.01, 0.1):
        res = sweep_congestion(shallow, steep, chain, eps, list(range(1, 9)),
                               trials=4, seed=11, test_images=xs)
        print(f"\n== residual {eps} ==")
        table = {}
        for r in res.rows:
            table.setdefault(int(r.variable), {})[r.model] = r.psnr_db
        for m in sorted(table):
            row = table[m]
            flag = "OK " if row["shallow"] > row["sr"] else "BAD"
            print(f" m={m}: shallow={row['shallow']:6.2f} steep={row['steep']:6.2f} "
                  f"sr={row['sr']:6.2f}  {flag}", flush=True)

    res = sweep_uep(shallow, [0.5, 1, 2, 3, 4, 5], trials=4, seed=13, test_images=xs)
    print("\n== uep (shallow profile) ==")
    for r in res.rows:
        print(f" a={r.variable:g}: {r.psnr_db:.2f}", flush=True)


if __name__ == "__main__":
    main()
