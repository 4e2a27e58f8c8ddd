"""Pilot: pick the desk-scale learning rate and check Fig-5-style separations."""
import sys
import time

import numpy as np

from jscckit.channel import uniform_profile
from jscckit.codec import ShapeConfig
from jscckit.data import DatasetSpec, load_dataset, to_float
from jscckit.evaluate import full_reception_psnr, sweep_mismatch
from jscckit.training import TrainConfig, train_model

TRAIN_N, TEST_N, EPOCHS, BATCH, SEED = 5000, 1000, 20, 128, 7


def cfg(eps, lr):
    return TrainConfig(
        profile=uniform_profile(8, eps),
        epochs=EPOCHS,
        learning_rate=lr,
        batch_size=BATCH,
        dataset=DatasetSpec(name="patches32", split="train", subset=TRAIN_N),
        seed=SEED,
        shape=ShapeConfig(),
        hidden=(32, 64),
        torch_threads=2,
    )


def run(lr):
    xs = to_float(load_dataset(DatasetSpec(name="patches32", split="test", subset=TEST_N)))
    models = {}
    for eps in (0.0, 0.1, 0.3):
        t0 = time.time()
        m = train_model(cfg(eps, lr))
        losses = m.training_meta["epoch_loss"]
        print(
            f"lr={lr} eps={eps}: {time.time()-t0:.0f}s loss {losses[0]:.4f}->{losses[-1]:.4f} "
            f"full-psnr {full_reception_psnr(m, xs):.2f}",
            flush=True,
        )
        models[f"eps{eps}"] = m
    res = sweep_mismatch(models, [0.0, 0.1, 0.14, 0.3, 0.5], trials=4, seed=11, test_images=xs)
    for r in res.rows:
        print(f"  {r.model:8s} eps_test={r.variable:<5g} psnr={r.psnr_db:.2f}", flush=True)


if __name__ == "__main__":
    for lr in [float(a) for a in sys.argv[1:]] or [1e-3]:
        run(lr)
