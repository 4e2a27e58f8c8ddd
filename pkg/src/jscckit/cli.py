"""Command-line entry point: training, encoding, decoding, sweeps, reports.

The encode / network / decode stages communicate only through manifest and
mask-record files, so the network side can run as a separate process (or a
different language) without touching codec internals.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .codec import TrainedModel, assemble_decoder_input, decode, load_model, quantize, save_model
from .data import DatasetSpec, load_dataset, sample_ids, to_float
from .errors import DependencyError, InvalidConfigError, JsccError
from .evaluate import (
    emit_report,
    sweep_congestion,
    sweep_mismatch,
    sweep_subset_decoding,
    sweep_uep,
)
from .manifest import (
    HEADER_SUFFIX,
    MASK_SUFFIX,
    MaskRecord,
    apply_mask_record,
    read_manifest,
    read_mask_record,
    write_manifest,
)
from .training import (
    train_genie_baseline,
    train_model,
    train_plain_compression,
    train_successive_refinement,
    load_sr_chain,
    save_sr_chain,
    write_loss_log,
)

SWEEP_KINDS = ("subset", "mismatch", "congestion", "uep")


def _require_file(path, what: str):
    if not os.path.exists(path):
        raise DependencyError(f"missing {what}: {path}")
    return path


def _load_checkpoint(path) -> TrainedModel:
    return load_model(_require_file(path, "checkpoint"))


def _echo(msg: str):
    print(msg, flush=True)


# --------------------------------------------------------------------------
# train / train-baselines
# --------------------------------------------------------------------------


def cmd_train(args) -> int:
    doc = cfgmod.load_yaml(args.config)
    snap = cfgmod.resolve_train_config(doc, smoke=args.smoke, seed_override=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.write_snapshot(out, snap)
    tc = cfgmod.train_config_from_resolved(snap)
    t0 = time.time()
    model = train_model(tc, progress=lambda e, l: _echo(f"epoch {e}: mse {l:.6f}"))
    save_model(model, out / "model.ckpt")
    write_loss_log(out / "loss_log.csv", model.training_meta["epoch_loss"])
    _echo(f"trained {snap['run_name']} in {time.time() - t0:.1f}s -> {out / 'model.ckpt'}")
    return 0


def cmd_train_baselines(args) -> int:
    doc = cfgmod.load_yaml(args.config)
    snap = cfgmod.resolve_train_config(doc, smoke=args.smoke, seed_override=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.write_snapshot(out, snap)
    tc = cfgmod.train_config_from_resolved(snap)
    which = [w.strip() for w in args.which.split(",") if w.strip()]
    bad = set(which) - {"genie", "plain", "sr"}
    if bad:
        raise InvalidConfigError(f"unknown baselines {sorted(bad)}")

    if "plain" in which:
        plain_dir = out / "plain"
        plain_dir.mkdir(exist_ok=True)
        model = train_plain_compression(tc)
        save_model(model, plain_dir / "model.ckpt")
        write_loss_log(plain_dir / "loss_log.csv", model.training_meta["epoch_loss"])
        _echo("plain compression baseline done")
    if "genie" in which:
        for kept in range(1, tc.shape.k + 1):
            gdir = out / f"genie_k{kept}"
            gdir.mkdir(exist_ok=True)
            model = train_genie_baseline(tc, kept)
            save_model(model, gdir / "model.ckpt")
            write_loss_log(gdir / "loss_log.csv", model.training_meta["epoch_loss"])
            _echo(f"genie baseline for {kept} blocks done")
    if "sr" in which:
        chain = train_successive_refinement(
            tc, progress=lambda s, e, l: _echo(f"sr stage {s} epoch {e}: mse {l:.6f}")
        )
        save_sr_chain(chain, out / "sr_chain")
        _echo("successive refinement chain done")
    return 0


# --------------------------------------------------------------------------
# encode / decode
# --------------------------------------------------------------------------


def cmd_encode(args) -> int:
    model = _load_checkpoint(args.checkpoint)
    name = args.dataset or model.training_meta.get("dataset", {}).get("name", "auto32")
    spec = DatasetSpec(name=name, split=args.split, subset=args.count)
    images = to_float(load_dataset(spec))
    ids = sample_ids(spec, len(images))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    k = model.shape.k
    from .codec import encode as encode_op, partition_latent

    for sid, x in zip(ids, images):
        z = encode_op(model, x)
        qblocks = [quantize(b, index=i + 1) for i, b in enumerate(partition_latent(z, k))]
        write_manifest(qblocks, sid, out / sid, profile_hint=model.profile.eps)
    cfgmod.write_snapshot(
        out,
        {
            "command": "encode",
            "checkpoint": str(args.checkpoint),
            "dataset": spec.to_dict(),
            "count": len(images),
            "seed": model.seed,
        },
        name="encode_config.yaml",
    )
    _echo(f"wrote {len(images)} manifests to {out}")
    return 0


def _all_true_record(sample_id: str, k: int) -> MaskRecord:
    return MaskRecord(
        sample_id=sample_id, bits=(True,) * k, attempts=(1,) * k, policy_id="none", seed=0
    )


def cmd_decode(args) -> int:
    model = _load_checkpoint(args.checkpoint)
    headers = sorted(glob.glob(os.path.join(args.manifests, f"*{HEADER_SUFFIX}")))
    if not headers:
        raise DependencyError(f"no manifests found under {args.manifests}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = 0
    for header in headers:
        manifest, payload = read_manifest(header)
        if tuple(manifest.block_dims) != model.shape.block_dims or manifest.k != model.shape.k:
            raise InvalidConfigError(
                f"{header}: blocks {manifest.k}x{manifest.block_dims} do not match "
                f"model {model.shape.k}x{model.shape.block_dims}"
            )
        if args.masks:
            rec = read_mask_record(
                _require_file(
                    os.path.join(args.masks, manifest.sample_id + MASK_SUFFIX), "mask record"
                )
            )
        else:
            rec = _all_true_record(manifest.sample_id, manifest.k)
        blocks = apply_mask_record(manifest, payload, rec)
        if args.fill == "mean":
            received = [b.values for b in blocks if b.status == "received"]
            if not received:
                from .errors import UndefinedFillError

                raise UndefinedFillError(f"{manifest.sample_id}: no blocks to average")
            mean_values = np.mean(received, axis=0).astype(np.float32)
            from .codec import RECEIVED, Block

            blocks = [
                b if b.status == "received" else Block(mean_values.copy(), status=RECEIVED)
                for b in blocks
            ]
        y = decode(model, assemble_decoder_input(blocks, model.shape.k))
        np.save(out / f"{manifest.sample_id}.recon.npy", y)
        n += 1
    cfgmod.write_snapshot(
        out,
        {
            "command": "decode",
            "checkpoint": str(args.checkpoint),
            "manifests": str(args.manifests),
            "masks": str(args.masks) if args.masks else None,
            "fill": args.fill,
            "count": n,
        },
        name="decode_config.yaml",
    )
    _echo(f"decoded {n} samples to {out}")
    return 0


# --------------------------------------------------------------------------
# sweeps / report
# --------------------------------------------------------------------------


def _sweep_test_images(doc: dict, smoke: bool) -> tuple[np.ndarray, dict]:
    from .data import resolve_dataset_name

    name = resolve_dataset_name(cfgmod._get(doc, "dataset.name", str, "auto32"))
    subset = cfgmod._get(doc, "dataset.test_subset", int, 1000)
    if smoke:
        subset = min(subset, cfgmod.SMOKE_TEST_CAP)
    spec = DatasetSpec(name=name, split="test", subset=subset)
    return to_float(load_dataset(spec)), spec.to_dict()


def cmd_sweep(args) -> int:
    doc = cfgmod.load_yaml(args.config)
    seed = args.seed if args.seed is not None else cfgmod._get(doc, "seed", int, 0)
    trials = cfgmod._get(doc, "trials", int, 4)
    xs, dataset_snap = _sweep_test_images(doc, args.smoke)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    kind = args.kind
    if kind == "subset":
        ckpts = cfgmod._get(doc, "checkpoints", dict, required=True)
        models = {mid: _load_checkpoint(p) for mid, p in sorted(ckpts.items())}
        genie_doc = cfgmod._get(doc, "genie_checkpoints", dict, {})
        genies = {int(kk): _load_checkpoint(p) for kk, p in genie_doc.items()}
        plain = cfgmod._get(doc, "plain_checkpoint", str)
        plain_model = _load_checkpoint(plain) if plain else None
        e_values = cfgmod._get(doc, "e_values", list, list(range(0, 8)))
        result = sweep_subset_decoding(
            models, e_values, trials=trials, seed=seed, test_images=xs,
            genie_models=genies or None, plain_model=plain_model,
        )
    elif kind == "mismatch":
        ckpts = cfgmod._get(doc, "checkpoints", dict, required=True)
        models = {mid: _load_checkpoint(p) for mid, p in sorted(ckpts.items())}
        grid = cfgmod._get(doc, "eps_test_grid", list, required=True)
        matched = {
            mid: float(m.profile.eps[0]) for mid, m in models.items() if m.profile.is_uniform()
        }
        result = sweep_mismatch(
            models, [float(e) for e in grid], trials=trials, seed=seed,
            test_images=xs, matched=matched,
        )
    elif kind == "congestion":
        shallow = _load_checkpoint(cfgmod._get(doc, "shallow_checkpoint", str, required=True))
        steep = _load_checkpoint(cfgmod._get(doc, "steep_checkpoint", str, required=True))
        sr_dir = cfgmod._get(doc, "sr_chain", str, required=True)
        _require_file(os.path.join(sr_dir, "chain.json"), "SR chain")
        chain = load_sr_chain(sr_dir)
        per_block_eps = cfgmod._get(doc, "per_block_eps", float, required=True)
        m_values = cfgmod._get(doc, "m_values", list, list(range(1, 9)))
        result = sweep_congestion(
            shallow, steep, chain, per_block_eps, m_values,
            trials=trials, seed=seed, test_images=xs,
        )
    elif kind == "uep":
        model = _load_checkpoint(cfgmod._get(doc, "checkpoint", str, required=True))
        a_values = cfgmod._get(doc, "a_values", list, [0.5, 1, 2, 3, 4, 5])
        result = sweep_uep(
            model, [float(a) for a in a_values], trials=trials, seed=seed, test_images=xs
        )
    else:  # pragma: no cover - argparse restricts choices
        raise InvalidConfigError(f"unknown sweep kind {kind}")

    paths = emit_report(result, out)
    cfgmod.write_snapshot(
        out,
        {
            "command": f"sweep {kind}",
            "config": {k: v for k, v in doc.items()},
            "dataset": dataset_snap,
            "seed": seed,
            "trials": trials,
        },
        name=f"sweep_{kind}_config.yaml",
    )
    for p in paths:
        _echo(f"wrote {p}")
    return 0


def cmd_report(args) -> int:
    import csv as csvmod

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    csv_paths = sorted(glob.glob(os.path.join(args.runs, "**", "*.csv"), recursive=True))
    csv_paths = [p for p in csv_paths if not p.endswith("loss_log.csv")]
    if not csv_paths:
        raise DependencyError(f"no sweep CSVs found under {args.runs}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ncols = min(2, len(csv_paths))
    nrows = (len(csv_paths) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(6.5 * ncols, 4.5 * nrows), squeeze=False)
    for ax in axes.flat[len(csv_paths):]:
        ax.axis("off")
    for ax, path in zip(axes.flat, csv_paths):
        series: dict[str, list[tuple[float, float]]] = {}
        exp = ""
        with open(path, encoding="utf-8") as f:
            for row in csvmod.DictReader(f):
                exp = row["experiment"]
                series.setdefault(row["model"], []).append(
                    (float(row["variable"]), float(row["psnr_db"]))
                )
        for model in sorted(series):
            pts = sorted(series[model])
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=model)
        ax.set_title(exp)
        ax.set_ylabel("mean PSNR (dB)")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
    fig.tight_layout()
    combined = out / "report.png"
    fig.savefig(combined, dpi=120)
    plt.close(fig)
    _echo(f"wrote {combined}")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jscckit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train an erasure-aware codec")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--smoke", action="store_true", help="tiny dataset and epoch caps")
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("train-baselines", help="train genie / plain / SR baselines")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--which", default="genie,plain,sr")
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--smoke", action="store_true")
    b.set_defaults(func=cmd_train_baselines)

    e = sub.add_parser("encode", help="encode a dataset slice into block manifests")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--split", default="test", choices=["train", "test"])
    e.add_argument("--count", type=int, default=16)
    e.add_argument("--dataset", default=None)
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="decode manifests given mask records")
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--manifests", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--masks", default=None, help="mask-record dir; defaults to all-received")
    d.add_argument("--fill", default="sentinel", choices=["sentinel", "mean"])
    d.set_defaults(func=cmd_decode)

    s = sub.add_parser("sweep", help="run an experiment sweep")
    s.add_argument("kind", choices=SWEEP_KINDS)
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--smoke", action="store_true")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="combined figure from existing sweep CSVs")
    r.add_argument("--runs", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except JsccError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
