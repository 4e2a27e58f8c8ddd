"""Declarative experiment configs: parsing, validation, smoke mode, snapshots.

Validation errors always name the offending field path.  Resolution turns a
config into a fully concrete dict (profile expanded to a vector, dataset
name made concrete, thread count pinned) which is what gets snapshotted next
to every run's outputs; re-running from a snapshot reproduces the artifacts
byte for byte.
"""

from __future__ import annotations

import os
from dataclasses import replace

import yaml

from .channel import ErasureProfile, profile_preset
from .codec import ShapeConfig
from .data import DatasetSpec, resolve_dataset_name
from .errors import InvalidConfigError
from .training import TrainConfig, resolve_threads

SMOKE_TRAIN_CAP = 1_000
SMOKE_TEST_CAP = 200
SMOKE_EPOCH_CAP = 5


def load_yaml(path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            doc = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise InvalidConfigError(f"{path}: not valid YAML ({exc})") from exc
    if not isinstance(doc, dict):
        raise InvalidConfigError(f"{path}: config must be a mapping")
    return doc


def _get(doc: dict, path: str, typ, default=None, required=False):
    node = doc
    parts = path.split(".")
    for i, p in enumerate(parts):
        if not isinstance(node, dict) or p not in node:
            if required:
                raise InvalidConfigError(f"{path}: required field is missing")
            return default
        node = node[p]
    if typ is float and isinstance(node, int) and not isinstance(node, bool):
        node = float(node)
    if typ is not None and not isinstance(node, typ):
        raise InvalidConfigError(f"{path}: expected {typ.__name__}, got {type(node).__name__}")
    return node


def _positive(value, path: str):
    if value is not None and value <= 0:
        raise InvalidConfigError(f"{path}: must be positive, got {value}")
    return value


def resolve_profile(raw, k: int, path: str = "profile") -> ErasureProfile:
    if isinstance(raw, str):
        return profile_preset(raw, k)
    if isinstance(raw, (list, tuple)):
        if len(raw) != k:
            raise InvalidConfigError(f"{path}: has {len(raw)} entries, shape.k = {k}")
        try:
            return ErasureProfile(tuple(float(v) for v in raw))
        except (TypeError, ValueError) as exc:
            raise InvalidConfigError(f"{path}: entries must be numbers") from exc
    raise InvalidConfigError(f"{path}: expected preset name or list of {k} numbers")


def resolve_train_config(
    doc: dict, *, smoke: bool = False, seed_override: int | None = None
) -> dict:
    """Validate a raw train config and return the fully concrete snapshot dict."""
    shape = ShapeConfig(
        k=_get(doc, "shape.k", int, 8),
        alpha=_get(doc, "shape.alpha", int, 2),
        beta=_get(doc, "shape.beta", int, 8),
        gamma=_get(doc, "shape.gamma", int, 8),
        sample_shape=tuple(_get(doc, "shape.sample", list, [3, 32, 32])),
    )
    profile = resolve_profile(doc.get("profile", "uniform:0"), shape.k)

    lr = _positive(_get(doc, "optimizer.learning_rate", float, 1e-4), "optimizer.learning_rate")
    epochs = _positive(_get(doc, "optimizer.epochs", int, 20), "optimizer.epochs")
    batch = _positive(_get(doc, "optimizer.batch_size", int, 128), "optimizer.batch_size")
    train_subset = _positive(_get(doc, "dataset.train_subset", int), "dataset.train_subset")
    test_subset = _positive(_get(doc, "dataset.test_subset", int), "dataset.test_subset")
    if smoke:
        train_subset = min(train_subset or SMOKE_TRAIN_CAP, SMOKE_TRAIN_CAP)
        test_subset = min(test_subset or SMOKE_TEST_CAP, SMOKE_TEST_CAP)
        epochs = min(epochs, SMOKE_EPOCH_CAP)

    seed = seed_override if seed_override is not None else _get(doc, "seed", int, 0)
    hidden = _get(doc, "hidden", list, [32, 64])
    if len(hidden) != 2 or any(not isinstance(h, int) or h < 1 for h in hidden):
        raise InvalidConfigError("hidden: expected two positive channel widths")
    name = resolve_dataset_name(_get(doc, "dataset.name", str, "auto32"))
    threads = resolve_threads(_get(doc, "torch_threads", int))

    return {
        "run_name": _get(doc, "run_name", str, "run"),
        "dataset": {"name": name, "train_subset": train_subset, "test_subset": test_subset},
        "shape": shape.to_dict(),
        "profile": list(profile.eps),
        "optimizer": {"learning_rate": lr, "epochs": epochs, "batch_size": batch},
        "hidden": list(hidden),
        "seed": seed,
        "torch_threads": threads,
        "smoke": False,  # snapshots are always concrete
    }


def train_config_from_resolved(snap: dict) -> TrainConfig:
    shape = ShapeConfig.from_dict(snap["shape"])
    return TrainConfig(
        profile=ErasureProfile(tuple(snap["profile"])),
        epochs=snap["optimizer"]["epochs"],
        learning_rate=snap["optimizer"]["learning_rate"],
        batch_size=snap["optimizer"]["batch_size"],
        dataset=DatasetSpec(
            name=snap["dataset"]["name"],
            split="train",
            subset=snap["dataset"]["train_subset"],
        ),
        seed=snap["seed"],
        shape=shape,
        hidden=tuple(snap["hidden"]),
        torch_threads=snap["torch_threads"],
    )


def test_spec_from_resolved(snap: dict) -> DatasetSpec:
    return DatasetSpec(
        name=snap["dataset"]["name"],
        split="test",
        subset=snap["dataset"]["test_subset"],
    )


def genie_config(base: TrainConfig, blocks_kept: int) -> TrainConfig:
    from .channel import uniform_profile

    shape = replace(base.shape, k=blocks_kept)
    return replace(base, shape=shape, profile=uniform_profile(blocks_kept, 0.0))


def write_snapshot(out_dir, snap: dict, name: str = "resolved_config.yaml"):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(snap, f, sort_keys=True, default_flow_style=False)
    return path
