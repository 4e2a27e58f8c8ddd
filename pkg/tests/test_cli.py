import numpy as np
import pytest
import yaml

from conftest import make_untrained
from jscckit.channel import uniform_profile
from jscckit.cli import main
from jscckit.codec import (
    assemble_decoder_input,
    decode,
    dequantize,
    encode,
    load_model,
    partition_latent,
    quantize,
    save_model,
)
from jscckit.config import (
    SMOKE_EPOCH_CAP,
    SMOKE_TEST_CAP,
    SMOKE_TRAIN_CAP,
    resolve_train_config,
    train_config_from_resolved,
)
from jscckit.data import DatasetSpec, load_dataset, sample_ids, to_float
from jscckit.errors import InvalidConfigError


def write_cfg(path, **overrides):
    doc = {
        "run_name": "unit",
        "dataset": {"name": "patches32", "train_subset": 96, "test_subset": 8},
        "profile": "uniform:0.1",
        "optimizer": {"learning_rate": 1.0e-3, "epochs": 1, "batch_size": 64},
        "hidden": [8, 16],
        "seed": 5,
        "torch_threads": 2,
    }
    doc.update(overrides)
    with open(path, "w") as f:
        yaml.safe_dump(doc, f)
    return path


class TestConfigResolution:
    def test_smoke_caps(self):
        doc = {
            "dataset": {"train_subset": 50_000, "test_subset": 10_000},
            "optimizer": {"epochs": 200},
        }
        snap = resolve_train_config(doc, smoke=True)
        assert snap["dataset"]["train_subset"] == SMOKE_TRAIN_CAP == 1000
        assert snap["dataset"]["test_subset"] == SMOKE_TEST_CAP == 200
        assert snap["optimizer"]["epochs"] == SMOKE_EPOCH_CAP == 5

    def test_field_path_in_errors(self):
        with pytest.raises(InvalidConfigError, match="optimizer.learning_rate"):
            resolve_train_config({"optimizer": {"learning_rate": -1}})
        with pytest.raises(InvalidConfigError, match="profile"):
            resolve_train_config({"profile": [0.1, 0.2]})
        with pytest.raises(InvalidConfigError, match="optimizer.epochs"):
            resolve_train_config({"optimizer": {"epochs": "many"}})

    def test_seed_override(self):
        snap = resolve_train_config({"seed": 1}, seed_override=99)
        assert snap["seed"] == 99

    def test_resolved_round_trips_to_train_config(self):
        snap = resolve_train_config({"profile": "shallow"})
        tc = train_config_from_resolved(snap)
        assert tc.profile.eps == (0.0, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14)


class TestTrainCommand:
    def test_train_writes_artifacts_and_is_reproducible(self, tmp_path):
        cfg = write_cfg(tmp_path / "cfg.yaml")
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        assert main(["train", "--config", str(cfg), "--out", str(out1)]) == 0
        # re-run from the written snapshot: byte-identical artifacts
        assert main(
            ["train", "--config", str(out1 / "resolved_config.yaml"), "--out", str(out2)]
        ) == 0
        assert (out1 / "model.ckpt").read_bytes() == (out2 / "model.ckpt").read_bytes()
        assert (out1 / "loss_log.csv").read_bytes() == (out2 / "loss_log.csv").read_bytes()

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path / "bad.yaml", optimizer={"learning_rate": -5})
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
        assert "optimizer.learning_rate" in capsys.readouterr().err


class TestEncodeDecodeCommands:
    @pytest.fixture()
    def ckpt(self, tmp_path):
        model = make_untrained(seed=21)
        path = tmp_path / "model.ckpt"
        # tag the checkpoint with a dataset so encode picks it up
        model.training_meta["dataset"] = {"name": "patches32"}
        save_model(model, path)
        return path

    def test_encode_then_decode_bit_exact(self, tmp_path, ckpt):
        man_dir = tmp_path / "manifests"
        out_dir = tmp_path / "recon"
        assert main(
            ["encode", "--checkpoint", str(ckpt), "--out", str(man_dir), "--count", "3"]
        ) == 0
        headers = sorted(man_dir.glob("*.manifest.json"))
        assert len(headers) == 3
        assert main(
            [
                "decode", "--checkpoint", str(ckpt), "--manifests", str(man_dir),
                "--out", str(out_dir),
            ]
        ) == 0

        model = load_model(ckpt)
        spec = DatasetSpec(name="patches32", split="test", subset=3)
        xs = to_float(load_dataset(spec))
        ids = sample_ids(spec, 3)
        for sid, xi in zip(ids, xs):
            z = encode(model, xi)
            blocks = [
                dequantize(quantize(b, index=i + 1))
                for i, b in enumerate(partition_latent(z, 8))
            ]
            expected = decode(model, assemble_decoder_input(blocks, 8))
            got = np.load(out_dir / f"{sid}.recon.npy")
            assert np.array_equal(got, expected)

    def test_decode_with_mask_records(self, tmp_path, ckpt):
        from jscckit.manifest import MaskRecord, write_mask_record

        man_dir = tmp_path / "manifests"
        mask_dir = tmp_path / "masks"
        out_dir = tmp_path / "recon"
        main(["encode", "--checkpoint", str(ckpt), "--out", str(man_dir), "--count", "2"])
        ids = sample_ids(DatasetSpec(name="patches32", split="test", subset=2), 2)
        for sid in ids:
            bits = tuple(i != 1 for i in range(8))
            rec = MaskRecord(sid, bits, tuple(1 if b else 0 for b in bits), "congestion", 3)
            write_mask_record(rec, mask_dir / f"{sid}.mask.json")
        assert main(
            [
                "decode", "--checkpoint", str(ckpt), "--manifests", str(man_dir),
                "--masks", str(mask_dir), "--out", str(out_dir),
            ]
        ) == 0
        assert len(list(out_dir.glob("*.recon.npy"))) == 2

    def test_missing_checkpoint_is_dependency_error(self, tmp_path, capsys):
        rc = main(
            ["encode", "--checkpoint", str(tmp_path / "none.ckpt"), "--out", str(tmp_path)]
        )
        assert rc == 1
        assert "missing checkpoint" in capsys.readouterr().err


class TestSweepCommand:
    def test_mismatch_cardinality_44_rows(self, tmp_path):
        ckpts = {}
        for i, eps in enumerate((0.0, 0.1, 0.2, 0.3)):
            m = make_untrained(seed=30 + i, profile=uniform_profile(8, eps))
            p = tmp_path / f"m{i}.ckpt"
            save_model(m, p)
            ckpts[f"eps{eps}"] = str(p)
        grid = [round(0.05 * i, 2) for i in range(11)]
        cfg = tmp_path / "sweep.yaml"
        with open(cfg, "w") as f:
            yaml.safe_dump(
                {
                    "dataset": {"name": "patches32", "test_subset": 6},
                    "seed": 3,
                    "trials": 1,
                    "checkpoints": ckpts,
                    "eps_test_grid": grid,
                },
                f,
            )
        out = tmp_path / "sweep_out"
        assert main(["sweep", "mismatch", "--config", str(cfg), "--out", str(out)]) == 0
        csvs = list(out.glob("mismatch_*.csv"))
        assert len(csvs) == 1
        lines = csvs[0].read_text().splitlines()
        assert len(lines) == 1 + 4 * 11  # header + 44 rows
