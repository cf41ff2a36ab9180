"""CLI verbs, exit codes, config-file strictness, and output artifacts."""

import hashlib
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from biastune.cli import main
from biastune.config import ConfigError, load_run_config


def _tree_digest(root: Path) -> dict:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


TINY_CONFIG = """
[model]
image_size = 16
patch_size = 4
embed_dim = 8
depth = 1
num_heads = 2
mlp_ratio = 2.0
text_dim = 6
prompt_dim = 8
decoder_depth = 1
class_vocab = disk, square, triangle, cross
mask_threshold = 0.5

[train]
batch_size = 4
learning_rate = 0.001
max_steps = 6
seed = 0
alpha = 0.75
gamma = 3.0
augment = false

[data]
root = {root}
split = train

[run]
seed = 0
out = {out}
"""


@pytest.fixture
def workspace(tmp_path):
    data = tmp_path / "data"
    out = tmp_path / "run"
    rc = main(["synth", "--out", str(data), "--seed", "3", "--n", "4",
               "--image-size", "16"])
    assert rc == 0
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(TINY_CONFIG.format(root=data, out=out))
    return tmp_path, data, out, cfg_path


class TestSynth:
    def test_twice_identical_trees(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            rc = main(["synth", "--out", str(out), "--seed", "7", "--n", "3",
                       "--image-size", "32"])
            assert rc == 0
        assert _tree_digest(a) == _tree_digest(b)

    def test_missing_out_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--n", "3"])
        assert exc.value.code == 2

    def test_zero_images_is_runtime_error(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path / "x"), "--n", "0"]) == 1

    def test_spatial_vocabulary(self, tmp_path):
        rc = main(["synth", "--out", str(tmp_path / "sp"), "--seed", "1", "--n", "2",
                   "--spatial", "--image-size", "32"])
        assert rc == 0
        manifest = (tmp_path / "sp/train/manifest.json").read_text()
        assert "left disk" in manifest and "right disk" in manifest


class TestTrain:
    def test_outputs_written(self, workspace):
        _, _, out, cfg_path = workspace
        assert main(["train", "--config", str(cfg_path)]) == 0
        assert (out / "checkpoint.btck").is_file()
        loss_csv = (out / "loss.csv").read_text().splitlines()
        assert loss_csv[0] == "step,loss"
        assert len(loss_csv) == 1 + 6
        assert (out / "partition.json").is_file()

    def test_same_seed_byte_identical(self, workspace):
        tmp_path, _, _, cfg_path = workspace
        outs = [tmp_path / "r1", tmp_path / "r2"]
        for out in outs:
            assert main(["train", "--config", str(cfg_path), "--out", str(out)]) == 0
        a = (outs[0] / "checkpoint.btck").read_bytes()
        b = (outs[1] / "checkpoint.btck").read_bytes()
        assert a == b
        assert (outs[0] / "loss.csv").read_bytes() == (outs[1] / "loss.csv").read_bytes()

    def test_missing_dataset_fails(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(TINY_CONFIG.format(root=tmp_path / "nowhere", out=tmp_path / "o"))
        assert main(["train", "--config", str(cfg_path)]) == 1


class TestEvalPredict:
    def test_eval_writes_report(self, workspace):
        _, _, out, cfg_path = workspace
        assert main(["train", "--config", str(cfg_path)]) == 0
        assert main(["eval", "--config", str(cfg_path),
                     "--checkpoint", str(out / "checkpoint.btck")]) == 0
        report = (out / "report.csv").read_text().splitlines()
        assert report[0] == "label,dsc,iou"
        for line in report[1:]:
            _, d, j = line.split(",")
            assert 0.0 <= float(d) <= 1.0 and 0.0 <= float(j) <= 1.0

    def test_eval_matches_library_call(self, workspace):
        from biastune.checkpoint import checkpoint_model_config, load_delta_checkpoint
        from biastune.data import load_dataset
        from biastune.eval import evaluate
        from biastune.model import PromptableSegmenter

        _, data, out, cfg_path = workspace
        assert main(["train", "--config", str(cfg_path)]) == 0
        ckpt = out / "checkpoint.btck"
        assert main(["eval", "--config", str(cfg_path), "--checkpoint", str(ckpt)]) == 0

        cfg, seed = checkpoint_model_config(ckpt)
        model = PromptableSegmenter(cfg, init_seed=seed)
        load_delta_checkpoint(ckpt, model)
        manifest = load_dataset(data, "train", cfg.class_vocab)
        report = evaluate(model, manifest, cfg.class_vocab, cfg.mask_threshold)
        assert (out / "report.csv").read_text() == report.to_csv()

    def test_predict_writes_pngs(self, workspace):
        tmp_path, data, out, cfg_path = workspace
        assert main(["train", "--config", str(cfg_path)]) == 0
        image = next((data / "train/images").glob("*.png"))
        pred_dir = tmp_path / "pred"
        rc = main(["predict", "--checkpoint", str(out / "checkpoint.btck"),
                   "--image", str(image), "--prompt", "disk", "--out", str(pred_dir)])
        assert rc == 0
        mask = np.asarray(Image.open(pred_dir / "mask.png"))
        assert mask.shape == (16, 16)
        assert np.isin(mask, (0, 255)).all()
        overlay = np.asarray(Image.open(pred_dir / "overlay.png"))
        assert overlay.shape == (16, 16, 3)

    def test_predict_bad_image_path(self, workspace):
        tmp_path, _, out, cfg_path = workspace
        assert main(["train", "--config", str(cfg_path)]) == 0
        rc = main(["predict", "--checkpoint", str(out / "checkpoint.btck"),
                   "--image", str(tmp_path / "missing.png"), "--prompt", "disk",
                   "--out", str(tmp_path / "p")])
        assert rc == 1


class TestBudget:
    def test_toy_preset_prints_partition(self, capsys):
        assert main(["budget", "--preset", "toy"]) == 0
        out = capsys.readouterr().out
        assert "trainable_ratio" in out
        assert "shift-bias" in out

    def test_malformed_config_exits_two(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[model]\nimage_size = 16\nnot_a_key = 3\n")
        assert main(["budget", "--config", str(cfg)]) == 2


class TestRunConfigFile:
    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[model]\nimage_sise = 16\n")
        with pytest.raises(ConfigError, match="image_sise"):
            load_run_config(cfg)

    def test_unknown_section_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[modell]\nimage_size = 16\n")
        with pytest.raises(ConfigError, match="modell"):
            load_run_config(cfg)

    def test_bad_value_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[model]\nimage_size = sixteen\n")
        with pytest.raises(ConfigError):
            load_run_config(cfg)

    def test_invariants_enforced_at_parse(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[model]\nimage_size = 17\npatch_size = 4\n")
        with pytest.raises(ConfigError, match="divisible"):
            load_run_config(cfg)

    def test_full_round_trip(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(TINY_CONFIG.format(root=tmp_path / "d", out=tmp_path / "o"))
        run = load_run_config(cfg_path)
        assert run.model.embed_dim == 8
        assert run.train.batch_size == 4
        assert run.train.focal.alpha == 0.75
        assert run.train.augment is False
        assert run.split == "train"


def test_threads_env_cap(workspace, monkeypatch):
    import torch

    _, _, out, cfg_path = workspace
    assert main(["train", "--config", str(cfg_path)]) == 0
    before = torch.get_num_threads()
    monkeypatch.setenv("BIASTUNE_THREADS", "1")
    try:
        assert main(["eval", "--config", str(cfg_path),
                     "--checkpoint", str(out / "checkpoint.btck")]) == 0
        assert torch.get_num_threads() == 1
    finally:
        torch.set_num_threads(before)
