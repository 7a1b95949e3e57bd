"""CLI surface: subcommands, artifacts, exit codes, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from strokescope.raster import rasterise
from strokescope.scorers.corpus import make_classification_corpus
from strokescope.sketch import serialize_sketch


def run_cli(args, env=None):
    return subprocess.run(
        [sys.executable, "-m", "strokescope.cli", *args],
        capture_output=True,
        text=True,
        env=env,
    )


@pytest.fixture(scope="module")
def sketch_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    sketches, _ = make_classification_corpus(2, seed=15)
    path = d / "s.json"
    path.write_text(serialize_sketch(sketches[0]))
    return path


@pytest.fixture(scope="module")
def reference_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli_ref")
    sketches, _ = make_classification_corpus(2, seed=16)
    path = d / "ref.json"
    path.write_text(serialize_sketch(sketches[1]))
    return path


class TestRender:
    def test_render_writes_png(self, sketch_file, tmp_path):
        out = tmp_path / "out"
        res = run_cli(["render", str(sketch_file), "-o", str(out), "--pgm"])
        assert res.returncode == 0, res.stderr
        assert (out / "render.png").is_file()
        assert (out / "render.pgm").is_file()
        payload = json.loads(res.stdout)
        assert payload["w"] == 48 and payload["h"] == 48

    def test_render_deterministic(self, sketch_file, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(["render", str(sketch_file), "-o", str(a)])
        run_cli(["render", str(sketch_file), "-o", str(b)])
        assert (a / "render.png").read_bytes() == (b / "render.png").read_bytes()

    def test_soft_mode(self, sketch_file, tmp_path):
        res = run_cli(["render", str(sketch_file), "--mode", "soft", "-o", str(tmp_path / "o")])
        assert res.returncode == 0

    def test_stdin_input(self, sketch_file, tmp_path):
        data = sketch_file.read_text()
        res = subprocess.run(
            [sys.executable, "-m", "strokescope.cli", "render", "-", "-o", str(tmp_path / "o")],
            input=data,
            capture_output=True,
            text=True,
        )
        assert res.returncode == 0


class TestAttribute:
    def test_artifacts_and_payload(self, sketch_file, models_dir, tmp_path):
        out = tmp_path / "out"
        res = run_cli(
            ["attribute", str(sketch_file), "--model", str(models_dir / "clf.ssm"),
             "--target", "class:2", "-o", str(out)]
        )
        assert res.returncode == 0, res.stderr
        assert (out / "scores.json").is_file()
        assert (out / "overlay.svg").is_file()
        assert (out / "heatmap.png").is_file()
        payload = json.loads(res.stdout)
        assert payload["granularity"] == "stroke"
        assert len(payload["scores"]) == len(payload["normalized_scores"])

    def test_psla_mode(self, sketch_file, models_dir, tmp_path):
        res = run_cli(
            ["attribute", str(sketch_file), "--mode", "psla",
             "--model", str(models_dir / "clf.ssm"), "--target", "loss:0"]
        )
        assert res.returncode == 0
        payload = json.loads(res.stdout)
        assert payload["granularity"] == "point"
        assert "point_gradients" in payload

    def test_missing_model_exit_1(self, sketch_file):
        res = run_cli(["attribute", str(sketch_file), "--model", "missing.ssm"])
        assert res.returncode == 1
        assert "not found" in res.stderr

    def test_models_dir_env_lookup(self, sketch_file, models_dir):
        import os

        env = dict(os.environ, STROKESCOPE_MODELS_DIR=str(models_dir))
        res = run_cli(["attribute", str(sketch_file), "--model", "clf", "--target", "class:0"], env=env)
        assert res.returncode == 0

    def test_unknown_flag_exit_2(self, sketch_file):
        res = run_cli(["attribute", str(sketch_file), "--bogus"])
        assert res.returncode == 2

    def test_deterministic_payload(self, sketch_file, models_dir):
        args = ["attribute", str(sketch_file), "--model", str(models_dir / "clf.ssm"), "--target", "class:1"]
        assert run_cli(args).stdout == run_cli(args).stdout


class TestFilterAttackReliability:
    def test_filter_stroke(self, sketch_file, reference_file, models_dir, tmp_path):
        out = tmp_path / "f"
        res = run_cli(
            ["filter", str(sketch_file), "--model", str(models_dir / "embed.ssm"),
             "--reference", str(reference_file), "-o", str(out)]
        )
        assert res.returncode == 0, res.stderr
        payload = json.loads(res.stdout)
        assert set(payload) >= {"kept", "removed", "normalized_scores", "delta"}
        assert (out / "filtered.json").is_file()

    def test_filter_point(self, sketch_file, reference_file, models_dir):
        res = run_cli(
            ["filter", str(sketch_file), "--granularity", "point",
             "--model", str(models_dir / "embed.ssm"), "--reference", str(reference_file)]
        )
        assert res.returncode == 0, res.stderr

    def test_attack_psla(self, sketch_file, models_dir):
        res = run_cli(
            ["attack", str(sketch_file), "--mode", "psla", "--epsilon", "5",
             "--model", str(models_dir / "clf.ssm")]
        )
        assert res.returncode == 0, res.stderr
        payload = json.loads(res.stdout)
        assert "success" in payload
        assert len(payload["removed"]) == 5

    def test_attack_sla_with_label(self, sketch_file, models_dir, tmp_path):
        out = tmp_path / "atk"
        res = run_cli(
            ["attack", str(sketch_file), "--mode", "sla", "--epsilon", "15",
             "--model", str(models_dir / "clf.ssm"), "--label", "0", "-o", str(out)]
        )
        assert res.returncode == 0, res.stderr
        assert (out / "adversarial.json").is_file()

    def test_reliability(self, sketch_file, models_dir, tmp_path):
        gallery = tmp_path / "gallery.jsonl"
        sketches, _ = make_classification_corpus(2, seed=31)
        gallery.write_text("\n".join(serialize_sketch(s) for s in sketches[:4]))
        res = run_cli(
            ["reliability", str(sketch_file), "--model", str(models_dir / "embed.ssm"),
             "--gallery", str(gallery), "--true-index", "1"]
        )
        assert res.returncode == 0, res.stderr
        payload = json.loads(res.stdout)
        assert 1 <= payload["rank"] <= 4
        assert payload["reliable"] in ("high", "mid", "low", "not_applicable")


class TestTrain:
    def test_train_conv_deterministic(self, tmp_path):
        args = [
            "train", "--kind", "conv", "--per-class", "25", "--epochs", "2",
            "--seed", "9", "--canvas", "32",
        ]
        res1 = run_cli(args + ["--out", str(tmp_path / "m1.ssm")])
        assert res1.returncode == 0, res1.stderr
        res2 = run_cli(args + ["--out", str(tmp_path / "m2.ssm")])
        assert (tmp_path / "m1.ssm").read_bytes() == (tmp_path / "m2.ssm").read_bytes()
        report = json.loads(res1.stdout)
        assert "val_accuracy" in report
