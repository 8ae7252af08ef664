"""End-to-end tests for the command-line interface (run in-process)."""

from __future__ import annotations

import math
import os

import numpy as np
import pytest

from lomo.cli import main
from lomo.core import format_float
from lomo.data import write_sequence
from lomo.inference import FrameSequence, InferenceConfig, fuse_scores, latent_assign, score
from lomo.model import load_model


def _synth(tmp_path, name="data", **overrides):
    out = str(tmp_path / name)
    flags = {
        "--out": out, "--d": "4", "--n": "10", "--m-true": "2",
        "--noise-sigma": "0.2", "--min-gap": "1", "--pos": "6", "--neg": "6",
        "--neg-mode": "absent", "--seed": "3",
    }
    flags.update(overrides)
    argv = ["synth"]
    for key, value in flags.items():
        argv += [key, value]
    assert main(argv) == 0
    return out


TRAIN_FAST = ["--templates", "2", "--exclusion-t", "1", "--max-iter", "300"]


def _train(tmp_path, data_dir, name="model.lomo", extra=()):
    out = str(tmp_path / name)
    argv = [
        "train", "--manifest", os.path.join(data_dir, "manifest.csv"),
        "--out", out, "--positive-label", "pos", *TRAIN_FAST, *extra,
    ]
    assert main(argv) == 0
    return out


# ---------------------------------------------------------------------------
# synth


def test_synth_writes_dataset_and_reports(tmp_path, capsys):
    out = _synth(tmp_path)
    captured = capsys.readouterr()
    assert "synth config:" in captured.err
    assert "neg_mode=absent" in captured.err
    assert "wrote 12 sequences" in captured.out
    names = sorted(os.listdir(out))
    assert "manifest.csv" in names and "spec.txt" in names
    assert sum(name.startswith("seq_") for name in names) == 12


def test_synth_is_byte_deterministic(tmp_path):
    a = _synth(tmp_path, "a")
    b = _synth(tmp_path, "b")
    for name in sorted(os.listdir(a)):
        with open(os.path.join(a, name), "rb") as fh_a, open(os.path.join(b, name), "rb") as fh_b:
            assert fh_a.read() == fh_b.read(), name


# ---------------------------------------------------------------------------
# train


def test_train_writes_loadable_model(tmp_path, capsys):
    data = _synth(tmp_path)
    path = _train(tmp_path, data)
    captured = capsys.readouterr()
    assert "train config: variant=lomo templates=2" in captured.err
    assert "eta=0.05" in captured.err and "lambda=1e-05" in captured.err
    assert "max_iter=300" in captured.err
    assert f"wrote model to {path}" in captured.err
    model = load_model(path)
    assert model.num_templates == 2
    assert model.dim == 4


def test_train_is_byte_deterministic(tmp_path):
    data = _synth(tmp_path)
    a = _train(tmp_path, data, "a.lomo")
    b = _train(tmp_path, data, "b.lomo")
    with open(a, "rb") as fh_a, open(b, "rb") as fh_b:
        assert fh_a.read() == fh_b.read()


def test_train_mil_forces_single_frozen_template(tmp_path):
    data = _synth(tmp_path)
    path = _train(tmp_path, data, "mil.lomo", extra=["--variant", "mil"])
    text = open(path, encoding="utf-8").read()
    assert "M=1 d=4" in text
    assert "\ncosts 0.0\n" in text  # ordering costs stay frozen at zero


def test_train_svm_variant_pools_sequences(tmp_path):
    data = _synth(tmp_path)
    path = _train(tmp_path, data, "svm.lomo", extra=["--variant", "svm-max"])
    model = load_model(path)
    assert model.num_templates == 1
    assert model.costs == (0.0,)


def test_train_requires_positive_label(tmp_path, capsys):
    data = _synth(tmp_path)
    argv = [
        "train", "--manifest", os.path.join(data, "manifest.csv"),
        "--out", str(tmp_path / "m.lomo"), *TRAIN_FAST,
    ]
    assert main(argv) == 1
    captured = capsys.readouterr()
    assert "error: binary training needs --positive-label (classes here: neg, pos)" in captured.err


def test_train_rejects_unknown_positive_label(tmp_path, capsys):
    data = _synth(tmp_path)
    argv = [
        "train", "--manifest", os.path.join(data, "manifest.csv"),
        "--out", str(tmp_path / "m.lomo"), "--positive-label", "yes", *TRAIN_FAST,
    ]
    assert main(argv) == 1
    assert "error: positive label 'yes' not among classes" in capsys.readouterr().err


def _multiclass_manifest(tmp_path):
    rng = np.random.default_rng(55)
    directions = {"a": (1.0, 0.0), "b": (-1.0, 0.0), "c": (0.0, 1.0)}
    lines = ["id,label,group,path"]
    for label, direction in directions.items():
        for i in range(6):
            frames = rng.normal(scale=0.1, size=(3, 2)) + np.asarray(direction)
            write_sequence(FrameSequence(frames), tmp_path / f"{label}{i}.csv")
            lines.append(f"{label}{i},{label},g{i % 3},{label}{i}.csv")
    path = tmp_path / "manifest.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def test_train_ova_writes_one_model_per_class(tmp_path, capsys):
    manifest = _multiclass_manifest(tmp_path)
    out_dir = str(tmp_path / "models")
    argv = [
        "train", "--manifest", manifest, "--out", out_dir, "--ova",
        "--templates", "1", "--exclusion-t", "0", "--max-iter", "400",
    ]
    assert main(argv) == 0
    assert "wrote 3 models" in capsys.readouterr().err
    assert sorted(os.listdir(out_dir)) == ["a.lomo", "b.lomo", "c.lomo"]
    for name in ("a", "b", "c"):
        assert load_model(os.path.join(out_dir, f"{name}.lomo")).num_templates == 1


# ---------------------------------------------------------------------------
# predict


def _parse_predictions(text):
    lines = text.splitlines()
    assert lines[0] == "id,score,decision"
    rows = {}
    for line in lines[1:]:
        seq_id, score_text, decision = line.split(",")
        rows[seq_id] = (float(score_text), int(decision))
    return rows


def test_predict_stdout_scores_every_record(tmp_path, capsys):
    data = _synth(tmp_path)
    model_path = _train(tmp_path, data)
    argv = [
        "predict", "--manifest", os.path.join(data, "manifest.csv"),
        "--model", model_path, "--exclusion-t", "1",
    ]
    capsys.readouterr()  # drop synth/train chatter
    assert main(argv) == 0
    captured = capsys.readouterr()
    assert "predict config: models=1 exclusion_t=1 pool=none" in captured.err
    rows = _parse_predictions(captured.out)
    assert len(rows) == 12
    model = load_model(model_path)
    icfg = InferenceConfig(exclusion_t=1)
    for rec_id, (value, decision) in rows.items():
        seq_path = os.path.join(data, f"seq_{rec_id}.csv")
        frames = np.loadtxt(seq_path, delimiter=",", ndmin=2)
        expected = score(model, FrameSequence(frames), icfg)
        assert value == expected  # format_float round-trips exactly
        assert decision == (1 if expected > 0 else -1)


def test_predict_late_fusion_averages_model_scores(tmp_path):
    data = _synth(tmp_path)
    model_a = _train(tmp_path, data, "a.lomo", extra=["--seed", "1"])
    model_b = _train(tmp_path, data, "b.lomo", extra=["--seed", "2"])
    outputs = {}
    for name, model_flags in {
        "a": ["--model", model_a],
        "b": ["--model", model_b],
        "ab": ["--model", model_a, "--model", model_b],
    }.items():
        out = str(tmp_path / f"pred_{name}.csv")
        argv = [
            "predict", "--manifest", os.path.join(data, "manifest.csv"),
            *model_flags, "--exclusion-t", "1", "--out", out,
        ]
        assert main(argv) == 0
        outputs[name] = _parse_predictions(open(out, encoding="utf-8").read())
    for rec_id, (fused, _) in outputs["ab"].items():
        assert fused == fuse_scores([outputs["a"][rec_id][0], outputs["b"][rec_id][0]])


def test_predict_pool_flag_scores_pooled_frames(tmp_path):
    data = _synth(tmp_path)
    model_path = _train(tmp_path, data, "svm.lomo", extra=["--variant", "svm-mean"])
    out = str(tmp_path / "pred.csv")
    argv = [
        "predict", "--manifest", os.path.join(data, "manifest.csv"),
        "--model", model_path, "--pool", "mean", "--out", out,
    ]
    assert main(argv) == 0
    rows = _parse_predictions(open(out, encoding="utf-8").read())
    model = load_model(model_path)
    for rec_id, (value, _) in rows.items():
        frames = np.loadtxt(os.path.join(data, f"seq_{rec_id}.csv"), delimiter=",", ndmin=2)
        pooled = frames.mean(axis=0)
        assert value == pytest.approx(float(np.dot(model.templates[0], pooled)), abs=1e-12)


def test_predict_dimension_mismatch_exits_one(tmp_path, capsys):
    data = _synth(tmp_path)  # d=4
    other = _synth(tmp_path, "other", **{"--d": "3"})
    model_path = _train(tmp_path, other)
    argv = [
        "predict", "--manifest", os.path.join(data, "manifest.csv"),
        "--model", model_path,
    ]
    assert main(argv) == 1
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# cv


def test_cv_writes_fold_rows_and_mean(tmp_path, capsys):
    data = _synth(tmp_path)
    out = str(tmp_path / "cv.csv")
    argv = [
        "cv", "--manifest", os.path.join(data, "manifest.csv"),
        "--scheme", "kfold", "--folds", "2", "--metric", "acc",
        "--positive-label", "pos", "--out", out, *TRAIN_FAST,
    ]
    assert main(argv) == 0
    captured = capsys.readouterr()
    assert "cv config: scheme=kfold folds=2 metric=acc" in captured.err
    lines = open(out, encoding="utf-8").read().splitlines()
    assert lines[0] == "fold,metric,value"
    assert len(lines) == 4  # header, two folds, mean
    assert lines[1].startswith("0,acc,") and lines[2].startswith("1,acc,")
    assert lines[3].startswith("mean,acc,")
    fold_values = [float(line.split(",")[2]) for line in lines[1:3]]
    assert float(lines[3].split(",")[2]) == pytest.approx(np.mean(fold_values))


def test_cv_rerun_is_byte_identical(tmp_path):
    data = _synth(tmp_path)
    argv_base = [
        "cv", "--manifest", os.path.join(data, "manifest.csv"),
        "--scheme", "kfold", "--folds", "3", "--metric", "auc",
        "--positive-label", "pos", "--l2", *TRAIN_FAST,
    ]
    for name in ("a.csv", "b.csv"):
        assert main(argv_base + ["--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cv_multiclass_accuracy(tmp_path):
    manifest = _multiclass_manifest(tmp_path)
    out = str(tmp_path / "cv.csv")
    argv = [
        "cv", "--manifest", manifest, "--scheme", "logo", "--metric", "acc",
        "--templates", "1", "--exclusion-t", "0", "--max-iter", "400", "--out", out,
    ]
    assert main(argv) == 0
    lines = open(out, encoding="utf-8").read().splitlines()
    assert lines[-1].startswith("mean,acc,")
    assert float(lines[-1].split(",")[2]) >= 0.9


def test_cv_binary_without_positive_label_exits_one(tmp_path, capsys):
    data = _synth(tmp_path)
    argv = [
        "cv", "--manifest", os.path.join(data, "manifest.csv"),
        "--scheme", "kfold", "--folds", "2", *TRAIN_FAST,
    ]
    assert main(argv) == 1
    assert "error: binary cross-validation needs a positive_label" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# report


def test_report_timeline_matches_latent_assignment(tmp_path, capsys):
    data = _synth(tmp_path)
    model_path = _train(tmp_path, data)
    seq_path = os.path.join(data, "seq_pos0000.csv")
    argv = ["report", "--model", model_path, "--sequence", seq_path, "--exclusion-t", "1"]
    capsys.readouterr()  # drop synth/train chatter
    assert main(argv) == 0
    captured = capsys.readouterr()
    assert "report config: exclusion_t=1" in captured.err
    lines = captured.out.splitlines()
    assert lines[0] == "template,frame_index,percentile,template_score"

    model = load_model(model_path)
    frames = np.loadtxt(seq_path, delimiter=",", ndmin=2)
    assign = latent_assign(model, FrameSequence(frames), InferenceConfig(exclusion_t=1))
    n = frames.shape[0]
    assert len(lines) == 1 + model.num_templates + 3
    for i, (k, s) in enumerate(zip(assign.chosen, assign.template_scores), start=1):
        expected = f"{i},{k},{math.floor(100.0 * k / n + 0.5)},{format_float(s)}"
        assert lines[i] == expected
    assert lines[-3] == f"perm_index,{assign.perm}"
    assert lines[-2] == f"ordering_cost,{format_float(assign.ordering_cost)}"
    assert lines[-1] == f"total_score,{format_float(assign.total)}"


def test_report_percentiles_round_half_up(tmp_path):
    # 10 frames: frame k sits at the k-th decile, e.g. frame 3 -> 30
    data = _synth(tmp_path)
    model_path = _train(tmp_path, data)
    seq_path = os.path.join(data, "seq_pos0001.csv")
    import io
    from contextlib import redirect_stdout

    buf = io.StringIO()
    with redirect_stdout(buf):
        assert main(["report", "--model", model_path, "--sequence", seq_path,
                     "--exclusion-t", "1"]) == 0
    for line in buf.getvalue().splitlines()[1:3]:
        _, k, pct, _ = line.split(",")
        assert int(pct) == 10 * int(k)


# ---------------------------------------------------------------------------
# error handling


def test_missing_manifest_exits_one(tmp_path, capsys):
    argv = [
        "train", "--manifest", str(tmp_path / "nope.csv"),
        "--out", str(tmp_path / "m.lomo"), "--positive-label", "pos",
    ]
    assert main(argv) == 1
    assert capsys.readouterr().err.startswith("error: ")


def test_corrupt_model_file_exits_one(tmp_path, capsys):
    data = _synth(tmp_path)
    bad = tmp_path / "bad.lomo"
    bad.write_text("LOMO v1\nM=1 d=1\ncosts nope\nw1 1.0\n", encoding="utf-8")
    argv = ["predict", "--manifest", os.path.join(data, "manifest.csv"),
            "--model", str(bad)]
    assert main(argv) == 1
    assert "error:" in capsys.readouterr().err
