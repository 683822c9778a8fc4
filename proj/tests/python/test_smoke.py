import json
import math

import numpy as np
import pytest

import namegate


def test_embedding_round_trip(tmp_path):
    a = np.arange(12, dtype=np.float32).reshape(3, 4) / 7
    namegate.write_embedding(tmp_path / "a.emb", a)
    b = namegate.read_embedding(tmp_path / "a.emb")
    assert b.dtype == np.float32
    assert np.array_equal(a, b)


def test_bad_embedding_raises_format_error(tmp_path):
    (tmp_path / "bad.emb").write_bytes(b"XXXX" + bytes(28))
    with pytest.raises(namegate.FormatError):
        namegate.read_embedding(tmp_path / "bad.emb")
    assert issubclass(namegate.FormatError, namegate.NamegateError)


def test_loss_oracles():
    assert namegate.contrastive_loss([[2.0]], [[-1.0]]) == 0.0
    eye = np.eye(2)
    assert namegate.contrastive_loss(eye, eye) == pytest.approx(math.log1p(math.exp(-1)), abs=1e-12)
    h = math.log(0.5)
    assert namegate.ctc_loss([[h, h], [h, h]], [1]) == pytest.approx(-math.log(0.75), abs=1e-12)


def test_metrics_example():
    m = namegate.metrics([0, 0, 0, 1], [0, 0, 1, 1], 2)
    assert m["accuracy"] == 0.75
    assert m["macro_f1"] == pytest.approx(0.733333, abs=1e-6)


def test_gradcheck_passes():
    report = namegate.gradcheck(range(2))
    assert report["passed"]


def test_synthetic_crossval_and_inference(tmp_path):
    spec = {"n_speakers": 3, "n_words": 4, "repeats": 2, "frames_min": 4, "frames_max": 8, "seed": 1}
    manifest = namegate.generate_synthetic(spec, tmp_path / "data")
    entries = namegate.load_manifest(manifest)
    assert len(entries) == 24

    config = {
        "data": {"manifest": "data/manifest.jsonl"},
        "model": {"kind": "classifier", "hidden_dim": 16},
        "train": {"max_epochs": 5, "lr_grid": [1e-3]},
        "seed": 2,
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    report = namegate.crossval(tmp_path / "config.json", out_dir=tmp_path / "run")
    assert report["fold_count"] == 3
    assert 0.0 <= report["summary"]["accuracy"]["mean"] <= 1.0

    speaker = entries[0]["speaker_id"]
    model = namegate.load_recognizer(tmp_path / "run" / "folds" / speaker / "checkpoint.json")
    assert model.kind == "classifier"
    frames = namegate.read_embedding(tmp_path / "data" / entries[0]["embedding_path"])
    out = model.explain(frames, entries[0]["target_word"])
    assert out["predicted"] in set(out["scores"])

    with pytest.raises(namegate.ConfigError):
        namegate.crossval(tmp_path / "config.json", model="svm")
