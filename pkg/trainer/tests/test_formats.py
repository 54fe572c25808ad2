import json
import struct

import numpy as np

from sw_trainer.formats import (
    read_feature_file,
    read_labels_file,
    write_bundle,
    write_feature_file,
    write_labels_file,
    write_status,
)


def test_feature_file_exact_layout(tmp_path):
    values = np.arange(6, dtype=np.float32).reshape(2, 3)
    path = tmp_path / "stage_0.swsf"
    write_feature_file(path, values)
    blob = path.read_bytes()
    magic, version, rows, cols = struct.unpack("<4sIQQ", blob[:24])
    assert (magic, version, rows, cols) == (b"SWSF", 1, 2, 3)
    assert len(blob) == 24 + 4 * 6
    assert np.frombuffer(blob[24:], dtype="<f4").tolist() == values.ravel().tolist()
    assert np.array_equal(read_feature_file(path), values)


def test_labels_file_exact_layout(tmp_path):
    labels = np.array([1, 0, 2], dtype=np.uint32)
    path = tmp_path / "labels.swsl"
    write_labels_file(path, labels)
    blob = path.read_bytes()
    magic, version, rows = struct.unpack("<4sIQ", blob[:16])
    assert (magic, version, rows) == (b"SWSL", 1, 3)
    assert len(blob) == 16 + 4 * 3
    assert np.array_equal(read_labels_file(path), labels)


def test_bundle_manifest_contents(tmp_path):
    stage_features = {
        0: np.zeros((4, 2), dtype=np.float32),
        1: np.ones((4, 3), dtype=np.float32),
    }
    write_bundle(tmp_path, stage_features, np.zeros(4, dtype=np.uint32), num_classes=2)
    manifest = json.loads((tmp_path / "bundle.json").read_text())
    assert manifest["num_classes"] == 2
    assert manifest["labels_file"] == "labels.swsl"
    assert manifest["stages"] == [
        {"index": 0, "rows": 4, "cols": 2, "file": "stage_0.swsf"},
        {"index": 1, "rows": 4, "cols": 3, "file": "stage_1.swsf"},
    ]
    for entry in manifest["stages"]:
        size = (tmp_path / entry["file"]).stat().st_size
        assert size == 24 + 4 * entry["rows"] * entry["cols"]


def test_status_states(tmp_path):
    write_status(tmp_path, "running")
    assert json.loads((tmp_path / "status.json").read_text())["state"] == "running"
    write_status(tmp_path, "done", accuracy=0.9, wall_seconds=1.5)
    payload = json.loads((tmp_path / "status.json").read_text())
    assert payload == {
        "state": "done",
        "accuracy": 0.9,
        "wall_seconds": 1.5,
        "error": None,
    }
    write_status(tmp_path, "failed", error="boom")
    assert json.loads((tmp_path / "status.json").read_text())["error"] == "boom"
