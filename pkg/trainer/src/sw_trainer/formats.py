"""On-disk protocol: feature/label binary files, manifest, status.

The byte layouts here are normative for the whole toolchain; the search
engine validates them independently on its side of the process boundary.
All integers little-endian.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

FEATURE_MAGIC = b"SWSF"
LABEL_MAGIC = b"SWSL"
VERSION = 1
_FEATURE_HEADER = struct.Struct("<4sIQQ")  # magic, version, rows, cols
_LABEL_HEADER = struct.Struct("<4sIQ")  # magic, version, rows


def write_feature_file(path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(_FEATURE_HEADER.pack(FEATURE_MAGIC, VERSION, rows, cols))
        fh.write(values.tobytes())


def read_feature_file(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, version, rows, cols = _FEATURE_HEADER.unpack(
            fh.read(_FEATURE_HEADER.size)
        )
        if magic != FEATURE_MAGIC or version != VERSION:
            raise ValueError(f"{path}: not a version-{VERSION} feature file")
        return np.frombuffer(fh.read(), dtype="<f4").reshape(rows, cols)


def write_labels_file(path, labels: np.ndarray) -> None:
    labels = np.ascontiguousarray(labels, dtype="<u4")
    with open(path, "wb") as fh:
        fh.write(_LABEL_HEADER.pack(LABEL_MAGIC, VERSION, labels.shape[0]))
        fh.write(labels.tobytes())


def read_labels_file(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, version, rows = _LABEL_HEADER.unpack(fh.read(_LABEL_HEADER.size))
        if magic != LABEL_MAGIC or version != VERSION:
            raise ValueError(f"{path}: not a version-{VERSION} label file")
        return np.frombuffer(fh.read(), dtype="<u4").astype(np.int64)


def write_bundle(workdir, stage_features: dict[int, np.ndarray], labels, num_classes: int):
    """Write per-stage feature files, the label file and the manifest."""
    workdir = Path(workdir)
    entries = []
    for index in sorted(stage_features):
        values = stage_features[index]
        name = f"stage_{index}.swsf"
        write_feature_file(workdir / name, values)
        entries.append(
            {
                "index": index,
                "rows": int(values.shape[0]),
                "cols": int(values.shape[1]),
                "file": name,
            }
        )
    write_labels_file(workdir / "labels.swsl", labels)
    manifest = {
        "stages": entries,
        "labels_file": "labels.swsl",
        "num_classes": int(num_classes),
    }
    _atomic_write_json(workdir / "bundle.json", manifest)


def _atomic_write_json(path, payload: dict) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    os.replace(tmp, path)


def write_status(workdir, state: str, accuracy=None, wall_seconds=None, error=None):
    _atomic_write_json(
        Path(workdir) / "status.json",
        {
            "state": state,
            "accuracy": accuracy,
            "wall_seconds": wall_seconds,
            "error": error,
        },
    )
