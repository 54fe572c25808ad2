"""Evaluators: sources of pooled stage features for a descriptor.

Two implementations of one contract:

* :class:`SyntheticEvaluator` fabricates features with a known per-stage
  signal structure, so the search loop can be verified end to end in
  milliseconds without training anything.
* :class:`BridgeEvaluator` delegates to an external trainer process through
  a file-based protocol (request/status JSON plus a binary feature bundle)
  and validates everything it reads.

Both guarantee that two descriptors differing only in depth produce feature
matrices with identical column layouts, which is what makes stage scores
comparable between a network and its deepened twin.

Feature bundle formats (normative, little-endian throughout):

* ``stage_<i>.swsf``: magic ``SWSF``, u32 version=1, u64 rows, u64 cols,
  then rows*cols IEEE-754 binary32 values, row-major.
* ``labels.swsl``: magic ``SWSL``, u32 version=1, u64 rows, then rows u32
  class indices.
* ``bundle.json``: ``{stages: [{index, rows, cols, file}], labels_file,
  num_classes}``.
* ``request.json``: ``{architecture, epochs, mode, seed,
  max_feature_samples}`` plus optional transfer fields.
* ``status.json``: ``{state: running|done|failed, accuracy, wall_seconds,
  error}``.
"""

from __future__ import annotations

import json
import struct
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from . import transfer as transfer_mod
from .arch import Architecture, save_descriptor
from .errors import (
    BundleFormatError,
    EvaluatorError,
    NonFiniteFeaturesError,
    TrainerExitError,
    TrainerFailedError,
    TrainerTimeoutError,
)
from .importance import FeatureMatrix, StageSlice

FEATURE_MAGIC = b"SWSF"
LABEL_MAGIC = b"SWSL"
BUNDLE_VERSION = 1
_FEATURE_HEADER = struct.Struct("<4sIQQ")  # magic, version, rows, cols
_LABEL_HEADER = struct.Struct("<4sIQ")  # magic, version, rows

MODE_SCRATCH = "scratch"
MODE_WEIGHT_TRANSFER = "weight_transfer"


@dataclass(frozen=True)
class DonorRef:
    """A pre-trained network available as a weight source."""

    architecture: Architecture
    weights_path: str


@dataclass(frozen=True)
class EvalBudget:
    epochs: int
    mode: str = MODE_SCRATCH
    donor: DonorRef | None = None
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise EvaluatorError(f"epochs must be >= 1, got {self.epochs}")
        if self.mode not in (MODE_SCRATCH, MODE_WEIGHT_TRANSFER):
            raise EvaluatorError(f"unknown budget mode {self.mode!r}")
        if (self.donor is not None) != (self.mode == MODE_WEIGHT_TRANSFER):
            raise EvaluatorError(
                "donor must be present exactly when mode is weight_transfer"
            )

    def cache_key(self) -> str:
        donor = (
            f"{self.donor.architecture.id}:{self.donor.weights_path}"
            if self.donor
            else "-"
        )
        return f"{self.epochs}|{self.mode}|{donor}|{self.seed}"


@dataclass(frozen=True, eq=False)
class EvalResult:
    features: FeatureMatrix
    metrics: dict
    cache_hit: bool


class Evaluator(Protocol):
    """Contract: deterministic features for (descriptor, budget, seed)."""

    def evaluate(self, a: Architecture, budget: EvalBudget) -> EvalResult: ...


# ---------------------------------------------------------------------------
# Feature bundle IO


def write_feature_file(path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise BundleFormatError(f"feature arrays must be 2-D, got {values.shape}")
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(_FEATURE_HEADER.pack(FEATURE_MAGIC, BUNDLE_VERSION, rows, cols))
        fh.write(values.tobytes())


def read_feature_file(path) -> np.ndarray:
    path = Path(path)
    size = path.stat().st_size
    if size < _FEATURE_HEADER.size:
        raise BundleFormatError(f"{path.name}: too short for a feature header")
    with open(path, "rb") as fh:
        magic, version, rows, cols = _FEATURE_HEADER.unpack(
            fh.read(_FEATURE_HEADER.size)
        )
        if magic != FEATURE_MAGIC:
            raise BundleFormatError(f"{path.name}: bad magic {magic!r}")
        if version != BUNDLE_VERSION:
            raise BundleFormatError(f"{path.name}: unsupported version {version}")
        expected = _FEATURE_HEADER.size + 4 * rows * cols
        if size != expected:
            raise BundleFormatError(
                f"{path.name}: declares {rows}x{cols} values "
                f"({expected} bytes) but file has {size} bytes"
            )
        data = np.frombuffer(fh.read(), dtype="<f4").reshape(rows, cols)
    return data


def write_labels_file(path, labels: np.ndarray) -> None:
    labels = np.ascontiguousarray(labels, dtype="<u4")
    with open(path, "wb") as fh:
        fh.write(_LABEL_HEADER.pack(LABEL_MAGIC, BUNDLE_VERSION, labels.shape[0]))
        fh.write(labels.tobytes())


def read_labels_file(path) -> np.ndarray:
    path = Path(path)
    size = path.stat().st_size
    if size < _LABEL_HEADER.size:
        raise BundleFormatError(f"{path.name}: too short for a label header")
    with open(path, "rb") as fh:
        magic, version, rows = _LABEL_HEADER.unpack(fh.read(_LABEL_HEADER.size))
        if magic != LABEL_MAGIC:
            raise BundleFormatError(f"{path.name}: bad magic {magic!r}")
        if version != BUNDLE_VERSION:
            raise BundleFormatError(f"{path.name}: unsupported version {version}")
        expected = _LABEL_HEADER.size + 4 * rows
        if size != expected:
            raise BundleFormatError(
                f"{path.name}: declares {rows} labels ({expected} bytes) "
                f"but file has {size} bytes"
            )
        labels = np.frombuffer(fh.read(), dtype="<u4")
    return labels.astype(np.int64)


def write_bundle(directory, features: FeatureMatrix, num_classes: int) -> Path:
    """Write a FeatureMatrix as an on-disk bundle; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stages = []
    for s in features.stage_slices:
        name = f"stage_{s.stage_index}.swsf"
        block = features.data[:, s.start : s.stop]
        write_feature_file(directory / name, block)
        stages.append(
            {
                "index": s.stage_index,
                "rows": int(features.data.shape[0]),
                "cols": int(s.stop - s.start),
                "file": name,
            }
        )
    write_labels_file(directory / "labels.swsl", features.labels)
    manifest = {
        "stages": stages,
        "labels_file": "labels.swsl",
        "num_classes": int(num_classes),
    }
    manifest_path = directory / "bundle.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest_path


def load_bundle(directory) -> tuple[FeatureMatrix, int]:
    """Load and validate a bundle directory (or a path to its manifest)."""
    directory = Path(directory)
    manifest_path = directory if directory.is_file() else directory / "bundle.json"
    base = manifest_path.parent
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise BundleFormatError(f"no bundle manifest at {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise BundleFormatError(f"manifest is not valid JSON: {exc}") from exc
    try:
        stage_entries = sorted(manifest["stages"], key=lambda e: e["index"])
        labels_file = manifest["labels_file"]
        num_classes = int(manifest["num_classes"])
    except (KeyError, TypeError) as exc:
        raise BundleFormatError(f"manifest missing field: {exc}") from exc
    if not stage_entries:
        raise BundleFormatError("manifest lists no stages")

    blocks = []
    slices = []
    cursor = 0
    rows = None
    for entry in stage_entries:
        data = read_feature_file(base / entry["file"])
        if data.shape != (entry["rows"], entry["cols"]):
            raise BundleFormatError(
                f"{entry['file']}: manifest declares {entry['rows']}x{entry['cols']}"
                f" but file holds {data.shape[0]}x{data.shape[1]}"
            )
        if rows is None:
            rows = data.shape[0]
        elif data.shape[0] != rows:
            raise BundleFormatError(
                f"{entry['file']}: row count {data.shape[0]} differs from "
                f"first stage's {rows}"
            )
        if not np.all(np.isfinite(data)):
            raise NonFiniteFeaturesError(
                f"{entry['file']} contains NaN or infinite values"
            )
        blocks.append(data)
        slices.append(
            StageSlice(entry["index"], cursor, cursor + data.shape[1])
        )
        cursor += data.shape[1]
    labels = read_labels_file(base / labels_file)
    if labels.shape[0] != rows:
        raise BundleFormatError(
            f"{labels_file}: {labels.shape[0]} labels for {rows} feature rows"
        )
    features = FeatureMatrix(
        data=np.concatenate(blocks, axis=1),
        labels=labels,
        stage_slices=tuple(slices),
    )
    return features, num_classes


# ---------------------------------------------------------------------------
# Synthetic planted oracle


@dataclass(frozen=True)
class PlantedStage:
    """Planted behavior for one stage.

    Signal strength grows linearly with module count up to ``ceiling`` and
    saturates there; ``gain`` scales it and ``noise_sigma`` sets the additive
    noise level.
    """

    ceiling: int
    gain: float
    noise_sigma: float = 0.25

    def __post_init__(self):
        if self.ceiling < 1:
            raise EvaluatorError(f"ceiling must be >= 1, got {self.ceiling}")
        if self.gain < 0:
            raise EvaluatorError(f"gain must be >= 0, got {self.gain}")
        if self.noise_sigma < 0:
            raise EvaluatorError(f"noise_sigma must be >= 0, got {self.noise_sigma}")

    def signal_level(self, modules: int) -> float:
        return self.gain * min(modules, self.ceiling) / self.ceiling


@dataclass(frozen=True)
class PlantedProfile:
    stages: tuple[PlantedStage, ...]
    seed: int = 0
    samples: int = 1024


def synthetic_evaluate(a: Architecture, profile: PlantedProfile) -> FeatureMatrix:
    """Fabricate pooled stage features with planted per-stage informativeness.

    Stage i emits ``signal_level(m_i) * y w_i' + noise`` where y is a balanced
    two-class label vector shared by all stages and w_i is the all-ones
    pattern, so every column of a stage carries the full signal level
    regardless of the stage's width (stages with equal gains are then
    exchangeable). The noise draw for a stage depends only on (profile seed,
    stage index), never on module counts, so two descriptors that saturate
    (or carry no gain) in a stage produce exactly equal columns there.
    """
    if len(profile.stages) != a.num_stages:
        raise EvaluatorError(
            f"profile has {len(profile.stages)} stages, descriptor has {a.num_stages}"
        )
    n = profile.samples
    if n < 2 or n % 2:
        raise EvaluatorError(f"sample count must be even and >= 2, got {n}")
    streams = np.random.SeedSequence(profile.seed).spawn(a.num_stages + 1)
    labels = np.repeat(np.arange(2), n // 2)
    labels = np.random.default_rng(streams[0]).permutation(labels)
    y = 1.0 - 2.0 * labels  # class 0 -> +1, class 1 -> -1

    blocks = []
    slices = []
    cursor = 0
    for stage, planted in zip(a.stages, profile.stages):
        c = stage.channels
        rng = np.random.default_rng(streams[stage.index + 1])
        noise = rng.normal(0.0, 1.0, size=(n, c)) * planted.noise_sigma
        pattern = np.ones(c)
        level = planted.signal_level(stage.modules)
        blocks.append(level * np.outer(y, pattern) + noise)
        slices.append(StageSlice(stage.index, cursor, cursor + c))
        cursor += c
    return FeatureMatrix(
        data=np.concatenate(blocks, axis=1),
        labels=labels,
        stage_slices=tuple(slices),
    )


class SyntheticEvaluator:
    """Evaluator backed by the planted oracle; caches by descriptor id."""

    def __init__(self, profile: PlantedProfile):
        self.profile = profile
        self._cache: dict[tuple[str, str], EvalResult] = {}

    def evaluate(self, a: Architecture, budget: EvalBudget) -> EvalResult:
        key = (a.id, budget.cache_key())
        if key in self._cache:
            cached = self._cache[key]
            return EvalResult(cached.features, cached.metrics, cache_hit=True)
        features = synthetic_evaluate(a, self.profile)
        signal = [
            planted.signal_level(stage.modules)
            for stage, planted in zip(a.stages, self.profile.stages)
        ]
        result = EvalResult(
            features=features,
            metrics={"evaluator": "synthetic", "signal_levels": signal},
            cache_hit=False,
        )
        self._cache[key] = result
        return result


# ---------------------------------------------------------------------------
# Trainer bridge


def _log_excerpt(workdir: Path, limit: int = 2000) -> str:
    log_path = workdir / "trainer.log"
    try:
        text = log_path.read_text(errors="replace")
    except OSError:
        return ""
    return text[-limit:]


class BridgeEvaluator:
    """Runs the external trainer once per novel (descriptor, budget) pair.

    Each evaluation gets a private working directory under ``workdir_root``
    named from the cache key; a directory that already holds a completed,
    valid bundle is reused without relaunching the trainer.
    """

    def __init__(
        self,
        trainer_cmd: list[str],
        workdir_root,
        timeout_seconds: float = 3600.0,
        max_feature_samples: int = 1024,
        request_extras: dict | None = None,
        poll_interval: float = 0.1,
    ):
        if not trainer_cmd:
            raise EvaluatorError("trainer_cmd must not be empty")
        self.trainer_cmd = list(trainer_cmd)
        self.workdir_root = Path(workdir_root)
        self.timeout_seconds = timeout_seconds
        self.max_feature_samples = max_feature_samples
        self.request_extras = dict(request_extras or {})
        self.poll_interval = poll_interval
        self._cache: dict[tuple[str, str], EvalResult] = {}

    def _workdir_for(self, a: Architecture, budget: EvalBudget) -> Path:
        import hashlib

        budget_tag = hashlib.sha256(budget.cache_key().encode()).hexdigest()[:8]
        return self.workdir_root / f"eval-{a.id}-{budget_tag}"

    def evaluate(self, a: Architecture, budget: EvalBudget) -> EvalResult:
        key = (a.id, budget.cache_key())
        if key in self._cache:
            cached = self._cache[key]
            return EvalResult(cached.features, cached.metrics, cache_hit=True)
        workdir = self._workdir_for(a, budget)
        reused = self._try_reuse(workdir)
        if reused is not None:
            self._cache[key] = reused
            return EvalResult(reused.features, reused.metrics, cache_hit=True)
        result = self._run_trainer(a, budget, workdir)
        self._cache[key] = result
        return result

    def _try_reuse(self, workdir: Path) -> EvalResult | None:
        status_path = workdir / "status.json"
        if not status_path.exists():
            return None
        try:
            status = json.loads(status_path.read_text())
        except (OSError, json.JSONDecodeError):
            return None
        if status.get("state") != "done":
            return None
        try:
            features, _ = load_bundle(workdir)
        except EvaluatorError:
            return None
        return EvalResult(
            features=features,
            metrics=self._metrics_from_status(status),
            cache_hit=False,
        )

    @staticmethod
    def _metrics_from_status(status: dict) -> dict:
        return {
            "evaluator": "bridge",
            "accuracy": status.get("accuracy"),
            "wall_seconds": status.get("wall_seconds"),
        }

    def _write_request(self, a: Architecture, budget: EvalBudget, workdir: Path):
        request = {
            "architecture": a.to_json_dict(),
            "epochs": budget.epochs,
            "mode": budget.mode,
            "seed": budget.seed,
            "max_feature_samples": self.max_feature_samples,
        }
        if budget.donor is not None:
            plan = transfer_mod.plan_transfer(a, budget.donor.architecture)
            plan_path = workdir / "transfer_plan.json"
            plan_path.write_text(
                json.dumps(plan.to_json_dict(), sort_keys=True, indent=2) + "\n"
            )
            save_descriptor(budget.donor.architecture, workdir / "donor.json")
            request["transfer_plan"] = plan_path.name
            request["donor_weights"] = budget.donor.weights_path
        request.update(self.request_extras)
        (workdir / "request.json").write_text(
            json.dumps(request, sort_keys=True, indent=2) + "\n"
        )

    def _run_trainer(
        self, a: Architecture, budget: EvalBudget, workdir: Path
    ) -> EvalResult:
        workdir.mkdir(parents=True, exist_ok=True)
        status_path = workdir / "status.json"
        if status_path.exists():
            status_path.unlink()
        self._write_request(a, budget, workdir)

        deadline = time.monotonic() + self.timeout_seconds
        log_path = workdir / "trainer.log"
        with open(log_path, "wb") as log_fh:
            proc = subprocess.Popen(
                self.trainer_cmd + ["--workdir", str(workdir)],
                stdout=log_fh,
                stderr=subprocess.STDOUT,
            )
            try:
                status = self._poll(proc, status_path, deadline, workdir)
            finally:
                if proc.poll() is None:
                    proc.kill()
                proc.wait()
        if status.get("state") == "failed":
            raise TrainerFailedError(
                str(status.get("error", "unknown")), _log_excerpt(workdir)
            )
        features, _ = self._load_validated(workdir)
        return EvalResult(
            features=features,
            metrics=self._metrics_from_status(status),
            cache_hit=False,
        )

    def _poll(self, proc, status_path: Path, deadline: float, workdir: Path) -> dict:
        while True:
            if time.monotonic() >= deadline:
                raise TrainerTimeoutError(self.timeout_seconds, _log_excerpt(workdir))
            status = self._read_status(status_path)
            if status is not None and status.get("state") in ("done", "failed"):
                return status
            code = proc.poll()
            if code is not None:
                # Re-read once: the process may have written status just
                # before exiting.
                status = self._read_status(status_path)
                if status is not None and status.get("state") in ("done", "failed"):
                    return status
                raise TrainerExitError(code, _log_excerpt(workdir))
            time.sleep(self.poll_interval)

    @staticmethod
    def _read_status(status_path: Path) -> dict | None:
        if not status_path.exists():
            return None
        try:
            return json.loads(status_path.read_text())
        except (OSError, json.JSONDecodeError):
            return None  # mid-write; retry on the next poll

    def _load_validated(self, workdir: Path) -> tuple[FeatureMatrix, int]:
        try:
            return load_bundle(workdir)
        except EvaluatorError as exc:
            excerpt = _log_excerpt(workdir)
            if excerpt and not getattr(exc, "log_excerpt", None):
                exc.args = (f"{exc.args[0]}; log tail:\n{excerpt}",)
            raise
