import sys
import textwrap

import numpy as np
import pytest

import stagewise as sw

# A protocol-conformant trainer stand-in: emits a deterministic bundle shaped
# by the requested descriptor and reports status done. Used to exercise the
# bridge without the real trainer.
OK_TRAINER_STUB = """
import json, struct, sys
from pathlib import Path

import numpy as np

workdir = Path(sys.argv[sys.argv.index("--workdir") + 1])
(workdir / "invocations.log").open("a").write("run\\n")
request = json.loads((workdir / "request.json").read_text())
arch = request["architecture"]
rows = 8
rng = np.random.default_rng(request["seed"])
stages = []
for i, stage in enumerate(arch["stages"]):
    cols = stage["channels"]
    values = rng.normal(size=(rows, cols)).astype("<f4")
    name = f"stage_{i}.swsf"
    with open(workdir / name, "wb") as fh:
        fh.write(struct.pack("<4sIQQ", b"SWSF", 1, rows, cols))
        fh.write(values.tobytes())
    stages.append({"index": i, "rows": rows, "cols": cols, "file": name})
with open(workdir / "labels.swsl", "wb") as fh:
    fh.write(struct.pack("<4sIQ", b"SWSL", 1, rows))
    fh.write((np.arange(rows) % 2).astype("<u4").tobytes())
(workdir / "bundle.json").write_text(json.dumps(
    {"stages": stages, "labels_file": "labels.swsl", "num_classes": 2}))
(workdir / "status.json").write_text(json.dumps(
    {"state": "done", "accuracy": 0.75, "wall_seconds": 0.01, "error": None}))
"""


@pytest.fixture
def ok_trainer_cmd(tmp_path):
    script = tmp_path / "ok_trainer.py"
    script.write_text(textwrap.dedent(OK_TRAINER_STUB))
    return [sys.executable, str(script)]


@pytest.fixture
def low_res_m6():
    return sw.default_low_resolution(6)


@pytest.fixture
def planted_stage2_profile():
    """Only stage 2 (index 1) rewards depth, saturating at 16 modules."""

    def make(seed: int) -> sw.PlantedProfile:
        return sw.PlantedProfile(
            stages=(
                sw.PlantedStage(ceiling=1, gain=0.0, noise_sigma=0.25),
                sw.PlantedStage(ceiling=16, gain=1.0, noise_sigma=0.25),
                sw.PlantedStage(ceiling=1, gain=0.0, noise_sigma=0.25),
            ),
            seed=seed,
        )

    return make


@pytest.fixture
def all_benefit_profile():
    """Every stage rewards depth, far from its ceiling. Equal gains give
    equal per-column signal (the planted pattern is all-ones), so no stage
    crowds out another under the normalized importance scores."""

    def make(seed: int) -> sw.PlantedProfile:
        return sw.PlantedProfile(
            stages=tuple(
                sw.PlantedStage(ceiling=100, gain=1.0, noise_sigma=1.0)
                for _ in range(3)
            ),
            seed=seed,
        )

    return make


@pytest.fixture
def noise_matrix():
    def make(n=200, d=8, seed=0):
        return np.random.default_rng(seed).normal(size=(n, d))

    return make
