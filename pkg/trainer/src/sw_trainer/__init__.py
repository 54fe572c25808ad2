"""Reference trainer for the stagewise file protocol.

Builds a residual network from an architecture descriptor, optionally seeds
it from a donor via a transfer plan, trains briefly with step-decayed SGD,
and writes globally average-pooled per-stage features as a binary bundle.
All communication with the search engine happens through files in the job's
working directory.
"""

from .data import load_dataset, synthetic_blobs
from .job import run_job
from .network import StagewiseNet
from .transfer import apply_transfer_plan

__version__ = "0.1.0"

__all__ = [
    "StagewiseNet",
    "apply_transfer_plan",
    "load_dataset",
    "run_job",
    "synthetic_blobs",
]
