"""One trainer job: request.json in, feature bundle + status.json out."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import torch

from .data import load_dataset
from .formats import write_bundle, write_status
from .network import StagewiseNet
from .transfer import apply_transfer_plan, load_donor_state, load_plan

REQUIRED_FIELDS = ("architecture", "epochs", "mode", "seed", "max_feature_samples")


def load_request(workdir: Path) -> dict:
    path = workdir / "request.json"
    if not path.exists():
        raise ValueError(f"no request.json in {workdir}")
    request = json.loads(path.read_text())
    missing = [f for f in REQUIRED_FIELDS if f not in request]
    if missing:
        raise ValueError(f"request.json missing fields: {', '.join(missing)}")
    if request["mode"] not in ("scratch", "weight_transfer"):
        raise ValueError(f"unknown mode {request['mode']!r}")
    if int(request["epochs"]) < 1:
        raise ValueError(f"epochs must be >= 1, got {request['epochs']}")
    if int(request["max_feature_samples"]) < 1:
        raise ValueError(
            f"max_feature_samples must be >= 1, got {request['max_feature_samples']}"
        )
    if request["mode"] == "weight_transfer":
        for field in ("transfer_plan", "donor_weights"):
            if field not in request:
                raise ValueError(f"weight_transfer requests need {field!r}")
    return request


def lr_milestones(epochs: int) -> list[int]:
    """Step-decay points at 50% and 75% of the budget, scaled to any length."""
    return sorted({m for m in (epochs // 2, (3 * epochs) // 4) if m >= 1})


def train(net: StagewiseNet, images, labels, epochs: int, seed: int, batch_size=64):
    net.train()
    optimizer = torch.optim.SGD(net.parameters(), lr=0.01, momentum=0.9)
    scheduler = torch.optim.lr_scheduler.MultiStepLR(
        optimizer, milestones=lr_milestones(epochs), gamma=0.1
    )
    loss_fn = torch.nn.CrossEntropyLoss()
    order_rng = torch.Generator().manual_seed(seed)
    n = images.shape[0]
    correct = total = 0
    for _ in range(epochs):
        order = torch.randperm(n, generator=order_rng)
        correct = total = 0
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            x, y = images[batch], labels[batch]
            optimizer.zero_grad()
            logits = net(x)
            loss = loss_fn(logits, y)
            loss.backward()
            optimizer.step()
            correct += int((logits.argmax(dim=1) == y).sum())
            total += int(y.shape[0])
        scheduler.step()
    return correct / total if total else 0.0


def extract_features(net: StagewiseNet, images, labels, max_samples: int, batch_size=128):
    """Pooled stage features over the first min(max_samples, N) samples,
    in canonical dataset order, without augmentation."""
    net.eval()
    keep = min(max_samples, images.shape[0])
    chunks: list[list[torch.Tensor]] = []
    with torch.no_grad():
        for start in range(0, keep, batch_size):
            end = min(start + batch_size, keep)
            chunks.append(net.pooled_stage_features(images[start:end]))
    per_stage = [
        torch.cat([chunk[i] for chunk in chunks]).numpy().astype(np.float32)
        for i in range(len(chunks[0]))
    ]
    return {i: values for i, values in enumerate(per_stage)}, labels[:keep].numpy()


def run_job(workdir) -> dict:
    """Execute the job described by ``workdir/request.json``.

    Returns the final status payload; writes the bundle, weights.pt and
    status.json as side effects.
    """
    workdir = Path(workdir)
    started = time.monotonic()
    write_status(workdir, "running")
    request = load_request(workdir)
    seed = int(request["seed"])

    # Single-threaded and fully seeded: identical bytes for identical requests.
    torch.set_num_threads(1)
    torch.manual_seed(seed)

    descriptor = request["architecture"]
    net = StagewiseNet(descriptor)
    if request["mode"] == "weight_transfer":
        plan = load_plan(workdir / request["transfer_plan"])
        donor_state = load_donor_state(request["donor_weights"])
        apply_transfer_plan(net, plan, donor_state)

    images, labels = load_dataset(
        request.get("dataset"), side=descriptor["input_side"], seed=seed
    )
    num_classes = int(labels.max()) + 1
    if num_classes > descriptor["num_classes"]:
        raise ValueError(
            f"dataset has {num_classes} classes but the descriptor's classifier "
            f"only has {descriptor['num_classes']}"
        )

    accuracy = train(net, images, labels, epochs=int(request["epochs"]), seed=seed)
    torch.save(net.state_dict(), workdir / "weights.pt")

    stage_features, kept_labels = extract_features(
        net, images, labels, int(request["max_feature_samples"])
    )
    write_bundle(workdir, stage_features, kept_labels, num_classes)

    wall = time.monotonic() - started
    write_status(workdir, "done", accuracy=accuracy, wall_seconds=wall)
    return {"state": "done", "accuracy": accuracy, "wall_seconds": wall, "error": None}
