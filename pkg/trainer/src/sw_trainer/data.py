"""Datasets for trainer jobs.

The built-in synthetic blob set keeps CI and protocol tests free of any
download: each class gets a fixed random template image and samples are
noisy copies of their class template. A small on-disk image set can be
supplied as an .npz file instead.
"""

from __future__ import annotations

import numpy as np
import torch


def synthetic_blobs(
    samples: int, num_classes: int, side: int, seed: int, noise: float = 0.5
):
    """Class-template images plus Gaussian noise; balanced, shuffled."""
    if samples < num_classes:
        raise ValueError(f"need at least {num_classes} samples, got {samples}")
    rng = np.random.default_rng(seed)
    templates = rng.normal(size=(num_classes, 3, side, side))
    labels = rng.permutation(np.arange(samples) % num_classes)
    images = templates[labels] + noise * rng.normal(size=(samples, 3, side, side))
    return (
        torch.from_numpy(images.astype(np.float32)),
        torch.from_numpy(labels.astype(np.int64)),
    )


def npz_images(path, side: int):
    """Load a small image set: arrays 'images' (N,3,H,W) and 'labels' (N,)."""
    archive = np.load(path)
    try:
        images = archive["images"]
        labels = archive["labels"]
    except KeyError as exc:
        raise ValueError(f"{path}: expected arrays 'images' and 'labels'") from exc
    if images.ndim != 4 or images.shape[1] != 3:
        raise ValueError(f"{path}: images must be (N, 3, H, W), got {images.shape}")
    if images.shape[2] != side or images.shape[3] != side:
        raise ValueError(
            f"{path}: image side {images.shape[2:]} does not match descriptor "
            f"input side {side}"
        )
    images = images.astype(np.float32)
    if images.max() > 2.0:  # byte-range images: rescale to roughly unit
        images = images / 127.5 - 1.0
    return torch.from_numpy(images), torch.from_numpy(labels.astype(np.int64))


def load_dataset(config: dict | None, side: int, seed: int):
    config = dict(config or {})
    name = config.pop("name", "synthetic")
    if name == "synthetic":
        return synthetic_blobs(
            samples=int(config.pop("samples", 256)),
            num_classes=int(config.pop("num_classes", 2)),
            side=side,
            seed=seed,
            noise=float(config.pop("noise", 0.5)),
        )
    if name == "npz":
        return npz_images(config.pop("path"), side)
    raise ValueError(f"unknown dataset {name!r}")
