"""Architecture descriptors: stages, module counts, widths.

A descriptor is an immutable value object. It records *what* the network is
(stage layout, module kind, channel widths) and nothing about weights or
training state, so it can be hashed, compared, serialized and shared freely.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import DescriptorError, DescriptorParseError

RESIDUAL_BASIC = "residual_basic"
RESIDUAL_BOTTLENECK = "residual_bottleneck"
CELL = "cell"
_VARIANTS = (RESIDUAL_BASIC, RESIDUAL_BOTTLENECK, CELL)

# Bottleneck modules emit EXPANSION times their inner width.
BOTTLENECK_EXPANSION = 4


@dataclass(frozen=True)
class ModuleKind:
    """The repeated unit inside a stage.

    ``residual_basic`` is two 3x3 convolutions with a skip connection,
    ``residual_bottleneck`` is the 1x1/3x3/1x1 triple, and ``cell`` is an
    opaque module whose costs come from a user-supplied profile table.
    """

    variant: str
    cost_profile_id: str | None = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise DescriptorError(f"unknown module variant {self.variant!r}")
        if self.variant == CELL and not self.cost_profile_id:
            raise DescriptorError("cell modules require a cost_profile_id")
        if self.variant != CELL and self.cost_profile_id is not None:
            raise DescriptorError(
                f"{self.variant} modules do not take a cost_profile_id"
            )

    @property
    def convs_per_module(self) -> int:
        """Convolution layers contributed by one module (profile-defined for cells)."""
        if self.variant == RESIDUAL_BASIC:
            return 2
        if self.variant == RESIDUAL_BOTTLENECK:
            return 3
        raise DescriptorError("cell layer count comes from its cost profile")

    @classmethod
    def residual_basic(cls) -> "ModuleKind":
        return cls(RESIDUAL_BASIC)

    @classmethod
    def residual_bottleneck(cls) -> "ModuleKind":
        return cls(RESIDUAL_BOTTLENECK)

    @classmethod
    def cell(cls, cost_profile_id: str) -> "ModuleKind":
        return cls(CELL, cost_profile_id)


@dataclass(frozen=True)
class StageSpec:
    """One stage: ``modules`` repeated units at fixed width and resolution."""

    index: int
    modules: int
    channels: int
    spatial: int

    def __post_init__(self):
        if self.index < 0:
            raise DescriptorError(f"stage index must be >= 0, got {self.index}")
        if self.modules < 1:
            raise DescriptorError(
                f"stage {self.index}: module count must be >= 1, got {self.modules}"
            )
        if self.channels < 1:
            raise DescriptorError(
                f"stage {self.index}: channels must be >= 1, got {self.channels}"
            )
        if self.spatial < 1:
            raise DescriptorError(
                f"stage {self.index}: spatial side must be >= 1, got {self.spatial}"
            )


@dataclass(frozen=True)
class Architecture:
    """Full network descriptor.

    Resolution halves at every stage transition; stage 0 runs at
    ``input_side``. ``id`` is a content hash over all fields, so equal
    descriptors always share an id and deduplication is deterministic.
    """

    stages: tuple[StageSpec, ...]
    kind: ModuleKind
    stem_channels: int
    num_classes: int
    input_side: int

    def __post_init__(self):
        if len(self.stages) < 1:
            raise DescriptorError("an architecture needs at least one stage")
        if self.stem_channels < 1 or self.num_classes < 1 or self.input_side < 1:
            raise DescriptorError(
                "stem_channels, num_classes and input_side must be positive"
            )
        for i, stage in enumerate(self.stages):
            if stage.index != i:
                raise DescriptorError(
                    f"stage indices must be 0..{len(self.stages) - 1} in order, "
                    f"found {stage.index} at position {i}"
                )
        if self.stages[0].spatial != self.input_side:
            raise DescriptorError(
                f"stage 0 must run at input resolution {self.input_side}, "
                f"got {self.stages[0].spatial}"
            )
        for prev, cur in zip(self.stages, self.stages[1:]):
            if prev.spatial != 2 * cur.spatial:
                raise DescriptorError(
                    f"stage {cur.index}: spatial side must halve at the stage "
                    f"transition ({prev.spatial} -> {cur.spatial})"
                )
        if self.kind.variant == RESIDUAL_BOTTLENECK:
            for stage in self.stages:
                if stage.channels % BOTTLENECK_EXPANSION != 0:
                    raise DescriptorError(
                        f"stage {stage.index}: bottleneck output channels must be "
                        f"divisible by {BOTTLENECK_EXPANSION}, got {stage.channels}"
                    )

    @property
    def num_stages(self) -> int:
        return len(self.stages)

    @property
    def module_counts(self) -> tuple[int, ...]:
        return tuple(s.modules for s in self.stages)

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(s.channels for s in self.stages)

    @property
    def id(self) -> str:
        digest = hashlib.sha256(serialize(self)).hexdigest()
        return digest[:16]

    def to_json_dict(self) -> dict:
        kind = {"variant": self.kind.variant}
        if self.kind.cost_profile_id is not None:
            kind["cost_profile_id"] = self.kind.cost_profile_id
        return {
            "stages": [
                {"modules": s.modules, "channels": s.channels, "spatial": s.spatial}
                for s in self.stages
            ],
            "kind": kind,
            "stem_channels": self.stem_channels,
            "num_classes": self.num_classes,
            "input_side": self.input_side,
        }


def build_uniform(
    num_stages: int,
    modules_per_stage: int,
    kind: ModuleKind,
    widths: Sequence[int],
    input_side: int,
    num_classes: int,
    stem_channels: int | None = None,
) -> Architecture:
    """Create a descriptor with the same module count in every stage.

    Stage ``i`` runs at resolution ``input_side / 2**i``; the division must be
    exact for every stage.
    """
    if num_stages < 1:
        raise DescriptorError(f"need at least one stage, got {num_stages}")
    if modules_per_stage < 1:
        raise DescriptorError(
            f"modules per stage must be >= 1, got {modules_per_stage}"
        )
    if len(widths) != num_stages:
        raise DescriptorError(
            f"widths has length {len(widths)}, expected {num_stages}"
        )
    stages = []
    for i in range(num_stages):
        side, rem = divmod(input_side, 2**i)
        if rem or side < 1:
            raise DescriptorError(
                f"input_side {input_side} is not divisible by 2^{i} for stage {i}"
            )
        stages.append(
            StageSpec(index=i, modules=modules_per_stage, channels=widths[i], spatial=side)
        )
    if stem_channels is None:
        stem_channels = _default_stem_channels(kind, widths[0])
    return Architecture(
        stages=tuple(stages),
        kind=kind,
        stem_channels=stem_channels,
        num_classes=num_classes,
        input_side=input_side,
    )


def _default_stem_channels(kind: ModuleKind, first_width: int) -> int:
    # The stem feeds stage 0, so it matches the first block's input width:
    # the stage width for basic blocks, the inner width for bottlenecks.
    if kind.variant == RESIDUAL_BOTTLENECK:
        return max(1, first_width // BOTTLENECK_EXPANSION)
    return first_width


def default_low_resolution(modules_per_stage: int = 6, num_classes: int = 10) -> Architecture:
    """Three-stage basic-block network for 32x32 inputs (widths 16/32/64)."""
    return build_uniform(
        3, modules_per_stage, ModuleKind.residual_basic(), (16, 32, 64), 32, num_classes
    )


def default_imagenet(modules_per_stage: int = 6, num_classes: int = 1000) -> Architecture:
    """Four-stage bottleneck network for 224x224 inputs (output widths 256..2048)."""
    return build_uniform(
        4,
        modules_per_stage,
        ModuleKind.residual_bottleneck(),
        (256, 512, 1024, 2048),
        224,
        num_classes,
    )


def deepen(a: Architecture, deltas: Sequence[int]) -> Architecture:
    """Return a copy of ``a`` with ``deltas[i]`` extra modules in stage i."""
    if len(deltas) != a.num_stages:
        raise DescriptorError(
            f"deltas has length {len(deltas)}, expected {a.num_stages}"
        )
    for i, d in enumerate(deltas):
        if d < 0:
            raise DescriptorError(f"stage {i}: delta must be >= 0, got {d}")
    stages = tuple(
        replace(s, modules=s.modules + d) for s, d in zip(a.stages, deltas)
    )
    return replace(a, stages=stages)


def serialize(a: Architecture) -> bytes:
    """Canonical byte encoding: equal descriptors serialize byte-identically."""
    text = json.dumps(a.to_json_dict(), sort_keys=True, indent=2)
    return (text + "\n").encode("utf-8")


def _require(obj: dict, field: str, types, context: str = ""):
    label = f"{context}{field}"
    if field not in obj:
        raise DescriptorParseError(label, "missing")
    value = obj[field]
    if not isinstance(value, types) or isinstance(value, bool):
        raise DescriptorParseError(
            label, f"expected {getattr(types, '__name__', types)}, got {type(value).__name__}"
        )
    return value


def _reject_unknown(obj: dict, allowed: set[str], context: str):
    for key in obj:
        if key not in allowed:
            raise DescriptorParseError(f"{context}{key}", "unknown field")


def from_json_dict(obj) -> Architecture:
    """Build an Architecture from the descriptor JSON object."""
    if not isinstance(obj, dict):
        raise DescriptorParseError("<root>", "descriptor must be a JSON object")
    _reject_unknown(
        obj, {"stages", "kind", "stem_channels", "num_classes", "input_side"}, ""
    )
    raw_stages = _require(obj, "stages", list)
    if not raw_stages:
        raise DescriptorParseError("stages", "must contain at least one stage")
    stages = []
    for i, raw in enumerate(raw_stages):
        ctx = f"stages[{i}]."
        if not isinstance(raw, dict):
            raise DescriptorParseError(f"stages[{i}]", "must be a JSON object")
        _reject_unknown(raw, {"modules", "channels", "spatial"}, ctx)
        stages.append(
            StageSpec(
                index=i,
                modules=_require(raw, "modules", int, ctx),
                channels=_require(raw, "channels", int, ctx),
                spatial=_require(raw, "spatial", int, ctx),
            )
        )
    raw_kind = _require(obj, "kind", dict)
    _reject_unknown(raw_kind, {"variant", "cost_profile_id"}, "kind.")
    variant = _require(raw_kind, "variant", str, "kind.")
    profile_id = raw_kind.get("cost_profile_id")
    if profile_id is not None and not isinstance(profile_id, str):
        raise DescriptorParseError("kind.cost_profile_id", "expected string")
    try:
        kind = ModuleKind(variant, profile_id)
        return Architecture(
            stages=tuple(stages),
            kind=kind,
            stem_channels=_require(obj, "stem_channels", int),
            num_classes=_require(obj, "num_classes", int),
            input_side=_require(obj, "input_side", int),
        )
    except DescriptorParseError:
        raise
    except DescriptorError as exc:
        raise DescriptorParseError("<descriptor>", str(exc)) from exc


def deserialize(data: bytes) -> Architecture:
    """Inverse of :func:`serialize`; raises DescriptorParseError on bad input."""
    try:
        obj = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise DescriptorParseError("<bytes>", f"not valid UTF-8: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DescriptorParseError(
            "<bytes>", f"not valid JSON at position {exc.pos}: {exc.msg}"
        ) from exc
    return from_json_dict(obj)


def load_descriptor(path) -> Architecture:
    with open(path, "rb") as fh:
        return deserialize(fh.read())


def save_descriptor(a: Architecture, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(a))
