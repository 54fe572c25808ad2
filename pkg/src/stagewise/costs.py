"""Analytical cost model: depth, parameters, FLOPs, memory, training carbon.

Convolution FLOPs are counted as multiply-accumulates (one MAC per weight
application), the convention that reproduces published cost tables for the
depth-44/56/110 baselines. Normalization layers contribute parameters
(scale + shift per channel) but no FLOPs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Mapping

from .arch import (
    BOTTLENECK_EXPANSION,
    CELL,
    RESIDUAL_BASIC,
    RESIDUAL_BOTTLENECK,
    Architecture,
)
from .errors import CostModelError, MissingCostProfileError

BYTES_PER_VALUE = 4  # float32 storage for weights and activations
MIB = 2**20


@dataclass(frozen=True)
class CellCostProfile:
    """User-supplied cost table for one cell design.

    ``params_per_cell`` maps channel width to parameter count;
    ``macs_per_cell`` maps (channels, spatial side) to multiply-accumulates.
    """

    profile_id: str
    layers_per_cell: int
    params_per_cell: Mapping[int, int]
    macs_per_cell: Mapping[tuple[int, int], int]

    def params(self, channels: int) -> int:
        try:
            return self.params_per_cell[channels]
        except KeyError:
            raise CostModelError(
                f"profile {self.profile_id!r} has no params entry for "
                f"{channels} channels"
            ) from None

    def macs(self, channels: int, spatial: int) -> int:
        try:
            return self.macs_per_cell[(channels, spatial)]
        except KeyError:
            raise CostModelError(
                f"profile {self.profile_id!r} has no MACs entry for "
                f"{channels} channels at spatial {spatial}"
            ) from None


def load_cell_profiles(path) -> dict[str, CellCostProfile]:
    """Read cell cost profiles from a JSON file keyed by profile id.

    Format per profile: {"layers_per_cell": int,
    "params_per_cell": {"<channels>": int},
    "macs_per_cell": {"<channels>x<spatial>": int}}.
    """
    with open(path) as fh:
        raw = json.load(fh)
    profiles = {}
    for pid, entry in raw.items():
        try:
            params = {int(k): int(v) for k, v in entry["params_per_cell"].items()}
            macs = {}
            for key, v in entry["macs_per_cell"].items():
                c, s = key.split("x")
                macs[(int(c), int(s))] = int(v)
            profiles[pid] = CellCostProfile(
                profile_id=pid,
                layers_per_cell=int(entry["layers_per_cell"]),
                params_per_cell=params,
                macs_per_cell=macs,
            )
        except (KeyError, ValueError, AttributeError) as exc:
            raise CostModelError(f"malformed cost profile {pid!r}: {exc}") from exc
    return profiles


@dataclass(frozen=True)
class EmissionsInput:
    """Inputs for the training carbon estimate."""

    runtime_hours: float
    device_power_kw: float
    grid_intensity: float  # kgCO2eq per kWh
    pue: float = 1.0

    def __post_init__(self):
        for name in ("runtime_hours", "device_power_kw", "grid_intensity", "pue"):
            value = getattr(self, name)
            if not value > 0:
                raise CostModelError(f"{name} must be strictly positive, got {value}")
        if self.pue < 1.0:
            raise CostModelError(f"pue must be >= 1, got {self.pue}")


@dataclass(frozen=True)
class CostReport:
    depth: int
    params: int
    flops: int
    memory_mb: float
    carbon_kg: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "depth": self.depth,
            "params": self.params,
            "flops": self.flops,
            "memory_mb": self.memory_mb,
            "carbon_kg": self.carbon_kg,
        }


@dataclass(frozen=True)
class _Conv:
    slot: str  # component id: "stem", "stageI.moduleJ", "shortcutI"
    kernel: int
    c_in: int
    c_out: int
    out_side: int
    norm: bool = True

    @property
    def params(self) -> int:
        return self.kernel * self.kernel * self.c_in * self.c_out + (
            2 * self.c_out if self.norm else 0
        )

    @property
    def macs(self) -> int:
        return self.out_side**2 * self.kernel**2 * self.c_in * self.c_out

    @property
    def activation_elements(self) -> int:
        return self.out_side**2 * self.c_out


def _check_profile(a: Architecture, profiles) -> CellCostProfile | None:
    if a.kind.variant != CELL:
        return None
    pid = a.kind.cost_profile_id
    if not profiles or pid not in profiles:
        raise MissingCostProfileError(pid)
    return profiles[pid]


def projection_stages(a: Architecture) -> list[int]:
    """Stages whose first module carries a 1x1 projection shortcut.

    A projection is needed whenever the first module changes resolution
    (every stage after the first) or channel count (stage 0 when the stem
    width differs from the stage output width).
    """
    if a.kind.variant == CELL:
        return []
    out = []
    c_in = a.stem_channels
    for stage in a.stages:
        stride = 2 if stage.index > 0 else 1
        if stride != 1 or c_in != stage.channels:
            out.append(stage.index)
        c_in = stage.channels
    return out


def _iter_convs(a: Architecture) -> Iterator[_Conv]:
    """Every convolution in a residual network, in forward order."""
    yield _Conv("stem", 3, 3, a.stem_channels, a.input_side)
    needs_projection = set(projection_stages(a))
    c_in = a.stem_channels
    for stage in a.stages:
        side = stage.spatial
        c_out = stage.channels
        for j in range(stage.modules):
            slot = f"stage{stage.index}.module{j}"
            block_in = c_in if j == 0 else c_out
            if a.kind.variant == RESIDUAL_BASIC:
                yield _Conv(slot, 3, block_in, c_out, side)
                yield _Conv(slot, 3, c_out, c_out, side)
            elif a.kind.variant == RESIDUAL_BOTTLENECK:
                inner = c_out // BOTTLENECK_EXPANSION
                yield _Conv(slot, 1, block_in, inner, side)
                yield _Conv(slot, 3, inner, inner, side)
                yield _Conv(slot, 1, inner, c_out, side)
            if j == 0 and stage.index in needs_projection:
                yield _Conv(f"shortcut{stage.index}", 1, block_in, c_out, side)
        c_in = c_out
    return


def depth(a: Architecture, profiles: Mapping[str, CellCostProfile] | None = None) -> int:
    """Layer count: stem + weighted layers per module + classifier."""
    if a.kind.variant == CELL:
        profile = _check_profile(a, profiles)
        per_module = profile.layers_per_cell
    else:
        per_module = a.kind.convs_per_module
    return per_module * sum(a.module_counts) + 2


def params(a: Architecture, profiles: Mapping[str, CellCostProfile] | None = None) -> int:
    return sum(param_components(a, profiles).values())


def param_components(
    a: Architecture, profiles: Mapping[str, CellCostProfile] | None = None
) -> dict[str, int]:
    """Parameter count per transferable component (stem, modules, shortcuts, classifier)."""
    out: dict[str, int] = {}
    profile = _check_profile(a, profiles)
    if profile is not None:
        out["stem"] = 3 * 3 * 3 * a.stem_channels + 2 * a.stem_channels
        for stage in a.stages:
            for j in range(stage.modules):
                out[f"stage{stage.index}.module{j}"] = profile.params(stage.channels)
    else:
        for conv in _iter_convs(a):
            out[conv.slot] = out.get(conv.slot, 0) + conv.params
    last = a.stages[-1].channels
    out["classifier"] = last * a.num_classes + a.num_classes
    return out


def flops(a: Architecture, profiles: Mapping[str, CellCostProfile] | None = None) -> int:
    """Multiply-accumulates for one forward pass at batch size 1."""
    profile = _check_profile(a, profiles)
    if profile is not None:
        total = 3 * 3 * 3 * a.stem_channels * a.input_side**2
        for stage in a.stages:
            total += stage.modules * profile.macs(stage.channels, stage.spatial)
    else:
        total = sum(conv.macs for conv in _iter_convs(a))
    total += a.stages[-1].channels * a.num_classes
    return total


def memory(a: Architecture, profiles: Mapping[str, CellCostProfile] | None = None) -> float:
    """Approximate forward-pass footprint in MiB at batch size 1.

    Counts 4 bytes per parameter plus 4 bytes per convolution output element.
    For cells, internals are unknown; each of the profile's layers is assumed
    to emit one stage-sized feature map.
    """
    profile = _check_profile(a, profiles)
    if profile is not None:
        elements = a.input_side**2 * a.stem_channels
        for stage in a.stages:
            elements += (
                stage.modules
                * profile.layers_per_cell
                * stage.spatial**2
                * stage.channels
            )
    else:
        elements = sum(conv.activation_elements for conv in _iter_convs(a))
    return BYTES_PER_VALUE * (params(a, profiles) + elements) / MIB


def emissions(e: EmissionsInput) -> float:
    """Training carbon estimate in kgCO2eq: energy drawn times grid intensity."""
    return e.runtime_hours * e.device_power_kw * e.pue * e.grid_intensity


def cost_report(
    a: Architecture,
    profiles: Mapping[str, CellCostProfile] | None = None,
    emissions_input: EmissionsInput | None = None,
) -> CostReport:
    carbon = emissions(emissions_input) if emissions_input is not None else None
    return CostReport(
        depth=depth(a, profiles),
        params=params(a, profiles),
        flops=flops(a, profiles),
        memory_mb=memory(a, profiles),
        carbon_kg=carbon,
    )
