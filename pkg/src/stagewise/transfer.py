"""Weight-transfer planning: donor modules reused positionally in a candidate.

The plan is a descriptor-level artifact. Stage i's first ``m_i`` donor
modules initialize the candidate's modules one for one; stem, per-stage
projection shortcuts and the classifier map identically. A candidate stage
deeper than its donor stage cannot be filled and is rejected. Actual tensor
copying is the trainer's job; it consumes the serialized plan.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

from .arch import Architecture
from .costs import CellCostProfile, param_components, projection_stages
from .errors import ShapeMismatch, StageDepthExceedsDonor, TransferError

COMPONENT_STEM = "stem"
COMPONENT_MODULE = "module"
COMPONENT_SHORTCUT = "shortcut"
COMPONENT_CLASSIFIER = "classifier"


@dataclass(frozen=True)
class TransferEntry:
    component: str  # stem | module | shortcut | classifier
    donor: str  # donor slot id, e.g. "stage1.module3"
    candidate: str  # candidate slot id

    def to_json_dict(self) -> dict:
        return {
            "component": self.component,
            "donor": self.donor,
            "candidate": self.candidate,
        }


@dataclass(frozen=True)
class TransferPlan:
    entries: tuple[TransferEntry, ...]
    coverage: float

    def to_json_dict(self) -> dict:
        return {
            "entries": [e.to_json_dict() for e in self.entries],
            "coverage": self.coverage,
        }

    def candidate_slots(self) -> list[str]:
        return [e.candidate for e in self.entries]


def _check_compatible(candidate: Architecture, donor: Architecture) -> None:
    checks = [
        ("num_stages", candidate.num_stages, donor.num_stages),
        ("kind", candidate.kind, donor.kind),
        ("widths", candidate.widths, donor.widths),
        ("input_side", candidate.input_side, donor.input_side),
        ("stem_channels", candidate.stem_channels, donor.stem_channels),
        ("num_classes", candidate.num_classes, donor.num_classes),
    ]
    for name, cand_value, donor_value in checks:
        if cand_value != donor_value:
            raise ShapeMismatch(name, cand_value, donor_value)


def plan_transfer(
    candidate: Architecture,
    donor: Architecture,
    profiles: Mapping[str, CellCostProfile] | None = None,
) -> TransferPlan:
    """Map every candidate component to a donor source, prefix-wise per stage."""
    _check_compatible(candidate, donor)
    for cand_stage, donor_stage in zip(candidate.stages, donor.stages):
        if cand_stage.modules > donor_stage.modules:
            raise StageDepthExceedsDonor(
                cand_stage.index, cand_stage.modules, donor_stage.modules
            )
    entries = [TransferEntry(COMPONENT_STEM, "stem", "stem")]
    shortcut_set = set(projection_stages(candidate))
    for stage in candidate.stages:
        for j in range(stage.modules):
            slot = f"stage{stage.index}.module{j}"
            entries.append(TransferEntry(COMPONENT_MODULE, slot, slot))
        if stage.index in shortcut_set:
            slot = f"shortcut{stage.index}"
            entries.append(TransferEntry(COMPONENT_SHORTCUT, slot, slot))
    entries.append(TransferEntry(COMPONENT_CLASSIFIER, "classifier", "classifier"))

    components = param_components(candidate, profiles)
    total = sum(components.values())
    mapped = sum(components[e.candidate] for e in entries)
    return TransferPlan(entries=tuple(entries), coverage=mapped / total)


def plan_to_json(plan: TransferPlan) -> str:
    return json.dumps(plan.to_json_dict(), sort_keys=True, indent=2) + "\n"


def plan_from_json(text: str) -> TransferPlan:
    try:
        obj = json.loads(text)
        entries = tuple(
            TransferEntry(e["component"], e["donor"], e["candidate"])
            for e in obj["entries"]
        )
        return TransferPlan(entries=entries, coverage=float(obj["coverage"]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise TransferError(f"malformed transfer plan: {exc}") from exc
