"""Apply a serialized transfer plan: copy donor tensors into a fresh network.

Plan entries address components by slot id; slots translate to parameter
name prefixes of :class:`sw_trainer.network.StagewiseNet`. A module slot
covers the block's own tensors but not its projection shortcut, which is a
separate slot.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import torch

_MODULE_SLOT = re.compile(r"stage(\d+)\.module(\d+)$")
_SHORTCUT_SLOT = re.compile(r"shortcut(\d+)$")


def _slot_prefix(slot: str) -> tuple[str, bool]:
    """Map a slot id to a parameter prefix; second value marks module slots
    (whose shortcut subtree belongs to a different slot)."""
    if slot == "stem":
        return "stem.", False
    if slot == "classifier":
        return "classifier.", False
    match = _MODULE_SLOT.match(slot)
    if match:
        stage, module = match.groups()
        return f"stages.{stage}.blocks.{module}.", True
    match = _SHORTCUT_SLOT.match(slot)
    if match:
        return f"stages.{match.group(1)}.blocks.0.shortcut.", False
    raise ValueError(f"unknown transfer slot {slot!r}")


def _keys_for(state: dict, prefix: str, exclude_shortcut: bool) -> list[str]:
    keys = [k for k in state if k.startswith(prefix)]
    if exclude_shortcut:
        keys = [k for k in keys if ".shortcut." not in k]
    return keys


def apply_transfer_plan(net: torch.nn.Module, plan: dict, donor_state: dict) -> int:
    """Copy donor tensors into ``net`` per the plan; returns tensors copied."""
    state = net.state_dict()
    copied = 0
    for entry in plan["entries"]:
        donor_prefix, donor_is_module = _slot_prefix(entry["donor"])
        cand_prefix, cand_is_module = _slot_prefix(entry["candidate"])
        cand_keys = _keys_for(state, cand_prefix, cand_is_module)
        if not cand_keys:
            raise ValueError(f"candidate has no tensors under {entry['candidate']!r}")
        for cand_key in cand_keys:
            donor_key = donor_prefix + cand_key[len(cand_prefix):]
            if donor_key not in donor_state:
                raise ValueError(
                    f"donor weights missing {donor_key!r} for slot {entry['donor']!r}"
                )
            if donor_state[donor_key].shape != state[cand_key].shape:
                raise ValueError(
                    f"shape mismatch for {cand_key}: candidate "
                    f"{tuple(state[cand_key].shape)} vs donor "
                    f"{tuple(donor_state[donor_key].shape)}"
                )
            state[cand_key] = donor_state[donor_key].clone()
            copied += 1
    net.load_state_dict(state)
    return copied


def load_plan(path) -> dict:
    return json.loads(Path(path).read_text())


def load_donor_state(path) -> dict:
    return torch.load(path, map_location="cpu", weights_only=True)
