import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import stagewise as sw
from stagewise.errors import ShapeMismatch, StageDepthExceedsDonor
from stagewise.transfer import plan_from_json, plan_to_json


def arch_with_modules(counts, widths=(16, 32, 64)):
    a = sw.build_uniform(
        len(counts), 1, sw.ModuleKind.residual_basic(), widths, 32, 10
    )
    return sw.deepen(a, tuple(c - 1 for c in counts))


def test_identity_plan():
    a = sw.default_low_resolution(6)
    plan = sw.plan_transfer(a, a)
    assert plan.coverage == 1.0
    assert all(e.donor == e.candidate for e in plan.entries)
    slots = plan.candidate_slots()
    assert len(slots) == len(set(slots))  # every component exactly once


def test_prefix_plan_against_deep_donor():
    candidate = arch_with_modules((6, 6, 6))
    donor = arch_with_modules((18, 18, 18))  # the depth-110 layout
    plan = sw.plan_transfer(candidate, donor)
    modules = [e for e in plan.entries if e.component == "module"]
    shortcuts = [e for e in plan.entries if e.component == "shortcut"]
    assert len(modules) == 18  # 6 per stage
    assert len(shortcuts) == 2  # stage transitions 1 and 2
    assert {e.component for e in plan.entries} == {
        "stem",
        "module",
        "shortcut",
        "classifier",
    }
    assert len(plan.entries) == 18 + 2 + 2
    assert plan.coverage == 1.0
    # prefix mapping: module j comes from donor module j of the same stage
    for e in modules:
        assert e.donor == e.candidate


def test_candidate_deeper_than_donor_rejected():
    candidate = arch_with_modules((20, 6, 6))
    donor = arch_with_modules((18, 18, 18))
    with pytest.raises(StageDepthExceedsDonor) as err:
        sw.plan_transfer(candidate, donor)
    assert err.value.stage == 0


def test_single_stage_excess_detected_even_if_total_smaller():
    candidate = arch_with_modules((2, 8, 2))  # 12 modules total
    donor = arch_with_modules((6, 6, 6))  # 18 modules total
    with pytest.raises(StageDepthExceedsDonor) as err:
        sw.plan_transfer(candidate, donor)
    assert err.value.stage == 1


def test_shape_mismatches_rejected():
    a = sw.default_low_resolution(6)
    with pytest.raises(ShapeMismatch, match="widths"):
        sw.plan_transfer(
            a, sw.build_uniform(3, 6, sw.ModuleKind.residual_basic(), (16, 32, 48), 32, 10)
        )
    with pytest.raises(ShapeMismatch, match="kind"):
        sw.plan_transfer(
            a,
            sw.build_uniform(
                3, 6, sw.ModuleKind.residual_bottleneck(), (16, 32, 64), 32, 10
            ),
        )
    with pytest.raises(ShapeMismatch, match="input_side"):
        sw.plan_transfer(
            a, sw.build_uniform(3, 6, sw.ModuleKind.residual_basic(), (16, 32, 64), 64, 10)
        )
    with pytest.raises(ShapeMismatch, match="num_stages"):
        sw.plan_transfer(
            a, sw.build_uniform(2, 6, sw.ModuleKind.residual_basic(), (16, 32), 32, 10)
        )
    with pytest.raises(ShapeMismatch, match="num_classes"):
        sw.plan_transfer(
            a, sw.build_uniform(3, 6, sw.ModuleKind.residual_basic(), (16, 32, 64), 32, 100)
        )


@settings(max_examples=60, deadline=None)
@given(
    st.tuples(st.integers(1, 18), st.integers(1, 18), st.integers(1, 18)),
    st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4)),
)
def test_plan_validity_monotone_in_candidate_depth(donor_counts, shrink):
    # If (candidate, donor) plans successfully, any candidate with
    # per-stage counts no larger than the first also plans successfully.
    donor = arch_with_modules(donor_counts)
    candidate = donor
    plan = sw.plan_transfer(candidate, donor)
    assert plan.coverage == 1.0
    smaller_counts = tuple(
        max(1, c - s) for c, s in zip(donor_counts, shrink)
    )
    smaller = arch_with_modules(smaller_counts)
    assert sw.plan_transfer(smaller, donor).coverage == 1.0


def test_plan_serialization_round_trip():
    candidate = arch_with_modules((3, 5, 4))
    donor = arch_with_modules((6, 6, 6))
    plan = sw.plan_transfer(candidate, donor)
    back = plan_from_json(plan_to_json(plan))
    assert back == plan


def test_bottleneck_plan_has_projection_per_stage():
    candidate = sw.default_imagenet(2)
    donor = sw.default_imagenet(4)
    plan = sw.plan_transfer(candidate, donor)
    shortcuts = sorted(e.candidate for e in plan.entries if e.component == "shortcut")
    # every bottleneck stage rewidths its input, including stage 0
    assert shortcuts == ["shortcut0", "shortcut1", "shortcut2", "shortcut3"]
    assert plan.coverage == 1.0
