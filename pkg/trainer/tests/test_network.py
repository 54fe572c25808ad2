import torch

from sw_trainer.network import StagewiseNet


def test_forward_shapes(make_descriptor):
    net = StagewiseNet(make_descriptor())
    x = torch.randn(2, 3, 32, 32)
    logits = net(x)
    assert logits.shape == (2, 10)


def test_stage_outputs_resolution_and_width(make_descriptor):
    net = StagewiseNet(make_descriptor())
    outputs = net.forward_stages(torch.randn(2, 3, 32, 32))
    assert [tuple(o.shape[1:]) for o in outputs] == [
        (16, 32, 32),
        (32, 16, 16),
        (64, 8, 8),
    ]


def test_pooled_features_width_is_depth_invariant(make_descriptor):
    shallow = StagewiseNet(make_descriptor(counts=(1, 1, 1)))
    deep = StagewiseNet(make_descriptor(counts=(4, 2, 7)))
    x = torch.randn(3, 3, 32, 32)
    for net in (shallow, deep):
        pooled = net.pooled_stage_features(x)
        assert [p.shape for p in pooled] == [
            torch.Size([3, 16]),
            torch.Size([3, 32]),
            torch.Size([3, 64]),
        ]


def test_parameter_count_matches_hand_sum(make_descriptor):
    # Same independent hand arithmetic as the engine's cost fixtures:
    # 3x3 convs without bias + 2-parameter norms, 1x1 projections where
    # width or resolution changes, linear classifier with bias.
    stem = 3 * 3 * 3 * 16 + 2 * 16
    stage0 = (3 * 3 * 16 * 16 + 2 * 16) * 2
    stage1 = (
        (3 * 3 * 16 * 32 + 2 * 32)
        + (3 * 3 * 32 * 32 + 2 * 32)
        + (1 * 1 * 16 * 32 + 2 * 32)
    )
    stage2 = (
        (3 * 3 * 32 * 64 + 2 * 64)
        + (3 * 3 * 64 * 64 + 2 * 64)
        + (1 * 1 * 32 * 64 + 2 * 64)
    )
    classifier = 64 * 10 + 10
    expected = stem + stage0 + stage1 + stage2 + classifier
    net = StagewiseNet(make_descriptor(counts=(1, 1, 1)))
    assert sum(p.numel() for p in net.parameters()) == expected


def test_projection_only_where_shape_changes(make_descriptor):
    net = StagewiseNet(make_descriptor(counts=(2, 2, 2)))
    assert net.stages[0].blocks[0].shortcut is None  # stem width == stage width
    assert net.stages[1].blocks[0].shortcut is not None
    assert net.stages[2].blocks[0].shortcut is not None
    for stage in net.stages:
        for block in stage.blocks[1:]:
            assert block.shortcut is None


def test_bottleneck_descriptor():
    descriptor = {
        "stages": [
            {"modules": 2, "channels": 64, "spatial": 16},
            {"modules": 2, "channels": 128, "spatial": 8},
        ],
        "kind": {"variant": "residual_bottleneck"},
        "stem_channels": 16,
        "num_classes": 5,
        "input_side": 16,
    }
    net = StagewiseNet(descriptor)
    outputs = net.forward_stages(torch.randn(2, 3, 16, 16))
    assert [tuple(o.shape[1:]) for o in outputs] == [(64, 16, 16), (128, 8, 8)]
    # expansion changes width at stage 0 entry: projection required
    assert net.stages[0].blocks[0].shortcut is not None


def test_cell_variant_rejected(make_descriptor):
    bad = make_descriptor()
    bad["kind"] = {"variant": "cell", "cost_profile_id": "x"}
    try:
        StagewiseNet(bad)
    except ValueError as exc:
        assert "residual" in str(exc)
    else:
        raise AssertionError("cell descriptor should be rejected")
