import pytest


def descriptor(counts=(2, 2, 2), widths=(16, 32, 64), stem=16, classes=10, side=32):
    stages = [
        {"modules": m, "channels": c, "spatial": side // 2**i}
        for i, (m, c) in enumerate(zip(counts, widths))
    ]
    return {
        "stages": stages,
        "kind": {"variant": "residual_basic"},
        "stem_channels": stem,
        "num_classes": classes,
        "input_side": side,
    }


@pytest.fixture
def make_descriptor():
    return descriptor
