#!/usr/bin/env python3
"""Print the analytical cost table for the uniform low-resolution baselines.

Compares the computed depth/params/FLOPs against the published reference
values the cost model is calibrated to reproduce (within 2%).
"""

import sys

import stagewise as sw

REFERENCE = {
    7: (44, 0.66e6, 97e6),
    9: (56, 0.86e6, 125e6),
    18: (110, 1.7e6, 253e6),
}


def main() -> int:
    header = (
        f"{'m':>3} {'depth':>6} {'params':>10} {'ref':>8} {'err':>7} "
        f"{'flops':>8} {'ref':>7} {'err':>7} {'mem MiB':>8}"
    )
    print(header)
    print("-" * len(header))
    for m in sorted(REFERENCE):
        a = sw.default_low_resolution(m)
        ref_depth, ref_params, ref_flops = REFERENCE[m]
        p, f = sw.params(a), sw.flops(a)
        assert sw.depth(a) == ref_depth
        print(
            f"{m:>3} {sw.depth(a):>6} {p:>10,} {ref_params / 1e6:>7.2f}M "
            f"{p / ref_params - 1:>+6.2%} {f / 1e6:>7.1f}M {ref_flops / 1e6:>6.0f}M "
            f"{f / ref_flops - 1:>+6.2%} {sw.memory(a):>8.2f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
