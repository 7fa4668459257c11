"""Linear-rule width schedule for RegNet-style backbones."""

from __future__ import annotations

import math


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def regnet_widths(w_a: float, w_0: float, w_m: float, d: int):
    """Per-stage (width, depth) pairs from the linear width rule.

    Block i gets the provisional width w_0 + w_a * i, quantized to
    w_0 * w_m ** round(log(w_bar / w_0) / log(w_m)) and rounded to the
    nearest integer; consecutive equal widths form one stage.
    """
    if w_a <= 0 or w_0 <= 0:
        raise ValueError("w_a and w_0 must be positive")
    if w_m <= 1:
        raise ValueError("w_m must exceed 1")
    if d < 1:
        raise ValueError("depth must be >= 1")
    widths = []
    for i in range(d):
        w_bar = w_0 + w_a * i
        exponent = _round_half_up(math.log(w_bar / w_0) / math.log(w_m))
        widths.append(_round_half_up(w_0 * w_m**exponent))
    stages = []
    for w in widths:
        if stages and stages[-1][0] == w:
            stages[-1][1] += 1
        else:
            stages.append([w, 1])
    return [(w, n) for w, n in stages]
