"""Reference bias-table rows: (row name, p_flip, p(0 -> 1 | flip), bias rounded to three places)."""

import numpy as np

BIAS_TABLE = [
    ("horizontal_flip", 0.073, 0.436, -0.009),
    ("brightness", 0.192, 0.498, -0.001),
    ("black_h", 0.103, 0.586, 0.018),
    ("black_h, pale", 0.180, 0.937, 0.158),
    ("blond_h", 0.115, 0.413, -0.02),
    ("blond_h, pale", 0.155, 0.738, 0.073),
    ("brown_h", 0.099, 0.704, 0.041),
    ("brown_h, pale", 0.186, 0.942, 0.164),
    ("bangs", 0.106, 0.526, 0.005),
]


def label_pairs(p_flip: float, p_01: float, n: int = 1_000_000):
    """``(y_r, y_c)`` rows realizing the given rates on ``n`` pairs (half the non-flips each way)."""
    flips = round(p_flip * n)
    n01 = round(p_01 * flips)
    n10 = flips - n01
    stay = n - flips
    n00 = stay // 2
    n11 = stay - n00
    cells = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int64)
    return np.repeat(cells, [n00, n01, n10, n11], axis=0)
