"""7x7 binomial Gaussian smoothing with integer arithmetic.

The kernel is the outer product of the binomial row [1, 6, 15, 20, 15, 6, 1]
with itself (sum 4096), so normalization is a shift by 12. Borders are
clamp-replicated. All multiplications have constant multiplicands.
"""

from __future__ import annotations

import numpy as np

from .imgcore import GrayImage

BINOMIAL_ROW = np.array([1, 6, 15, 20, 15, 6, 1], dtype=np.int64)
KERNEL7 = np.outer(BINOMIAL_ROW, BINOMIAL_ROW)
KERNEL_SUM = int(KERNEL7.sum())  # 4096
SHIFT = 12


def gaussian7_int(arr: np.ndarray) -> np.ndarray:
    """Convolve an integer array with the 7x7 binomial kernel.

    Output pixel = (sum of kernel * clamped neighborhood + 2048) >> 12.
    Accepts any integer dtype; returns int64 with the input's dimensions.
    """
    a = np.asarray(arr, dtype=np.int64)
    h, w = a.shape
    if h < 7 or w < 7:
        raise ValueError(f"image too small for a 7x7 kernel: {w}x{h}")
    padded = np.pad(a, 3, mode="edge")
    acc = np.zeros((h, w), dtype=np.int64)
    for ky in range(7):
        for kx in range(7):
            acc += KERNEL7[ky, kx] * padded[ky : ky + h, kx : kx + w]
    return (acc + (1 << (SHIFT - 1))) >> SHIFT


def gaussian7(img: GrayImage) -> GrayImage:
    smoothed = gaussian7_int(img.data)
    return GrayImage(smoothed.astype(np.uint8))
