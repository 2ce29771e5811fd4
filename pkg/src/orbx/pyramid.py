"""Integer 5/6 bilinear downscaler and 4-level image pyramid.

The scale factor 1.2 is treated as the exact fraction 6/5: every source
coordinate with x mod 6 == 5 produces no output pixel, and the remaining
positions are bilinearly resampled with integer weights that sum to 25.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import GrayImage

LEVELS = 4
MIN_LEVEL3_DIM = 41


@dataclass(frozen=True)
class BilinearWeights:
    """Weights on the 2x2 source neighborhood.

    w00 applies to (x, y), w01 to (x+1, y), w10 to (x, y+1), w11 to (x+1, y+1).
    """

    w00: int
    w01: int
    w10: int
    w11: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.w00, self.w01, self.w10, self.w11)


@dataclass(frozen=True)
class Pyramid:
    levels: tuple[GrayImage, ...]

    def __post_init__(self):
        if len(self.levels) != LEVELS:
            raise ValueError(f"pyramid must have {LEVELS} levels")


def bilinear_weights(x6: int, y6: int) -> BilinearWeights:
    """Integer weights for a resampled pixel at sub-position (x6, y6).

    x6 and y6 are the source coordinates modulo 6; the value 5 marks the
    skipped column/row and has no weights.
    """
    for v in (x6, y6):
        if not 0 <= v <= 4:
            raise ValueError(f"invalid sample position: coordinate mod 6 = {v}")
    return BilinearWeights(
        w00=(5 - x6) * (5 - y6),
        w01=x6 * (5 - y6),
        w10=(5 - x6) * y6,
        w11=x6 * y6,
    )


def _output_axis(n: int) -> np.ndarray:
    """Source coordinates that survive the mod-6 rule, in order."""
    coords = np.arange(n)
    return coords[coords % 6 != 5]


def output_dim(n: int) -> int:
    return int(np.count_nonzero(np.arange(n) % 6 != 5))


def downscale(img: GrayImage) -> GrayImage:
    """One 5/6 downscaling step with round-half-up and clamped borders."""
    h, w = img.height, img.width
    if w < 7 or h < 7:
        raise ValueError(f"image too small to downscale: {w}x{h}")
    xs = _output_axis(w)
    ys = _output_axis(h)
    fx = xs % 6  # in [0, 4]
    fy = ys % 6
    x1 = np.minimum(xs + 1, w - 1)
    y1 = np.minimum(ys + 1, h - 1)

    src = img.data.astype(np.int32)
    a = src[np.ix_(ys, xs)]
    b = src[np.ix_(ys, x1)]
    c = src[np.ix_(y1, xs)]
    d = src[np.ix_(y1, x1)]

    wx1 = fx[np.newaxis, :]
    wx0 = 5 - wx1
    wy1 = fy[:, np.newaxis]
    wy0 = 5 - wy1

    acc = wx0 * wy0 * a + wx1 * wy0 * b + wx0 * wy1 * c + wx1 * wy1 * d
    out = (acc + 12) // 25
    return GrayImage(out.astype(np.uint8))


def build_pyramid(img: GrayImage) -> Pyramid:
    """Original image plus three successive 5/6 downscalings."""
    dims = [(img.width, img.height)]
    for _ in range(LEVELS - 1):
        w, h = dims[-1]
        dims.append((output_dim(w), output_dim(h)))
    w3, h3 = dims[-1]
    if w3 < MIN_LEVEL3_DIM or h3 < MIN_LEVEL3_DIM:
        raise ValueError(
            f"input {img.width}x{img.height} leaves level 3 at {w3}x{h3}, "
            f"below the {MIN_LEVEL3_DIM}-pixel minimum"
        )
    levels = [img]
    for _ in range(LEVELS - 1):
        levels.append(downscale(levels[-1]))
    return Pyramid(tuple(levels))
