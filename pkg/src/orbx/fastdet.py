"""FAST-9/16 corner test on the radius-3 Bresenham ring, SAD score and 3x3 NMS.

Corner classification follows the bitmask formulation: sixteen 16-bit masks,
one per cyclic window of 9 contiguous ring positions, are tested against the
bright/dark comparison vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_THRESHOLD = 20
RING_RADIUS = 3
ARC_LENGTH = 9

# Clockwise from the topmost pixel, (dx, dy) with y pointing down.
RING_OFFSETS: tuple[tuple[int, int], ...] = (
    (0, -3), (1, -3), (2, -2), (3, -1),
    (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1),
    (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)

# Mask k has ones at cyclic positions k .. k+8.
CONTIG_MASKS: tuple[int, ...] = tuple(
    ((0x1FF << k) | (0x1FF >> (16 - k))) & 0xFFFF for k in range(16)
)


@dataclass(frozen=True)
class CornerResult:
    is_corner: bool
    score: int


def ring_offsets() -> tuple[tuple[int, int], ...]:
    """The 16 radius-3 Bresenham ring offsets, clockwise from (0, -3)."""
    return RING_OFFSETS


def has_contiguous_arc(bits: int) -> bool:
    """True if some cyclic run of 9 consecutive bits is set in the 16-bit word."""
    for mask in CONTIG_MASKS:
        if bits & mask == mask:
            return True
    return False


def classify(ring: "list[int] | np.ndarray", center: int, threshold: int) -> CornerResult:
    """Classify one ring sample and compute its SAD score.

    A corner needs 9 contiguous ring pixels all brighter than center+threshold
    or all darker than center-threshold. The score sums |ring - center| over
    all 16 ring pixels and is zero for non-corners.
    """
    if len(ring) != 16:
        raise ValueError("ring sample must have 16 pixels")
    bright = 0
    dark = 0
    sad = 0
    hi = center + threshold
    lo = center - threshold
    for i, v in enumerate(ring):
        v = int(v)
        if v > hi:
            bright |= 1 << i
        elif v < lo:
            dark |= 1 << i
        sad += abs(v - center)
    if has_contiguous_arc(bright) or has_contiguous_arc(dark):
        return CornerResult(True, sad)
    return CornerResult(False, 0)


def _rotl16(v: np.ndarray, k: int) -> np.ndarray:
    return ((v << k) | (v >> (16 - k))) & 0xFFFF


def _contig9(v: np.ndarray) -> np.ndarray:
    # run-length doubling: marks any cyclic run of >= 9 set bits
    r2 = v & _rotl16(v, 1)
    r4 = r2 & _rotl16(r2, 2)
    r8 = r4 & _rotl16(r4, 4)
    return (r8 & _rotl16(v, 8)) != 0


def score_map(img: np.ndarray, threshold: int) -> np.ndarray:
    """SAD corner-score map for a whole image (vectorized).

    Positions within 3 pixels of the border are never classified and carry
    score 0, as do non-corners.
    """
    h, w = img.shape
    scores = np.zeros((h, w), dtype=np.int32)
    if h < 7 or w < 7:
        return scores
    r = RING_RADIUS
    center = img[r : h - r, r : w - r].astype(np.int32)
    bright = np.zeros(center.shape, dtype=np.int32)
    dark = np.zeros(center.shape, dtype=np.int32)
    sad = np.zeros(center.shape, dtype=np.int32)
    for i, (dx, dy) in enumerate(RING_OFFSETS):
        ring = img[r + dy : h - r + dy, r + dx : w - r + dx].astype(np.int32)
        diff = ring - center
        bright |= (diff > threshold).astype(np.int32) << i
        dark |= (diff < -threshold).astype(np.int32) << i
        sad += np.abs(diff)
    corner = _contig9(bright) | _contig9(dark)
    scores[r : h - r, r : w - r] = np.where(corner, sad, 0)
    return scores


def nms3x3(window: np.ndarray) -> bool:
    """Keep decision for the center of a 3x3 score window.

    The center must beat earlier raster neighbors strictly and later ones
    non-strictly, so exactly one of two equal adjacent corners survives.
    """
    window = np.asarray(window)
    if window.shape != (3, 3):
        raise ValueError("nms3x3 expects a 3x3 window")
    c = int(window[1, 1])
    if c <= 0:
        raise ValueError("center score must be positive")
    before = (window[0, 0], window[0, 1], window[0, 2], window[1, 0])
    after = (window[1, 2], window[2, 0], window[2, 1], window[2, 2])
    return all(c > int(v) for v in before) and all(c >= int(v) for v in after)


def nms_mask(scores: np.ndarray) -> np.ndarray:
    """Vectorized 3x3 non-maximum suppression over a score map."""
    h, w = scores.shape
    p = np.zeros((h + 2, w + 2), dtype=scores.dtype)
    p[1 : h + 1, 1 : w + 1] = scores
    c = p[1 : h + 1, 1 : w + 1]
    keep = (
        (c > 0)
        & (c > p[0:h, 0:w])        # up-left
        & (c > p[0:h, 1 : w + 1])  # up
        & (c > p[0:h, 2 : w + 2])  # up-right
        & (c > p[1 : h + 1, 0:w])  # left
        & (c >= p[1 : h + 1, 2 : w + 2])  # right
        & (c >= p[2 : h + 2, 0:w])        # down-left
        & (c >= p[2 : h + 2, 1 : w + 1])  # down
        & (c >= p[2 : h + 2, 2 : w + 2])  # down-right
    )
    return keep
