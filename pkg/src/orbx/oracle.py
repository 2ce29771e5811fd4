"""Full-precision floating-point reference for every approximated stage.

The reference pipeline keeps the stage order of the fixed-point path but
uses exact bilinear resampling, a true sigma-2 Gaussian, float moments with
an exact arctangent, exact pattern rotation and full 8-bit pixels, with no
descriptor drops. Comparing the two quantifies each hardware approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fastdet, pyramid, rbrief
from .imgcore import GrayImage
from .matcher import hamming
from .pipeline import BORDER, Keypoint, MIN_LEVEL_DIM, PipelineConfig, level0_coords
from .rbrief import WINDOW_HALF

GAUSS_SIGMA = 2.0


@dataclass
class RefKeypoint:
    x: int
    y: int
    level: int
    score: float
    angle: float  # radians, exact atan2 of the float moments
    degenerate: bool
    descriptor: bytes
    x0: int = 0
    y0: int = 0


def ref_orientation(window: np.ndarray) -> tuple[float, bool]:
    """Exact centroid angle of a 37x37 window; flags a degenerate centroid."""
    win = np.asarray(window, dtype=np.float64)
    if win.shape != (37, 37):
        raise ValueError("window must be 37x37")
    coords = np.arange(-18, 19, dtype=np.float64)
    m10 = float((win * coords[np.newaxis, :]).sum())
    m01 = float((win * coords[:, np.newaxis]).sum())
    if m10 == 0.0 and m01 == 0.0:
        return 0.0, True
    return math.atan2(m01, m10), False


def _gauss_kernel7(sigma: float) -> np.ndarray:
    xs = np.arange(-3, 4, dtype=np.float64)
    row = np.exp(-(xs**2) / (2 * sigma * sigma))
    k = np.outer(row, row)
    return k / k.sum()


def _convolve7(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    h, w = img.shape
    padded = np.pad(img, 3, mode="edge")
    out = np.zeros((h, w), dtype=np.float64)
    for ky in range(7):
        for kx in range(7):
            out += kernel[ky, kx] * padded[ky : ky + h, kx : kx + w]
    return out


def ref_downscale(img: np.ndarray) -> np.ndarray:
    """Exact bilinear 5/6 resampling on float pixels (same output grid)."""
    h, w = img.shape
    xs = pyramid._output_axis(w)
    ys = pyramid._output_axis(h)
    fx = (xs % 6) / 5.0
    fy = (ys % 6) / 5.0
    x1 = np.minimum(xs + 1, w - 1)
    y1 = np.minimum(ys + 1, h - 1)
    a = img[np.ix_(ys, xs)]
    b = img[np.ix_(ys, x1)]
    c = img[np.ix_(y1, xs)]
    d = img[np.ix_(y1, x1)]
    wx1 = fx[np.newaxis, :]
    wy1 = fy[:, np.newaxis]
    return (
        (1 - wx1) * (1 - wy1) * a
        + wx1 * (1 - wy1) * b
        + (1 - wx1) * wy1 * c
        + wx1 * wy1 * d
    )


def _ref_score_map(img: np.ndarray, threshold: float) -> np.ndarray:
    h, w = img.shape
    scores = np.zeros((h, w), dtype=np.float64)
    r = 3
    center = img[r : h - r, r : w - r]
    bright = np.zeros(center.shape, dtype=np.int32)
    dark = np.zeros(center.shape, dtype=np.int32)
    sad = np.zeros(center.shape, dtype=np.float64)
    for i, (dx, dy) in enumerate(fastdet.RING_OFFSETS):
        ring = img[r + dy : h - r + dy, r + dx : w - r + dx]
        diff = ring - center
        bright |= (diff > threshold).astype(np.int32) << i
        dark |= (diff < -threshold).astype(np.int32) << i
        sad += np.abs(diff)
    corner = fastdet._contig9(bright) | fastdet._contig9(dark)
    scores[r : h - r, r : w - r] = np.where(corner, sad, 0.0)
    return scores


def _describe_float(window: np.ndarray, pattern: rbrief.BriefPattern, angle: float) -> bytes:
    rotated = rbrief.rotate_pattern_float(pattern, angle)
    desc = bytearray(rbrief.DESCRIPTOR_BYTES)
    for i in range(rbrief.PATTERN_SIZE):
        ax, ay, bx, by = rotated[i]
        va = window[WINDOW_HALF + ay, WINDOW_HALF + ax]
        vb = window[WINDOW_HALF + by, WINDOW_HALF + bx]
        if va > vb:
            desc[i >> 3] |= 1 << (i & 7)
    return bytes(desc)


def ref_pipeline(img: GrayImage, cfg: PipelineConfig | None = None) -> list[RefKeypoint]:
    """Float reference extraction over the 4-level pyramid (no drops)."""
    if cfg is None:
        cfg = PipelineConfig()
    levels = [img.data.astype(np.float64)]
    for _ in range(pyramid.LEVELS - 1):
        levels.append(ref_downscale(levels[-1]))

    out: list[RefKeypoint] = []
    for level, data in enumerate(levels):
        h, w = data.shape
        if w < MIN_LEVEL_DIM or h < MIN_LEVEL_DIM:
            raise ValueError(f"level {level} is {w}x{h}, too small")
        scores = _ref_score_map(data, float(cfg.threshold))
        keep = fastdet.nms_mask(scores)
        ys, xs = np.nonzero(keep)
        inside = (
            (xs >= BORDER)
            & (xs <= w - 1 - BORDER)
            & (ys >= BORDER)
            & (ys <= h - 1 - BORDER)
        )
        xs, ys = xs[inside], ys[inside]
        smoothed = _convolve7(data, _gauss_kernel7(GAUSS_SIGMA))
        for x, y in zip(xs, ys):
            x, y = int(x), int(y)
            window = smoothed[y - 18 : y + 19, x - 18 : x + 19]
            angle, degen = ref_orientation(window)
            out.append(
                RefKeypoint(
                    x=x,
                    y=y,
                    level=level,
                    score=float(scores[y, x]),
                    angle=angle,
                    degenerate=degen,
                    descriptor=_describe_float(window, cfg.pattern, angle),
                    x0=level0_coords(x, level),
                    y0=level0_coords(y, level),
                )
            )
    return out


@dataclass
class FrameComparison:
    fixed_count: int
    ref_count: int
    common: int
    symdiff_rate: float
    mean_hamming: float
    agreement: float  # 1 - mean_hamming / 256 over common keypoints


def compare_runs(fixed: list[Keypoint], ref: list[RefKeypoint]) -> FrameComparison:
    """Positional set difference plus descriptor divergence on common points."""
    fixed_map = {(k.level, k.x, k.y): k for k in fixed}
    ref_map = {(k.level, k.x, k.y): k for k in ref}
    common_keys = fixed_map.keys() & ref_map.keys()
    union = fixed_map.keys() | ref_map.keys()
    distances = [
        hamming(fixed_map[key].descriptor, ref_map[key].descriptor)
        for key in common_keys
        if fixed_map[key].descriptor is not None
    ]
    mean_h = float(np.mean(distances)) if distances else 0.0
    return FrameComparison(
        fixed_count=len(fixed),
        ref_count=len(ref),
        common=len(common_keys),
        symdiff_rate=(len(union) - len(common_keys)) / len(union) if union else 0.0,
        mean_hamming=mean_h,
        agreement=1.0 - mean_h / 256.0,
    )


DEGRADATION_COLUMNS = (
    "frame,fixed_keypoints,ref_keypoints,common,symdiff_rate,mean_hamming,agreement"
)


def write_degradation_csv(path, rows: list[tuple[str, FrameComparison]], config_echo: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# config: {config_echo}\n")
        fh.write(DEGRADATION_COLUMNS + "\n")
        for name, c in rows:
            fh.write(
                f"{name},{c.fixed_count},{c.ref_count},{c.common},"
                f"{c.symdiff_rate:.6f},{c.mean_hamming:.3f},{c.agreement:.6f}\n"
            )
