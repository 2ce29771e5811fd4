"""Per-level and per-frame extraction orchestration.

The streaming path emulates the line-buffered single-pass datapath (one
pixel per level-local cycle); the batch path composes the same stages as
whole-image operations and serves as its reference. With unlimited BRIEF
units the two produce bit-identical keypoints and descriptors.

Cycle model: a keypoint centered at (x, y) has its 37x37 smoothed window
complete 21 rows and 21 columns after the raw pixel stream passes it, so it
dispatches at cycle (y+21)*width + x + 21. A level of W x H pixels occupies
W*H cycles plus a constant drain of 3*W + 260 (worst-case dispatch overhang
plus the 258-cycle descriptor pipeline).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import _stream, fastdet, orient, pyramid, rbrief, smooth
from .imgcore import GrayImage, quantize_pixels

BORDER = 18
MIN_LEVEL_DIM = 41
FLUSH_BASE = 260  # 2 columns of dispatch overhang + 258-cycle descriptor pipe
DEFAULT_NMAX = 1000

ORBX_MAGIC = b"ORBX"
ORBX_VERSION = 1
_ORBX_HEADER = struct.Struct("<4sBI")
_ORBX_RECORD = struct.Struct("<HHBBHHH32s")


@dataclass(frozen=True)
class PipelineConfig:
    threshold: int = fastdet.DEFAULT_THRESHOLD
    sectors: int = orient.DEFAULT_SECTORS
    pixel_bits: int = 6
    brief_units: int = rbrief.DEFAULT_UNITS  # <= 0 means unlimited
    nmax: int = DEFAULT_NMAX
    pattern: rbrief.BriefPattern = field(default_factory=rbrief.default_pattern)
    backend: str = "auto"

    def __post_init__(self):
        if self.threshold < 1:
            raise ValueError("threshold must be >= 1")
        if self.nmax < 1:
            raise ValueError("nmax must be >= 1")

    def unlimited_units(self) -> "PipelineConfig":
        return replace(self, brief_units=0)


@dataclass
class Keypoint:
    x: int
    y: int
    level: int
    score: int
    sector: int
    descriptor: bytes | None
    dropped: bool = False
    degenerate: bool = False
    dispatch_cycle: int = 0
    x0: int = 0  # level-0 frame coordinates
    y0: int = 0


@dataclass
class LevelStats:
    level: int
    width: int
    height: int
    pixels: int
    cycles: int
    cycles_l0: int
    corners_pre_nms: int
    keypoints: int
    descriptors: int
    dropped: int


@dataclass
class FrameResult:
    keypoints: list[Keypoint]       # after top-K retention
    stats: list[LevelStats]
    keypoints_all: list[Keypoint] = field(default_factory=list)  # before retention

    def totals(self) -> dict:
        return {
            "pixels": sum(s.pixels for s in self.stats),
            "cycles_l0_max": max(s.cycles_l0 for s in self.stats),
            "corners_pre_nms": sum(s.corners_pre_nms for s in self.stats),
            "keypoints": sum(s.keypoints for s in self.stats),
            "descriptors": sum(s.descriptors for s in self.stats),
            "dropped": sum(s.dropped for s in self.stats),
        }


def dispatch_cycle(x: int, y: int, width: int) -> int:
    """Level-local cycle at which the keypoint's window completes."""
    return (y + BORDER + 3) * width + x + BORDER + 3


def level_cycles(width: int, height: int) -> int:
    return width * height + 3 * width + FLUSH_BASE


def _check_size(img: GrayImage) -> None:
    if img.width < MIN_LEVEL_DIM or img.height < MIN_LEVEL_DIM:
        raise ValueError(
            f"level image {img.width}x{img.height} is below the "
            f"{MIN_LEVEL_DIM}-pixel minimum"
        )


def _level_stats(level: int, img: GrayImage, corners: int, kps: list[Keypoint]) -> LevelStats:
    cycles = level_cycles(img.width, img.height)
    scale = (6 / 5) ** level
    return LevelStats(
        level=level,
        width=img.width,
        height=img.height,
        pixels=img.width * img.height,
        cycles=cycles,
        cycles_l0=round(cycles * scale),
        corners_pre_nms=corners,
        keypoints=len(kps),
        descriptors=sum(1 for k in kps if not k.dropped),
        dropped=sum(1 for k in kps if k.dropped),
    )


def run_level(img: GrayImage, cfg: PipelineConfig, level: int = 0) -> tuple[list[Keypoint], LevelStats]:
    """Streaming single-pass extraction of one pyramid level."""
    _check_size(img)
    quant = quantize_pixels(img, cfg.pixel_bits)
    cos_t, sin_t = orient.trig_tables(cfg.sectors)
    backend = _stream.get_backend(cfg.backend)
    res = backend.run_level_stream(
        img.data,
        quant.data,
        cfg.threshold,
        cfg.sectors,
        np.asarray(orient.tanfx_table(cfg.sectors), dtype=np.int64),
        cos_t,
        sin_t,
        cfg.pattern.pairs,
        cfg.brief_units,
    )
    kps = []
    desc = res["descriptors"]
    for i in range(len(res["x"])):
        dropped = bool(res["dropped"][i])
        kps.append(
            Keypoint(
                x=int(res["x"][i]),
                y=int(res["y"][i]),
                level=level,
                score=int(res["score"][i]),
                sector=int(res["sector"][i]),
                descriptor=None if dropped else desc[i].tobytes(),
                dropped=dropped,
                degenerate=bool(res["degenerate"][i]),
                dispatch_cycle=int(res["dispatch_cycle"][i]),
            )
        )
    stats = _level_stats(level, img, int(res["corners_pre_nms"]), kps)
    assert stats.cycles == res["cycles"]
    return kps, stats


def batch_level(img: GrayImage, cfg: PipelineConfig, level: int = 0) -> tuple[list[Keypoint], LevelStats]:
    """Whole-image stage composition; the streaming path's reference."""
    _check_size(img)
    scores = fastdet.score_map(img.data, cfg.threshold)
    keep = fastdet.nms_mask(scores)
    ys, xs = np.nonzero(keep)
    w, h = img.width, img.height
    inside = (
        (xs >= BORDER) & (xs <= w - 1 - BORDER) & (ys >= BORDER) & (ys <= h - 1 - BORDER)
    )
    xs, ys = xs[inside], ys[inside]

    quant = quantize_pixels(img, cfg.pixel_bits)
    smoothed = smooth.gaussian7_int(quant.data)
    cos_t, sin_t = orient.trig_tables(cfg.sectors)

    arrivals = [(dispatch_cycle(int(x), int(y), w), i) for i, (x, y) in enumerate(zip(xs, ys))]
    _, dropped_items = rbrief.dispatch(arrivals, cfg.brief_units)
    dropped_idx = {i for _, i in dropped_items}

    kps = []
    for i, (x, y) in enumerate(zip(xs, ys)):
        x, y = int(x), int(y)
        window = smoothed[y - BORDER : y + BORDER + 1, x - BORDER : x + BORDER + 1]
        m00, m10, m01 = orient.window_moments(window)
        sa = orient.quantize_angle(m10, m01, cfg.sectors)
        dropped = i in dropped_idx
        if dropped:
            descriptor = None
        else:
            descriptor = rbrief.describe_bulk(
                window, cfg.pattern, int(cos_t[sa.global_sector]), int(sin_t[sa.global_sector])
            )
        kps.append(
            Keypoint(
                x=x,
                y=y,
                level=level,
                score=int(scores[y, x]),
                sector=sa.global_sector,
                descriptor=descriptor,
                dropped=dropped,
                degenerate=sa.degenerate,
                dispatch_cycle=dispatch_cycle(x, y, w),
            )
        )
    stats = _level_stats(level, img, int(np.count_nonzero(scores)), kps)
    return kps, stats


def level0_coords(x: int, level: int) -> int:
    """Map a level-local coordinate to the level-0 frame, rounding half up."""
    num = 6**level
    den = 5**level
    return (2 * x * num + den) // (2 * den)


def top_k(keypoints: list[Keypoint], n_max: int) -> list[Keypoint]:
    """Retain the n_max highest-scoring keypoints.

    Ties break by (level, y, x) ascending; the survivors come back in
    (level, y, x) order.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    ranked = sorted(keypoints, key=lambda k: (-k.score, k.level, k.y, k.x))
    kept = ranked[:n_max]
    kept.sort(key=lambda k: (k.level, k.y, k.x))
    return kept


def run_frame(img: GrayImage, cfg: PipelineConfig, batch: bool = False) -> FrameResult:
    """Extract over all four pyramid levels and merge with top-K retention."""
    pyr = pyramid.build_pyramid(img)
    run = batch_level if batch else run_level
    merged: list[Keypoint] = []
    stats: list[LevelStats] = []
    for level, level_img in enumerate(pyr.levels):
        kps, st = run(level_img, cfg, level)
        for kp in kps:
            kp.x0 = level0_coords(kp.x, level)
            kp.y0 = level0_coords(kp.y, level)
        merged.extend(kps)
        stats.append(st)
    return FrameResult(
        keypoints=top_k(merged, cfg.nmax), stats=stats, keypoints_all=merged
    )


def write_features(path, keypoints: list[Keypoint]) -> None:
    """Binary feature dump; only descriptor-bearing keypoints are written."""
    described = [k for k in keypoints if k.descriptor is not None]
    with open(path, "wb") as fh:
        fh.write(_ORBX_HEADER.pack(ORBX_MAGIC, ORBX_VERSION, len(described)))
        for k in described:
            fh.write(
                _ORBX_RECORD.pack(
                    k.x, k.y, k.level, k.sector, k.score, k.x0, k.y0, k.descriptor
                )
            )


def read_features(path) -> list[Keypoint]:
    with open(path, "rb") as fh:
        head = fh.read(_ORBX_HEADER.size)
        if len(head) < _ORBX_HEADER.size:
            raise ValueError("feature dump too short")
        magic, version, count = _ORBX_HEADER.unpack(head)
        if magic != ORBX_MAGIC:
            raise ValueError("not an ORBX feature dump")
        if version != ORBX_VERSION:
            raise ValueError(f"unsupported ORBX version {version}")
        kps = []
        for _ in range(count):
            rec = fh.read(_ORBX_RECORD.size)
            if len(rec) < _ORBX_RECORD.size:
                raise ValueError("truncated feature dump")
            x, y, level, sector, score, x0, y0, desc = _ORBX_RECORD.unpack(rec)
            kps.append(
                Keypoint(
                    x=x, y=y, level=level, score=score, sector=sector,
                    descriptor=desc, x0=x0, y0=y0,
                )
            )
    return kps


STATS_COLUMNS = (
    "level,width,height,pixels,cycles,cycles_l0,corners_pre_nms,"
    "keypoints,descriptors,dropped"
)


def write_stats_csv(path, result: FrameResult, config_echo: str) -> None:
    """Per-level stats plus a totals row (cycles_l0 column: max over levels)."""
    tot = result.totals()
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# config: {config_echo}\n")
        fh.write(STATS_COLUMNS + "\n")
        for s in result.stats:
            fh.write(
                f"{s.level},{s.width},{s.height},{s.pixels},{s.cycles},"
                f"{s.cycles_l0},{s.corners_pre_nms},{s.keypoints},"
                f"{s.descriptors},{s.dropped}\n"
            )
        fh.write(
            f"total,,,{tot['pixels']},,{tot['cycles_l0_max']},"
            f"{tot['corners_pre_nms']},{tot['keypoints']},"
            f"{tot['descriptors']},{tot['dropped']}\n"
        )
