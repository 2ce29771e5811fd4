"""BRIEF pattern handling, fixed-point pair rotation, 256-bit descriptors and
the multi-unit dispatch timing model.

Patterns live in a 27x27 patch so that any rotation stays inside the 37x37
window (corner pairs overshoot by 0.38 px and are clipped). Descriptor bit i
is stored in byte i//8 at bit position i%8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .orient import TrigFx

PATTERN_SIZE = 256
PATCH_HALF = 13         # pattern coordinates in [-13, 13]
WINDOW_HALF = 18        # rotated coordinates clipped to [-18, 18]
DESCRIPTOR_BYTES = 32

# unit occupancy: 256 pattern rotations + window lookup + descriptor
# generation + 37 cycles to reload the window
ROTATE_CYCLES = PATTERN_SIZE
LOOKUP_CYCLES = 1
GENERATE_CYCLES = 1
RELOAD_CYCLES = 37
UNIT_BUSY_CYCLES = ROTATE_CYCLES + LOOKUP_CYCLES + GENERATE_CYCLES + RELOAD_CYCLES

DEFAULT_UNITS = 4
_DEFAULT_PATTERN_SEED = 59602
_DEFAULT_SIGMA = 27 / 5


class PatternError(ValueError):
    """Raised when a BRIEF pattern file is invalid."""


@dataclass(frozen=True)
class BriefPattern:
    """256 comparison pairs as an int32 array of rows (xA, yA, xB, yB)."""

    pairs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pairs, dtype=np.int32)
        if arr.shape != (PATTERN_SIZE, 4):
            raise PatternError(
                f"pattern must have {PATTERN_SIZE} pairs, got {arr.shape}"
            )
        if np.abs(arr).max() > PATCH_HALF:
            raise PatternError(
                f"pattern coordinates must lie in [-{PATCH_HALF}, {PATCH_HALF}]"
            )
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "pairs", arr)


def load_pattern(path) -> BriefPattern:
    """Read a pattern file: 256 lines of "xA yA xB yB", '#' comments allowed."""
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 4:
                raise PatternError(f"line {lineno}: expected 4 coordinates")
            try:
                rows.append([int(p) for p in parts])
            except ValueError as exc:
                raise PatternError(f"line {lineno}: {exc}") from None
    if len(rows) != PATTERN_SIZE:
        raise PatternError(f"expected {PATTERN_SIZE} pairs, got {len(rows)}")
    return BriefPattern(np.array(rows, dtype=np.int32))


def save_pattern(path, pattern: BriefPattern) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# xA yA xB yB\n")
        for xa, ya, xb, yb in pattern.pairs:
            fh.write(f"{xa} {ya} {xb} {yb}\n")


@lru_cache(maxsize=1)
def default_pattern() -> BriefPattern:
    """Fixed-seed Gaussian pattern, sigma 27/5, clipped to the 27x27 patch.

    Pairs with identical endpoints are redrawn so every comparison is
    informative.
    """
    rng = np.random.default_rng(_DEFAULT_PATTERN_SEED)
    rows = []
    while len(rows) < PATTERN_SIZE:
        c = np.clip(
            np.rint(rng.normal(0.0, _DEFAULT_SIGMA, 4)), -PATCH_HALF, PATCH_HALF
        ).astype(np.int32)
        if c[0] == c[2] and c[1] == c[3]:
            continue
        rows.append(c)
    return BriefPattern(np.array(rows, dtype=np.int32))


def rotate_coord(x: int, y: int, cos_v: int, sin_v: int) -> tuple[int, int]:
    """Rotate one pattern coordinate with signed Q0.8 trig values.

    Round-half-up via the +128 bias, then clip into the 37x37 window.
    """
    xr = (x * cos_v - y * sin_v + 128) >> 8
    yr = (x * sin_v + y * cos_v + 128) >> 8
    if xr > WINDOW_HALF:
        xr = WINDOW_HALF
    elif xr < -WINDOW_HALF:
        xr = -WINDOW_HALF
    if yr > WINDOW_HALF:
        yr = WINDOW_HALF
    elif yr < -WINDOW_HALF:
        yr = -WINDOW_HALF
    return xr, yr


def rotate_pair(pair, trig: TrigFx) -> tuple[int, int, int, int]:
    xa, ya, xb, yb = (int(v) for v in pair)
    c, s = trig.cos_value, trig.sin_value
    ax, ay = rotate_coord(xa, ya, c, s)
    bx, by = rotate_coord(xb, yb, c, s)
    return ax, ay, bx, by


def rotate_pattern_float(pattern: BriefPattern, angle: float) -> np.ndarray:
    """Reference rotation: exact trig, round half up, same clipping."""
    c, s = math.cos(angle), math.sin(angle)
    coords = pattern.pairs.astype(np.float64)
    xs = coords[:, [0, 2]]
    ys = coords[:, [1, 3]]
    xr = np.floor(xs * c - ys * s + 0.5)
    yr = np.floor(xs * s + ys * c + 0.5)
    out = np.empty_like(pattern.pairs)
    out[:, [0, 2]] = np.clip(xr, -WINDOW_HALF, WINDOW_HALF)
    out[:, [1, 3]] = np.clip(yr, -WINDOW_HALF, WINDOW_HALF)
    return out


def describe(window: np.ndarray, pattern: BriefPattern, trig: TrigFx) -> bytes:
    """256-bit descriptor of a 37x37 smoothed patch under a sector rotation.

    Bit i is set when the rotated A endpoint is strictly brighter than the
    rotated B endpoint.
    """
    win = np.asarray(window)
    if win.shape != (2 * WINDOW_HALF + 1, 2 * WINDOW_HALF + 1):
        raise ValueError("describe expects a 37x37 window")
    c, s = trig.cos_value, trig.sin_value
    desc = bytearray(DESCRIPTOR_BYTES)
    for i in range(PATTERN_SIZE):
        xa, ya, xb, yb = pattern.pairs[i]
        ax, ay = rotate_coord(int(xa), int(ya), c, s)
        bx, by = rotate_coord(int(xb), int(yb), c, s)
        va = win[WINDOW_HALF + ay, WINDOW_HALF + ax]
        vb = win[WINDOW_HALF + by, WINDOW_HALF + bx]
        if va > vb:
            desc[i >> 3] |= 1 << (i & 7)
    return bytes(desc)


def describe_bulk(window: np.ndarray, pattern: BriefPattern, cos_v: int, sin_v: int) -> bytes:
    """Vectorized describe used by the batch pipeline; bit-identical."""
    pairs = pattern.pairs.astype(np.int64)
    xs = pairs[:, [0, 2]]
    ys = pairs[:, [1, 3]]
    xr = np.clip((xs * cos_v - ys * sin_v + 128) >> 8, -WINDOW_HALF, WINDOW_HALF)
    yr = np.clip((xs * sin_v + ys * cos_v + 128) >> 8, -WINDOW_HALF, WINDOW_HALF)
    win = np.asarray(window)
    va = win[WINDOW_HALF + yr[:, 0], WINDOW_HALF + xr[:, 0]]
    vb = win[WINDOW_HALF + yr[:, 1], WINDOW_HALF + xr[:, 1]]
    bits = (va > vb).astype(np.uint8)
    return np.packbits(bits, bitorder="little").tobytes()


def dispatch(arrivals, k_units: int):
    """Discrete-event model of the BRIEF unit pool.

    `arrivals` is a sequence of (cycle, item) with non-decreasing cycles.
    Each accepted item occupies one unit for UNIT_BUSY_CYCLES cycles; an
    arrival with every unit busy is dropped. k_units <= 0 means unlimited.

    Returns (accepted, dropped) as lists of the original (cycle, item) pairs.
    """
    accepted = []
    dropped = []
    busy_until = [0] * max(k_units, 0)
    last_t = None
    for t, item in arrivals:
        if last_t is not None and t < last_t:
            raise ValueError("arrival cycles must be non-decreasing")
        last_t = t
        if k_units <= 0:
            accepted.append((t, item))
            continue
        for u in range(k_units):
            if busy_until[u] <= t:
                busy_until[u] = t + UNIT_BUSY_CYCLES
                accepted.append((t, item))
                break
        else:
            dropped.append((t, item))
    return accepted, dropped
