"""Orientation from intensity moments: recursive 37x37 window sums, sector
quantization of the centroid angle, and 8-bit trig lookup.

Instead of an arctangent, the centroid angle is rounded to one of `nd`
sector centers. The quadrant comes from the moment signs; within the first
quadrant a ladder of comparators tests |m01| against |m10| * tan(center_k)
with tan held as a Q8.8 constant built from at most four powers of two.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

WINDOW = 37
HALF = WINDOW // 2  # 18
DEFAULT_SECTORS = 64
VALID_SECTOR_COUNTS = (16, 32, 64, 128)

_Y_WEIGHTS = tuple(range(-HALF, HALF + 1))

TAN_FRAC_BITS = 8
_TAN_MAX_TERMS = 4
_TAN_STOP_REL_ERR = 0.06
_TRIG_SCALE = 256
_TRIG_MAX = 255

# per-quadrant signs of (cos, sin)
_QUADRANT_SIGNS = ((1, 1), (-1, 1), (-1, -1), (1, -1))


@dataclass(frozen=True)
class SectorAngle:
    quadrant: int
    sector_in_quadrant: int
    global_sector: int
    nd: int
    degenerate: bool = False

    @property
    def center_radians(self) -> float:
        return (2 * self.global_sector + 1) * math.pi / self.nd

    @property
    def center_degrees(self) -> float:
        return (2 * self.global_sector + 1) * 180.0 / self.nd


@dataclass(frozen=True)
class TrigFx:
    """Sine/cosine of a sector center in unsigned 8-bit magnitude plus sign."""

    cos_mag: int
    sin_mag: int
    cos_sign: int
    sin_sign: int

    @property
    def cos_value(self) -> int:
        return self.cos_sign * self.cos_mag

    @property
    def sin_value(self) -> int:
        return self.sin_sign * self.sin_mag


class MomentState:
    """Running (m00, m10, m01) of a sliding 37-column window.

    Columns are fed left to right; the incoming column carries x-weight +18
    and each resident column's weight drops by one per step, which folds into
    the recursion through the running intensity sum. A 37-deep delay line
    replays the column sums and column y-moments as they leave the window.
    After 37 updates the state equals a direct evaluation over the window.
    """

    __slots__ = ("m00", "m10", "m01", "_delay")

    def __init__(self):
        self.m00 = 0
        self.m10 = 0
        self.m01 = 0
        self._delay: deque[tuple[int, int]] = deque()

    @property
    def filled(self) -> bool:
        return len(self._delay) == WINDOW

    def reset(self) -> None:
        self.m00 = 0
        self.m10 = 0
        self.m01 = 0
        self._delay.clear()

    def update(self, column) -> None:
        if len(column) != WINDOW:
            raise ValueError(f"column must have {WINDOW} pixels")
        s_in = 0
        m01_in = 0
        for y, v in zip(_Y_WEIGHTS, column):
            v = int(v)
            s_in += v
            m01_in += y * v
        self.update_sums(s_in, m01_in)

    def update_sums(self, s_in: int, m01_in: int) -> None:
        """Advance the recursion given the incoming column's precomputed sums."""
        if self.filled:
            s_out, m01_out = self._delay.popleft()
        else:
            s_out, m01_out = 0, 0
        self._delay.append((s_in, m01_in))
        # order matters: m10 consumes the previous window's m00
        self.m10 = self.m10 - self.m00 + HALF * s_in + (HALF + 1) * s_out
        self.m00 = self.m00 + s_in - s_out
        self.m01 = self.m01 + m01_in - m01_out

    def moments(self) -> tuple[int, int, int]:
        return (self.m00, self.m10, self.m01)


def window_moments(window: np.ndarray) -> tuple[int, int, int]:
    """Direct moment sums of one 37x37 window with x, y in [-18, 18]."""
    win = np.asarray(window, dtype=np.int64)
    if win.shape != (WINDOW, WINDOW):
        raise ValueError(f"window must be {WINDOW}x{WINDOW}")
    coords = np.arange(-HALF, HALF + 1, dtype=np.int64)
    m00 = int(win.sum())
    m10 = int((win * coords[np.newaxis, :]).sum())
    m01 = int((win * coords[:, np.newaxis]).sum())
    return m00, m10, m01


def _pow2_greedy(target: float) -> list[int]:
    """Signed powers of two (as exponents with signs) approximating target.

    Greedily adds the +-2^e term (e in [-8, 7]) that most shrinks the
    remainder, stopping once the relative error is small or four terms are
    spent. Exponents below -8 are not representable in Q8.8.
    """
    terms: list[tuple[int, int]] = []
    remainder = target
    for _ in range(_TAN_MAX_TERMS):
        if abs(remainder) / target <= _TAN_STOP_REL_ERR:
            break
        best_err = None
        best_term = None
        for e in range(-TAN_FRAC_BITS, 8):
            for sign in (1, -1):
                err = abs(remainder - sign * 2.0**e)
                if best_err is None or err < best_err:
                    best_err = err
                    best_term = (sign, e)
        sign, e = best_term
        if best_err >= abs(remainder):
            break
        terms.append((sign, e))
        remainder -= sign * 2.0**e
    return terms


@lru_cache(maxsize=None)
def tanfx_table(nd: int) -> tuple[int, ...]:
    """Q8.8 tangent constants for the nd/4 first-quadrant sector centers."""
    if nd % 4 != 0 or nd < 4:
        raise ValueError(f"sector count must be a positive multiple of 4, got {nd}")
    table = []
    for k in range(nd // 4):
        theta = (2 * k + 1) * math.pi / nd
        terms = _pow2_greedy(math.tan(theta))
        q88 = 0
        for sign, e in terms:
            q88 += sign * (1 << (e + TAN_FRAC_BITS))
        table.append(q88)
    return tuple(table)


def tanfx_terms(nd: int) -> list[list[tuple[int, int]]]:
    """The (sign, exponent) decomposition backing each table entry."""
    return [
        _pow2_greedy(math.tan((2 * k + 1) * math.pi / nd)) for k in range(nd // 4)
    ]


def _fold_quadrant(m10: int, m01: int) -> int:
    if m10 >= 0:
        return 0 if m01 >= 0 else 3
    return 1 if m01 >= 0 else 2


def sector_from_quadrant(quadrant: int, k: int, nd: int) -> int:
    """Global sector index whose center angle matches (quadrant, folded k)."""
    if quadrant == 0:
        return k
    if quadrant == 1:
        return nd // 2 - 1 - k
    if quadrant == 2:
        return nd // 2 + k
    return nd - 1 - k


def quantize_angle(m10: int, m01: int, nd: int = DEFAULT_SECTORS) -> SectorAngle:
    """Round the centroid direction of (m10, m01) to a sector center.

    A priority ladder picks the first center whose tangent line passes above
    the centroid; ties fall through to the next (higher) sector. Both moments
    zero is a degenerate centroid, mapped to sector 0 and flagged.
    """
    if nd not in VALID_SECTOR_COUNTS:
        raise ValueError(f"sector count must be one of {VALID_SECTOR_COUNTS}")
    if m10 == 0 and m01 == 0:
        return SectorAngle(0, 0, 0, nd, degenerate=True)
    quadrant = _fold_quadrant(m10, m01)
    a10 = abs(m10)
    a01_scaled = abs(m01) << TAN_FRAC_BITS
    table = tanfx_table(nd)
    k = len(table) - 1
    for i, coeff in enumerate(table):
        if a10 * coeff > a01_scaled:
            k = i
            break
    return SectorAngle(quadrant, k, sector_from_quadrant(quadrant, k, nd), nd)


def quantize_angle_bulk(m10: np.ndarray, m01: np.ndarray, nd: int = DEFAULT_SECTORS) -> np.ndarray:
    """Vectorized quantize_angle returning global sector indices."""
    if nd not in VALID_SECTOR_COUNTS:
        raise ValueError(f"sector count must be one of {VALID_SECTOR_COUNTS}")
    m10 = np.asarray(m10, dtype=np.int64)
    m01 = np.asarray(m01, dtype=np.int64)
    a10 = np.abs(m10)
    a01s = np.abs(m01) << TAN_FRAC_BITS
    table = tanfx_table(nd)
    k = np.full(m10.shape, len(table) - 1, dtype=np.int64)
    undecided = np.ones(m10.shape, dtype=bool)
    for i, coeff in enumerate(table):
        hit = undecided & (a10 * coeff > a01s)
        k[hit] = i
        undecided &= ~hit
    nd2 = nd // 2
    q0 = (m10 >= 0) & (m01 >= 0)
    q1 = (m10 < 0) & (m01 >= 0)
    q2 = (m10 < 0) & (m01 < 0)
    sector = np.where(q0, k, np.where(q1, nd2 - 1 - k, np.where(q2, nd2 + k, nd - 1 - k)))
    sector[(m10 == 0) & (m01 == 0)] = 0
    return sector


def trig_lut(sector: SectorAngle) -> TrigFx:
    """8-bit fixed-point sine/cosine of the sector's center angle."""
    k = sector.sector_in_quadrant
    phi = (2 * k + 1) * math.pi / sector.nd
    cos_mag = min(_TRIG_MAX, round(_TRIG_SCALE * math.cos(phi)))
    sin_mag = min(_TRIG_MAX, round(_TRIG_SCALE * math.sin(phi)))
    cos_sign, sin_sign = _QUADRANT_SIGNS[sector.quadrant]
    return TrigFx(cos_mag, sin_mag, cos_sign, sin_sign)


@lru_cache(maxsize=None)
def trig_tables(nd: int) -> tuple[np.ndarray, np.ndarray]:
    """Signed (cos, sin) int32 tables indexed by global sector."""
    cos_t = np.zeros(nd, dtype=np.int32)
    sin_t = np.zeros(nd, dtype=np.int32)
    nq = nd // 4
    for q in range(4):
        for k in range(nq):
            s = sector_from_quadrant(q, k, nd)
            fx = trig_lut(SectorAngle(q, k, s, nd))
            cos_t[s] = fx.cos_value
            sin_t[s] = fx.sin_value
    cos_t.flags.writeable = False
    sin_t.flags.writeable = False
    return cos_t, sin_t
