"""Pure-Python streaming level pass.

Reference implementation of the single-pass extractor: raw pixels drive the
corner path, quantized pixels drive the smoothing/orientation/descriptor
path, and every stage reads only from bounded row buffers exactly as the
compiled backend does. Slow, but bit-identical to orbx._stream._core.
"""

from __future__ import annotations

from collections import deque

import numpy as np

_RING = (
    (0, -3), (1, -3), (2, -2), (3, -1),
    (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1),
    (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)
_MASKS = tuple(((0x1FF << k) | (0x1FF >> (16 - k))) & 0xFFFF for k in range(16))
_KROW = (1, 6, 15, 20, 15, 6, 1)
_WIN = 37
_HALF = 18
_BORDER = 18
_BUSY = 295
_LAT_ROWS = _HALF + 3   # gaussian delay + window half
_LAT_COLS = _HALF + 3
_DESC_DONE = 258        # rotate + lookup + generate


def _flush_cycles(width: int, height: int) -> int:
    # drain after the last pixel: worst dispatch is (H+2)*W + W + 2, plus the
    # descriptor pipeline depth
    return 3 * width + 2 + _DESC_DONE


def run_level_stream(raw, quant, threshold, nd, tan_table, cos_table, sin_table,
                     pattern, k_units):
    raw = np.asarray(raw)
    quant = np.asarray(quant)
    height, width = raw.shape
    tan_table = [int(v) for v in tan_table]
    cos_table = [int(v) for v in cos_table]
    sin_table = [int(v) for v in sin_table]
    pairs = [tuple(int(v) for v in row) for row in np.asarray(pattern)]
    nq = len(tan_table)
    nd2 = nd // 2

    rawl = raw.astype(np.int32).tolist()
    quantl = quant.astype(np.int32).tolist()

    score_ring = [[0] * width for _ in range(3)]
    sm_ring = [[0] * width for _ in range(_WIN)]
    col_s = [0] * width            # band column sums
    col_t = [0] * width            # band column row-weighted sums

    fifo: deque[tuple[int, int, int]] = deque()
    busy = [0] * k_units if k_units > 0 else None

    out_x, out_y, out_score, out_sector = [], [], [], []
    out_degen, out_dropped, out_t, out_desc = [], [], [], []
    corners = 0

    for y in range(height + 3):
        # corner scores for row y-3 (ring needs rows r-3 .. r+3)
        r = y - 3
        if 3 <= r <= height - 4:
            row = score_ring[r % 3]
            for x in range(width):
                row[x] = 0
            for x in range(3, width - 3):
                c = rawl[r][x]
                hi = c + threshold
                lo = c - threshold
                bright = 0
                dark = 0
                sad = 0
                for i, (dx, dy) in enumerate(_RING):
                    v = rawl[r + dy][x + dx]
                    if v > hi:
                        bright |= 1 << i
                    elif v < lo:
                        dark |= 1 << i
                    sad += v - c if v > c else c - v
                hit = False
                for m in _MASKS:
                    if bright & m == m or dark & m == m:
                        hit = True
                        break
                if hit:
                    row[x] = sad
                    corners += 1
        elif r == height - 3:
            score_ring[r % 3] = [0] * width

        # NMS for row y-4 once its lower score row exists
        rn = y - 4
        if 3 <= rn <= height - 4:
            up = score_ring[(rn - 1) % 3]
            mid = score_ring[rn % 3]
            down = score_ring[(rn + 1) % 3]
            for x in range(3, width - 3):
                c = mid[x]
                if c <= 0:
                    continue
                if (
                    c > up[x - 1] and c > up[x] and c > up[x + 1] and c > mid[x - 1]
                    and c >= mid[x + 1] and c >= down[x - 1] and c >= down[x]
                    and c >= down[x + 1]
                ):
                    if _BORDER <= x <= width - 1 - _BORDER and _BORDER <= rn <= height - 1 - _BORDER:
                        fifo.append((x, rn, c))

        # smoothed row y-3 on the quantized path (clamped borders)
        sy = y - 3
        if 0 <= sy <= height - 1:
            slot = sm_ring[sy % _WIN]
            if sy >= _WIN:
                old = sy - _WIN
                for x in range(width):
                    v = slot[x]
                    col_s[x] -= v
                    col_t[x] -= old * v
            for x in range(width):
                acc = 0
                for ky in range(7):
                    ry = sy - 3 + ky
                    if ry < 0:
                        ry = 0
                    elif ry > height - 1:
                        ry = height - 1
                    qrow = quantl[ry]
                    kr = _KROW[ky]
                    for kx in range(7):
                        rx = x - 3 + kx
                        if rx < 0:
                            rx = 0
                        elif rx > width - 1:
                            rx = width - 1
                        acc += kr * _KROW[kx] * qrow[rx]
                v = (acc + 2048) >> 12
                slot[x] = v
                col_s[x] += v
                col_t[x] += sy * v

        # orientation scan for center row y-21; dispatch descriptors
        yc = y - 21
        if _BORDER <= yc <= height - 1 - _BORDER:
            m00 = m10 = m01 = 0
            for x in range(width):
                s_in = col_s[x]
                m01_in = col_t[x] - yc * s_in
                if x >= _WIN:
                    s_out = col_s[x - _WIN]
                    m01_out = col_t[x - _WIN] - yc * s_out
                else:
                    s_out = 0
                    m01_out = 0
                m10 = m10 - m00 + _HALF * s_in + (_HALF + 1) * s_out
                m00 = m00 + s_in - s_out
                m01 = m01 + m01_in - m01_out
                xc = x - _HALF
                if x < _WIN - 1 or not fifo:
                    continue
                head_x, head_y, head_score = fifo[0]
                if head_x != xc or head_y != yc:
                    continue
                fifo.popleft()
                # sector from the comparator ladder
                degen = m10 == 0 and m01 == 0
                if degen:
                    sector = 0
                else:
                    if m10 >= 0:
                        quadrant = 0 if m01 >= 0 else 3
                    else:
                        quadrant = 1 if m01 >= 0 else 2
                    a10 = m10 if m10 >= 0 else -m10
                    a01s = (m01 if m01 >= 0 else -m01) << 8
                    k = nq - 1
                    for i in range(nq):
                        if a10 * tan_table[i] > a01s:
                            k = i
                            break
                    if quadrant == 0:
                        sector = k
                    elif quadrant == 1:
                        sector = nd2 - 1 - k
                    elif quadrant == 2:
                        sector = nd2 + k
                    else:
                        sector = nd - 1 - k

                t = (yc + _LAT_ROWS) * width + xc + _LAT_COLS
                accepted = True
                if busy is not None:
                    accepted = False
                    for u in range(k_units):
                        if busy[u] <= t:
                            busy[u] = t + _BUSY
                            accepted = True
                            break

                desc = bytearray(32)
                if accepted:
                    cos_v = cos_table[sector]
                    sin_v = sin_table[sector]
                    for i, (xa, ya, xb, yb) in enumerate(pairs):
                        ax = (xa * cos_v - ya * sin_v + 128) >> 8
                        ay = (xa * sin_v + ya * cos_v + 128) >> 8
                        bx = (xb * cos_v - yb * sin_v + 128) >> 8
                        by = (xb * sin_v + yb * cos_v + 128) >> 8
                        if ax > _HALF:
                            ax = _HALF
                        elif ax < -_HALF:
                            ax = -_HALF
                        if ay > _HALF:
                            ay = _HALF
                        elif ay < -_HALF:
                            ay = -_HALF
                        if bx > _HALF:
                            bx = _HALF
                        elif bx < -_HALF:
                            bx = -_HALF
                        if by > _HALF:
                            by = _HALF
                        elif by < -_HALF:
                            by = -_HALF
                        va = sm_ring[(yc + ay) % _WIN][xc + ax]
                        vb = sm_ring[(yc + by) % _WIN][xc + bx]
                        if va > vb:
                            desc[i >> 3] |= 1 << (i & 7)

                out_x.append(xc)
                out_y.append(yc)
                out_score.append(head_score)
                out_sector.append(sector)
                out_degen.append(1 if degen else 0)
                out_dropped.append(0 if accepted else 1)
                out_t.append(t)
                out_desc.append(bytes(desc))

    n = len(out_x)
    descriptors = np.frombuffer(b"".join(out_desc), dtype=np.uint8).reshape(n, 32) if n else np.zeros((0, 32), np.uint8)
    return {
        "x": np.array(out_x, dtype=np.int32),
        "y": np.array(out_y, dtype=np.int32),
        "score": np.array(out_score, dtype=np.int32),
        "sector": np.array(out_sector, dtype=np.int32),
        "degenerate": np.array(out_degen, dtype=np.uint8),
        "dropped": np.array(out_dropped, dtype=np.uint8),
        "dispatch_cycle": np.array(out_t, dtype=np.int64),
        "descriptors": descriptors,
        "corners_pre_nms": corners,
        "cycles": width * height + _flush_cycles(width, height),
    }
