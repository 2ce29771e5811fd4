# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled streaming level pass; algorithm mirrors orbx._stream._pure."""

from collections import deque

import numpy as np

from cpython.bytes cimport PyBytes_FromStringAndSize


cdef enum:
    WIN = 37
    HALF = 18
    BORDER = 18
    BUSY = 295
    LAT_ROWS = 21
    LAT_COLS = 21
    DESC_DONE = 258

cdef int RING_DX[16]
cdef int RING_DY[16]
cdef int KROW[7]
cdef unsigned int MASKS[16]

RING_DX[:] = [0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3, -3, -3, -2, -1]
RING_DY[:] = [-3, -3, -2, -1, 0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3]
KROW[:] = [1, 6, 15, 20, 15, 6, 1]

cdef int _k
for _k in range(16):
    MASKS[_k] = ((0x1FF << _k) | (0x1FF >> (16 - _k))) & 0xFFFF


def run_level_stream(raw_in, quant_in, int threshold, int nd, tan_in, cos_in,
                     sin_in, pattern_in, int k_units):
    cdef const unsigned char[:, ::1] raw = np.ascontiguousarray(raw_in, dtype=np.uint8)
    cdef const unsigned char[:, ::1] quant = np.ascontiguousarray(quant_in, dtype=np.uint8)
    cdef const long long[::1] tan_table = np.ascontiguousarray(tan_in, dtype=np.int64)
    cdef const int[::1] cos_table = np.ascontiguousarray(cos_in, dtype=np.int32)
    cdef const int[::1] sin_table = np.ascontiguousarray(sin_in, dtype=np.int32)
    cdef const int[:, ::1] pattern = np.ascontiguousarray(pattern_in, dtype=np.int32)

    cdef int height = raw.shape[0]
    cdef int width = raw.shape[1]
    cdef int nq = tan_table.shape[0]
    cdef int nd2 = nd // 2

    score_ring_arr = np.zeros((3, width), dtype=np.int32)
    sm_ring_arr = np.zeros((WIN, width), dtype=np.int32)
    col_s_arr = np.zeros(width, dtype=np.int64)
    col_t_arr = np.zeros(width, dtype=np.int64)
    cdef int[:, ::1] score_ring = score_ring_arr
    cdef int[:, ::1] sm_ring = sm_ring_arr
    cdef long long[::1] col_s = col_s_arr
    cdef long long[::1] col_t = col_t_arr

    cdef long long[::1] busy = None
    if k_units > 0:
        busy = np.zeros(k_units, dtype=np.int64)

    fifo = deque()
    out_x, out_y, out_score, out_sector = [], [], [], []
    out_degen, out_dropped, out_t, out_desc = [], [], [], []
    cdef long long corners = 0

    cdef int y, r, rn, sy, yc, x, xc, i, ky, kx, ry, rx, u
    cdef int c, hi, lo, v, sad, hit, slot, old
    cdef unsigned int bright, dark
    cdef long long acc, m00, m10, m01, s_in, s_out, m01_in, m01_out, t
    cdef long long a10, a01s
    cdef int quadrant, k, sector, degen, accepted
    cdef int cos_v, sin_v, xa, ya, xb, yb, ax, ay, bx, by, va, vb
    cdef unsigned char desc[32]
    cdef int head_x, head_y

    for y in range(height + 3):
        # corner scores for row y-3
        r = y - 3
        if 3 <= r <= height - 4:
            slot = r % 3
            for x in range(width):
                score_ring[slot, x] = 0
            for x in range(3, width - 3):
                c = raw[r, x]
                hi = c + threshold
                lo = c - threshold
                bright = 0
                dark = 0
                sad = 0
                for i in range(16):
                    v = raw[r + RING_DY[i], x + RING_DX[i]]
                    if v > hi:
                        bright |= (<unsigned int>1) << i
                    elif v < lo:
                        dark |= (<unsigned int>1) << i
                    sad += v - c if v > c else c - v
                hit = 0
                for i in range(16):
                    if (bright & MASKS[i]) == MASKS[i] or (dark & MASKS[i]) == MASKS[i]:
                        hit = 1
                        break
                if hit:
                    score_ring[slot, x] = sad
                    corners += 1
        elif r == height - 3:
            slot = r % 3
            for x in range(width):
                score_ring[slot, x] = 0

        # NMS for row y-4
        rn = y - 4
        if 3 <= rn <= height - 4:
            for x in range(3, width - 3):
                c = score_ring[rn % 3, x]
                if c <= 0:
                    continue
                if (c > score_ring[(rn - 1) % 3, x - 1]
                        and c > score_ring[(rn - 1) % 3, x]
                        and c > score_ring[(rn - 1) % 3, x + 1]
                        and c > score_ring[rn % 3, x - 1]
                        and c >= score_ring[rn % 3, x + 1]
                        and c >= score_ring[(rn + 1) % 3, x - 1]
                        and c >= score_ring[(rn + 1) % 3, x]
                        and c >= score_ring[(rn + 1) % 3, x + 1]):
                    if BORDER <= x <= width - 1 - BORDER and BORDER <= rn <= height - 1 - BORDER:
                        fifo.append((x, rn, c))

        # smoothed row y-3 on the quantized path
        sy = y - 3
        if 0 <= sy <= height - 1:
            slot = sy % WIN
            if sy >= WIN:
                old = sy - WIN
                for x in range(width):
                    v = sm_ring[slot, x]
                    col_s[x] -= v
                    col_t[x] -= <long long>old * v
            for x in range(width):
                acc = 0
                for ky in range(7):
                    ry = sy - 3 + ky
                    if ry < 0:
                        ry = 0
                    elif ry > height - 1:
                        ry = height - 1
                    for kx in range(7):
                        rx = x - 3 + kx
                        if rx < 0:
                            rx = 0
                        elif rx > width - 1:
                            rx = width - 1
                        acc += <long long>(KROW[ky] * KROW[kx]) * quant[ry, rx]
                v = <int>((acc + 2048) >> 12)
                sm_ring[slot, x] = v
                col_s[x] += v
                col_t[x] += <long long>sy * v

        # orientation scan for center row y-21
        yc = y - LAT_ROWS
        if BORDER <= yc <= height - 1 - BORDER:
            m00 = 0
            m10 = 0
            m01 = 0
            for x in range(width):
                s_in = col_s[x]
                m01_in = col_t[x] - <long long>yc * s_in
                if x >= WIN:
                    s_out = col_s[x - WIN]
                    m01_out = col_t[x - WIN] - <long long>yc * s_out
                else:
                    s_out = 0
                    m01_out = 0
                m10 = m10 - m00 + HALF * s_in + (HALF + 1) * s_out
                m00 = m00 + s_in - s_out
                m01 = m01 + m01_in - m01_out
                xc = x - HALF
                if x < WIN - 1 or not fifo:
                    continue
                head_x, head_y, c = fifo[0]
                if head_x != xc or head_y != yc:
                    continue
                fifo.popleft()

                degen = 1 if (m10 == 0 and m01 == 0) else 0
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

                t = <long long>(yc + LAT_ROWS) * width + xc + LAT_COLS
                accepted = 1
                if busy is not None:
                    accepted = 0
                    for u in range(k_units):
                        if busy[u] <= t:
                            busy[u] = t + BUSY
                            accepted = 1
                            break

                for i in range(32):
                    desc[i] = 0
                if accepted:
                    cos_v = cos_table[sector]
                    sin_v = sin_table[sector]
                    for i in range(256):
                        xa = pattern[i, 0]
                        ya = pattern[i, 1]
                        xb = pattern[i, 2]
                        yb = pattern[i, 3]
                        ax = (xa * cos_v - ya * sin_v + 128) >> 8
                        ay = (xa * sin_v + ya * cos_v + 128) >> 8
                        bx = (xb * cos_v - yb * sin_v + 128) >> 8
                        by = (xb * sin_v + yb * cos_v + 128) >> 8
                        if ax > HALF:
                            ax = HALF
                        elif ax < -HALF:
                            ax = -HALF
                        if ay > HALF:
                            ay = HALF
                        elif ay < -HALF:
                            ay = -HALF
                        if bx > HALF:
                            bx = HALF
                        elif bx < -HALF:
                            bx = -HALF
                        if by > HALF:
                            by = HALF
                        elif by < -HALF:
                            by = -HALF
                        va = sm_ring[(yc + ay) % WIN, xc + ax]
                        vb = sm_ring[(yc + by) % WIN, xc + bx]
                        if va > vb:
                            desc[i >> 3] |= <unsigned char>(1 << (i & 7))

                out_x.append(xc)
                out_y.append(yc)
                out_score.append(c)
                out_sector.append(sector)
                out_degen.append(degen)
                out_dropped.append(0 if accepted else 1)
                out_t.append(t)
                out_desc.append(PyBytes_FromStringAndSize(<char*>desc, 32))

    n = len(out_x)
    if n:
        descriptors = np.frombuffer(b"".join(out_desc), dtype=np.uint8).reshape(n, 32)
    else:
        descriptors = np.zeros((0, 32), dtype=np.uint8)
    return {
        "x": np.array(out_x, dtype=np.int32),
        "y": np.array(out_y, dtype=np.int32),
        "score": np.array(out_score, dtype=np.int32),
        "sector": np.array(out_sector, dtype=np.int32),
        "degenerate": np.array(out_degen, dtype=np.uint8),
        "dropped": np.array(out_dropped, dtype=np.uint8),
        "dispatch_cycle": np.array(out_t, dtype=np.int64),
        "descriptors": descriptors,
        "corners_pre_nms": int(corners),
        "cycles": width * height + 3 * width + 2 + DESC_DONE,
    }
