"""Hamming-distance nearest-neighbor matching between descriptor sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_MAX_DISTANCE = 50

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


@dataclass(frozen=True)
class Match:
    index_a: int
    index_b: int
    distance: int


def _as_matrix(descriptors) -> np.ndarray:
    if isinstance(descriptors, np.ndarray):
        arr = descriptors.astype(np.uint8, copy=False)
        if arr.ndim != 2 or arr.shape[1] != 32:
            raise ValueError("descriptor array must have shape (n, 32)")
        return arr
    rows = [np.frombuffer(d, dtype=np.uint8) for d in descriptors]
    if not rows:
        return np.zeros((0, 32), dtype=np.uint8)
    return np.stack(rows)


def hamming(d1: bytes, d2: bytes) -> int:
    """Popcount of the XOR of two 256-bit descriptors."""
    a = np.frombuffer(d1, dtype=np.uint8)
    b = np.frombuffer(d2, dtype=np.uint8)
    if a.shape != (32,) or b.shape != (32,):
        raise ValueError("descriptors must be 32 bytes")
    return int(_POPCOUNT[np.bitwise_xor(a, b)].sum())


def hamming_matrix(a, b) -> np.ndarray:
    """All-pairs Hamming distances, shape (len(a), len(b)), dtype int32."""
    ma = _as_matrix(a)
    mb = _as_matrix(b)
    if len(ma) == 0 or len(mb) == 0:
        return np.zeros((len(ma), len(mb)), dtype=np.int32)
    xored = np.bitwise_xor(ma[:, np.newaxis, :], mb[np.newaxis, :, :])
    return _POPCOUNT[xored].sum(axis=2, dtype=np.int32)


def match(a, b, max_dist: int = DEFAULT_MAX_DISTANCE, mutual: bool = True) -> list[Match]:
    """Nearest neighbor of each query in `a` among `b`.

    Emits a pair when the distance is at or below max_dist; with `mutual`
    the query must also be its candidate's nearest neighbor. Ties go to the
    lowest index, and results come back ordered by index_a.
    """
    dist = hamming_matrix(a, b)
    if dist.size == 0:
        return []
    nn_b = np.argmin(dist, axis=1)  # argmin takes the lowest tied index
    if mutual:
        nn_a = np.argmin(dist, axis=0)
    out = []
    for ia, ib in enumerate(nn_b):
        d = int(dist[ia, ib])
        if d > max_dist:
            continue
        if mutual and nn_a[ib] != ia:
            continue
        out.append(Match(ia, int(ib), d))
    return out


def write_matches_csv(path, matches: list[Match], config_echo: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# config: {config_echo}\n")
        fh.write("index_a,index_b,distance\n")
        for m in matches:
            fh.write(f"{m.index_a},{m.index_b},{m.distance}\n")
