"""Synthetic inputs: textured frames, short camera sequences over a textured
plane, and noiseless pose-estimation problems with known ground truth.

Everything is seeded so tests and CLI runs are reproducible without any
dataset downloads.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .imgcore import GrayImage
from .pose import Intrinsics, PoseSE3, rotation_to_quaternion, so3_exp


def _smooth_noise(rng: np.random.Generator, shape: tuple[int, int], passes: int = 8) -> np.ndarray:
    """Band-limited noise via repeated box blurring of white noise."""
    img = rng.uniform(0.0, 1.0, shape)
    for _ in range(passes):
        img = (
            img
            + np.roll(img, 1, axis=0)
            + np.roll(img, -1, axis=0)
            + np.roll(img, 1, axis=1)
            + np.roll(img, -1, axis=1)
        ) / 5.0
    img -= img.min()
    peak = img.max()
    if peak > 0:
        img /= peak
    return img


def make_texture(width: int, height: int, seed: int = 0, contrast: float = 2.0) -> np.ndarray:
    """Natural-looking float texture in [0, 255]: smooth shading, blobs and
    a scattering of high-contrast rectangles that give FAST corners."""
    rng = np.random.default_rng(seed)
    base = 0.55 * _smooth_noise(rng, (height, width), passes=12)
    base += 0.25 * _smooth_noise(rng, (height, width), passes=4)
    for _ in range(60):
        w = int(rng.integers(6, max(7, width // 8)))
        h = int(rng.integers(6, max(7, height // 8)))
        x = int(rng.integers(0, width - w))
        y = int(rng.integers(0, height - h))
        base[y : y + h, x : x + w] += rng.uniform(-0.35, 0.35)
    base = np.clip(0.5 + (base - base.mean()) * contrast, 0.0, 1.0)
    return base * 255.0


def make_frame(width: int, height: int, seed: int = 0) -> GrayImage:
    return GrayImage(np.rint(make_texture(width, height, seed)).astype(np.uint8))


def checkerboard(width: int, height: int, cell: int = 16, lo: int = 30, hi: int = 220) -> GrayImage:
    ys, xs = np.mgrid[0:height, 0:width]
    board = ((xs // cell + ys // cell) % 2).astype(np.uint8)
    return GrayImage(np.where(board == 0, np.uint8(lo), np.uint8(hi)))


def gradient_frame(width: int, height: int, horizontal: bool = True) -> GrayImage:
    if horizontal:
        row = np.linspace(0, 255, width).astype(np.uint8)
        return GrayImage(np.tile(row, (height, 1)))
    col = np.linspace(0, 255, height).astype(np.uint8)
    return GrayImage(np.tile(col[:, np.newaxis], (1, width)))


def blank_frame(width: int, height: int, value: int = 128) -> GrayImage:
    return GrayImage(np.full((height, width), value, dtype=np.uint8))


def render_plane_sequence(
    n_frames: int,
    width: int = 320,
    height: int = 240,
    seed: int = 0,
    step: float = 2.5,
    spin: float = 0.004,
) -> list[GrayImage]:
    """Camera panning and slowly rotating over a large textured plane.

    Frames are rendered by bilinearly sampling the plane texture under a
    per-frame similarity transform, which keeps realistic texture statistics
    while guaranteeing frame-to-frame feature overlap.
    """
    margin = 80
    tex_w = width + 2 * margin + int(step * n_frames) + 4
    tex_h = height + 2 * margin + 4
    tex = make_texture(tex_w, tex_h, seed)
    frames = []
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    cx, cy = width / 2.0, height / 2.0
    for i in range(n_frames):
        angle = spin * i
        ca, sa = math.cos(angle), math.sin(angle)
        ox = margin + step * i
        oy = margin + 6.0 * math.sin(0.21 * i)
        u = ca * (xs - cx) - sa * (ys - cy) + cx + ox
        v = sa * (xs - cx) + ca * (ys - cy) + cy + oy
        u = np.clip(u, 0, tex_w - 1.001)
        v = np.clip(v, 0, tex_h - 1.001)
        x0 = u.astype(np.int64)
        y0 = v.astype(np.int64)
        fx = u - x0
        fy = v - y0
        val = (
            tex[y0, x0] * (1 - fx) * (1 - fy)
            + tex[y0, x0 + 1] * fx * (1 - fy)
            + tex[y0 + 1, x0] * (1 - fx) * fy
            + tex[y0 + 1, x0 + 1] * fx * fy
        )
        frames.append(GrayImage(np.rint(val).astype(np.uint8)))
    return frames


def make_pose_problem(
    n_frames: int = 12,
    n_points: int = 80,
    seed: int = 0,
    intrinsics: Intrinsics | None = None,
) -> dict:
    """Noiseless 3D-2D pose problem with a smooth known camera path.

    Returns a JSON-serializable dict: intrinsics, world points, per-frame
    observations (point id, u, v) and the ground-truth trajectory in
    world-from-camera convention.
    """
    K = intrinsics or Intrinsics(525.0, 525.0, 319.5, 239.5)
    rng = np.random.default_rng(seed)
    points = np.column_stack(
        [
            rng.uniform(-3.0, 3.0, n_points),
            rng.uniform(-2.0, 2.0, n_points),
            rng.uniform(4.0, 9.0, n_points),
        ]
    )
    frames = []
    gt_rows = []
    for i in range(n_frames):
        s = i / max(n_frames - 1, 1)
        omega = np.array([0.02 * math.sin(2.1 * s), 0.05 * s, 0.015 * math.cos(1.3 * s)])
        t = np.array([0.4 * s, 0.1 * math.sin(3.0 * s), 0.25 * s])
        cam = PoseSE3(so3_exp(omega), t)  # camera-from-world
        obs = []
        for pid, pt in enumerate(points):
            pc = cam.R @ pt + cam.t
            if pc[2] <= 0.1:
                continue
            u = K.fx * pc[0] / pc[2] + K.cx
            v = K.fy * pc[1] / pc[2] + K.cy
            if 0 <= u < 640 and 0 <= v < 480:
                obs.append([pid, float(u), float(v)])
        frames.append({"timestamp": round(0.1 * i, 6), "observations": obs})
        inv = cam.inverse()  # world-from-camera for the TUM-style ground truth
        q = rotation_to_quaternion(inv.R)
        gt_rows.append([0.1 * i, *inv.t.tolist(), *q.tolist()])
    return {
        "intrinsics": {"fx": K.fx, "fy": K.fy, "cx": K.cx, "cy": K.cy},
        "points": points.tolist(),
        "frames": frames,
        "groundtruth": gt_rows,
    }


def save_pose_problem(path, problem: dict) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(problem, fh)


def load_pose_problem(path) -> dict:
    with open(path, "r", encoding="ascii") as fh:
        problem = json.load(fh)
    for key in ("intrinsics", "points", "frames"):
        if key not in problem:
            raise ValueError(f"pose problem is missing '{key}'")
    return problem
