"""Motion-only bundle adjustment and absolute trajectory error evaluation.

Poses are camera-from-world. The pose update is a 6-dim twist applied
through the closed-form SE(3) exponential on the left, which keeps the
rotation on SO(3) by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_DEPTH = 1e-6
STEP_TOL = 1e-8
MAX_CONDITION = 1e12
MAX_HALVINGS = 8
DEFAULT_ITERS = 10
DEFAULT_MAX_DT = 0.02


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")


class PoseSE3:
    """Rotation (3x3, orthonormal, det +1) plus translation in meters."""

    __slots__ = ("R", "t")

    def __init__(self, R: np.ndarray, t: np.ndarray):
        R = np.asarray(R, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.abs(R.T @ R - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(R) - 1) > 1e-9:
            raise ValueError("rotation is not orthonormal with det +1")
        self.R = R
        self.t = t

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls(np.eye(3), np.zeros(3))

    def transform(self, points: np.ndarray) -> np.ndarray:
        return points @ self.R.T + self.t

    def compose(self, other: "PoseSE3") -> "PoseSE3":
        return PoseSE3(self.R @ other.R, self.R @ other.t + self.t)

    def inverse(self) -> "PoseSE3":
        return PoseSE3(self.R.T, -self.R.T @ self.t)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.R
        m[:3, 3] = self.t
        return m


def _hat(v: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def so3_exp(omega: np.ndarray) -> np.ndarray:
    """Rodrigues rotation from an axis-angle vector."""
    theta = np.linalg.norm(omega)
    K = _hat(omega)
    if theta < 1e-12:
        return np.eye(3) + K + 0.5 * (K @ K)
    a = math.sin(theta) / theta
    b = (1.0 - math.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def se3_exp(xi: np.ndarray) -> PoseSE3:
    """Exponential of a twist (omega, v), rotation part first."""
    omega = np.asarray(xi[:3], dtype=np.float64)
    v = np.asarray(xi[3:], dtype=np.float64)
    theta = np.linalg.norm(omega)
    K = _hat(omega)
    R = so3_exp(omega)
    if theta < 1e-12:
        V = np.eye(3) + 0.5 * K + (K @ K) / 6.0
    else:
        t2 = theta * theta
        V = (
            np.eye(3)
            + (1.0 - math.cos(theta)) / t2 * K
            + (theta - math.sin(theta)) / (t2 * theta) * (K @ K)
        )
    return PoseSE3(R, V @ v)


def rotation_angle(R: np.ndarray) -> float:
    c = (np.trace(R) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, c)))


def rotation_to_quaternion(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (qx, qy, qz, qw) of a rotation matrix."""
    m = np.asarray(R)
    tr = np.trace(m)
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        qw = 0.25 * s
        qx = (m[2, 1] - m[1, 2]) / s
        qy = (m[0, 2] - m[2, 0]) / s
        qz = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        qw = (m[2, 1] - m[1, 2]) / s
        qx = 0.25 * s
        qy = (m[0, 1] + m[1, 0]) / s
        qz = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        qw = (m[0, 2] - m[2, 0]) / s
        qx = (m[0, 1] + m[1, 0]) / s
        qy = 0.25 * s
        qz = (m[1, 2] + m[2, 1]) / s
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        qw = (m[1, 0] - m[0, 1]) / s
        qx = (m[0, 2] + m[2, 0]) / s
        qy = (m[1, 2] + m[2, 1]) / s
        qz = 0.25 * s
    q = np.array([qx, qy, qz, qw])
    return q / np.linalg.norm(q)


def quaternion_to_rotation(q: np.ndarray) -> np.ndarray:
    x, y, z, w = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def project(K: Intrinsics, pose: PoseSE3, point: np.ndarray) -> np.ndarray:
    """Pinhole projection of one world point; the point must be in front."""
    pc = pose.R @ np.asarray(point, dtype=np.float64) + pose.t
    if pc[2] <= MIN_DEPTH:
        raise ValueError("behind camera")
    return np.array([K.fx * pc[0] / pc[2] + K.cx, K.fy * pc[1] / pc[2] + K.cy])


def unproject(K: Intrinsics, pose: PoseSE3, pixel, depth: float) -> np.ndarray:
    """World point at a given camera-frame depth along the pixel's ray."""
    if depth <= MIN_DEPTH:
        raise ValueError("depth must be positive")
    u, v = float(pixel[0]), float(pixel[1])
    pc = np.array([(u - K.cx) / K.fx * depth, (v - K.cy) / K.fy * depth, depth])
    return pose.R.T @ (pc - pose.t)


def _project_batch(K: Intrinsics, pose: PoseSE3, points: np.ndarray):
    pc = points @ pose.R.T + pose.t
    z = pc[:, 2]
    valid = z > MIN_DEPTH
    zs = np.where(valid, z, 1.0)
    pix = np.stack(
        [K.fx * pc[:, 0] / zs + K.cx, K.fy * pc[:, 1] / zs + K.cy], axis=1
    )
    return pix, pc, valid


def reprojection_residuals(points, pixels, K: Intrinsics, pose: PoseSE3):
    """Stacked (observed - predicted) residuals and the validity mask."""
    pix, _, valid = _project_batch(K, pose, np.asarray(points, dtype=np.float64))
    res = np.asarray(pixels, dtype=np.float64) - pix
    return res, valid


def reprojection_jacobian(points, K: Intrinsics, pose: PoseSE3) -> np.ndarray:
    """Jacobian of the residuals wrt the left-applied twist (omega, v).

    Shape (n, 2, 6). A left perturbation moves the camera-frame point by
    d pc = -[pc]x d omega + d v, and the residual is observation minus
    projection, hence the leading minus sign.
    """
    points = np.asarray(points, dtype=np.float64)
    pc = points @ pose.R.T + pose.t
    n = len(points)
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    inv_z = 1.0 / z
    inv_z2 = inv_z * inv_z

    # d(pixel)/d(pc)
    J_proj = np.zeros((n, 2, 3))
    J_proj[:, 0, 0] = K.fx * inv_z
    J_proj[:, 0, 2] = -K.fx * x * inv_z2
    J_proj[:, 1, 1] = K.fy * inv_z
    J_proj[:, 1, 2] = -K.fy * y * inv_z2

    # d(pc)/d(omega, v)
    J_pc = np.zeros((n, 3, 6))
    J_pc[:, 0, 1] = z
    J_pc[:, 0, 2] = -y
    J_pc[:, 1, 0] = -z
    J_pc[:, 1, 2] = x
    J_pc[:, 2, 0] = y
    J_pc[:, 2, 1] = -x
    J_pc[:, 0, 3] = 1.0
    J_pc[:, 1, 4] = 1.0
    J_pc[:, 2, 5] = 1.0

    return -np.einsum("nij,njk->nik", J_proj, J_pc)


@dataclass
class BAResult:
    pose: PoseSE3
    rmse: float
    iterations: int


def _objective(points, pixels, K, pose, huber_delta):
    res, valid = reprojection_residuals(points, pixels, K, pose)
    res = res[valid]
    if huber_delta is None:
        return float((res**2).sum()), valid
    norms = np.linalg.norm(res, axis=1)
    quad = norms <= huber_delta
    cost = (norms[quad] ** 2).sum() + (
        2 * huber_delta * norms[~quad] - huber_delta**2
    ).sum()
    return float(cost), valid


def motion_ba(
    observations,
    K: Intrinsics,
    init: PoseSE3,
    iters: int = DEFAULT_ITERS,
    huber_delta: float | None = None,
) -> BAResult:
    """Gauss-Newton pose refinement against fixed 3D points.

    `observations` is a sequence of (world point, observed pixel). Points
    behind the camera are excluded per iteration; fewer than 3 usable
    observations raises "underdetermined", and a normal-equation condition
    number above 1e12 raises "degenerate geometry". A step that increases
    the objective is halved up to 8 times.
    """
    points = np.array([np.asarray(p, dtype=np.float64) for p, _ in observations])
    pixels = np.array([np.asarray(px, dtype=np.float64) for _, px in observations])
    if len(points) < 3:
        raise ValueError("underdetermined: fewer than 3 observations")

    pose = PoseSE3(init.R.copy(), init.t.copy())
    cost, valid = _objective(points, pixels, K, pose, huber_delta)
    done_iters = 0
    for _ in range(iters):
        res, valid = reprojection_residuals(points, pixels, K, pose)
        if int(valid.sum()) < 3:
            raise ValueError("underdetermined: fewer than 3 usable points")
        J = reprojection_jacobian(points[valid], K, pose)
        r = res[valid]
        if huber_delta is not None:
            norms = np.linalg.norm(r, axis=1)
            w = np.where(norms <= huber_delta, 1.0, huber_delta / np.maximum(norms, 1e-12))
        else:
            w = np.ones(len(r))
        Jf = J.reshape(-1, 6)
        rf = r.reshape(-1)
        wf = np.repeat(w, 2)
        H = Jf.T @ (Jf * wf[:, np.newaxis])
        g = Jf.T @ (rf * wf)
        if np.linalg.cond(H) > MAX_CONDITION:
            raise ValueError("degenerate geometry: ill-conditioned normal equations")
        step = np.linalg.solve(H, -g)

        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            candidate = se3_exp(step * scale).compose(pose)
            new_cost, _ = _objective(points, pixels, K, candidate, huber_delta)
            if new_cost <= cost:
                break
            scale *= 0.5
        else:
            break
        pose = candidate
        cost = new_cost
        done_iters += 1
        if np.linalg.norm(step * scale) < STEP_TOL:
            break

    res, valid = reprojection_residuals(points, pixels, K, pose)
    rmse = float(np.sqrt((res[valid] ** 2).sum(axis=1).mean())) if valid.any() else 0.0
    return BAResult(pose=pose, rmse=rmse, iterations=done_iters)


class Trajectory:
    """Timestamped positions with unit quaternions (TUM convention)."""

    def __init__(self, timestamps, positions, quaternions):
        self.timestamps = np.asarray(timestamps, dtype=np.float64)
        self.positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        q = np.asarray(quaternions, dtype=np.float64).reshape(-1, 4)
        if not (len(self.timestamps) == len(self.positions) == len(q)):
            raise ValueError("trajectory fields must have equal length")
        if len(self.timestamps) > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise ValueError("timestamps must be strictly increasing")
        norms = np.linalg.norm(q, axis=1)
        if np.any(norms < 1e-3):
            raise ValueError("degenerate quaternion")
        self.quaternions = q / norms[:, np.newaxis]

    def __len__(self) -> int:
        return len(self.timestamps)


def load_tum_trajectory(path) -> Trajectory:
    """Parse "timestamp tx ty tz qx qy qz qw" lines, '#' comments allowed."""
    ts, pos, quat = [], [], []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 8:
                raise ValueError(f"line {lineno}: expected 8 fields, got {len(parts)}")
            vals = [float(p) for p in parts]
            ts.append(vals[0])
            pos.append(vals[1:4])
            quat.append(vals[4:8])
    if not ts:
        raise ValueError("empty trajectory file")
    return Trajectory(ts, pos, quat)


def save_tum_trajectory(path, traj: Trajectory) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# timestamp tx ty tz qx qy qz qw\n")
        for t, p, q in zip(traj.timestamps, traj.positions, traj.quaternions):
            fh.write(
                f"{t:.6f} {p[0]:.9f} {p[1]:.9f} {p[2]:.9f} "
                f"{q[0]:.9f} {q[1]:.9f} {q[2]:.9f} {q[3]:.9f}\n"
            )


def load_association(path) -> list[tuple[float, str, float, str]]:
    """Parse "ts_rgb path_rgb ts_depth path_depth" association lines."""
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: expected 4 fields")
            rows.append((float(parts[0]), parts[1], float(parts[2]), parts[3]))
    return rows


def associate(est_ts: np.ndarray, gt_ts: np.ndarray, max_dt: float) -> list[tuple[int, int]]:
    """Pair each estimate timestamp with the nearest ground-truth timestamp."""
    pairs = []
    idx = np.searchsorted(gt_ts, est_ts)
    for i, j in enumerate(idx):
        best = None
        for cand in (j - 1, j):
            if 0 <= cand < len(gt_ts):
                dt = abs(est_ts[i] - gt_ts[cand])
                if best is None or dt < best[0]:
                    best = (dt, cand)
        if best is not None and best[0] <= max_dt:
            pairs.append((i, best[1]))
    return pairs


def rigid_align(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form rotation + translation minimizing |R src + t - dst|^2."""
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    H = (src - mu_s).T @ (dst - mu_d)
    U, _, Vt = np.linalg.svd(H)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T))])
    R = Vt.T @ D @ U.T
    t = mu_d - R @ mu_s
    return R, t


@dataclass(frozen=True)
class AteStats:
    rmse: float
    mean: float
    median: float
    stddev: float
    pairs: int


def ate_rmse(
    est: Trajectory,
    gt: Trajectory,
    max_dt: float = DEFAULT_MAX_DT,
    align: bool = True,
) -> AteStats:
    """Absolute trajectory error between associated position pairs.

    With `align`, a closed-form rigid transform maps the estimate onto the
    ground truth before the translational differences are taken. The
    standard deviation is the sample (n-1) form.
    """
    pairs = associate(est.timestamps, gt.timestamps, max_dt)
    if len(pairs) < 2:
        raise ValueError("disjoint trajectories: fewer than 2 associations")
    e = est.positions[[i for i, _ in pairs]]
    g = gt.positions[[j for _, j in pairs]]
    if align:
        R, t = rigid_align(e, g)
        e = e @ R.T + t
    d = np.linalg.norm(e - g, axis=1)
    return AteStats(
        rmse=float(np.sqrt((d**2).mean())),
        mean=float(d.mean()),
        median=float(np.median(d)),
        stddev=float(d.std(ddof=1)),
        pairs=len(d),
    )
