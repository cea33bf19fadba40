"""Pinhole cameras, two-view DLT triangulation and MPJPE."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .micronet import Pose2D

DEGENERACY_TOL = 1e-10
PROJECTION_TOL = 1e-12


class DegenerateGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class CameraModel:
    P: np.ndarray  # (3, 4)
    width: int = 346
    height: int = 260

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        if P.shape != (3, 4) or not np.isfinite(P).all():
            raise ValueError("P must be a finite 3x4 matrix")
        if np.linalg.matrix_rank(P[:, :3]) < 3:
            raise ValueError("left 3x3 block of P is singular")
        object.__setattr__(self, "P", P)

    @classmethod
    def from_krt(cls, K, R, t, width=346, height=260) -> "CameraModel":
        Rt = np.column_stack([np.asarray(R, float), np.asarray(t, float).reshape(3)])
        return cls(np.asarray(K, float) @ Rt, width, height)

    def to_json(self) -> str:
        return json.dumps({"P": self.P.reshape(-1).tolist(), "width": self.width,
                           "height": self.height}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CameraModel":
        d = json.loads(text)
        P = d["P"]
        if len(P) != 12:
            raise ValueError("camera JSON needs 12 row-major P entries")
        return cls(np.array(P, float).reshape(3, 4), int(d["width"]), int(d["height"]))


@dataclass(frozen=True)
class Pose3D:
    xyz: np.ndarray  # (J, 3) millimetres
    valid: np.ndarray  # (J,) bool

    @classmethod
    def of(cls, xyz, valid=None) -> "Pose3D":
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        valid = np.ones(len(xyz), bool) if valid is None else np.asarray(valid, bool)
        return cls(xyz, valid)


@dataclass(frozen=True)
class MpjpeReport:
    mpjpe: float
    per_joint: np.ndarray  # mean error per joint index, NaN where never valid
    n_samples: int
    n_joints: int
    n_valid: int

    def as_dict(self) -> dict:
        return {
            "mpjpe": self.mpjpe,
            "per_joint": [None if np.isnan(v) else float(v) for v in self.per_joint],
            "n_samples": self.n_samples,
            "n_joints": self.n_joints,
            "n_valid": self.n_valid,
        }


def project(cam: CameraModel, point) -> np.ndarray:
    """Project one ``(3,)`` point or an ``(n, 3)`` array to pixel coordinates."""
    X = np.asarray(point, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    h = X @ cam.P[:, :3].T + cam.P[:, 3]
    w = h[:, 2]
    if (np.abs(w) < PROJECTION_TOL).any():
        raise DegenerateGeometryError("point lies on the camera's principal plane")
    uv = h[:, :2] / w[:, None]
    return uv[0] if single else uv


def triangulate_point(P_a, P_b, uv_a, uv_b) -> np.ndarray:
    """Linear DLT for one correspondence.

    Each view contributes ``u * P[2] - P[0]`` and ``v * P[2] - P[1]``. Rows
    are scaled to unit norm and the solution is the right singular vector
    of the smallest singular value. Raises when the null space is not
    one-dimensional (second-smallest singular value below
    ``DEGENERACY_TOL`` relative to the largest).
    """
    A = np.array([
        uv_a[0] * P_a[2] - P_a[0],
        uv_a[1] * P_a[2] - P_a[1],
        uv_b[0] * P_b[2] - P_b[0],
        uv_b[1] * P_b[2] - P_b[1],
    ])
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    _, s, vt = np.linalg.svd(A)
    if s[2] <= DEGENERACY_TOL * s[0]:
        raise DegenerateGeometryError("rays are parallel or coincident; no unique intersection")
    X = vt[-1]
    if abs(X[3]) < PROJECTION_TOL * np.abs(X[:3]).max():
        raise DegenerateGeometryError("intersection at infinity")
    return X[:3] / X[3]


def _normalizer(P: np.ndarray):
    # maps pixels to a unit-scale frame; improves DLT conditioning
    s = 1.0 / np.abs(P[:2, :3]).max()
    T = np.diag([s, s, 1.0])
    return T @ P, T


def triangulate(cam_a: CameraModel, cam_b: CameraModel, pose_a: Pose2D, pose_b: Pose2D) -> Pose3D:
    """Triangulate every joint seen in both views.

    Identical cameras raise :class:`DegenerateGeometryError`. Joints invalid
    in either view, or whose individual system is degenerate, come back
    invalid with NaN coordinates.
    """
    if len(pose_a.uv) != len(pose_b.uv):
        raise ValueError("poses have different joint counts")
    na = cam_a.P / np.linalg.norm(cam_a.P)
    nb = cam_b.P / np.linalg.norm(cam_b.P)
    if np.allclose(na, nb, rtol=0, atol=1e-12) or np.allclose(na, -nb, rtol=0, atol=1e-12):
        raise DegenerateGeometryError("identical cameras give no parallax")
    Pa, Ta = _normalizer(cam_a.P)
    Pb, Tb = _normalizer(cam_b.P)
    J = len(pose_a.uv)
    xyz = np.full((J, 3), np.nan)
    valid = np.zeros(J, bool)
    for j in range(J):
        if not (pose_a.valid[j] and pose_b.valid[j]):
            continue
        ua = Ta @ np.append(pose_a.uv[j], 1.0)
        ub = Tb @ np.append(pose_b.uv[j], 1.0)
        try:
            xyz[j] = triangulate_point(Pa, Pb, ua, ub)
        except DegenerateGeometryError:
            continue
        valid[j] = True
    return Pose3D(xyz, valid)


def project_pose(cam: CameraModel, pose: Pose3D) -> Pose2D:
    uv = np.full((len(pose.xyz), 2), np.nan)
    ok = pose.valid.copy()
    if ok.any():
        uv[ok] = project(cam, pose.xyz[ok])
    return Pose2D(uv, ok)


# -- synthetic rigs ----------------------------------------------------------

def look_at_camera(position, target=(0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0), focal=300.0,
                   width=346, height=260) -> CameraModel:
    """Camera at ``position`` (mm) looking at ``target``; principal point at image centre."""
    c = np.asarray(position, float)
    z = np.asarray(target, float) - c
    z /= np.linalg.norm(z)
    x = np.cross(z, np.asarray(up, float))
    if np.linalg.norm(x) < 1e-9:
        x = np.cross(z, [1.0, 0.0, 0.0])
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.vstack([x, y, z])
    K = np.array([[focal, 0, width / 2], [0, focal, height / 2], [0, 0, 1.0]])
    return CameraModel.from_krt(K, R, -R @ c, width, height)


def two_view_rig(angle_deg: float = 90.0, distance: float = 3000.0, height_mm: float = 0.0,
                 focal: float = 300.0, width=346, height=260) -> tuple[CameraModel, CameraModel]:
    """Two cameras on a circle around the origin separated by ``angle_deg``."""
    half = np.deg2rad(angle_deg) / 2
    pos = lambda a: (distance * np.sin(a), height_mm, distance * np.cos(a))
    return (look_at_camera(pos(-half), focal=focal, width=width, height=height),
            look_at_camera(pos(half), focal=focal, width=width, height=height))


def random_rig(rng, min_angle_deg: float = 20.0, max_angle_deg: float = 160.0):
    """Random non-degenerate pair: random baseline angle, distances, heights, focal lengths."""
    angle = rng.uniform(min_angle_deg, max_angle_deg)
    yaw = rng.uniform(0, 2 * np.pi)
    cams = []
    for a in (yaw, yaw + np.deg2rad(angle)):
        d = rng.uniform(2000, 5000)
        position = (d * np.sin(a), rng.uniform(-500, 500), d * np.cos(a))
        target = rng.uniform(-200, 200, 3)
        cams.append(look_at_camera(position, target, focal=rng.uniform(200, 600)))
    return cams[0], cams[1], angle


def baseline_angle(cam_a: CameraModel, cam_b: CameraModel, point=(0.0, 0.0, 0.0)) -> float:
    """Angle in degrees between the two viewing rays through ``point``."""
    ca, cb = camera_center(cam_a), camera_center(cam_b)
    ra, rb = ca - point, cb - point
    cosang = ra @ rb / (np.linalg.norm(ra) * np.linalg.norm(rb))
    return float(np.degrees(np.arccos(np.clip(cosang, -1, 1))))


def camera_center(cam: CameraModel) -> np.ndarray:
    return -np.linalg.solve(cam.P[:, :3], cam.P[:, 3])


# -- metrics -----------------------------------------------------------------

def _mpjpe(pred_xyz: Sequence[np.ndarray], gt_xyz, pred_valid, gt_valid) -> MpjpeReport:
    if len(pred_xyz) != len(gt_xyz):
        raise ValueError(f"{len(pred_xyz)} predictions vs {len(gt_xyz)} ground-truth samples")
    if not pred_xyz:
        raise ValueError("no samples")
    P = np.stack(pred_xyz)
    G = np.stack(gt_xyz)
    if P.shape != G.shape:
        raise ValueError(f"joint arrays differ in shape: {P.shape} vs {G.shape}")
    mask = np.stack(pred_valid) & np.stack(gt_valid)
    n_valid = int(mask.sum())
    if n_valid == 0:
        raise ValueError("no joint is valid in both prediction and ground truth")
    err = np.zeros(mask.shape)
    err[mask] = np.linalg.norm(P[mask] - G[mask], axis=-1)
    counts = mask.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_joint = np.where(counts > 0, err.sum(axis=0) / counts, np.nan)
    return MpjpeReport(float(err[mask].mean()), per_joint, len(P), P.shape[1], n_valid)


def mpjpe_2d(pred: Sequence[Pose2D], gt: Sequence[Pose2D]) -> MpjpeReport:
    """Mean pixel distance over samples and joints valid in both sequences."""
    return _mpjpe([p.uv for p in pred], [g.uv for g in gt],
                  [p.valid for p in pred], [g.valid for g in gt])


def mpjpe_3d(pred: Sequence[Pose3D], gt: Sequence[Pose3D]) -> MpjpeReport:
    """Mean millimetre distance over samples and joints valid in both sequences."""
    return _mpjpe([p.xyz for p in pred], [g.xyz for g in gt],
                  [p.valid for p in pred], [g.valid for g in gt])


# -- pose CSV ----------------------------------------------------------------

def poses_to_csv(poses: Sequence) -> str:
    """``sample,joint,u,v,valid`` (2D) or ``sample,joint,X,Y,Z,valid`` (3D)."""
    is3d = bool(poses) and isinstance(poses[0], Pose3D)
    lines = ["sample,joint,X,Y,Z,valid" if is3d else "sample,joint,u,v,valid"]
    for n, pose in enumerate(poses):
        coords = pose.xyz if is3d else pose.uv
        for j, (c, ok) in enumerate(zip(coords.tolist(), pose.valid.tolist())):
            vals = ",".join(f"{v:.17g}" for v in c)
            lines.append(f"{n},{j},{vals},{int(ok)}")
    return "\n".join(lines) + "\n"


def poses_from_csv(text: str, dim: int) -> list:
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise ValueError("empty pose file")
    body = rows[1:] if rows[0][0].isalpha() else rows
    table = {}
    for lineno, ln in enumerate(body, start=2 if body is not rows else 1):
        f = ln.split(",")
        if len(f) != dim + 3:
            raise ValueError(f"line {lineno}: expected {dim + 3} fields, got {len(f)}")
        try:
            n, j = int(f[0]), int(f[1])
            coords = [float(v) for v in f[2:2 + dim]]
            ok = bool(int(f[-1]))
        except ValueError:
            raise ValueError(f"line {lineno}: malformed pose row {ln!r}") from None
        table.setdefault(n, {})[j] = (coords, ok)
    poses = []
    for n in sorted(table):
        joints = table[n]
        J = max(joints) + 1
        coords = np.full((J, dim), np.nan)
        valid = np.zeros(J, bool)
        for j, (c, ok) in joints.items():
            coords[j] = c
            valid[j] = ok
        poses.append(Pose3D(coords, valid) if dim == 3 else Pose2D(coords, valid))
    return poses
