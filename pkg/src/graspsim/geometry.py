"""Pinhole camera geometry and rigid transforms.

Image-space grasps are converted to robot-frame gripper poses through the
usual calibration chain of a wrist-camera rig: deproject the grasp pixel
through the camera intrinsics, map the camera-frame point through the
hand-eye transform into the robot frame, convert the pixel width to meters
at the grasp depth, and compose the in-plane grasp angle with the camera
yaw.

Angle convention: image-plane angles are measured with the u axis to the
right and the v axis up, i.e. clockwise-positive in raster coordinates.
For a camera looking straight down at the table this makes the world grasp
angle an exact yaw offset of the image angle, so the composition in
:func:`image_grasp_to_world` is purely additive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DepthZero, NonPositiveDepth


def normalize_angle(angle: float) -> float:
    """Wrap an angle into [-pi/2, pi/2); antipodal grasps are pi-symmetric."""
    return (angle + math.pi / 2.0) % math.pi - math.pi / 2.0


def rotation_z(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters relating camera-frame points to pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width):
            raise ValueError("cx must lie inside the image")
        if not (0 <= self.cy < self.height):
            raise ValueError("cy must lie inside the image")


DEFAULT_INTRINSICS = CameraIntrinsics(fx=110.0, fy=110.0, cx=64.0, cy=64.0, width=128, height=128)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid transform (rotation + translation), meters.

    ``rotation`` must be orthonormal with determinant +1 within 1e-9.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @property
    def yaw(self) -> float:
        """Rotation about the z axis, extracted from the rotation matrix."""
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])

    def apply(self, point) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float).reshape(3) + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        """Compose transforms so that (a @ b)(p) == a(b(p))."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)


def apply_transform(t: RigidTransform, point) -> np.ndarray:
    """Apply ``t`` to a 3-vector: rotation @ point + translation."""
    return t.apply(point)


def top_down_camera_pose(height: float, yaw: float = 0.0) -> RigidTransform:
    """Pose of a camera looking straight down from ``height`` above the table origin.

    The camera x axis maps to world +x and the optical axis to world -z, so
    the image is a map view of the table with u increasing toward +x.
    """
    down = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    return RigidTransform(rotation_z(yaw) @ down, np.array([0.0, 0.0, float(height)]))


def wrist_camera_offset(height: float = 0.09, tilt: float = math.radians(10.0)) -> RigidTransform:
    """Camera pose relative to the tool point on a wrist-mounted rig.

    Defaults model a camera mounted 90 mm above the fingertips and inclined
    10 degrees toward the gripper. The tilt is configurable; the simulator's
    default scene camera remains top-down.
    """
    down = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    return RigidTransform(rotation_x(tilt) @ down, np.array([0.0, 0.0, float(height)]))


def project(k: CameraIntrinsics, point_cam) -> tuple[float, float]:
    """Project a camera-frame point to real-valued pixel coordinates.

    Raises NonPositiveDepth when the point is at or behind the camera plane.
    The result may lie outside the image bounds.
    """
    x, y, z = np.asarray(point_cam, dtype=float).reshape(3)
    if z <= 0:
        raise NonPositiveDepth(f"cannot project point with z={z}")
    return (k.fx * x / z + k.cx, k.fy * y / z + k.cy)


def deproject(k: CameraIntrinsics, u: float, v: float, depth: float) -> np.ndarray:
    """Back-project pixel (u, v) at ``depth`` meters to a camera-frame point.

    Raises DepthZero for depth exactly 0 (an invalid sensor reading) and
    NonPositiveDepth for negative depth.
    """
    if depth == 0:
        raise DepthZero(f"depth is 0 at pixel ({u}, {v})")
    if depth < 0:
        raise NonPositiveDepth(f"depth {depth} is negative")
    return np.array([(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth])


@dataclass(frozen=True)
class ImageGrasp:
    """A grasp in image space: center pixel, in-plane angle, width in pixels."""

    u: float
    v: float
    phi_img: float
    w_img: float
    q: float
    depth: float


@dataclass(frozen=True)
class WorldGrasp:
    """A grasp in the robot frame: gripper center, yaw, width and quality."""

    x: float
    y: float
    z: float
    phi: float
    w: float
    q: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def image_grasp_to_world(k: CameraIntrinsics, t_rc: RigidTransform, g: ImageGrasp) -> WorldGrasp:
    """Convert an image-space grasp to the robot frame.

    Position goes through deprojection and the hand-eye transform. The pixel
    width is scaled by depth/fx (square pixels make the axis choice
    immaterial). The grasp angle is composed with the camera yaw only; the
    grasp is executed perpendicular to the table plane.
    """
    p = t_rc.apply(deproject(k, g.u, g.v, g.depth))
    w = g.w_img * g.depth / k.fx
    phi = normalize_angle(g.phi_img + t_rc.yaw)
    return WorldGrasp(x=float(p[0]), y=float(p[1]), z=float(p[2]), phi=phi, w=float(w), q=float(g.q))
