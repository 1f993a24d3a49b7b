"""Pinhole camera model, coordinate frames, and pixel <-> world conversions.

World frame: right-handed, z up, floor at z = 0. Agent heading is measured
counter-clockwise from world +x and kept normalized to (-pi, pi].
Camera frame: +z forward (optical axis), +x right, +y down; at heading 0 the
camera right axis maps to world -y.

Depth values everywhere are planar z-depth (distance along the optical axis),
not Euclidean ray length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class InvalidDepthError(ValueError):
    """Raised when an unprojection is attempted with depth <= 0."""


def normalize_angle(theta: float) -> float:
    """Wrap an angle in radians into (-pi, pi]."""
    wrapped = math.remainder(theta, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ValueError("principal point outside image")

    @classmethod
    def from_hfov(cls, width: int, height: int, hfov_deg: float = 90.0) -> "CameraIntrinsics":
        """Square-pixel intrinsics with a symmetric frustum (cx = width/2)."""
        fx = width / (2.0 * math.tan(math.radians(hfov_deg) / 2.0))
        return cls(width=width, height=height, fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0)


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    def forward(self) -> tuple[float, float]:
        return (math.cos(self.heading), math.sin(self.heading))


class ViewDirection(Enum):
    """Four non-overlapping 90-degree views in counter-clockwise order."""

    FRONT = "front"
    LEFT = "left"
    BACK = "back"
    RIGHT = "right"

    @property
    def yaw_offset(self) -> float:
        return _YAW_OFFSETS[self]


_YAW_OFFSETS = {
    ViewDirection.FRONT: 0.0,
    ViewDirection.LEFT: math.pi / 2.0,
    ViewDirection.BACK: math.pi,
    ViewDirection.RIGHT: -math.pi / 2.0,
}

VIEW_ORDER = (ViewDirection.FRONT, ViewDirection.LEFT, ViewDirection.BACK, ViewDirection.RIGHT)


@dataclass(frozen=True)
class PixelPoint:
    u: float
    v: float


@dataclass(frozen=True)
class WorldPoint:
    x: float
    y: float
    z: float = 0.0


def view_pose(pose: Pose2D, direction: ViewDirection) -> Pose2D:
    """Pose of the camera looking along `direction`; position unchanged."""
    return Pose2D(pose.x, pose.y, pose.heading + direction.yaw_offset)


def _camera_axes(pose: Pose2D) -> tuple[np.ndarray, np.ndarray]:
    """World-frame (forward, right) unit vectors of the camera's ground-plane axes."""
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    fwd = np.array([c, s])
    right = np.array([s, -c])
    return fwd, right


def unproject(
    intr: CameraIntrinsics,
    cam_pose: Pose2D,
    cam_height: float,
    px: PixelPoint,
    planar_depth: float,
) -> WorldPoint:
    """Lift a pixel with known planar depth into the world frame."""
    if planar_depth <= 0 or not math.isfinite(planar_depth):
        raise InvalidDepthError(f"planar depth must be positive and finite, got {planar_depth}")
    x_cam = (px.u - intr.cx) / intr.fx * planar_depth
    y_cam = (px.v - intr.cy) / intr.fy * planar_depth
    fwd, right = _camera_axes(cam_pose)
    gx = cam_pose.x + planar_depth * fwd[0] + x_cam * right[0]
    gy = cam_pose.y + planar_depth * fwd[1] + x_cam * right[1]
    gz = cam_height - y_cam
    return WorldPoint(float(gx), float(gy), float(gz))


def unproject_grid(
    intr: CameraIntrinsics,
    cam_pose: Pose2D,
    cam_height: float,
    us: np.ndarray,
    vs: np.ndarray,
    depths: np.ndarray,
) -> np.ndarray:
    """Vectorized unprojection; returns an (n, 3) array of world points."""
    depths = np.asarray(depths, dtype=float)
    x_cam = (np.asarray(us, dtype=float) - intr.cx) / intr.fx * depths
    y_cam = (np.asarray(vs, dtype=float) - intr.cy) / intr.fy * depths
    fwd, right = _camera_axes(cam_pose)
    out = np.empty(depths.shape + (3,), dtype=float)
    out[..., 0] = cam_pose.x + depths * fwd[0] + x_cam * right[0]
    out[..., 1] = cam_pose.y + depths * fwd[1] + x_cam * right[1]
    out[..., 2] = cam_height - y_cam
    return out


def project(
    intr: CameraIntrinsics,
    cam_pose: Pose2D,
    cam_height: float,
    point: WorldPoint,
) -> tuple[PixelPoint, float] | None:
    """Inverse of unproject.

    Returns (pixel, planar depth) iff the point lies strictly in front of the
    camera and inside the image bounds; otherwise None.
    """
    fwd, right = _camera_axes(cam_pose)
    dx = point.x - cam_pose.x
    dy = point.y - cam_pose.y
    z_cam = dx * fwd[0] + dy * fwd[1]
    if z_cam <= 0:
        return None
    x_cam = dx * right[0] + dy * right[1]
    y_cam = cam_height - point.z
    u = intr.cx + intr.fx * x_cam / z_cam
    v = intr.cy + intr.fy * y_cam / z_cam
    if not (0 <= u < intr.width and 0 <= v < intr.height):
        return None
    return PixelPoint(float(u), float(v)), float(z_cam)
