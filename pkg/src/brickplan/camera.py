"""Pinhole camera model shared by the renderer and the observability check."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .grid_model import LAYER_HEIGHT


class DegenerateCamera(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    """Positions are world units: x, y in stud pitches, z = layers * LAYER_HEIGHT."""

    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 0.0, 1.0)
    fov_deg: float = 40.0
    resolution: tuple[int, int] = (256, 256)  # (width, height)

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (right, down, forward) unit vectors; image x grows right, y grows down."""
        pos = np.asarray(self.position, dtype=float)
        fwd = np.asarray(self.look_at, dtype=float) - pos
        norm = np.linalg.norm(fwd)
        if norm < 1e-12:
            raise DegenerateCamera("camera position coincides with look_at")
        fwd = fwd / norm
        right = np.cross(fwd, np.asarray(self.up, dtype=float))
        rn = np.linalg.norm(right)
        if rn < 1e-9:
            raise DegenerateCamera("up vector is parallel to the view direction")
        right = right / rn
        down = np.cross(fwd, right)
        return right, down, fwd

    def validate(self) -> None:
        self.basis()
        w, h = self.resolution
        if w <= 0 or h <= 0:
            raise DegenerateCamera("resolution must be positive")
        if not 0.0 < self.fov_deg < 180.0:
            raise DegenerateCamera("field of view must be in (0, 180) degrees")

    @property
    def focal_px(self) -> float:
        return (self.resolution[1] / 2.0) / math.tan(math.radians(self.fov_deg) / 2.0)

    def to_camera_frame(self, points: np.ndarray) -> np.ndarray:
        right, down, fwd = self.basis()
        rel = np.asarray(points, dtype=float) - np.asarray(self.position, dtype=float)
        return np.stack([rel @ right, rel @ down, rel @ fwd], axis=-1)

    def project(self, points: np.ndarray) -> np.ndarray:
        """World points -> (u, v, depth); u, v in pixel units with pixel centers at k + 0.5."""
        pc = self.to_camera_frame(points)
        f = self.focal_px
        w, h = self.resolution
        u = w / 2.0 + f * pc[..., 0] / pc[..., 2]
        v = h / 2.0 + f * pc[..., 1] / pc[..., 2]
        return np.stack([u, v, pc[..., 2]], axis=-1)

    def to_dict(self) -> dict:
        return {
            "position": list(self.position),
            "look_at": list(self.look_at),
            "up": list(self.up),
            "fov_deg": self.fov_deg,
            "resolution": list(self.resolution),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        cam = cls(
            tuple(float(v) for v in d["position"]),
            tuple(float(v) for v in d["look_at"]),
            tuple(float(v) for v in d.get("up", (0.0, 0.0, 1.0))),
            float(d.get("fov_deg", 40.0)),
            tuple(int(v) for v in d.get("resolution", (256, 256))),
        )
        cam.validate()
        return cam


def default_camera(
    workspace: tuple[int, int, int],
    elevation_deg: float = 35.0,
    azimuth_deg: float = 30.0,
    fov_deg: float = 40.0,
    resolution: tuple[int, int] = (256, 256),
) -> Camera:
    """Table-side view of the whole baseplate.

    The camera sits in front of the baseplate (the -y side), swung toward -x
    by the azimuth, looking at the baseplate center.
    """
    W, D, _ = workspace
    target = np.array([W / 2.0, D / 2.0, 0.0])
    el, az = math.radians(elevation_deg), math.radians(azimuth_deg)
    direction = np.array([-math.sin(az) * math.cos(el), -math.cos(az) * math.cos(el), math.sin(el)])
    dist = 1.1 * 0.5 * math.hypot(W, D) / math.tan(math.radians(fov_deg) / 2.0)
    pos = target + dist * direction
    return Camera(tuple(pos.tolist()), tuple(target.tolist()), (0.0, 0.0, 1.0), fov_deg, resolution)


def overhead_camera(workspace: tuple[int, int, int], resolution=(256, 256)) -> Camera:
    W, D, H = workspace
    height = (H + 2) * LAYER_HEIGHT + 0.6 * max(W, D) / math.tan(math.radians(20.0))
    return Camera((W / 2.0, D / 2.0, height), (W / 2.0, D / 2.0, 0.0), (0.0, 1.0, 0.0), 40.0, resolution)


def _rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    K = np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]])
    return np.eye(3) * c + s * K + (1 - c) * np.outer(axis, axis)


def perturbed(
    camera: Camera,
    yaw_deg: float = 0.0,
    pitch_deg: float = 0.0,
    roll_deg: float = 0.0,
    focal_scale: float = 1.0,
) -> Camera:
    """Rotate the camera about its own center and rescale its focal length."""
    right, down, fwd = camera.basis()
    up = -down
    R = (
        _rotation(fwd, math.radians(roll_deg))
        @ _rotation(right, math.radians(pitch_deg))
        @ _rotation(up, math.radians(yaw_deg))
    )
    pos = np.asarray(camera.position, dtype=float)
    dist = np.linalg.norm(np.asarray(camera.look_at, dtype=float) - pos)
    new_fwd = R @ fwd
    new_up = R @ up
    half = math.tan(math.radians(camera.fov_deg) / 2.0) / focal_scale
    return replace(
        camera,
        look_at=tuple((pos + dist * new_fwd).tolist()),
        up=tuple(new_up.tolist()),
        fov_deg=math.degrees(2.0 * math.atan(half)),
    )
