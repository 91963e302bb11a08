"""Flat-shaded z-buffer rasterizer for brick scenes.

Every brick is drawn as its axis-aligned box (12 triangles, back faces
culled), the baseplate as a ground quad. One sample per pixel at the pixel
center, no anti-aliasing, so masks are crisp and renders are bit-exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .grid_model import BASEPLATE, LAYER_HEIGHT, Brick, Structure

BACKGROUND_ID = 0
HELD_ID = 65533
GRIPPER_ID = 65534
MAX_BRICKS = HELD_ID - 1

BASEPLATE_COLOR = (96, 150, 96)
GRIPPER_COLOR = (70, 70, 80)
NEAR = 1e-3

# (outward normal, shade factor)
_FACE_SHADE = {
    (0, 0, 1): 1.00,
    (0, 0, -1): 0.45,
    (1, 0, 0): 0.80,
    (-1, 0, 0): 0.62,
    (0, 1, 0): 0.70,
    (0, -1, 0): 0.90,
}


class UnknownEntity(KeyError):
    pass


@dataclass(frozen=True)
class GripperBox:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]


@dataclass
class RenderOutput:
    rgb: np.ndarray  # (H, W, 3) uint8
    id_buffer: np.ndarray  # (H, W) uint16
    depth: np.ndarray  # (H, W) float64, inf where nothing was drawn


def brick_box(brick: Brick) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
    x0, y0, z0 = brick.pos
    ex, ey = brick.extent
    return (
        (float(x0), float(y0), z0 * LAYER_HEIGHT),
        (float(x0 + ex), float(y0 + ey), (z0 + brick.type.h) * LAYER_HEIGHT),
    )


def hover_pose(brick: Brick, clearance: int = 2) -> Brick:
    """The held brick waiting ``clearance`` layers above its target pose."""
    x, y, z = brick.pos
    return brick.moved(pos=(x, y, z + clearance))


def gripper_for(held: Brick, padding: float = 0.25, height: float = 1.5) -> GripperBox:
    """A box gripping the held brick from above, slightly wider than its footprint."""
    (x0, y0, _), (x1, y1, z1) = brick_box(held)
    return GripperBox((x0 - padding, y0 - padding, z1), (x1 + padding, y1 + padding, z1 + height * LAYER_HEIGHT))


def _box_faces(lo, hi):
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    return [
        ((0, 0, 1), [(x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)]),
        ((0, 0, -1), [(x0, y0, z0), (x0, y1, z0), (x1, y1, z0), (x1, y0, z0)]),
        ((1, 0, 0), [(x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)]),
        ((-1, 0, 0), [(x0, y0, z0), (x0, y0, z1), (x0, y1, z1), (x0, y1, z0)]),
        ((0, 1, 0), [(x0, y1, z0), (x0, y1, z1), (x1, y1, z1), (x1, y1, z0)]),
        ((0, -1, 0), [(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)]),
    ]


def _clip_near(poly: np.ndarray) -> np.ndarray:
    """Clip a camera-frame polygon against z = NEAR (Sutherland-Hodgman, one plane)."""
    out = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        ina, inb = a[2] >= NEAR, b[2] >= NEAR
        if ina:
            out.append(a)
        if ina != inb:
            s = (NEAR - a[2]) / (b[2] - a[2])
            out.append(a + s * (b - a))
    return np.array(out)


class _Raster:
    def __init__(self, camera: Camera):
        camera.validate()
        self.camera = camera
        self.w, self.h = camera.resolution
        self.f = camera.focal_px
        self.rgb = np.zeros((self.h, self.w, 3), dtype=np.uint8)
        self.ids = np.zeros((self.h, self.w), dtype=np.uint16)
        self.depth = np.full((self.h, self.w), np.inf)
        self.cam_pos = np.asarray(camera.position, dtype=float)

    def quad(self, normal, corners, color, entity_id: int) -> None:
        corners = np.asarray(corners, dtype=float)
        # back-face culling in world space
        if np.dot(np.asarray(normal, dtype=float), corners[0] - self.cam_pos) >= 0:
            return
        pc = self.camera.to_camera_frame(corners)
        if np.any(pc[:, 2] < NEAR):
            pc = _clip_near(pc)
            if len(pc) < 3:
                return
        for i in range(1, len(pc) - 1):
            self._triangle(pc[[0, i, i + 1]], color, entity_id)

    def _triangle(self, pc: np.ndarray, color, entity_id: int) -> None:
        u = self.w / 2.0 + self.f * pc[:, 0] / pc[:, 2]
        v = self.h / 2.0 + self.f * pc[:, 1] / pc[:, 2]
        inv_z = 1.0 / pc[:, 2]
        area = (u[1] - u[0]) * (v[2] - v[0]) - (u[2] - u[0]) * (v[1] - v[0])
        if abs(area) < 1e-12:
            return
        x_lo = max(int(np.floor(u.min() - 0.5)), 0)
        x_hi = min(int(np.ceil(u.max() - 0.5)), self.w - 1)
        y_lo = max(int(np.floor(v.min() - 0.5)), 0)
        y_hi = min(int(np.ceil(v.max() - 0.5)), self.h - 1)
        if x_lo > x_hi or y_lo > y_hi:
            return
        px, py = np.meshgrid(np.arange(x_lo, x_hi + 1) + 0.5, np.arange(y_lo, y_hi + 1) + 0.5)
        w0 = ((u[1] - px) * (v[2] - py) - (u[2] - px) * (v[1] - py)) / area
        w1 = ((u[2] - px) * (v[0] - py) - (u[0] - px) * (v[2] - py)) / area
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            return
        depth = 1.0 / (w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2])
        region = (slice(y_lo, y_hi + 1), slice(x_lo, x_hi + 1))
        win = inside & (depth < self.depth[region])
        self.depth[region][win] = depth[win]
        self.ids[region][win] = entity_id
        self.rgb[region][win] = color

    def box(self, lo, hi, color, entity_id: int) -> None:
        for normal, corners in _box_faces(lo, hi):
            shade = _FACE_SHADE[normal]
            shaded = tuple(int(round(c * shade)) for c in color)
            self.quad(normal, corners, shaded, entity_id)


def render_scene(
    structure: Structure,
    camera: Camera,
    held: Brick | None = None,
    gripper: GripperBox | None = None,
    draw_baseplate: bool = True,
) -> RenderOutput:
    if structure.bricks and max(structure.bricks) >= MAX_BRICKS:
        raise ValueError("too many bricks for a 16-bit id buffer")
    r = _Raster(camera)
    if draw_baseplate:
        W, D, _ = structure.workspace
        r.quad((0, 0, 1), [(0, 0, 0), (W, 0, 0), (W, D, 0), (0, D, 0)], BASEPLATE_COLOR, BACKGROUND_ID)
    for idx, brick in structure.items():
        r.box(*brick_box(brick), brick.type.color, idx + 1)
    if held is not None:
        r.box(*brick_box(held), held.type.color, HELD_ID)
    if gripper is not None:
        r.box(gripper.lo, gripper.hi, GRIPPER_COLOR, GRIPPER_ID)
    return RenderOutput(r.rgb, r.ids, r.depth)


def structure_mask(ids: np.ndarray) -> np.ndarray:
    return (ids != BACKGROUND_ID) & (ids < HELD_ID)


def extract_masks(out: RenderOutput, step, structure: Structure | None = None) -> dict[str, np.ndarray]:
    """Boolean masks ``str``, ``ref``, ``tgt`` (held brick) and ``grip`` from the id buffer.

    ``step`` is an assembly step or a bare reference index (brick index or
    BASEPLATE); the baseplate has no entity id, so
    its mask is empty. With ``structure`` given, a reference absent from it
    raises :class:`UnknownEntity`.
    """
    ref = getattr(step, "ref", step)
    if structure is not None and ref != BASEPLATE and ref not in structure:
        raise UnknownEntity(f"reference brick {ref} is not in the rendered structure")
    ids = out.id_buffer
    ref_mask = np.zeros(ids.shape, dtype=bool) if ref == BASEPLATE else ids == ref + 1
    return {
        "str": structure_mask(ids),
        "ref": ref_mask,
        "tgt": ids == HELD_ID,
        "grip": ids == GRIPPER_ID,
    }
