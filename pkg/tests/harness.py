"""Synthetic-data helpers shared by the grounding tests and the acceptance run."""
from __future__ import annotations

import math

import numpy as np

from brickplan.camera import default_camera
from brickplan.corpus import get
from brickplan.grounding import AffineTransform, warp_image
from brickplan.render import render_scene, structure_mask


def rendered_structure_mask(name: str = "house", resolution=(128, 128)) -> np.ndarray:
    entry = get(name)
    cam = default_camera(entry.design.workspace, resolution=resolution)
    return structure_mask(render_scene(entry.design, cam).id_buffer)


def random_affine(rng: np.random.Generator, shape, max_shift=10.0, max_rot_deg=5.0, scale=(0.95, 1.05)) -> AffineTransform:
    """Rotation and isotropic scale about the image centre followed by a translation of norm <= max_shift."""
    h, w = shape
    c = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    a = math.radians(rng.uniform(-max_rot_deg, max_rot_deg))
    s = rng.uniform(*scale)
    R = s * np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    r, phi = max_shift * math.sqrt(rng.uniform()), rng.uniform(0, 2 * math.pi)
    t = c - R @ c + r * np.array([math.cos(phi), math.sin(phi)])
    return AffineTransform(np.hstack([R, t[:, None]]))


def synthetic_observation(template: np.ndarray, H: AffineTransform) -> np.ndarray:
    return np.clip(warp_image(template.astype(float), H), 0.0, 1.0)


def corner_error(estimate: AffineTransform, truth: AffineTransform, shape) -> float:
    h, w = shape
    corners = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], dtype=float)
    return float(np.linalg.norm(estimate.apply(corners) - truth.apply(corners), axis=1).max())
