"""Per-step scene synthesis: reference render, perturbed observation, grounding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera, perturbed
from .grounding import SituatedManual, ground_step
from .planner import AssemblyPlan
from .render import RenderOutput, extract_masks, gripper_for, hover_pose, render_scene


@dataclass(frozen=True)
class Perturbation:
    yaw_deg: float = 0.0
    pitch_deg: float = 0.0
    roll_deg: float = 0.0
    focal_scale: float = 1.0

    @classmethod
    def from_dict(cls, d: dict) -> "Perturbation":
        return cls(
            float(d.get("yaw_deg", 0.0)),
            float(d.get("pitch_deg", 0.0)),
            float(d.get("roll_deg", 0.0)),
            float(d.get("focal_scale", 1.0)),
        )

    def apply(self, camera: Camera) -> Camera:
        return perturbed(camera, self.yaw_deg, self.pitch_deg, self.roll_deg, self.focal_scale)


@dataclass
class StepScene:
    reference: RenderOutput
    observation: RenderOutput
    reference_masks: dict[str, np.ndarray]
    observed_masks: dict[str, np.ndarray]


def render_step(plan: AssemblyPlan, k: int, camera: Camera, clearance: int = 2) -> RenderOutput:
    """Prefix before step ``k`` with the step's brick held above its goal pose by the gripper."""
    step = plan.steps[k]
    held = hover_pose(plan.design[step.tgt], clearance)
    return render_scene(plan.prefix(k), camera, held=held, gripper=gripper_for(held))


def step_scene(
    plan: AssemblyPlan,
    k: int,
    camera: Camera,
    perturbation: Perturbation = Perturbation(),
    clearance: int = 2,
) -> StepScene:
    """Reference render from ``camera`` and a synthetic observation from the perturbed camera.

    The observation's masks come straight from its id buffer and stand in
    for a segmenter's output.
    """
    step = plan.steps[k]
    prefix = plan.prefix(k)
    ref = render_step(plan, k, camera, clearance)
    obs = render_step(plan, k, perturbation.apply(camera), clearance)
    return StepScene(ref, obs, extract_masks(ref, step, prefix), extract_masks(obs, step, prefix))


def situated_manual(scene: StepScene, step, rho_threshold: float = 0.8) -> SituatedManual:
    return ground_step(step, scene.reference_masks, scene.observation.rgb, scene.observed_masks, rho_threshold)


def iou(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, bool), np.asarray(b, bool)
    union = np.count_nonzero(a | b)
    return 1.0 if union == 0 else np.count_nonzero(a & b) / union
