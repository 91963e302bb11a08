"""Assembly planning, situated manuals and execution simulation for interlocking bricks."""
from __future__ import annotations

from .camera import Camera, default_camera, overhead_camera, perturbed
from .executor import SkillEntry, SkillModel, monte_carlo, run_trial
from .grid_model import BASEPLATE, Brick, BrickType, Structure, TaskEncoding
from .grounding import AffineTransform, ecc_align, ground_step, overlay_dimming, warp_mask
from .planner import AssemblyPlan, AssemblyStep, PlannerConfig, plan_assembly, validate_plan
from .render import extract_masks, render_scene
from .stability import StabilityParams, assess_stability

__all__ = [
    "AffineTransform",
    "AssemblyPlan",
    "AssemblyStep",
    "BASEPLATE",
    "Brick",
    "BrickType",
    "Camera",
    "PlannerConfig",
    "SkillEntry",
    "SkillModel",
    "StabilityParams",
    "Structure",
    "TaskEncoding",
    "assess_stability",
    "default_camera",
    "ecc_align",
    "extract_masks",
    "ground_step",
    "monte_carlo",
    "overhead_camera",
    "overlay_dimming",
    "perturbed",
    "plan_assembly",
    "render_scene",
    "run_trial",
    "validate_plan",
    "warp_mask",
]
