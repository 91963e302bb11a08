"""Assembly-by-disassembly planning over a stud-grid design.

A depth-first search removes bricks from the finished design one at a time.
A removal is allowed only when four criteria hold for the brick in the
current partial structure:

* connectivity: some present reference brick (or the baseplate) relates to it
  by one of the configured task encodings and shares studs with it;
* observability: the brick and that reference both have a clear line of
  sight to at least one camera;
* operability: the brick's vertical removal path and the gripper ring
  around it are free of other bricks;
* stability: what remains is in static equilibrium.

The removal order, reversed, is the assembly plan.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .camera import Camera, default_camera, overhead_camera
from .grid_model import (
    BASEPLATE,
    LAYER_HEIGHT,
    Brick,
    GridError,
    Structure,
    TaskEncoding,
    apply_encoding,
    baseplate_brick,
    contact_studs,
    relative_encoding,
)
from .stability import StabilityParams, assess_stability

DEFAULT_SKILLS = (
    TaskEncoding(0, 0, 1, 0),
    TaskEncoding(1, 0, 1, 0),
    TaskEncoding(0, 1, 1, 0),
)


class PlanningError(Exception):
    pass


class InvalidDesign(PlanningError):
    pass


class Infeasible(PlanningError):
    pass


class BudgetExceeded(Infeasible):
    pass


@dataclass(frozen=True)
class AssemblyStep:
    ref: int
    tgt: int
    tau: TaskEncoding


@dataclass
class AssemblyPlan:
    design: Structure
    steps: list[AssemblyStep]
    skills: tuple[TaskEncoding, ...] = ()

    def prefix(self, k: int) -> Structure:
        """Design bricks placed by the first ``k`` steps."""
        return self.design.subset(s.tgt for s in self.steps[:k])


@dataclass(frozen=True)
class PlannerConfig:
    skills: tuple[TaskEncoding, ...] = DEFAULT_SKILLS
    cameras: tuple[Camera, ...] | None = None  # None: table-side + overhead for the design's workspace
    gripper_padding: int = 1
    gripper_clearance: int = 2
    stability: StabilityParams = field(default_factory=StabilityParams)
    max_states: int = 10**6
    baseplate_origin: tuple[int, int] = (0, 0)
    per_stud_rays: bool = False

    def __post_init__(self):
        if not self.skills:
            raise ValueError("skill set must not be empty")
        if self.max_states < 1 or self.gripper_padding < 0 or self.gripper_clearance < 0:
            raise ValueError("planner limits must be non-negative (max_states positive)")

    def cameras_for(self, workspace: tuple[int, int, int]) -> tuple[Camera, ...]:
        if self.cameras is not None:
            return tuple(self.cameras)
        return (default_camera(workspace), overhead_camera(workspace))


@dataclass
class CriteriaResult:
    con: bool
    obs: bool
    op: bool
    stab: bool
    chosen_ref: int | None = None
    chosen_tau: TaskEncoding | None = None

    @property
    def valid(self) -> bool:
        return self.con and self.obs and self.op and self.stab


@dataclass
class ValidationResult:
    valid: bool
    criterion: str | None = None
    step: int | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.valid


# -- criteria ---------------------------------------------------------------

def check_connectivity(
    structure: Structure,
    brick_index: int,
    skills: Sequence[TaskEncoding],
    baseplate_origin: tuple[int, int] = (0, 0),
) -> list[tuple[int, TaskEncoding]]:
    brick = structure[brick_index]
    pairs = []
    if brick.pos[2] == 0:
        tau = relative_encoding(baseplate_brick(baseplate_origin), brick)
        if tau in skills:
            pairs.append((BASEPLATE, tau))
    for ref_index, ref in structure.items():
        if ref_index == brick_index:
            continue
        tau = relative_encoding(ref, brick)
        if tau in skills and contact_studs(ref, brick):
            pairs.append((ref_index, tau))
    return pairs


def _ray_clear(structure: Structure, start, end, ignore: set[int]) -> bool:
    """3D DDA from ``start`` to ``end`` (world units) through the occupancy grid."""
    g0 = (start[0], start[1], start[2] / LAYER_HEIGHT)
    g1 = (end[0], end[1], end[2] / LAYER_HEIGHT)
    d = [b - a for a, b in zip(g0, g1)]
    cell = [math.floor(v) for v in g0]
    step, t_max, t_delta = [], [], []
    for k in range(3):
        if d[k] > 0:
            step.append(1)
            t_max.append((cell[k] + 1 - g0[k]) / d[k])
            t_delta.append(1.0 / d[k])
        elif d[k] < 0:
            step.append(-1)
            t_max.append((cell[k] - g0[k]) / d[k])
            t_delta.append(-1.0 / d[k])
        else:
            step.append(0)
            t_max.append(math.inf)
            t_delta.append(math.inf)
    W, D, H = structure.workspace
    bounds = (W, D, H)
    while True:
        occ = structure.at(tuple(cell))
        if occ is not None and occ not in ignore:
            return False
        k = min(range(3), key=lambda a: t_max[a])
        if t_max[k] > 1.0:
            return True
        cell[k] += step[k]
        t_max[k] += t_delta[k]
        # the workspace box is convex, so once the ray leaves it, it stays out
        if (step[k] > 0 and cell[k] >= bounds[k]) or (step[k] < 0 and cell[k] < 0):
            return True


def _sample_points(brick: Brick, per_stud: bool) -> list[tuple[float, float, float]]:
    z = brick.top * LAYER_HEIGHT
    if per_stud:
        return [(x + 0.5, y + 0.5, z) for x, y in brick.footprint()]
    cx, cy = brick.footprint_center()
    return [(cx, cy, z)]


def check_observability(
    structure: Structure,
    tgt_index: int,
    ref_index: int,
    cameras: Sequence[Camera],
    per_stud: bool = False,
) -> bool:
    """Both bricks' top faces see the same camera; neither brick occludes the pair's rays."""
    ignore = {tgt_index, ref_index}
    sources = _sample_points(structure[tgt_index], per_stud)
    if ref_index != BASEPLATE:
        sources += _sample_points(structure[ref_index], per_stud)
    for cam in cameras:
        if all(_ray_clear(structure, p, cam.position, ignore) for p in sources):
            return True
    return False


def check_operability(structure: Structure, brick_index: int, gripper_padding: int = 1) -> bool:
    brick = structure[brick_index]
    _, _, H = structure.workspace
    x0, y0, z0 = brick.pos
    ex, ey = brick.extent
    p = gripper_padding
    for x in range(x0 - p, x0 + ex + p):
        for y in range(y0 - p, y0 + ey + p):
            inside = x0 <= x < x0 + ex and y0 <= y < y0 + ey
            for z in range(brick.top if inside else z0, H):
                occ = structure.at((x, y, z))
                if occ is not None and occ != brick_index:
                    return False
    return True


def removable(structure: Structure, brick_index: int, config: PlannerConfig) -> CriteriaResult:
    pairs = check_connectivity(structure, brick_index, config.skills, config.baseplate_origin)
    cameras = config.cameras_for(structure.workspace)
    chosen = next(
        (
            (ref, tau)
            for ref, tau in pairs
            if check_observability(structure, brick_index, ref, cameras, config.per_stud_rays)
        ),
        None,
    )
    op = check_operability(structure, brick_index, config.gripper_padding)
    stab = assess_stability(structure.without(brick_index), config.stability).stable
    ref, tau = chosen if chosen else (None, None)
    return CriteriaResult(bool(pairs), chosen is not None, op, stab, ref, tau)


# -- search -----------------------------------------------------------------

def check_design(design: Structure, params: StabilityParams) -> None:
    """Raise InvalidDesign unless every brick is connected to the baseplate and the whole is stable."""
    if len(design) == 0:
        return
    reached = set()
    frontier = [BASEPLATE]
    adjacency: dict[int, set[int]] = {}
    for c in design.contacts():
        adjacency.setdefault(c.lower, set()).add(c.upper)
        adjacency.setdefault(c.upper, set()).add(c.lower)
    while frontier:
        node = frontier.pop()
        for nxt in adjacency.get(node, ()):
            if nxt not in reached:
                reached.add(nxt)
                frontier.append(nxt)
    floating = sorted(set(design.bricks) - reached)
    if floating:
        raise InvalidDesign(f"bricks not connected to the baseplate: {floating}")
    if not assess_stability(design, params).stable:
        raise InvalidDesign("design is not statically stable")


def _candidate_order(structure: Structure) -> list[int]:
    return sorted(structure.bricks, key=lambda i: (-structure[i].pos[2], structure[i].pos[0], structure[i].pos[1], i))


def plan_assembly(design: Structure, config: PlannerConfig = PlannerConfig()) -> AssemblyPlan:
    check_design(design, config.stability)
    failed: set[frozenset[int]] = set()
    expanded = 0

    def search(remaining: frozenset[int]) -> list[tuple[int, int, TaskEncoding]] | None:
        nonlocal expanded
        if not remaining:
            return []
        if remaining in failed:
            return None
        expanded += 1
        if expanded > config.max_states:
            raise BudgetExceeded(f"search budget of {config.max_states} states exhausted")
        current = design.subset(remaining)
        for idx in _candidate_order(current):
            res = removable(current, idx, config)
            if not res.valid:
                continue
            rest = search(remaining - {idx})
            if rest is not None:
                return [(idx, res.chosen_ref, res.chosen_tau)] + rest
        failed.add(remaining)
        return None

    removal = search(frozenset(design.bricks))
    if removal is None:
        raise Infeasible("no valid disassembly sequence exists")
    steps = [AssemblyStep(ref, tgt, tau) for tgt, ref, tau in reversed(removal)]
    return AssemblyPlan(design, steps, tuple(config.skills))


def validate_plan(design: Structure, plan: AssemblyPlan, config: PlannerConfig = PlannerConfig()) -> ValidationResult:
    """Replay ``plan`` forward from an empty baseplate and check every step.

    Returns the first violated criterion: ``skill``, ``connectivity``,
    ``collision``, ``observability``, ``operability``, ``stability`` or
    ``incomplete``.
    """
    built = Structure(design.workspace)
    cameras = config.cameras_for(design.workspace)
    for k, step in enumerate(plan.steps):
        def fail(criterion: str, detail: str) -> ValidationResult:
            return ValidationResult(False, criterion, k, detail)

        if step.tgt not in design.bricks:
            return fail("connectivity", f"target {step.tgt} is not a design brick")
        if step.tgt in built.bricks:
            return fail("connectivity", f"brick {step.tgt} placed twice")
        if step.tau not in config.skills:
            return fail("skill", f"encoding {step.tau} is not in the skill set")
        goal = design[step.tgt]
        if step.ref == BASEPLATE:
            if goal.pos[2] != 0:
                return fail("connectivity", "baseplate reference for a brick above layer 0")
            anchor = baseplate_brick(config.baseplate_origin)
        elif step.ref in built.bricks:
            anchor = built[step.ref]
        else:
            return fail("connectivity", f"reference {step.ref} is not placed yet")
        try:
            placed = apply_encoding(anchor, step.tau, goal.type, design.workspace)
        except GridError as exc:
            return fail("connectivity", str(exc))
        if placed != goal:
            return fail("connectivity", f"encoding {step.tau} puts brick {step.tgt} at {placed.pose()}, design has {goal.pose()}")
        if step.ref != BASEPLATE and not contact_studs(anchor, placed):
            return fail("connectivity", f"brick {step.tgt} does not interlock with reference {step.ref}")
        try:
            built.add(placed, step.tgt)
        except GridError as exc:
            return fail("collision", str(exc))
        if not check_observability(built, step.tgt, step.ref, cameras, config.per_stud_rays):
            return fail("observability", f"step {k} has no camera seeing both bricks")
        if not check_operability(built, step.tgt, config.gripper_padding):
            return fail("operability", f"insertion path of brick {step.tgt} is blocked")
        if not assess_stability(built, config.stability).stable:
            return fail("stability", f"structure after step {k} is unstable")
    if not built.same_layout(design):
        return ValidationResult(False, "incomplete", len(plan.steps), "final structure differs from the design")
    return ValidationResult(True)
