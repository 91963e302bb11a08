"""Built-in design corpus used by the test-suite and the acceptance harness.

Layouts live on a 12 x 12 x 8 workspace. Four named showcase structures
(pyramid, stairs, house, castle) need 5, 6, 7 and 8 steps; the rest are
small towers, bridges, cantilevers and a handful of deliberately
infeasible designs (blocked gripper access, missing skills).

Each entry carries its own skill set. By default that is every encoding
between touching bricks plus the baseplate encodings of the ground layer,
so feasibility is decided by geometry, access and stability. Entries marked
``drop`` remove selected encodings to exercise the connectivity criterion.
"""
from __future__ import annotations

from dataclasses import dataclass

from .grid_model import Brick, BrickType, Structure, TaskEncoding, baseplate_brick, contact_studs, relative_encoding
from .planner import PlannerConfig

WORKSPACE = (12, 12, 8)

TYPES = {
    "2x4": BrickType("2x4", 2, 4, 1, (200, 40, 40)),
    "2x2": BrickType("2x2", 2, 2, 1, (40, 90, 200)),
    "1x2": BrickType("1x2", 1, 2, 1, (230, 190, 40)),
    "1x4": BrickType("1x4", 1, 4, 1, (225, 225, 225)),
    "2x6": BrickType("2x6", 2, 6, 1, (130, 130, 140)),
    "1x1": BrickType("1x1", 1, 1, 1, (40, 160, 70)),
}


@dataclass
class CorpusEntry:
    name: str
    design: Structure
    skills: tuple[TaskEncoding, ...]
    expect_feasible: bool

    def config(self, **overrides) -> PlannerConfig:
        return PlannerConfig(skills=self.skills, **overrides)


def build(layout, workspace=WORKSPACE) -> Structure:
    """``layout`` rows are (type id, x, y, z, rot)."""
    s = Structure(workspace)
    for type_id, x, y, z, rot in layout:
        s.add(Brick(TYPES[type_id], (x, y, z), rot))
    return s


def derived_skills(design: Structure, baseplate_origin=(0, 0)) -> tuple[TaskEncoding, ...]:
    """Encodings of every interlocking pair in the design (both as reference) plus ground-layer baseplate encodings."""
    found: set[TaskEncoding] = set()
    plate = baseplate_brick(baseplate_origin)
    for _, b in design.items():
        if b.pos[2] == 0:
            found.add(relative_encoding(plate, b))
    for i, a in design.items():
        for j, b in design.items():
            if i != j and contact_studs(a, b):
                found.add(relative_encoding(a, b))
    return tuple(sorted(found, key=lambda t: t.as_list()))


def _tower(type_id: str, height: int, x: int = 5, y: int = 5):
    return [(type_id, x, y, z, 0) for z in range(height)]


def _offset_stack(length: int):
    # each 2x2 shifted one stud along +x from the one below
    return [("2x2", 3 + k, 5, k, 0) for k in range(length)]


_LAYOUTS: dict[str, dict] = {
    # the four showcase structures, in increasing step count
    "pyramid": {"layout": [
        ("2x4", 2, 4, 0, 0), ("2x4", 5, 4, 0, 0), ("2x4", 8, 4, 0, 0),
        ("2x6", 3, 5, 1, 1),
        ("2x2", 4, 5, 2, 0),
    ]},
    "stairs": {"layout": [
        ("2x4", 2, 5, 0, 1), ("2x4", 7, 5, 0, 1),
        ("2x4", 4, 5, 1, 1), ("2x2", 9, 5, 1, 0),
        ("2x4", 6, 5, 2, 1),
        ("2x2", 8, 5, 3, 0),
    ]},
    "house": {"layout": [
        ("2x4", 2, 4, 0, 0), ("2x4", 7, 4, 0, 0),
        ("2x4", 2, 4, 1, 0), ("2x4", 7, 4, 1, 0),
        ("2x6", 2, 4, 2, 1), ("2x6", 3, 7, 2, 1),
        ("2x4", 4, 4, 3, 0),
    ]},
    "castle": {"layout": [
        ("2x2", 2, 4, 0, 0), ("2x2", 7, 4, 0, 0),
        ("2x2", 2, 4, 1, 0), ("2x2", 7, 4, 1, 0),
        ("2x2", 2, 4, 2, 0), ("2x2", 7, 4, 2, 0),
        ("2x6", 2, 4, 3, 1),
        ("2x2", 4, 4, 4, 0),
    ]},
    # towers
    "tower3_2x2": {"layout": _tower("2x2", 3)},
    "tower4_2x4": {"layout": _tower("2x4", 4)},
    "tower5_1x2": {"layout": _tower("1x2", 5)},
    "tower6_2x2": {"layout": _tower("2x2", 6)},
    "tower7_1x4": {"layout": _tower("1x4", 7)},
    "tower8_2x2": {"layout": _tower("2x2", 8)},
    "tower4_1x1": {"layout": _tower("1x1", 4)},
    # cantilevers and offsets
    "offset3": {"layout": _offset_stack(3)},
    "offset4": {"layout": _offset_stack(4)},
    "zigzag5": {"layout": [("2x2", 4 + (k % 2), 5, k, 0) for k in range(5)]},
    "crossed4": {"layout": [("2x4", 5, 4, 0, 0), ("2x4", 4, 5, 1, 1), ("2x4", 5, 4, 2, 0), ("2x4", 4, 5, 3, 1)]},
    "tee3": {"layout": [("2x2", 5, 5, 0, 0), ("2x2", 5, 5, 1, 0), ("2x6", 3, 5, 2, 1)]},
    "hammer4": {"layout": [("2x2", 5, 5, 0, 0), ("2x2", 5, 5, 1, 0), ("2x6", 3, 5, 2, 1), ("1x2", 3, 5, 3, 0)]},
    # bridges and arches
    "bridge3": {"layout": [("2x2", 2, 5, 0, 0), ("2x2", 6, 5, 0, 0), ("2x6", 2, 5, 1, 1)]},
    "bridge5": {"layout": [
        ("2x2", 2, 5, 0, 0), ("2x2", 6, 5, 0, 0), ("2x2", 2, 5, 1, 0), ("2x2", 6, 5, 1, 0), ("2x6", 2, 5, 2, 1),
    ]},
    "arch4": {"layout": [("1x2", 3, 5, 0, 0), ("1x2", 7, 5, 0, 0), ("2x6", 3, 5, 1, 1), ("2x2", 5, 5, 2, 0)]},
    "gate6": {"layout": [
        ("1x4", 2, 4, 0, 0), ("1x4", 7, 4, 0, 0), ("1x4", 2, 4, 1, 0), ("1x4", 7, 4, 1, 0),
        ("2x6", 2, 4, 2, 1), ("2x6", 2, 7, 2, 1),
    ]},
    "span_y4": {"layout": [("2x2", 5, 2, 0, 0), ("2x2", 5, 6, 0, 0), ("2x6", 5, 2, 1, 0), ("1x2", 5, 4, 2, 0)]},
    # scattered ground layouts
    "row3_gapped": {"layout": [("1x2", 2, 5, 0, 0), ("1x2", 4, 5, 0, 0), ("1x2", 6, 5, 0, 0)]},
    "quad4": {"layout": [("2x2", 2, 2, 0, 0), ("2x2", 6, 2, 0, 0), ("2x2", 2, 6, 0, 0), ("2x2", 6, 6, 0, 0)]},
    "twin_towers6": {"layout": _tower("2x2", 3, 2, 5) + _tower("2x2", 3, 7, 5)},
    "rotated_stack4": {"layout": [("1x4", 5, 4, 0, 0), ("1x4", 4, 5, 1, 1), ("1x4", 5, 4, 2, 0), ("1x4", 4, 5, 3, 1)]},
    "ziggurat7": {"layout": [
        ("2x4", 2, 4, 0, 0), ("2x4", 5, 4, 0, 0), ("2x4", 8, 4, 0, 0),
        ("2x6", 3, 4, 1, 1), ("2x4", 5, 4, 2, 0),
        ("2x2", 5, 6, 3, 0), ("1x1", 5, 6, 4, 0),
    ]},
    # infeasible: gripper access or missing skills
    "blocked_pair3": {"layout": [("2x2", 2, 5, 0, 0), ("2x2", 4, 5, 0, 0), ("2x4", 2, 5, 1, 1)], "feasible": False},
    "touching_row3": {"layout": [("1x2", 3, 5, 0, 0), ("1x2", 4, 5, 0, 0), ("1x2", 5, 5, 0, 0)], "feasible": False},
    "blocked_wall4": {"layout": [
        ("1x4", 3, 4, 0, 0), ("1x4", 4, 4, 0, 0), ("1x4", 3, 4, 1, 0), ("1x4", 4, 4, 1, 0),
    ], "feasible": False},
    "missing_stack3": {"layout": _tower("2x2", 3), "drop": [(0, 0, 1, 0)], "feasible": False},
    "missing_offset4": {"layout": _offset_stack(4), "drop": [(1, 0, 1, 0), (-1, 0, 1, 0)], "feasible": False},
}

SHOWCASE = ("pyramid", "stairs", "house", "castle")


def load_corpus() -> list[CorpusEntry]:
    entries = []
    for name, entry_def in _LAYOUTS.items():
        design = build(entry_def["layout"])
        drop = {TaskEncoding.of(t) for t in entry_def.get("drop", ())}
        skills = tuple(t for t in derived_skills(design) if t not in drop)
        entries.append(CorpusEntry(name, design, skills, entry_def.get("feasible", True)))
    return entries


def get(name: str) -> CorpusEntry:
    for entry in load_corpus():
        if entry.name == name:
            return entry
    raise KeyError(name)
