"""JSON file formats and binary PPM/PGM images."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .camera import Camera
from .executor import SkillEntry, SkillModel, FAILURE_MODES
from .grid_model import Brick, BrickType, Structure, TaskEncoding
from .planner import AssemblyPlan, AssemblyStep, DEFAULT_SKILLS, PlannerConfig
from .stability import StabilityParams


class FormatError(ValueError):
    pass


def read_json(path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


def write_json(path, obj: Any) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


# -- designs ----------------------------------------------------------------

def design_from_dict(d: dict) -> Structure:
    try:
        types = {}
        for t in d["types"]:
            types[t["id"]] = BrickType(t["id"], int(t["w"]), int(t["d"]), int(t.get("h", 1)), tuple(t.get("color", (200, 40, 40))))
        structure = Structure(tuple(d.get("workspace", (24, 24, 12))))
        for b in d["bricks"]:
            structure.add(Brick(types[b["type"]], tuple(b["pos"]), int(b.get("rot", 0))))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed design: {exc!r}") from exc
    return structure


def design_to_dict(structure: Structure) -> dict:
    types: dict[str, BrickType] = {}
    for _, b in structure.items():
        types.setdefault(b.type.id, b.type)
    return {
        "workspace": list(structure.workspace),
        "types": [{"id": t.id, "w": t.w, "d": t.d, "h": t.h, "color": list(t.color)} for t in types.values()],
        "bricks": [{"type": b.type.id, "pos": list(b.pos), "rot": b.rot} for _, b in structure.items()],
    }


def load_design(path) -> Structure:
    return design_from_dict(read_json(path))


# -- skills, config, plans --------------------------------------------------

def skills_from_dict(d: dict) -> tuple[TaskEncoding, ...]:
    return tuple(TaskEncoding.of(v) for v in d["skills"])


def skills_to_dict(skills) -> dict:
    return {"skills": [t.as_list() for t in skills]}


def params_from_dict(d: dict) -> StabilityParams:
    return StabilityParams(
        float(d.get("brick_weight", 1.0)),
        float(d.get("tension_capacity", 4.0)),
        float(d.get("compression_capacity", 1000.0)),
    )


def params_to_dict(p: StabilityParams) -> dict:
    return {
        "brick_weight": p.brick_weight,
        "tension_capacity": p.tension_capacity,
        "compression_capacity": p.compression_capacity,
    }


def config_from_dict(d: dict, skills=None) -> PlannerConfig:
    if skills is None:
        skills = skills_from_dict(d) if "skills" in d else DEFAULT_SKILLS
    cams = d.get("cameras")
    return PlannerConfig(
        skills=tuple(skills),
        cameras=None if cams is None else tuple(Camera.from_dict(c) for c in cams),
        gripper_padding=int(d.get("gripper_padding", 1)),
        gripper_clearance=int(d.get("gripper_clearance", 2)),
        stability=params_from_dict(d.get("stability", {})),
        max_states=int(d.get("max_states", 10**6)),
        baseplate_origin=tuple(d.get("baseplate_origin", (0, 0))),
        per_stud_rays=bool(d.get("per_stud_rays", False)),
    )


def config_to_dict(c: PlannerConfig) -> dict:
    out = {
        "skills": [t.as_list() for t in c.skills],
        "gripper_padding": c.gripper_padding,
        "gripper_clearance": c.gripper_clearance,
        "stability": params_to_dict(c.stability),
        "max_states": c.max_states,
        "baseplate_origin": list(c.baseplate_origin),
        "per_stud_rays": c.per_stud_rays,
    }
    if c.cameras is not None:
        out["cameras"] = [cam.to_dict() for cam in c.cameras]
    return out


def plan_to_dict(plan: AssemblyPlan) -> dict:
    out = {
        "design": design_to_dict(plan.design),
        "steps": [{"ref": s.ref, "tgt": s.tgt, "tau": s.tau.as_list()} for s in plan.steps],
    }
    if plan.skills:
        out["skills"] = [t.as_list() for t in plan.skills]
    return out


def plan_from_dict(d: dict) -> AssemblyPlan:
    try:
        design = design_from_dict(d["design"])
        steps = [AssemblyStep(int(s["ref"]), int(s["tgt"]), TaskEncoding.of(s["tau"])) for s in d["steps"]]
        skills = tuple(TaskEncoding.of(v) for v in d.get("skills", ()))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed plan: {exc!r}") from exc
    return AssemblyPlan(design, steps, skills)


# -- skill model ------------------------------------------------------------

def _entry_from_dict(d: dict) -> SkillEntry:
    mix = d.get("failure_mix", {m: 1 / 3 for m in FAILURE_MODES})
    unknown = set(mix) - set(FAILURE_MODES)
    if unknown:
        raise FormatError(f"unknown failure modes {sorted(unknown)}")
    return SkillEntry(float(d["p_success"]), tuple(float(mix.get(m, 0.0)) for m in FAILURE_MODES))


def skill_model_from_dict(d: dict) -> SkillModel:
    skills = {TaskEncoding.of(s["tau"]): _entry_from_dict(s) for s in d.get("skills", [])}
    default = _entry_from_dict(d["default"]) if "default" in d else None
    return SkillModel(skills, float(d.get("pick_p_success", 1.0)), default, int(d.get("max_pick_attempts", 3)))


def skill_model_to_dict(m: SkillModel) -> dict:
    def entry(e: SkillEntry) -> dict:
        return {"p_success": e.p_success, "failure_mix": dict(zip(FAILURE_MODES, e.failure_mix))}

    out: dict[str, Any] = {
        "pick_p_success": m.pick_p_success,
        "skills": [{"tau": t.as_list(), **entry(e)} for t, e in m.skills.items()],
    }
    if m.default is not None:
        out["default"] = entry(m.default)
    if m.max_pick_attempts != 3:
        out["max_pick_attempts"] = m.max_pick_attempts
    return out


# -- images -----------------------------------------------------------------

def write_ppm(path, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def write_pgm(path, img: np.ndarray, maxval: int | None = None) -> None:
    """8-bit PGM for masks (bool -> 0/255) and bytes, 16-bit big-endian when maxval > 255."""
    a = np.asarray(img)
    if a.dtype == bool:
        a = a.astype(np.uint8) * 255
    if maxval is None:
        maxval = 65535 if a.dtype == np.uint16 or a.max(initial=0) > 255 else 255
    h, w = a.shape
    data = a.astype(">u2").tobytes() if maxval > 255 else a.astype(np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(data)


def _read_netpbm(path, magic: bytes) -> tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while raw[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1
    if fields[0] != magic:
        raise FormatError(f"expected {magic.decode()} image, got {fields[0]!r}")
    w, h, maxval = (int(f) for f in fields[1:])
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    count = w * h * channels
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape).astype(np.uint16 if maxval > 255 else np.uint8), maxval


def read_ppm(path) -> np.ndarray:
    return _read_netpbm(path, b"P6")[0]


def read_pgm(path) -> np.ndarray:
    return _read_netpbm(path, b"P5")[0]
