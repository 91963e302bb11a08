"""Command-line entry point.

Exit codes: 0 success, 1 domain failure (infeasible design, invalid plan,
grounding failure), 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import files
from .camera import Camera, DegenerateCamera
from .executor import ABORT, SKIP, monte_carlo
from .grid_model import GridError
from .grounding import GroundingError, centroid_init, ecc_align
from .pipeline import Perturbation, situated_manual, step_scene
from .planner import PlanningError, PlannerConfig, plan_assembly, validate_plan
from .render import render_scene
from .stability import StabilityParams, assess_stability

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _config(path: str | None, skills=None) -> PlannerConfig:
    if path is None:
        return PlannerConfig(skills=tuple(skills)) if skills else PlannerConfig()
    return files.config_from_dict(files.read_json(path), skills)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_plan(args) -> int:
    design = files.load_design(args.design)
    skills = files.skills_from_dict(files.read_json(args.skills))
    plan = plan_assembly(design, _config(args.config, skills))
    files.write_json(args.out, files.plan_to_dict(plan))
    print(f"{len(plan.steps)} steps")
    return EXIT_OK


def cmd_validate(args) -> int:
    plan = files.plan_from_dict(files.read_json(args.plan))
    config = _config(args.config, plan.skills or None)
    result = validate_plan(plan.design, plan, config)
    if result.valid:
        print("valid")
        return EXIT_OK
    print(f"invalid: {result.criterion} at step {result.step}: {result.detail}")
    return EXIT_DOMAIN


def cmd_stability(args) -> int:
    design = files.load_design(args.design)
    params = files.params_from_dict(files.read_json(args.params)) if args.params else StabilityParams()
    report = assess_stability(design, params)
    sys.stdout.write(files.dumps(report.to_dict()))
    return EXIT_OK


def _camera(path: str) -> Camera:
    return Camera.from_dict(files.read_json(path))


def cmd_render(args) -> int:
    design = files.load_design(args.design)
    out = render_scene(design, _camera(args.camera))
    files.write_ppm(f"{args.out_prefix}.rgb.ppm", out.rgb)
    files.write_pgm(f"{args.out_prefix}.id.pgm", out.id_buffer, maxval=65535)
    return EXIT_OK


def cmd_manual(args) -> int:
    plan = files.plan_from_dict(files.read_json(args.plan))
    if not 0 <= args.step < len(plan.steps):
        raise UsageError(f"--step must lie in [0, {len(plan.steps) - 1}]")
    pert = Perturbation.from_dict(files.read_json(args.perturb)) if args.perturb else Perturbation()
    scene = step_scene(plan, args.step, _camera(args.camera), pert)
    manual = situated_manual(scene, plan.steps[args.step], args.rho_threshold)
    p = args.out_prefix
    files.write_ppm(f"{p}.manual.ppm", manual.image)
    files.write_ppm(f"{p}.observation.ppm", scene.observation.rgb)
    for name, mask in manual.masks.items():
        files.write_pgm(f"{p}.{name}.pgm", mask)
    report = {"step": args.step, **manual.alignment.to_dict()}
    files.write_json(f"{p}.alignment.json", report)
    sys.stdout.write(files.dumps(report))
    return EXIT_OK


def cmd_simulate(args) -> int:
    plan = files.plan_from_dict(files.read_json(args.plan))
    model = files.skill_model_from_dict(files.read_json(args.skill_model))
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    result = monte_carlo(plan, model, args.trials, args.policy, args.seed, args.first_placed, args.workers)
    report = {"base_seed": args.seed, "policy": args.policy, **result.to_dict()}
    _emit(files.dumps(report), args.out)
    return EXIT_OK


def cmd_align(args) -> int:
    template = files.read_pgm(args.template).astype(float)
    observed = files.read_pgm(args.observed).astype(float)
    init = centroid_init(template > 0, observed > 0) if args.init == "centroid" else None
    result = ecc_align(template, observed, init)
    sys.stdout.write(files.dumps(result.to_dict()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brickplan", description="Brick assembly planning, manuals and execution simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan an assembly sequence")
    p.add_argument("--design", required=True)
    p.add_argument("--skills", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate", help="replay and check a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stability", help="static equilibrium report for a design")
    p.add_argument("--design", required=True)
    p.add_argument("--params")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("render", help="render a design to PPM and an id buffer")
    p.add_argument("--design", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("manual", help="situated manual for one plan step (0-based)")
    p.add_argument("--plan", required=True)
    p.add_argument("--step", required=True, type=int)
    p.add_argument("--camera", required=True)
    p.add_argument("--perturb")
    p.add_argument("--rho-threshold", type=float, default=0.8)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_manual)

    p = sub.add_parser("simulate", help="Monte Carlo execution of a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--skill-model", required=True)
    p.add_argument("--trials", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--policy", choices=(ABORT, SKIP), default=ABORT)
    p.add_argument("--first-placed", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("align", help="ECC affine alignment of two grayscale images")
    p.add_argument("--template", required=True)
    p.add_argument("--observed", required=True)
    p.add_argument("--init", choices=("centroid", "identity"), default="centroid")
    p.set_defaults(func=cmd_align)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (PlanningError, GroundingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (UsageError, OSError, json.JSONDecodeError, files.FormatError, GridError, DegenerateCamera, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
