from __future__ import annotations

import json

import numpy as np
import pytest

from brickplan import files
from brickplan.cli import main
from brickplan.camera import default_camera
from brickplan.corpus import get
from brickplan.grid_model import Brick, BrickType, Structure
from brickplan.planner import DEFAULT_SKILLS


@pytest.fixture
def work(tmp_path):
    tower = Structure((8, 8, 6))
    for z in range(3):
        tower.add(Brick(BrickType("2x2", 2, 2), (0, 0, z)))
    files.write_json(tmp_path / "tower.json", files.design_to_dict(tower))
    files.write_json(tmp_path / "skills.json", files.skills_to_dict(DEFAULT_SKILLS))
    house = get("house")
    files.write_json(tmp_path / "house.json", files.design_to_dict(house.design))
    files.write_json(tmp_path / "house_skills.json", files.skills_to_dict(house.skills))
    files.write_json(tmp_path / "cam.json", default_camera(house.design.workspace).to_dict())
    files.write_json(tmp_path / "model.json", {
        "pick_p_success": 1.0,
        "skills": [{"tau": [0, 0, 1, 0], "p_success": 0.8, "failure_mix": {"misalignment": 0.4, "collision": 0.3, "deformation": 0.3}}],
        "default": {"p_success": 0.9},
    })
    return tmp_path


def test_plan_and_validate(work, capsys):
    assert main(["plan", "--design", str(work / "tower.json"), "--skills", str(work / "skills.json"), "--out", str(work / "plan.json")]) == 0
    plan = json.loads((work / "plan.json").read_text())
    assert len(plan["steps"]) == 3
    capsys.readouterr()
    assert main(["validate", "--plan", str(work / "plan.json")]) == 0
    assert capsys.readouterr().out.strip() == "valid"


def test_validate_rejects_tampered_plan(work, capsys):
    main(["plan", "--design", str(work / "tower.json"), "--skills", str(work / "skills.json"), "--out", str(work / "plan.json")])
    plan = json.loads((work / "plan.json").read_text())
    plan["steps"] = plan["steps"][::-1]
    files.write_json(work / "bad.json", plan)
    capsys.readouterr()
    assert main(["validate", "--plan", str(work / "bad.json")]) == 1
    assert capsys.readouterr().out.startswith("invalid: connectivity")


def test_infeasible_plan_exit_code(work):
    files.write_json(work / "none.json", {"skills": [[5, 5, 1, 0]]})
    assert main(["plan", "--design", str(work / "tower.json"), "--skills", str(work / "none.json"), "--out", str(work / "p.json")]) == 1


def test_stability_report(work, capsys):
    assert main(["stability", "--design", str(work / "tower.json")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["stable"] is True and report["forces"]


def test_render_outputs(work):
    assert main(["render", "--design", str(work / "house.json"), "--camera", str(work / "cam.json"), "--out-prefix", str(work / "r")]) == 0
    rgb = files.read_ppm(work / "r.rgb.ppm")
    ids = files.read_pgm(work / "r.id.pgm")
    assert rgb.shape == (256, 256, 3) and ids.dtype == np.uint16
    assert set(np.unique(ids)) == {0, 1, 2, 3, 4, 5, 6, 7}


def test_manual_outputs(work, capsys):
    main(["plan", "--design", str(work / "house.json"), "--skills", str(work / "house_skills.json"), "--out", str(work / "plan.json")])
    files.write_json(work / "eps.json", {"yaw_deg": 1.0, "pitch_deg": -1.0, "roll_deg": 0.5, "focal_scale": 1.01})
    capsys.readouterr()
    argv = ["manual", "--plan", str(work / "plan.json"), "--step", "4", "--camera", str(work / "cam.json"), "--perturb", str(work / "eps.json"), "--out-prefix", str(work / "m")]
    assert main(argv) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rho"] >= 0.8 and len(report["H"]) == 2
    for name in ("manual.ppm", "ref.pgm", "grip.pgm", "tgt.pgm", "alignment.json"):
        assert (work / f"m.{name}").exists()
    assert main(argv[:4] + ["0"] + argv[5:]) == 1


def test_simulate_is_deterministic(work, capsys):
    main(["plan", "--design", str(work / "tower.json"), "--skills", str(work / "skills.json"), "--out", str(work / "plan.json")])
    argv = ["simulate", "--plan", str(work / "plan.json"), "--skill-model", str(work / "model.json"), "--trials", "5", "--seed", "1"]
    capsys.readouterr()
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv + ["--workers", "2"]) == 0
    assert capsys.readouterr().out == first
    assert json.loads(first)["trials"] == 5


def test_align(work, capsys):
    mask = np.zeros((48, 48), bool)
    mask[10:30, 12:26] = True
    files.write_pgm(work / "t.pgm", mask)
    files.write_pgm(work / "o.pgm", np.roll(mask, (2, 3), axis=(0, 1)))
    assert main(["align", "--template", str(work / "t.pgm"), "--observed", str(work / "o.pgm")]) == 0
    H = json.loads(capsys.readouterr().out)["H"]
    assert H[0][2] == pytest.approx(3, abs=0.05) and H[1][2] == pytest.approx(2, abs=0.05)


def test_usage_errors(work):
    assert main([]) == 2
    assert main(["simulate", "--plan", "x", "--skill-model", "y", "--trials", "3"]) == 2
    assert main(["stability", "--design", str(work / "tower.json"), "--bogus"]) == 2
    assert main(["stability", "--design", str(work / "missing.json")]) == 2
    (work / "junk.json").write_text("{nope")
    assert main(["stability", "--design", str(work / "junk.json")]) == 2
