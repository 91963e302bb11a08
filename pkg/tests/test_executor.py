from __future__ import annotations

import json

import numpy as np
import pytest

from brickplan.executor import (
    ABORT,
    PRE_SATISFIED,
    PRECONDITION_ABORT,
    SKIP,
    SUCCESS,
    SkillEntry,
    SkillModel,
    WorldState,
    execute_step,
    expected_prefix,
    monte_carlo,
    postcondition_check,
    precondition_check,
    run_trial,
)
from brickplan.grid_model import Brick, BrickType, Structure
from brickplan.planner import PlannerConfig, plan_assembly
from oracles import expected_completion

B22 = BrickType("2x2", 2, 2)


def tower_plan(n: int):
    s = Structure((12, 12, n + 1))
    for z in range(n):
        s.add(Brick(B22, (4, 4, z)))
    return plan_assembly(s, PlannerConfig(baseplate_origin=(4, 4)))


@pytest.fixture(scope="module")
def plan10():
    return tower_plan(10)


def only(mode: str, p: float = 0.0) -> SkillModel:
    mix = tuple(float(m == mode) for m in ("misalignment", "collision", "deformation"))
    return SkillModel.uniform(p, mix)


def test_skill_entry_validation():
    with pytest.raises(ValueError):
        SkillEntry(1.2)
    with pytest.raises(ValueError):
        SkillEntry(0.5, (0.5, 0.4, 0.0))
    with pytest.raises(KeyError):
        SkillModel().entry(tower_plan(2).steps[0].tau)


def test_all_success(plan10):
    r = run_trial(plan10, SkillModel.uniform(1.0), seed=3)
    assert r.completion == 1.0 and r.max_correct == 10
    assert all(rec.outcome == SUCCESS for rec in r.trace)


def test_first_assembly_collision_aborts(plan10):
    r = run_trial(plan10, only("collision"), ABORT, seed=0, first_placed=True)
    assert r.completion == pytest.approx(0.1)
    assert [rec.outcome for rec in r.trace] == [PRE_SATISFIED, "collision"]


def test_collision_leaves_state_unchanged(plan10):
    state = WorldState(expected_prefix(plan10, 3), plan10.design.workspace)
    before = dict(state.placed)
    out = execute_step(state, plan10.steps[3], plan10, only("collision"), np.random.default_rng(0))
    assert out == "collision" and state.placed == before


def test_deformation_drops_one_brick(plan10):
    state = WorldState(expected_prefix(plan10, 4), plan10.design.workspace)
    out = execute_step(state, plan10.steps[4], plan10, only("deformation"), np.random.default_rng(0))
    assert out == "deformation" and len(state.placed) == 3
    assert not postcondition_check(state, plan10.steps[4], plan10)
    assert not precondition_check(state, plan10.steps[4], plan10)


def test_misalignment_lands_off_by_one(plan10):
    state = WorldState(expected_prefix(plan10, 2), plan10.design.workspace)
    step = plan10.steps[2]
    out = execute_step(state, step, plan10, only("misalignment"), np.random.default_rng(1))
    placed = state.placed[step.tgt]
    goal = plan10.design[step.tgt]
    assert out == "misalignment"
    assert abs(placed.pos[0] - goal.pos[0]) + abs(placed.pos[1] - goal.pos[1]) == 1
    assert not postcondition_check(state, step, plan10)


def test_success_postcondition(plan10):
    state = WorldState(expected_prefix(plan10, 1), plan10.design.workspace)
    assert execute_step(state, plan10.steps[1], plan10, SkillModel.uniform(1.0), np.random.default_rng(0)) == SUCCESS
    assert postcondition_check(state, plan10.steps[1], plan10)


def test_pick_failure_after_retries(plan10):
    model = SkillModel({}, 0.0, SkillEntry(1.0))
    r = run_trial(plan10, model, seed=0)
    assert r.trace[0].outcome == "pick_failure" and r.completion == 0.0


def test_running_maximum_survives_deformation(plan10):
    # deformation removes a brick after a peak; the peak is what counts
    for seed in range(200):
        r = run_trial(plan10, SkillModel.uniform(0.8, (0.0, 0.0, 1.0)), SKIP, seed)
        counts = [rec.correct for rec in r.trace]
        assert r.max_correct == max(counts)
        assert r.completion == r.max_correct / 10


def test_abort_trace_shape(plan10):
    for seed in range(50):
        r = run_trial(plan10, SkillModel.uniform(0.7, (0.4, 0.3, 0.3)), ABORT, seed)
        outcomes = [rec.outcome for rec in r.trace]
        assert all(o == SUCCESS for o in outcomes[:-1])
        assert (outcomes[-1] == SUCCESS) == (r.completion == 1.0)


def test_skip_policy_keeps_going(plan10):
    r = run_trial(plan10, SkillModel.uniform(0.5, (0.0, 1.0, 0.0)), SKIP, 5)
    assert len(r.trace) == 10
    assert PRECONDITION_ABORT in {rec.outcome for rec in r.trace} or r.completion == 1.0


def test_same_seed_same_result(plan10):
    model = SkillModel.uniform(0.8, (0.4, 0.3, 0.3))
    a = run_trial(plan10, model, ABORT, 42).to_dict()
    b = run_trial(plan10, model, ABORT, 42).to_dict()
    assert json.dumps(a) == json.dumps(b)


def test_monte_carlo_perfect_model(plan10):
    res = monte_carlo(plan10, SkillModel.uniform(1.0), 20, base_seed=1)
    assert res.mean == 1.0 and res.std == 0.0


def test_monte_carlo_serial_equals_parallel(plan10):
    model = SkillModel.uniform(0.8, (0.4, 0.3, 0.3))
    a = monte_carlo(plan10, model, 300, ABORT, 9)
    b = monte_carlo(plan10, model, 300, ABORT, 9, workers=4)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_monte_carlo_matches_chain_expectation():
    plan = tower_plan(8)
    p = 0.7
    res = monte_carlo(plan, SkillModel.uniform(p), 2000, base_seed=4, first_placed=True)
    se = res.std / np.sqrt(2000)
    assert abs(res.mean - expected_completion(p, 8)) <= 3 * se


def test_higher_success_never_hurts_with_common_random_numbers(plan10):
    lo = monte_carlo(plan10, SkillModel.uniform(0.6), 300, base_seed=2)
    hi = monte_carlo(plan10, SkillModel.uniform(0.8), 300, base_seed=2)
    assert all(h.completion >= l.completion for h, l in zip(hi.trials, lo.trials))


def test_invalid_arguments(plan10):
    with pytest.raises(ValueError):
        monte_carlo(plan10, SkillModel.uniform(1.0), 0)
    with pytest.raises(ValueError):
        run_trial(plan10, SkillModel.uniform(1.0), "retry")
