"""Stochastic skill-chain execution of an assembly plan.

Each step runs a pick skill then an assembly skill. Preconditions compare the
simulated structure with the plan's expected prefix, postconditions check
that the target landed at its designed pose and nothing else moved. Failed
assemblies follow one of three modes: misalignment (brick lands one stud
off), collision (brick is not placed) and deformation (brick is not placed
and one already-placed brick above layer 0 detaches).

Random draws per step, in order: one uniform per pick attempt, one uniform
for assembly success, and on failure one uniform for the mode plus whatever
the mode's side effect needs. Success is ``u < p``, so with common random
numbers a higher success probability never ends a trial earlier under the
abort policy.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid_model import Brick, Structure, TaskEncoding, collides, in_workspace
from .planner import AssemblyPlan, AssemblyStep

FAILURE_MODES = ("misalignment", "collision", "deformation")
SUCCESS = "success"
PRECONDITION_ABORT = "precondition_abort"
PICK_FAILURE = "pick_failure"
PRE_SATISFIED = "pre_satisfied"
ABORT = "abort"
SKIP = "skip"


@dataclass(frozen=True)
class SkillEntry:
    p_success: float
    failure_mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self):
        if not 0.0 <= self.p_success <= 1.0:
            raise ValueError("p_success must lie in [0, 1]")
        if any(v < 0 for v in self.failure_mix) or abs(math.fsum(self.failure_mix) - 1.0) > 1e-9:
            raise ValueError("failure_mix must be non-negative and sum to 1")


@dataclass(frozen=True)
class SkillModel:
    skills: dict[TaskEncoding, SkillEntry] = field(default_factory=dict)
    pick_p_success: float = 1.0
    default: SkillEntry | None = None
    max_pick_attempts: int = 3

    def __post_init__(self):
        if not 0.0 <= self.pick_p_success <= 1.0:
            raise ValueError("pick_p_success must lie in [0, 1]")
        if self.max_pick_attempts < 1:
            raise ValueError("max_pick_attempts must be positive")

    def entry(self, tau: TaskEncoding) -> SkillEntry:
        if tau in self.skills:
            return self.skills[tau]
        if self.default is not None:
            return self.default
        raise KeyError(f"skill model has no entry for {tau}")

    @classmethod
    def uniform(cls, p: float, failure_mix=(0.0, 1.0, 0.0)) -> "SkillModel":
        return cls({}, 1.0, SkillEntry(p, tuple(failure_mix)))


@dataclass
class WorldState:
    placed: dict[int, Brick]
    workspace: tuple[int, int, int]
    held: int | None = None
    aborted: bool = False
    step_cursor: int = 0

    def structure(self) -> Structure:
        return Structure(self.workspace, dict(self.placed))


@dataclass
class StepRecord:
    step: int
    outcome: str
    correct: int


@dataclass
class TrialResult:
    trace: list[StepRecord]
    max_correct: int
    completion: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "max_correct": self.max_correct,
            "completion": self.completion,
            "trace": [[r.step, r.outcome, r.correct] for r in self.trace],
        }


def expected_prefix(plan: AssemblyPlan, k: int) -> dict[int, Brick]:
    return {s.tgt: plan.design[s.tgt] for s in plan.steps[:k]}


def correct_count(state: WorldState, plan: AssemblyPlan) -> int:
    return sum(1 for i, b in state.placed.items() if plan.design.bricks.get(i) == b)


def precondition_check(state: WorldState, step: AssemblyStep, plan: AssemblyPlan, strict: bool = True) -> bool:
    """Strict: the world equals the plan's prefix before this step.

    Non-strict (used by the skip policy): the reference brick, if any, sits at
    its designed pose and the target's designed cells are free.
    """
    k = plan.steps.index(step)
    if strict:
        return state.placed == expected_prefix(plan, k)
    if step.ref >= 0 and state.placed.get(step.ref) != plan.design[step.ref]:
        return False
    return not collides(state.structure(), plan.design[step.tgt])


def postcondition_check(state: WorldState, step: AssemblyStep, plan: AssemblyPlan) -> bool:
    k = plan.steps.index(step)
    if state.placed.get(step.tgt) != plan.design[step.tgt]:
        return False
    return all(state.placed.get(i) == b for i, b in expected_prefix(plan, k).items())


def _misaligned_pose(state: WorldState, goal: Brick, rng: np.random.Generator) -> Brick | None:
    current = state.structure()
    options = []
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        cand = goal.moved(pos=(goal.pos[0] + dx, goal.pos[1] + dy, goal.pos[2]))
        if in_workspace(cand, state.workspace) and not collides(current, cand):
            options.append(cand)
    if not options:
        return None
    return options[int(rng.integers(len(options)))]


def execute_step(
    state: WorldState,
    step: AssemblyStep,
    plan: AssemblyPlan,
    model: SkillModel,
    rng: np.random.Generator,
) -> str:
    """Run the pick and assembly skills for ``step``, mutating ``state``. Returns the outcome."""
    for _ in range(model.max_pick_attempts):
        if rng.random() < model.pick_p_success:
            break
    else:
        return PICK_FAILURE
    state.held = step.tgt
    entry = model.entry(step.tau)
    goal = plan.design[step.tgt]
    success = rng.random() < entry.p_success
    state.held = None
    if success:
        if collides(state.structure(), goal):
            return "collision"
        state.placed[step.tgt] = goal
        return SUCCESS
    mode = FAILURE_MODES[_choose(entry.failure_mix, rng.random())]
    if mode == "misalignment":
        pose = _misaligned_pose(state, goal, rng)
        if pose is not None:
            state.placed[step.tgt] = pose
    elif mode == "deformation":
        loose = sorted(i for i, b in state.placed.items() if b.pos[2] > 0)
        if loose:
            del state.placed[loose[int(rng.integers(len(loose)))]]
    return mode


def _choose(weights, u: float) -> int:
    acc = 0.0
    for k, w in enumerate(weights):
        acc += w
        if u < acc:
            return k
    return max(k for k, w in enumerate(weights) if w > 0)


def run_trial(
    plan: AssemblyPlan,
    model: SkillModel,
    policy: str = ABORT,
    seed: int | np.random.SeedSequence = 0,
    first_placed: bool = False,
) -> TrialResult:
    if policy not in (ABORT, SKIP):
        raise ValueError(f"unknown policy {policy!r}")
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
        seed_value = int(ss.generate_state(1, dtype=np.uint32)[0])
    else:
        ss = np.random.SeedSequence(int(seed))
        seed_value = int(seed)
    rng = np.random.Generator(np.random.PCG64(ss))
    n = len(plan.steps)
    state = WorldState({}, plan.design.workspace)
    trace: list[StepRecord] = []
    best = 0
    for k, step in enumerate(plan.steps):
        state.step_cursor = k
        if k == 0 and first_placed:
            state.placed[step.tgt] = plan.design[step.tgt]
            outcome = PRE_SATISFIED
        elif not precondition_check(state, step, plan, strict=policy == ABORT):
            outcome = PRECONDITION_ABORT
        else:
            outcome = execute_step(state, step, plan, model, rng)
            if outcome == SUCCESS and not postcondition_check(state, step, plan):
                outcome = "postcondition_failure"
        correct = correct_count(state, plan)
        best = max(best, correct)
        trace.append(StepRecord(k, outcome, correct))
        if outcome not in (SUCCESS, PRE_SATISFIED) and policy == ABORT:
            state.aborted = True
            break
    return TrialResult(trace, best, best / n if n else 1.0, seed_value)


def trial_seeds(base_seed: int, trials: int) -> list[np.random.SeedSequence]:
    """Per-trial seed sequences: ``SeedSequence(base_seed).spawn(trials)``."""
    return np.random.SeedSequence(int(base_seed)).spawn(trials)


@dataclass
class MonteCarloResult:
    mean: float
    std: float
    trials: list[TrialResult]

    def failure_histogram(self) -> dict[str, int]:
        hist: dict[str, int] = {}
        for t in self.trials:
            for r in t.trace:
                if r.outcome not in (SUCCESS, PRE_SATISFIED):
                    hist[r.outcome] = hist.get(r.outcome, 0) + 1
        return dict(sorted(hist.items()))

    def to_dict(self) -> dict:
        return {
            "trials": len(self.trials),
            "mean": self.mean,
            "std": self.std,
            "completions": [t.completion for t in self.trials],
            "failure_modes": self.failure_histogram(),
        }


def monte_carlo(
    plan: AssemblyPlan,
    model: SkillModel,
    trials: int,
    policy: str = ABORT,
    base_seed: int = 0,
    first_placed: bool = False,
    workers: int = 1,
) -> MonteCarloResult:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = trial_seeds(base_seed, trials)

    def one(ss):
        return run_trial(plan, model, policy, ss, first_placed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(ss) for ss in seeds]
    values = [r.completion for r in results]
    mean = math.fsum(values) / trials
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (trials - 1)) if trials > 1 else 0.0
    return MonteCarloResult(mean, std, results)
