"""Gravity-only static equilibrium of a brick structure as a small LP.

Each contact between two bodies (brick-brick or brick-baseplate) transmits
vertical forces through two kinds of points:

* ``stud`` points, one per engaged stud at the stud-cell center. These are
  signed: compression up to ``C_max`` and clutch tension down to ``-t*T_max``.
* ``rim`` points at the four corners of the overlap rectangle. These carry
  compression only (0..``C_max``) and stand for the bearing faces of the two
  bricks, so that the resultant of the compressive load can sit anywhere in
  the overlap area.

Every brick contributes three equalities: vertical force balance and moment
balance about the x and y axes through its footprint centroid. The LP
minimizes the tension utilization ``t``; the structure is stable when a
solution exists with ``t <= 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid_model import BASEPLATE, Structure
from . import lp

STUD = "stud"
RIM = "rim"
TOLERANCE = 1e-9


@dataclass(frozen=True)
class StabilityParams:
    brick_weight: float = 1.0
    tension_capacity: float = 4.0
    compression_capacity: float = 1000.0

    def __post_init__(self):
        if min(self.brick_weight, self.tension_capacity, self.compression_capacity) <= 0:
            raise ValueError("stability parameters must be positive")
        if self.tension_capacity > self.compression_capacity:
            raise ValueError("tension capacity must not exceed compression capacity")

    def scaled(self, k: float) -> "StabilityParams":
        return StabilityParams(self.brick_weight * k, self.tension_capacity * k, self.compression_capacity * k)


@dataclass(frozen=True)
class ForcePoint:
    lower: int
    upper: int
    kind: str
    x: float
    y: float


@dataclass
class EquilibriumSystem:
    """``A @ f = rhs`` with bounds ``-t*T_max <= f_stud <= C_max``, ``0 <= f_rim <= C_max``."""

    points: list[ForcePoint]
    A: np.ndarray
    rhs: np.ndarray
    row_labels: list[tuple[int, str]]
    tension_capacity: float
    compression_capacity: float

    @property
    def n_vars(self) -> int:
        return len(self.points)

    @property
    def n_eqs(self) -> int:
        return self.A.shape[0]

    def stud_mask(self) -> np.ndarray:
        return np.array([p.kind == STUD for p in self.points], dtype=bool)


@dataclass
class LPSolution:
    t: float
    forces: np.ndarray


@dataclass
class StabilityReport:
    stable: bool
    utilization: float | None
    forces: tuple[tuple[ForcePoint, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "stable": self.stable,
            "utilization": None if self.utilization is None else round(self.utilization, 6),
            "forces": [
                {
                    "lower": p.lower,
                    "upper": p.upper,
                    "kind": p.kind,
                    "at": [p.x, p.y],
                    "force": round(f, 6) + 0.0,
                }
                for p, f in self.forces
            ],
        }


def brick_weight(structure: Structure, index: int, params: StabilityParams) -> float:
    b = structure[index]
    return params.brick_weight * b.type.w * b.type.d * b.type.h / 4.0


def equilibrium_system(structure: Structure, params: StabilityParams = StabilityParams()) -> EquilibriumSystem:
    points: list[ForcePoint] = []
    for c in structure.contacts():
        for x, y in c.stud_cells:
            points.append(ForcePoint(c.lower, c.upper, STUD, x + 0.5, y + 0.5))
        xs = [x for x, _ in c.stud_cells]
        ys = [y for _, y in c.stud_cells]
        x0, x1, y0, y1 = min(xs), max(xs) + 1, min(ys), max(ys) + 1
        for x, y in ((x0, y0), (x1, y0), (x0, y1), (x1, y1)):
            points.append(ForcePoint(c.lower, c.upper, RIM, float(x), float(y)))

    indices = list(structure)
    row_of = {idx: 3 * k for k, idx in enumerate(indices)}
    A = np.zeros((3 * len(indices), len(points)))
    rhs = np.zeros(3 * len(indices))
    labels: list[tuple[int, str]] = []
    for idx in indices:
        labels += [(idx, "fz"), (idx, "mx"), (idx, "my")]
        rhs[row_of[idx]] = brick_weight(structure, idx, params)
    for j, p in enumerate(points):
        # force pushes the upper body up and the lower body down
        for body, sign in ((p.upper, 1.0), (p.lower, -1.0)):
            if body == BASEPLATE:
                continue
            cx, cy = structure[body].footprint_center()
            r = row_of[body]
            A[r, j] += sign
            A[r + 1, j] += sign * (p.y - cy)
            A[r + 2, j] += sign * (p.x - cx)
    return EquilibriumSystem(points, A, rhs, labels, params.tension_capacity, params.compression_capacity)


def solve_lp(system: EquilibriumSystem) -> LPSolution:
    """Minimize the tension utilization ``t``.

    Standard-form variables, in column order (Bland's rule scans them in
    this order): ``t``, shifted stud forces ``u = f + T_max*t``, rim forces,
    then upper-bound slacks for studs and rims.

    Raises :class:`brickplan.lp.Infeasible` when no equilibrium exists.
    """
    n = system.n_vars
    if system.n_eqs == 0:
        return LPSolution(0.0, np.zeros(n))
    stud = system.stud_mask()
    T, C = system.tension_capacity, system.compression_capacity
    ns = int(stud.sum())
    order = np.concatenate([np.flatnonzero(stud), np.flatnonzero(~stud)])
    A = system.A[:, order]
    m = system.n_eqs
    nv = 1 + n + n
    M = np.zeros((m + n, nv))
    b = np.zeros(m + n)
    # equilibrium rows: A_s (u - T t) + A_r c = rhs
    M[:m, 0] = -T * A[:, :ns].sum(axis=1)
    M[:m, 1:1 + n] = A
    b[:m] = system.rhs
    # upper bounds: u - T t + w = C ; c + v = C
    for k in range(n):
        row = m + k
        M[row, 1 + k] = 1.0
        M[row, 1 + n + k] = 1.0
        if k < ns:
            M[row, 0] = -T
        b[row] = C
    cost = np.zeros(nv)
    cost[0] = 1.0
    res = lp.simplex(cost, M, b)
    t = float(res.x[0])
    f_sorted = res.x[1:1 + n].copy()
    f_sorted[:ns] -= T * t
    forces = np.zeros(n)
    forces[order] = f_sorted
    resid = np.abs(system.A @ forces - system.rhs).max(initial=0.0)
    if resid > 1e-7 * max(1.0, float(np.abs(system.rhs).max(initial=0.0))):
        raise lp.LPError(f"equilibrium residual {resid:.3e} after solve")
    return LPSolution(t, forces)


def assess_stability(structure: Structure, params: StabilityParams = StabilityParams()) -> StabilityReport:
    return _assess_cached(structure.key(), params)


@lru_cache(maxsize=65536)
def _assess_cached(key, params: StabilityParams) -> StabilityReport:
    workspace, items = key
    structure = Structure(workspace, dict(items))
    system = equilibrium_system(structure, params)
    try:
        sol = solve_lp(system)
    except lp.Infeasible:
        return StabilityReport(False, None)
    forces = tuple(zip(system.points, (float(f) for f in sol.forces)))
    return StabilityReport(sol.t <= 1.0 + TOLERANCE, sol.t, forces)
