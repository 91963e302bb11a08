"""Discrete stud-grid world model.

Coordinates: x, y in studs, z in layers (brick heights). A brick's position is
the minimum-corner cell of its footprint after rotation. Orientation counts
counterclockwise quarter-turns seen from +z.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

BASEPLATE = -1
DEFAULT_WORKSPACE = (24, 24, 12)
# world units per layer, in stud pitches (Duplo: 19.2 mm / 16 mm)
LAYER_HEIGHT = 1.2

Cell = tuple[int, int, int]


class GridError(ValueError):
    pass


class OutOfWorkspace(GridError):
    pass


class CollisionError(GridError):
    pass


@dataclass(frozen=True)
class BrickType:
    id: str
    w: int
    d: int
    h: int = 1
    color: tuple[int, int, int] = (200, 40, 40)

    def __post_init__(self):
        if self.w < 1 or self.d < 1 or self.h < 1:
            raise GridError(f"brick type {self.id!r} must have positive dimensions")


@dataclass(frozen=True)
class Brick:
    type: BrickType
    pos: tuple[int, int, int]
    rot: int = 0

    def __post_init__(self):
        if self.rot not in (0, 1, 2, 3):
            raise GridError(f"orientation must be in 0..3, got {self.rot}")
        object.__setattr__(self, "pos", tuple(int(v) for v in self.pos))

    @property
    def extent(self) -> tuple[int, int]:
        """Footprint (x, y) extent in studs after rotation."""
        if self.rot % 2:
            return self.type.d, self.type.w
        return self.type.w, self.type.d

    @property
    def top(self) -> int:
        return self.pos[2] + self.type.h

    def footprint(self) -> list[tuple[int, int]]:
        x0, y0, _ = self.pos
        ex, ey = self.extent
        return [(x, y) for x in range(x0, x0 + ex) for y in range(y0, y0 + ey)]

    def footprint_center(self) -> tuple[float, float]:
        ex, ey = self.extent
        return self.pos[0] + ex / 2.0, self.pos[1] + ey / 2.0

    def moved(self, pos: tuple[int, int, int] | None = None, rot: int | None = None) -> "Brick":
        return Brick(self.type, self.pos if pos is None else pos, self.rot if rot is None else rot)

    def pose(self) -> tuple[int, int, int, int]:
        return (*self.pos, self.rot)


@dataclass(frozen=True)
class TaskEncoding:
    """Relative pose of a target brick in its reference brick's frame."""

    tx: int
    ty: int
    tz: int
    ttheta: int = 0

    def __post_init__(self):
        if self.ttheta not in (0, 1, 2, 3):
            raise GridError(f"ttheta must be in 0..3, got {self.ttheta}")

    @classmethod
    def of(cls, values: Iterable[int]) -> "TaskEncoding":
        tx, ty, tz, tt = (int(v) for v in values)
        return cls(tx, ty, tz, tt)

    def as_list(self) -> list[int]:
        return [self.tx, self.ty, self.tz, self.ttheta]

    def __str__(self) -> str:
        return "[" + ",".join(str(v) for v in self.as_list()) + "]"


@dataclass(frozen=True)
class Contact:
    lower: int  # brick index or BASEPLATE
    upper: int
    stud_cells: tuple[tuple[int, int], ...]
    interface_z: int


def occupied_cells(brick: Brick) -> set[Cell]:
    x0, y0, z0 = brick.pos
    ex, ey = brick.extent
    return {
        (x, y, z)
        for x in range(x0, x0 + ex)
        for y in range(y0, y0 + ey)
        for z in range(z0, z0 + brick.type.h)
    }


def in_workspace(brick: Brick, workspace: tuple[int, int, int]) -> bool:
    x0, y0, z0 = brick.pos
    ex, ey = brick.extent
    W, D, H = workspace
    return x0 >= 0 and y0 >= 0 and z0 >= 0 and x0 + ex <= W and y0 + ey <= D and z0 + brick.type.h <= H


def contact_studs(a: Brick, b: Brick) -> list[tuple[int, int]]:
    """Stud cells shared by the top face of the lower brick and the bottom of the upper one."""
    if a.top == b.pos[2]:
        lower, upper = a, b
    elif b.top == a.pos[2]:
        lower, upper = b, a
    else:
        return []
    (lx, ly), (lex, ley) = lower.pos[:2], lower.extent
    (ux, uy), (uex, uey) = upper.pos[:2], upper.extent
    xs = range(max(lx, ux), min(lx + lex, ux + uex))
    ys = range(max(ly, uy), min(ly + ley, uy + uey))
    return [(x, y) for x in xs for y in ys]


def _rotate(dx: int, dy: int, quarter_turns: int) -> tuple[int, int]:
    for _ in range(quarter_turns % 4):
        dx, dy = -dy, dx
    return dx, dy


def relative_encoding(ref: Brick, tgt: Brick) -> TaskEncoding:
    dx = tgt.pos[0] - ref.pos[0]
    dy = tgt.pos[1] - ref.pos[1]
    tx, ty = _rotate(dx, dy, -ref.rot)
    return TaskEncoding(tx, ty, tgt.pos[2] - ref.pos[2], (tgt.rot - ref.rot) % 4)


def apply_encoding(
    ref: Brick,
    tau: TaskEncoding,
    btype: BrickType,
    workspace: tuple[int, int, int] | None = None,
) -> Brick:
    dx, dy = _rotate(tau.tx, tau.ty, ref.rot)
    pos = (ref.pos[0] + dx, ref.pos[1] + dy, ref.pos[2] + tau.tz)
    rot = (ref.rot + tau.ttheta) % 4
    if workspace is not None:
        x0, y0, z0 = pos
        ex, ey = (btype.d, btype.w) if rot % 2 else (btype.w, btype.d)
        W, D, H = workspace
        if x0 < 0 or y0 < 0 or z0 < 0 or x0 + ex > W or y0 + ey > D or z0 + btype.h > H:
            raise OutOfWorkspace(f"encoding {tau} from {ref.pose()} leaves the workspace")
    return Brick(btype, pos, rot)


def baseplate_brick(origin: tuple[int, int] = (0, 0)) -> Brick:
    """Virtual reference for baseplate steps: a unit brick one layer below the origin stud."""
    return Brick(BrickType("baseplate", 1, 1, 1), (origin[0], origin[1], -1), 0)


@dataclass
class Structure:
    """Bricks keyed by a stable index, plus a cell -> index occupancy map."""

    workspace: tuple[int, int, int] = DEFAULT_WORKSPACE
    bricks: dict[int, Brick] = field(default_factory=dict)
    _occ: dict[Cell, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.workspace = tuple(int(v) for v in self.workspace)
        initial, self.bricks = self.bricks, {}
        self._occ = {}
        for idx, brick in initial.items():
            self.add(brick, idx)

    @classmethod
    def from_bricks(cls, bricks: Iterable[Brick], workspace=DEFAULT_WORKSPACE) -> "Structure":
        s = cls(workspace)
        for b in bricks:
            s.add(b)
        return s

    def __len__(self) -> int:
        return len(self.bricks)

    def __contains__(self, index: int) -> bool:
        return index in self.bricks

    def __getitem__(self, index: int) -> Brick:
        return self.bricks[index]

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.bricks))

    def items(self) -> list[tuple[int, Brick]]:
        return sorted(self.bricks.items())

    def add(self, brick: Brick, index: int | None = None) -> int:
        if index is None:
            index = max(self.bricks, default=-1) + 1
        if index in self.bricks:
            raise GridError(f"index {index} already used")
        if not in_workspace(brick, self.workspace):
            raise OutOfWorkspace(f"brick {brick.pose()} outside workspace {self.workspace}")
        cells = occupied_cells(brick)
        hit = [self._occ[c] for c in cells if c in self._occ]
        if hit:
            raise CollisionError(f"brick {brick.pose()} overlaps brick {min(hit)}")
        for c in cells:
            self._occ[c] = index
        self.bricks[index] = brick
        return index

    def remove(self, index: int) -> Brick:
        brick = self.bricks.pop(index)
        for c in occupied_cells(brick):
            del self._occ[c]
        return brick

    def at(self, cell: Cell) -> int | None:
        return self._occ.get(cell)

    def subset(self, indices: Iterable[int]) -> "Structure":
        s = Structure(self.workspace)
        for i in sorted(indices):
            s.add(self.bricks[i], i)
        return s

    def without(self, index: int) -> "Structure":
        return self.subset(i for i in self.bricks if i != index)

    def copy(self) -> "Structure":
        return self.subset(self.bricks)

    def key(self) -> tuple:
        """Hashable canonical form (workspace and sorted (index, brick) pairs)."""
        return (self.workspace, tuple(self.items()))

    def same_layout(self, other: "Structure") -> bool:
        return self.bricks == other.bricks

    def contacts(self) -> list[Contact]:
        """All brick-brick and brick-baseplate contacts, sorted by (upper, lower)."""
        found: list[Contact] = []
        for idx, brick in self.items():
            z = brick.pos[2]
            if z == 0:
                found.append(Contact(BASEPLATE, idx, tuple(brick.footprint()), 0))
                continue
            below = sorted({self._occ[(x, y, z - 1)] for x, y in brick.footprint() if (x, y, z - 1) in self._occ})
            for low in below:
                studs = contact_studs(self.bricks[low], brick)
                if studs:
                    found.append(Contact(low, idx, tuple(studs), z))
        return found


def collides(structure: Structure, brick: Brick) -> bool:
    return any(structure.at(c) is not None for c in occupied_cells(brick))
