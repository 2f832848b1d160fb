"""Benchmark SSP MDPs: slip grid worlds and random sparse MDPs."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mdp import SspMdp, as_stochastic, goal_distances, policy_matrix

ACTIONS = ("N", "S", "E", "W")
MOVES = {0: (-1, 0), 1: (1, 0), 2: (0, 1), 3: (0, -1)}
PERPENDICULAR = {0: (2, 3), 1: (2, 3), 2: (0, 1), 3: (0, 1)}

Cell = tuple[int, int]


@dataclass(frozen=True)
class GridSpec:
    """Grid world layout; cells are ``(row, col)`` with row 0 at the top."""

    width: int
    height: int
    start: Cell
    goals: frozenset
    obstacles: frozenset = field(default_factory=frozenset)
    p_slip: float = 0.0
    step_cost: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(self.start))
        object.__setattr__(self, "goals", frozenset(tuple(g) for g in self.goals))
        object.__setattr__(self, "obstacles", frozenset(tuple(o) for o in self.obstacles))
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")
        if not 0 <= self.p_slip < 1:
            raise ValueError(f"p_slip {self.p_slip} not in [0, 1)")
        if not self.step_cost > 0:
            raise ValueError("step_cost must be positive")
        if not self.goals:
            raise ValueError("grid needs at least one goal")
        for name, cell in [("start", self.start)] + [("goal", g) for g in sorted(self.goals)]:
            if not self.in_bounds(cell):
                raise ValueError(f"{name} {cell} is outside the {self.height}x{self.width} grid")
            if cell in self.obstacles:
                raise ValueError(f"{name} {cell} is an obstacle")

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def free_cells(self) -> list[Cell]:
        return [(r, c) for r in range(self.height) for c in range(self.width)
                if (r, c) not in self.obstacles]


def cell_index(spec: GridSpec) -> dict:
    return {cell: i for i, cell in enumerate(spec.free_cells())}


def grid_to_mdp(spec: GridSpec) -> SspMdp:
    """Slip grid world: the intended move succeeds with ``1 - p_slip`` and
    each perpendicular move happens with ``p_slip / 2``. Moves off the grid
    or into obstacles stay put. Every non-goal step costs ``step_cost``.

    Raises ``ValueError`` if some free cell cannot reach a goal.
    """
    index = cell_index(spec)
    n = len(index)
    t = np.zeros((n, 4, n))
    c = np.zeros_like(t)

    def land(cell, move):
        nxt = (cell[0] + MOVES[move][0], cell[1] + MOVES[move][1])
        return index[nxt] if spec.in_bounds(nxt) and nxt not in spec.obstacles else index[cell]

    for cell, s in index.items():
        if cell in spec.goals:
            t[s, :, s] = 1.0
            continue
        for a in range(4):
            outcomes = [(a, 1.0 - spec.p_slip)]
            if spec.p_slip > 0:
                outcomes += [(m, spec.p_slip / 2) for m in PERPENDICULAR[a]]
            for move, p in outcomes:
                t[s, a, land(cell, move)] += p
        c[s] = np.where(t[s] > 0, spec.step_cost, 0.0)

    mdp = SspMdp(t, c, frozenset(index[g] for g in spec.goals), index[spec.start])
    dist = goal_distances(mdp)
    if dist[mdp.start] < 0:
        raise ValueError(f"no goal reachable from start {spec.start}")
    cells = spec.free_cells()
    stuck = [cells[s] for s in np.flatnonzero(dist < 0)]
    if stuck:
        raise ValueError(f"no goal reachable from cells {stuck}")
    return mdp


def parse_grid(text: str, p_slip: float = 0.0, step_cost: float = 1.0) -> GridSpec:
    """Read a layout of ``.`` free, ``#`` obstacle, ``S`` start, ``G`` goal."""
    rows = [line.strip() for line in text.splitlines()]
    rows = [r for r in rows if r and not r.startswith(";")]
    if not rows:
        raise ValueError("empty grid")
    width = len(rows[0])
    start, goals, obstacles = None, set(), set()
    for r, line in enumerate(rows):
        if len(line) != width:
            raise ValueError(f"grid row {r} has width {len(line)}, expected {width}")
        for col, ch in enumerate(line):
            if ch == "#":
                obstacles.add((r, col))
            elif ch == "G":
                goals.add((r, col))
            elif ch == "S":
                if start is not None:
                    raise ValueError("grid has more than one start cell")
                start = (r, col)
            elif ch != ".":
                raise ValueError(f"unknown grid character {ch!r} at row {r}, column {col}")
    if start is None:
        raise ValueError("grid has no start cell")
    return GridSpec(width, len(rows), start, frozenset(goals), frozenset(obstacles),
                    p_slip, step_cost)


def format_grid(spec: GridSpec) -> str:
    lines = []
    for r in range(spec.height):
        row = []
        for col in range(spec.width):
            cell = (r, col)
            if cell in spec.obstacles:
                row.append("#")
            elif cell in spec.goals:
                row.append("G")
            elif cell == spec.start:
                row.append("S")
            else:
                row.append(".")
        lines.append("".join(row))
    return "\n".join(lines) + "\n"


def random_ssp(rng: np.random.Generator, num_states: int, num_actions: int,
               max_successors: int = 3, max_cost: float = 10.0,
               min_weight: float = 0.05, num_goals: Optional[int] = None) -> SspMdp:
    """Random sparse SSP MDP that passes :func:`validate`.

    Each non-goal row gets 1..``max_successors`` random successors whose
    weights, drawn from ``[min_weight, 1]``, are normalized into
    probabilities; costs are drawn from ``(0, max_cost]``. The weight floor
    keeps every edge probability bounded away from zero. States that
    cannot reach a goal are repaired by adding an edge into the set of
    states that can, then renormalizing the row.
    """
    if num_states < 2:
        raise ValueError("need at least two states")
    if num_goals is None:
        num_goals = int(rng.integers(1, max(1, num_states // 5) + 1))
    goals = rng.choice(num_states, size=num_goals, replace=False)
    goal_mask = np.zeros(num_states, dtype=bool)
    goal_mask[goals] = True

    t = np.zeros((num_states, num_actions, num_states))
    c = np.zeros_like(t)
    for s in range(num_states):
        if goal_mask[s]:
            t[s, :, s] = 1.0
            continue
        for a in range(num_actions):
            k = int(rng.integers(1, min(max_successors, num_states) + 1))
            succ = rng.choice(num_states, size=k, replace=False)
            w = rng.uniform(min_weight, 1.0, size=k)
            t[s, a, succ] = w / w.sum()
            c[s, a, succ] = max_cost * (1.0 - rng.random(k))

    while True:
        mdp = SspMdp(t, c, frozenset(int(g) for g in goals))
        dist = goal_distances(mdp)
        stuck = np.flatnonzero(dist < 0)
        if stuck.size == 0:
            return mdp
        reaching = np.flatnonzero(dist >= 0)
        for s in stuck:
            a = int(rng.integers(num_actions))
            j = int(rng.choice(reaching))
            p = rng.uniform(0.1, 0.9)
            t[s, a] *= 1.0 - p
            t[s, a, j] += p
            if c[s, a, j] == 0:
                c[s, a, j] = max_cost * (1.0 - rng.random())


def random_proper_policy(mdp: SspMdp, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random deterministic policy, repaired until proper.

    States that cannot yet reach a goal are reassigned, layer by layer, to a
    random action with positive probability of entering the reaching set.
    """
    n, m = mdp.num_states, mdp.num_actions
    policy = rng.integers(m, size=n)
    while True:
        adj = policy_matrix(mdp, as_stochastic(policy, m)) > 0
        reach = mdp.goal_mask.copy()
        frontier = deque(np.flatnonzero(reach))
        while frontier:
            j = frontier.popleft()
            for i in np.flatnonzero(adj[:, j] & ~reach):
                reach[i] = True
                frontier.append(i)
        if reach.all():
            return policy
        for s in np.flatnonzero(~reach):
            options = np.flatnonzero((mdp.transitions[s][:, reach] > 0).any(axis=1))
            if options.size:
                policy[s] = int(rng.choice(options))
