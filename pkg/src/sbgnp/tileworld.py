"""Deterministic Tileworld: map parsing, sensing, physics, episodes, fitness.

Coordinates are ``(x, y)`` with ``y`` growing downwards, so North is ``y - 1``.
Headings are encoded North=0, East=1, South=2, West=3.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .core import Cursor, Individual, NodeLibrary, TransitRecord, advance
from . import kernel as _kernel

FLOOR, OBSTACLE, TILE, HOLE = 0, 1, 2, 3
NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3
DX = (0, 1, 0, -1)
DY = (-1, 0, 1, 0)

# judgment outputs, in declared order
AGENT, TILE_SEEN, HOLE_SEEN, OBSTACLE_SEEN, NOTHING = range(5)
FORWARD, BACKWARD, RIGHT, LEFT = range(4)

OBJECT_OUTPUTS = ("Agent", "Tile", "Hole", "Obstacle", "Nothing")
DIRECTION_OUTPUTS = ("Forward", "Backward", "Right", "Left")

JUDGMENTS = (("WEF", 5), ("WER", 5), ("WEL", 5), ("WEB", 5),
             ("NTD", 4), ("SNTD", 4), ("NHD", 4))
PROCESSING = ("MF", "TR", "TL", "ST")
FUNCTION_CODES = {name: code for code, name in
                  enumerate([n for n, _ in JUDGMENTS] + list(PROCESSING))}

_CELL_CHARS = {".": FLOOR, "#": OBSTACLE, "T": TILE, "H": HOLE}
_AGENT_CHARS = {"^": NORTH, ">": EAST, "v": SOUTH, "<": WEST}

Pos = tuple[int, int]


def tileworld_library(program_size: int = 3) -> NodeLibrary:
    return NodeLibrary(JUDGMENTS, PROCESSING, program_size, idle_function="ST")


class MapError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


class Graphs(enum.Enum):
    SHARED = "shared"
    PER_AGENT = "per-agent"


def manhattan(a: Pos, b: Pos) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def nearest_distance(pos: Pos, targets) -> int | None:
    return min((manhattan(pos, t) for t in targets), default=None)


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    cells: tuple[tuple[int, ...], ...]
    agents: tuple[tuple[Pos, int], ...]

    def _positions(self, kind: int) -> tuple[Pos, ...]:
        return tuple((x, y) for y in range(self.height) for x in range(self.width)
                     if self.cells[y][x] == kind)

    @property
    def tiles(self) -> tuple[Pos, ...]:
        return self._positions(TILE)

    @property
    def holes(self) -> tuple[Pos, ...]:
        return self._positions(HOLE)

    @property
    def obstacles(self) -> tuple[Pos, ...]:
        return self._positions(OBSTACLE)

    @cached_property
    def initial_distances(self) -> tuple[int, ...]:
        holes = self.holes
        return tuple(nearest_distance(t, holes) for t in self.tiles)

    @cached_property
    def _templates(self):
        cells = np.array(self.cells, dtype=np.int8)
        ident = np.full(cells.shape, -1, dtype=np.int16)
        tiles, holes = self.tiles, self.holes
        for i, (x, y) in enumerate(tiles):
            ident[y, x] = i
        for i, (x, y) in enumerate(holes):
            ident[y, x] = i
        agent_at = np.full(cells.shape, -1, dtype=np.int8)
        for a, ((x, y), _) in enumerate(self.agents):
            agent_at[y, x] = a
        ax = np.array([p[0] for p, _ in self.agents], dtype=np.int32)
        ay = np.array([p[1] for p, _ in self.agents], dtype=np.int32)
        ah = np.array([h for _, h in self.agents], dtype=np.int32)
        tx = np.array([p[0] for p in tiles], dtype=np.int32)
        ty = np.array([p[1] for p in tiles], dtype=np.int32)
        hx = np.array([p[0] for p in holes], dtype=np.int32)
        hy = np.array([p[1] for p in holes], dtype=np.int32)
        alive = np.ones(len(holes), dtype=np.uint8)
        return cells, ident, agent_at, ax, ay, ah, tx, ty, hx, hy, alive

    def render(self) -> str:
        chars = {v: k for k, v in _CELL_CHARS.items()}
        rows = [[chars[c] for c in row] for row in self.cells]
        for (x, y), h in self.agents:
            rows[y][x] = "^>v<"[h]
        return "\n".join("".join(r) for r in rows) + "\n"


def parse_map(text: str) -> GridMap:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MapError("empty map")
    width = len(lines[0])
    cells, agents = [], []
    for y, line in enumerate(lines, 1):
        if len(line) != width:
            raise MapError(f"line {y}: non-rectangular map (length {len(line)}, expected {width})")
        row = []
        for x, ch in enumerate(line, 1):
            if ch in _CELL_CHARS:
                row.append(_CELL_CHARS[ch])
            elif ch in _AGENT_CHARS:
                row.append(FLOOR)
                agents.append(((x - 1, y - 1), _AGENT_CHARS[ch]))
            else:
                raise MapError(f"line {y}, column {x}: unknown character {ch!r}")
        cells.append(tuple(row))
    if width == 0:
        raise MapError("line 1: empty row")
    grid = GridMap(width, len(cells), tuple(cells), tuple(agents))
    if not agents:
        raise MapError("no agents")
    if not grid.tiles:
        raise MapError("no tiles")
    if not grid.holes:
        raise MapError("no holes")
    return grid


def load_map(path) -> GridMap:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_map(fh.read())


@dataclass(frozen=True)
class WorldState:
    width: int
    height: int
    obstacles: frozenset[Pos]
    tiles: tuple[Pos | None, ...]  # by tile id; None once dropped
    holes: frozenset[Pos]
    agents: tuple[tuple[Pos, int], ...]
    steps_taken: int = 0
    dropped: int = 0

    @classmethod
    def initial(cls, grid: GridMap) -> WorldState:
        return cls(grid.width, grid.height, frozenset(grid.obstacles), grid.tiles,
                   frozenset(grid.holes), grid.agents)

    @property
    def tile_positions(self) -> frozenset[Pos]:
        return frozenset(t for t in self.tiles if t is not None)

    def inside(self, pos: Pos) -> bool:
        return 0 <= pos[0] < self.width and 0 <= pos[1] < self.height

    def content(self, pos: Pos) -> int:
        if not self.inside(pos) or pos in self.obstacles:
            return OBSTACLE_SEEN
        if any(p == pos for p, _ in self.agents):
            return AGENT
        if pos in self.tile_positions:
            return TILE_SEEN
        if pos in self.holes:
            return HOLE_SEEN
        return NOTHING


def _step(pos: Pos, heading: int) -> Pos:
    return pos[0] + DX[heading], pos[1] + DY[heading]


def _ranked(origin: Pos, targets) -> list[Pos]:
    return sorted(targets, key=lambda p: (manhattan(origin, p), p[1], p[0]))


def relative_direction(heading: int, dx: int, dy: int) -> int:
    """Heading-relative direction of offset ``(dx, dy)`` by dominant axis."""
    axial = dx * DX[heading] + dy * DY[heading]
    right = (heading + 1) % 4
    lateral = dx * DX[right] + dy * DY[right]
    if abs(axial) >= abs(lateral):
        return FORWARD if axial > 0 else BACKWARD
    return RIGHT if lateral > 0 else LEFT


def judge(world: WorldState, agent_index: int, function_id: str) -> int:
    pos, heading = world.agents[agent_index]
    if function_id in ("WEF", "WER", "WEL", "WEB"):
        turn = {"WEF": 0, "WER": 1, "WEB": 2, "WEL": 3}[function_id]
        return world.content(_step(pos, (heading + turn) % 4))
    if function_id in ("NTD", "SNTD"):
        ranked = _ranked(pos, world.tile_positions)
    elif function_id == "NHD":
        ranked = _ranked(pos, world.holes)
    else:
        raise ValueError(f"{function_id!r} is not a Tileworld judgment function")
    if not ranked:
        return FORWARD
    target = ranked[1] if function_id == "SNTD" and len(ranked) > 1 else ranked[0]
    return relative_direction(heading, target[0] - pos[0], target[1] - pos[1])


def apply_action(world: WorldState, agent_index: int, action: str) -> WorldState:
    pos, heading = world.agents[agent_index]
    if action == "ST":
        return world
    if action in ("TR", "TL"):
        turned = (heading + (1 if action == "TR" else 3)) % 4
        return _with_agent(world, agent_index, pos, turned)
    if action != "MF":
        raise ValueError(f"{action!r} is not a Tileworld processing function")

    ahead = _step(pos, heading)
    what = world.content(ahead)
    if what == NOTHING:
        return _with_agent(world, agent_index, ahead, heading)
    if what != TILE_SEEN:
        return world
    beyond = _step(ahead, heading)
    past = world.content(beyond)
    tile = world.tiles.index(ahead)
    tiles = list(world.tiles)
    if past == NOTHING:
        tiles[tile] = beyond
        world = replace(world, tiles=tuple(tiles))
    elif past == HOLE_SEEN:
        tiles[tile] = None
        world = replace(world, tiles=tuple(tiles), holes=world.holes - {beyond},
                        dropped=world.dropped + 1)
    else:
        return world
    return _with_agent(world, agent_index, ahead, heading)


def _with_agent(world: WorldState, agent_index: int, pos: Pos, heading: int) -> WorldState:
    agents = list(world.agents)
    agents[agent_index] = (pos, heading)
    return replace(world, agents=tuple(agents))


@dataclass(frozen=True)
class FitnessWeights:
    w1: float = 100
    w2: float = 1
    w3: float = 20


@dataclass
class EpisodeResult:
    dropped: int
    steps_taken: int
    initial_steps: int
    per_tile: tuple[tuple[int, int], ...]
    transit_records: list[TransitRecord] = field(default_factory=list, compare=False)

    @property
    def total_tiles(self) -> int:
        return len(self.per_tile)

    @property
    def success(self) -> bool:
        return self.dropped == len(self.per_tile)


def fitness(result: EpisodeResult, weights: FitnessWeights = FitnessWeights()):
    improvement = sum(i - f for i, f in result.per_tile)
    return (weights.w1 * result.dropped
            + weights.w2 * (result.initial_steps - result.steps_taken)
            + weights.w3 * improvement)


def _final_distances(initial: Sequence[int], tiles, holes) -> tuple[tuple[int, int], ...]:
    out = []
    for d0, pos in zip(initial, tiles):
        if pos is None:
            out.append((d0, 0))
        elif not holes:
            out.append((d0, d0))
        else:
            out.append((d0, nearest_distance(pos, holes)))
    return tuple(out)


def _check_group(group: Sequence[Individual], graphs: Graphs, grid: GridMap) -> Graphs:
    graphs = Graphs(graphs)
    if graphs is Graphs.SHARED and len(group) != 1:
        raise ConfigurationError(f"shared graphs need exactly 1 individual, got {len(group)}")
    if graphs is Graphs.PER_AGENT and len(group) != len(grid.agents):
        raise ConfigurationError(
            f"per-agent graphs need {len(grid.agents)} individuals, got {len(group)}")
    return graphs


def run_episode(group: Sequence[Individual], graphs: Graphs | str, grid: GridMap,
                initial_steps: int, backend: str | None = None) -> EpisodeResult:
    """Run one deterministic episode.

    ``backend`` is ``None`` (the kernel chosen at import), ``"compiled"``,
    ``"python"`` or ``"reference"``; the last walks the graphs through
    :func:`advance`, :func:`judge` and :func:`apply_action` one call at a time.
    """
    graphs = _check_group(group, graphs, grid)
    if initial_steps < 1:
        raise ConfigurationError("initial_steps must be >= 1")
    if backend == "reference":
        return _reference_episode(group, graphs, grid, initial_steps)
    run = _kernel.run_kernel if backend is None else _kernel.get(backend)

    lib = group[0].library
    codes_by_index = np.array([FUNCTION_CODES[f] for f in lib.functions] + [-1], dtype=np.int8)
    if len(group) == 1:
        ind = group[0]
        types = ind.node_types[None, :]
        codes = codes_by_index[ind.functions][None, :]
        targets = ind.targets[None, :, :]
    else:
        types = np.stack([m.node_types for m in group])
        codes = codes_by_index[np.stack([m.functions for m in group])]
        targets = np.stack([m.targets for m in group])
    n_agents = len(grid.agents)
    member_of_agent = (np.zeros(n_agents, dtype=np.int32) if graphs is Graphs.SHARED
                       else np.arange(n_agents, dtype=np.int32))
    cells, ident, agent_at, ax, ay, ah, tx, ty, hx, hy, alive = (
        a.copy() for a in grid._templates)
    transit = np.zeros(targets.shape, dtype=np.uint8)
    dropped, steps = run(np.ascontiguousarray(types), np.ascontiguousarray(codes),
                         np.ascontiguousarray(targets, dtype=np.int32), member_of_agent,
                         cells, ident, agent_at, ax, ay, ah, tx, ty, hx, hy, alive,
                         initial_steps, FUNCTION_CODES[lib.idle_function], transit)
    holes = [(int(x), int(y)) for x, y, a in zip(hx, hy, alive) if a]
    tiles = [None if x < 0 else (int(x), int(y)) for x, y in zip(tx, ty)]
    per_tile = _final_distances(grid.initial_distances, tiles, holes)
    records = [TransitRecord(t.view(bool)) for t in transit]
    return EpisodeResult(int(dropped), int(steps), initial_steps, per_tile, records)


def _reference_episode(group, graphs, grid, initial_steps) -> EpisodeResult:
    world = WorldState.initial(grid)
    n_agents = len(grid.agents)
    member = [0] * n_agents if graphs is Graphs.SHARED else list(range(n_agents))
    cursors = [Cursor(0) for _ in range(n_agents)]
    records = [TransitRecord.for_individual(m) for m in group]
    total = len(grid.tiles)
    for step in range(1, initial_steps + 1):
        world = replace(world, steps_taken=step)
        for a in range(n_agents):
            m = member[a]
            action, cursors[a], _ = advance(
                group[m], cursors[a], lambda f: judge(world, a, f), records[m])
            world = apply_action(world, a, action)
            if world.dropped == total:
                break
        if world.dropped == total:
            break
    per_tile = _final_distances(grid.initial_distances, world.tiles, world.holes)
    return EpisodeResult(world.dropped, step, initial_steps, per_tile, records)
