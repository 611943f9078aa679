"""Graph genotype, structural validation and the node-walking executor.

An individual is stored as a handful of flat numpy arrays so that the
episode kernels can consume it without conversion:

``node_types``   int8  (N,)    0 = start, 1 = judgment, 2 = processing
``functions``    int16 (N,)    index into ``NodeLibrary.functions``; -1 for start
``targets``      int32 (N, B)  branch targets, padded with -1
``node_delays``  int32 (N,)    carried for genotype fidelity, never consumed
``branch_delays`` int32 (N, B)

Node 0 is always the start node, followed by ``program_size`` consecutive
instances of each judgment function in library order, then the processing
functions in the same fashion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

START, JUDGMENT, PROCESSING = 0, 1, 2
NO_BRANCH = -1


class StructureError(ValueError):
    """Raised when a genotype cannot be built or parsed."""


@dataclass(frozen=True)
class NodeLibrary:
    judgment_functions: tuple[tuple[str, int], ...]
    processing_functions: tuple[str, ...]
    program_size: int = 1
    idle_function: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "judgment_functions",
                           tuple((str(n), int(k)) for n, k in self.judgment_functions))
        object.__setattr__(self, "processing_functions", tuple(self.processing_functions))
        if self.program_size < 1:
            raise StructureError("program_size must be >= 1")
        if not self.processing_functions:
            raise StructureError("at least one processing function is required")
        names = [n for n, _ in self.judgment_functions] + list(self.processing_functions)
        if len(set(names)) != len(names):
            raise StructureError("function ids must be unique")
        for name, outputs in self.judgment_functions:
            if outputs < 2:
                raise StructureError(f"judgment {name} needs at least 2 outputs")
        if self.idle_function is None:
            object.__setattr__(self, "idle_function", self.processing_functions[-1])
        elif self.idle_function not in self.processing_functions:
            raise StructureError(f"idle function {self.idle_function} is not a processing function")

    @property
    def functions(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.judgment_functions) + self.processing_functions

    @property
    def n_judgment(self) -> int:
        return len(self.judgment_functions)

    @property
    def n_processing(self) -> int:
        return len(self.processing_functions)

    @property
    def n_nodes(self) -> int:
        return 1 + self.program_size * (self.n_judgment + self.n_processing)

    @property
    def max_branches(self) -> int:
        return max([1] + [k for _, k in self.judgment_functions])

    def is_judgment(self, function_id: str) -> bool:
        return function_id in dict(self.judgment_functions)

    def output_count(self, function_id: str) -> int:
        outputs = dict(self.judgment_functions)
        if function_id in outputs:
            return outputs[function_id]
        if function_id in self.processing_functions:
            return 1
        raise KeyError(function_id)

    def function_index(self, function_id: str) -> int:
        return self.functions.index(function_id)

    # Layout arrays are shared (read-only) by every individual of this library.
    @cached_property
    def layout(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ps = self.program_size
        types = [START]
        funcs = [-1]
        for f in range(self.n_judgment):
            types += [JUDGMENT] * ps
            funcs += [f] * ps
        for p in range(self.n_processing):
            types += [PROCESSING] * ps
            funcs += [self.n_judgment + p] * ps
        arity = [1] + [self.output_count(self.functions[f]) for f in funcs[1:]]
        out = (np.array(types, dtype=np.int8), np.array(funcs, dtype=np.int16),
               np.array(arity, dtype=np.int32))
        for a in out:
            a.setflags(write=False)
        return out

    @cached_property
    def branch_mask(self) -> np.ndarray:
        """Boolean (N, B) mask of the branch slots that exist."""
        arity = self.layout[2]
        mask = np.arange(self.max_branches)[None, :] < arity[:, None]
        mask.setflags(write=False)
        return mask


class BranchId(NamedTuple):
    node_index: int
    branch_index: int


@dataclass(frozen=True)
class Branch:
    target: int
    transition_delay: int = 0


@dataclass(frozen=True)
class NodeGene:
    node_type: int
    function_id: str | None
    node_delay: int = 0
    branches: tuple[Branch, ...] = ()


@dataclass(frozen=True)
class Cursor:
    current_node: int = 0


class TransitRecord:
    """Set of traversed branches, kept as a boolean (N, B) mask."""

    __slots__ = ("mask",)

    def __init__(self, shape_or_mask):
        if isinstance(shape_or_mask, np.ndarray):
            self.mask = shape_or_mask.astype(bool, copy=False)
        else:
            self.mask = np.zeros(shape_or_mask, dtype=bool)

    @classmethod
    def for_individual(cls, individual: Individual) -> TransitRecord:
        return cls(individual.targets.shape)

    @classmethod
    def from_branches(cls, shape, branches: Iterable[tuple[int, int]]) -> TransitRecord:
        rec = cls(shape)
        for node, branch in branches:
            rec.mask[node, branch] = True
        return rec

    def add(self, node_index: int, branch_index: int) -> None:
        self.mask[node_index, branch_index] = True

    @property
    def transited(self) -> frozenset[BranchId]:
        return frozenset(BranchId(int(i), int(j)) for i, j in zip(*np.nonzero(self.mask)))

    def __or__(self, other: TransitRecord) -> TransitRecord:
        return TransitRecord(self.mask | other.mask)

    def __contains__(self, branch) -> bool:
        return bool(self.mask[branch[0], branch[1]])

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, TransitRecord) and np.array_equal(self.mask, other.mask)

    def copy(self) -> TransitRecord:
        return TransitRecord(self.mask.copy())

    def __repr__(self):
        return f"TransitRecord({sorted(self.transited)})"


@dataclass(eq=False)
class Individual:
    library: NodeLibrary
    targets: np.ndarray
    node_types: np.ndarray = field(default=None)
    functions: np.ndarray = field(default=None)
    node_delays: np.ndarray = field(default=None)
    branch_delays: np.ndarray = field(default=None)

    def __post_init__(self):
        types, funcs, _ = self.library.layout
        if self.node_types is None:
            self.node_types = types
        if self.functions is None:
            self.functions = funcs
        if self.node_delays is None:
            self.node_delays = _zeros(len(self.node_types))
        if self.branch_delays is None:
            self.branch_delays = _zeros(self.targets.shape)

    def __len__(self) -> int:
        return len(self.node_types)

    def copy(self) -> Individual:
        # layout and delay arrays are never mutated by the operators
        return Individual(self.library, self.targets.copy(), self.node_types,
                          self.functions, self.node_delays, self.branch_delays)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Individual):
            return NotImplemented
        return (self.library == other.library
                and all(np.array_equal(getattr(self, a), getattr(other, a))
                        for a in ("node_types", "functions", "targets",
                                  "node_delays", "branch_delays")))

    def function_name(self, node_index: int) -> str | None:
        f = int(self.functions[node_index])
        return None if f < 0 else self.library.functions[f]

    def branch_count(self, node_index: int) -> int:
        return int((self.targets[node_index] != NO_BRANCH).sum())

    @property
    def nodes(self) -> list[NodeGene]:
        out = []
        for i in range(len(self)):
            branches = tuple(Branch(int(t), int(d))
                             for t, d in zip(self.targets[i], self.branch_delays[i])
                             if t != NO_BRANCH)
            out.append(NodeGene(int(self.node_types[i]), self.function_name(i),
                                int(self.node_delays[i]), branches))
        return out

    @classmethod
    def from_nodes(cls, nodes: Sequence[NodeGene], library: NodeLibrary) -> Individual:
        width = max([library.max_branches] + [len(n.branches) for n in nodes])
        n = len(nodes)
        targets = np.full((n, width), NO_BRANCH, dtype=np.int32)
        bdelay = np.zeros((n, width), dtype=np.int32)
        types = np.empty(n, dtype=np.int8)
        funcs = np.empty(n, dtype=np.int16)
        ndelay = np.empty(n, dtype=np.int32)
        for i, node in enumerate(nodes):
            types[i] = node.node_type
            if node.function_id is None:
                funcs[i] = -1
            else:
                try:
                    funcs[i] = library.function_index(node.function_id)
                except ValueError:
                    raise StructureError(f"node {i}: unknown function {node.function_id!r}") from None
            ndelay[i] = node.node_delay
            for j, br in enumerate(node.branches):
                targets[i, j] = br.target
                bdelay[i, j] = br.transition_delay
        return cls(library, targets, types, funcs, ndelay, bdelay)


def _zeros(shape) -> np.ndarray:
    z = np.zeros(shape, dtype=np.int32)
    z.setflags(write=False)
    return z


def random_individual(library: NodeLibrary, rng: np.random.Generator) -> Individual:
    n = library.n_nodes
    draws = rng.integers(1, n, size=(n, library.max_branches), dtype=np.int32)
    targets = np.where(library.branch_mask, draws, NO_BRANCH).astype(np.int32)
    return Individual(library, targets)


def validate(individual: Individual, library: NodeLibrary) -> list[str]:
    """Return a description of every structural violation (empty when valid)."""
    problems = []
    types = np.asarray(individual.node_types)
    funcs = np.asarray(individual.functions)
    targets = np.asarray(individual.targets)
    n = len(types)

    if n != library.n_nodes:
        problems.append(f"node count {n} != expected {library.n_nodes}")
    if targets.ndim != 2 or targets.shape[0] != n:
        problems.append(f"targets shape {targets.shape} does not match {n} nodes")
        return problems
    starts = np.flatnonzero(types == START)
    if len(starts) != 1 or (n and types[0] != START):
        problems.append(f"expected exactly one start node at index 0, found {starts.tolist()}")

    counts = np.bincount(funcs[funcs >= 0], minlength=len(library.functions))
    if funcs.size and (funcs.max(initial=-1) >= len(library.functions) or (funcs[types != START] < 0).any()):
        problems.append("function index out of range")
    else:
        for f, name in enumerate(library.functions):
            if counts[f] != library.program_size:
                problems.append(f"function {name} has {counts[f]} instances, expected {library.program_size}")
        expected_type = np.where(funcs < library.n_judgment, JUDGMENT, PROCESSING)
        bad_type = np.flatnonzero((types != START) & (types != expected_type))
        for i in bad_type:
            problems.append(f"node {i}: type {types[i]} does not match function {library.functions[funcs[i]]}")

    by_function = np.array([library.output_count(f) for f in library.functions] + [1])
    arity = by_function[np.clip(funcs, -1, len(library.functions) - 1)]
    present = targets != NO_BRANCH
    want = np.arange(targets.shape[1])[None, :] < arity[:, None]
    for i in np.flatnonzero((present != want).any(axis=1)):
        problems.append(f"node {i}: {int(present[i].sum())} branches, function expects {int(arity[i])}")
    bad = present & ((targets < 1) | (targets >= n))
    for i, j in zip(*np.nonzero(bad)):
        t = int(targets[i, j])
        what = "targets the start node" if t == 0 else f"target {t} out of range"
        problems.append(f"branch {BranchId(int(i), int(j))} {what}")
    return problems


def advance(individual: Individual, cursor: Cursor, judge: Callable[[str], int],
            record: TransitRecord) -> tuple[str, Cursor, TransitRecord]:
    """Walk from ``cursor`` to the next processing node.

    ``record`` is updated in place and returned. A walk that meets more
    judgment nodes than the graph has nodes yields the library's idle
    function and leaves the cursor on the judgment node where it stopped.
    """
    lib = individual.library
    types, targets = individual.node_types, individual.targets
    node = cursor.current_node
    if types[node] == START:
        record.add(node, 0)
        node = int(targets[node, 0])
    visits = 0
    limit = len(individual)
    while types[node] == JUDGMENT:
        if visits == limit:
            return lib.idle_function, Cursor(node), record
        name = individual.function_name(node)
        b = judge(name)
        arity = lib.output_count(name)
        if not 0 <= b < arity:
            raise AssertionError(f"judge returned branch {b} for {name} with {arity} outputs")
        record.add(node, b)
        node = int(targets[node, b])
        visits += 1
    record.add(node, 0)
    return individual.function_name(node), Cursor(int(targets[node, 0])), record


# text format: "index NT NF d | target:dij target:dij ..."

def dumps_individual(individual: Individual) -> str:
    lines = []
    for i in range(len(individual)):
        name = individual.function_name(i) or "-"
        branches = " ".join(f"{int(t)}:{int(d)}" for t, d in
                            zip(individual.targets[i], individual.branch_delays[i]) if t != NO_BRANCH)
        lines.append(f"{i} {int(individual.node_types[i])} {name} {int(individual.node_delays[i])} | {branches}".rstrip())
    return "\n".join(lines) + "\n"


def loads_individual(text: str, library: NodeLibrary) -> Individual:
    nodes = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            head, _, tail = line.partition("|")
            idx, nt, nf, d = head.split()
            if int(idx) != len(nodes):
                raise StructureError(f"line {lineno}: expected node index {len(nodes)}, got {idx}")
            branches = tuple(Branch(int(t), int(dij)) for t, dij in
                             (tok.split(":") for tok in tail.split()))
        except (ValueError, TypeError) as exc:
            if isinstance(exc, StructureError):
                raise
            raise StructureError(f"line {lineno}: malformed node line {line!r}") from None
        nodes.append(NodeGene(int(nt), None if nf == "-" else nf, int(d), branches))
    if not nodes:
        raise StructureError("empty individual")
    return Individual.from_nodes(nodes, library)
