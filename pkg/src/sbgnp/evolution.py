"""Generational evolution of GNP groups: the four algorithm variants.

A *group* is the unit of fitness and selection. Shared-graph variants hold one
individual that every agent runs; per-agent variants hold one individual per
agent. Simplified operators only touch branches that were transited by at
least one parent during its last episode.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Individual, NodeLibrary, TransitRecord, random_individual, validate
from .rng import stream
from .tileworld import (ConfigurationError, EpisodeResult, FitnessWeights, GridMap, Graphs,
                        fitness, run_episode, tileworld_library)


class Operators(enum.Enum):
    UNIFORM = "uniform"
    SIMPLIFIED = "simplified"


class Variant(enum.Enum):
    GNP = "gnp"
    GNP_SIMPLIFIED = "gnp-simplified"
    SBGNP = "sbgnp"
    PROPOSED = "proposed"

    @property
    def graphs(self) -> Graphs:
        return Graphs.PER_AGENT if self in (Variant.SBGNP, Variant.PROPOSED) else Graphs.SHARED

    @property
    def operators(self) -> Operators:
        if self in (Variant.GNP_SIMPLIFIED, Variant.PROPOSED):
            return Operators.SIMPLIFIED
        return Operators.UNIFORM

    @property
    def label(self) -> str:
        return {"gnp": "GNP", "gnp-simplified": "GNP_simplified",
                "sbgnp": "SB-GNP", "proposed": "Proposed"}[self.value]

    @classmethod
    def of(cls, graphs: Graphs, operators: Operators) -> Variant:
        return next(v for v in cls if v.graphs is graphs and v.operators is operators)


@dataclass(frozen=True)
class EvolutionConfig:
    variant: Variant = Variant.PROPOSED
    num_agents: int = 3
    population_size: int = 100
    group_count: int | None = None
    elite_count: int = 2
    crossover_prob: float = 0.4
    mutation_prob: float = 0.01
    tournament_size: int = 3
    generations: int = 1000
    program_size: int = 3
    initial_steps: int = 60
    weights: FitnessWeights = FitnessWeights()
    library: NodeLibrary | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.library is None:
            object.__setattr__(self, "library", tileworld_library(self.program_size))
        if self.group_count is None:
            # per-agent groups split the individual budget between agents
            n = self.population_size
            if self.variant.graphs is Graphs.PER_AGENT:
                n //= self.num_agents
            object.__setattr__(self, "group_count", n)
        self.check()

    def check(self) -> None:
        if self.num_agents < 1:
            raise ConfigurationError("num_agents must be >= 1")
        if self.group_count < 1:
            raise ConfigurationError("group_count must be >= 1")
        if not 0 <= self.elite_count < self.group_count:
            raise ConfigurationError("elite_count must satisfy 0 <= E < group_count")
        if not 1 <= self.tournament_size <= self.group_count:
            raise ConfigurationError("tournament_size must be in [1, group_count]")
        for name in ("crossover_prob", "mutation_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1]")
        if self.generations < 0:
            raise ConfigurationError("generations must be >= 0")
        if self.initial_steps < 1:
            raise ConfigurationError("initial_steps must be >= 1")

    @property
    def members_per_group(self) -> int:
        return self.num_agents if self.variant.graphs is Graphs.PER_AGENT else 1


@dataclass
class Group:
    members: list[Individual]
    fitness: float | None = None
    transits: list[TransitRecord] | None = None
    result: EpisodeResult | None = field(default=None, repr=False)

    def copy(self) -> Group:
        return Group([m.copy() for m in self.members], self.fitness, self.transits, self.result)


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best: float
    mean: float
    evaluations: int


@dataclass
class RunResult:
    stats: list[GenerationStats]
    best: Group
    best_result: EpisodeResult
    violations: int = 0

    @property
    def best_so_far(self) -> list[tuple[int, float]]:
        out, top = [], -math.inf
        for s in self.stats:
            top = max(top, s.best)
            out.append((s.evaluations, top))
        return out


def init_population(config: EvolutionConfig, seed: int) -> list[Group]:
    groups = []
    for g in range(config.group_count):
        rng = stream(seed, "init", g)
        groups.append(Group([random_individual(config.library, rng)
                             for _ in range(config.members_per_group)]))
    return groups


def evaluate_group(group: Group, grid: GridMap, config: EvolutionConfig) -> tuple[float, EpisodeResult]:
    result = run_episode(group.members, config.variant.graphs, grid, config.initial_steps)
    return fitness(result, config.weights), result


def _evaluate_many(args):
    members, grid, config = args
    return evaluate_group(Group(members), grid, config)


def evaluate_population(population: list[Group], grid: GridMap, config: EvolutionConfig,
                        generation: int = 0, evaluations_before: int = 0,
                        executor: Executor | None = None) -> tuple[list[Group], GenerationStats]:
    if executor is None:
        outcomes = [evaluate_group(g, grid, config) for g in population]
    else:
        jobs = [(g.members, grid, config) for g in population]
        chunk = max(1, len(jobs) // 16)
        outcomes = list(executor.map(_evaluate_many, jobs, chunksize=chunk))
    for group, (fit, result) in zip(population, outcomes):
        group.fitness = fit
        group.result = result
        group.transits = result.transit_records
    fits = [g.fitness for g in population]
    stats = GenerationStats(generation, max(fits), sum(fits) / len(fits),
                            evaluations_before + len(population))
    return population, stats


def tournament_select(fitnesses: Sequence[float], tournament_size: int,
                      rng: np.random.Generator) -> int:
    contestants = rng.integers(0, len(fitnesses), size=tournament_size)
    return min(contestants.tolist(), key=lambda i: (-fitnesses[i], i))


def _eligible_mask(individual: Individual) -> np.ndarray:
    return individual.targets >= 0


def crossover(parent1: Group, parent2: Group, crossover_prob: float, mode: Operators,
              rng: np.random.Generator) -> tuple[Group, Group]:
    if len(parent1.members) != len(parent2.members):
        raise ConfigurationError("parents have different member counts")
    simplified = Operators(mode) is Operators.SIMPLIFIED
    if simplified and (parent1.transits is None or parent2.transits is None):
        raise ConfigurationError("simplified crossover needs evaluated parents")
    kids1, kids2 = [], []
    for s, (m1, m2) in enumerate(zip(parent1.members, parent2.members)):
        if m1.targets.shape != m2.targets.shape:
            raise ConfigurationError(f"member {s}: parents differ in shape")
        a, b = m1.copy(), m2.copy()
        draws = rng.random(a.targets.shape)
        swap = (draws < crossover_prob) & _eligible_mask(m1)
        if simplified:
            swap &= parent1.transits[s].mask | parent2.transits[s].mask
        a.targets[swap] = m2.targets[swap]
        b.targets[swap] = m1.targets[swap]
        kids1.append(a)
        kids2.append(b)
    return Group(kids1), Group(kids2)


def mutate(group: Group, mutation_prob: float, mode: Operators,
           eligible: Sequence[TransitRecord] | None, rng: np.random.Generator) -> Group:
    """Resample eligible branch targets, each with probability ``mutation_prob``.

    A mutated branch always moves to a different non-start node. In uniform
    mode ``eligible`` is ignored.
    """
    simplified = Operators(mode) is Operators.SIMPLIFIED
    members = []
    for s, ind in enumerate(group.members):
        child = ind.copy()
        t = child.targets
        n = len(child)
        draws = rng.random(t.shape)
        if n < 3:
            members.append(child)
            continue
        alt = rng.integers(1, n - 1, size=t.shape, dtype=np.int32)
        alt += alt >= t
        hit = (draws < mutation_prob) & (t >= 0)
        if simplified:
            hit &= eligible[s].mask
        t[hit] = alt[hit]
        members.append(child)
    return Group(members)


def elite_indices(population: Sequence[Group], count: int) -> list[int]:
    order = sorted(range(len(population)), key=lambda i: (-population[i].fitness, i))
    return order[:count]


def next_generation(population: list[Group], config: EvolutionConfig, seed: int,
                    generation: int) -> list[Group]:
    mode = config.variant.operators
    fits = [g.fitness for g in population]
    new = [population[i] for i in elite_indices(population, config.elite_count)]
    n_offspring = len(population) - config.elite_count
    for pair in range(math.ceil(n_offspring / 2)):
        srng = stream(seed, generation, "select", pair)
        p1 = population[tournament_select(fits, config.tournament_size, srng)]
        p2 = population[tournament_select(fits, config.tournament_size, srng)]
        kids = crossover(p1, p2, config.crossover_prob, mode,
                         stream(seed, generation, "xover", pair))
        eligible = None
        if mode is Operators.SIMPLIFIED:
            eligible = [a | b for a, b in zip(p1.transits, p2.transits)]
        for k, kid in enumerate(kids):
            index = 2 * pair + k
            if index >= n_offspring:
                break
            new.append(mutate(kid, config.mutation_prob, mode, eligible,
                              stream(seed, generation, "mutate", index)))
    return new


def structural_violations(population: Sequence[Group], library: NodeLibrary) -> int:
    return sum(len(validate(m, library)) for g in population for m in g.members)


def evolve(config: EvolutionConfig, grid: GridMap, master_seed: int, workers: int = 1,
           check_structure: bool = False) -> RunResult:
    if len(grid.agents) != config.num_agents:
        raise ConfigurationError(
            f"config has num_agents={config.num_agents}, map has {len(grid.agents)} agents")
    executor = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        population = init_population(config, master_seed)
        stats: list[GenerationStats] = []
        violations = 0
        evaluations = 0
        for generation in range(config.generations + 1):
            if check_structure:
                violations += structural_violations(population, config.library)
            population, gen_stats = evaluate_population(
                population, grid, config, generation, evaluations, executor)
            evaluations = gen_stats.evaluations
            stats.append(gen_stats)
            if generation < config.generations:
                population = next_generation(population, config, master_seed, generation)
    finally:
        if executor is not None:
            executor.shutdown()
    best = population[elite_indices(population, 1)[0]]
    return RunResult(stats, best, best.result, violations)
