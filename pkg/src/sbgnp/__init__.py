"""Genetic Network Programming with shared or per-agent graphs and uniform or
simplified operators, evaluated on a deterministic multi-agent Tileworld."""

from .core import (BranchId, Cursor, Individual, NodeLibrary, TransitRecord, advance,
                   random_individual, validate)
from .evolution import EvolutionConfig, Group, Operators, Variant, evolve
from .kernel import BACKEND as KERNEL_BACKEND
from .tileworld import (EpisodeResult, FitnessWeights, GridMap, Graphs, fitness, parse_map,
                        run_episode, tileworld_library)

__version__ = "0.1.0"
