import numpy as np
import pytest

from sbgnp.core import NodeLibrary
from sbgnp.tileworld import parse_map, tileworld_library


@pytest.fixture
def lib():
    return tileworld_library(3)


@pytest.fixture
def lib1():
    return tileworld_library(1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def grid(*rows):
    return parse_map("\n".join(rows) + "\n")


def toy_library(outputs=(2, 3), processing=("A", "B"), ps=1):
    judgments = tuple((f"J{i}", k) for i, k in enumerate(outputs))
    return NodeLibrary(judgments, processing, ps)


def random_map(rng, size=8):
    n_obs, n_tiles, n_holes, n_agents = (int(v) for v in rng.integers(1, [10, 5, 5, 4]))
    cells = rng.permutation(size * size)
    kinds = (["#"] * n_obs + ["T"] * n_tiles + ["H"] * n_holes
             + [rng.choice(list("^>v<")) for _ in range(n_agents)])
    chars = ["."] * (size * size)
    for c, k in zip(cells, kinds):
        chars[c] = k
    return parse_map("\n".join("".join(chars[r * size:(r + 1) * size]) for r in range(size)))


def check_invariants(w, g):
    tiles = [t for t in w.tiles if t is not None]
    agents = [p for p, _ in w.agents]
    assert len(tiles) + w.dropped == len(g.tiles)
    assert len(w.holes) + w.dropped == len(g.holes)
    occupied = tiles + agents + list(w.holes) + list(w.obstacles)
    assert len(set(occupied)) == len(occupied)
    assert all(w.inside(p) for p in occupied)
