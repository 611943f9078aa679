"""Named, independent random streams derived from one master seed.

A stream is identified by a key path such as ``(seed, generation, "xover", 7)``.
Each key is folded into a 64-bit state with SplitMix64::

    h = splitmix64(seed)
    for key in keys:
        h = splitmix64(h ^ key64)

where string keys are first hashed with 64-bit FNV-1a. The final ``h`` seeds
a PCG64 generator. Streams therefore depend only on their key path, never on
the order in which they are requested, which keeps parallel evaluation
bit-reproducible.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def stream_seed(master_seed: int, *keys: int | str) -> int:
    h = splitmix64(master_seed & MASK64)
    for key in keys:
        k = fnv1a64(key) if isinstance(key, str) else key & MASK64
        h = splitmix64(h ^ k)
    return h


def stream(master_seed: int, *keys: int | str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_seed(master_seed, *keys)))
