"""Deterministic random-stream derivation.

Splitting rule: a consumer labelled by an integer path ``(master_seed, i, j,
...)`` draws from ``numpy.random.SeedSequence((master_seed, i, j, ...))``.
The hash in SeedSequence makes the streams independent, and the derivation
depends only on the labels, never on scheduling, so results are reproducible
at any parallelism degree.
"""

from __future__ import annotations

import numpy as np


def substream(*path: int) -> np.random.Generator:
    """Return the generator for the integer label path ``path``."""
    if not path:
        raise ValueError("substream needs at least the master seed")
    return np.random.default_rng(np.random.SeedSequence(tuple(int(p) for p in path)))


def as_generator(source: int | np.random.Generator) -> np.random.Generator:
    """Accept either a seed or an already-built generator."""
    if isinstance(source, np.random.Generator):
        return source
    return substream(int(source))
