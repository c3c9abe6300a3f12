"""Reproducible random streams derived from a master seed and a named path.

Streams are Philox (counter-based) generators keyed by a
:class:`numpy.random.SeedSequence` whose spawn key encodes the path, so
``stream(seed, "chain/3")`` is the same bit stream on every run and
independent of ``stream(seed, "chain/4")`` or ``stream(seed, "null/0")``.
"""

import zlib

import numpy as np


def path_key(path):
    """Spawn key for a ``/``-separated path: integers stay, names are CRC32-hashed."""
    key = []
    for part in str(path).split("/"):
        if not part:
            continue
        key.append(int(part) if part.isdigit() else zlib.crc32(part.encode()))
    return tuple(key)


def stream(seed, path=""):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    ss = np.random.SeedSequence(seed, spawn_key=path_key(path))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng, path=""):
    """Accept a Generator, or a seed (turned into ``stream(seed, path)``)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(rng, path)
