"""Reproducible random streams.

Every draw is addressed by ``(seed, tag, index)``.  Each address keys its own
Philox counter-based generator, so a sample does not depend on how many other
samples were drawn before it or on which thread drew it.  Normals come from
the Box-Muller transform of the uniform stream.
"""
from __future__ import annotations

import zlib

import numpy as np

TAGS = ("overkill", "load", "noise-norm")


def _tag_code(tag: str) -> int:
    return zlib.crc32(tag.encode("ascii"))


def substream(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, _tag_code(tag), int(index)])
    return np.random.Generator(np.random.Philox(ss))


def box_muller(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Pairs of uniforms in (0, 1] x [0, 1) -> pairs of independent normals."""
    r = np.sqrt(-2.0 * np.log(u1))
    return np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])


def standard_normals(seed: int, tag: str, index: int, size) -> np.ndarray:
    shape = (size,) if np.isscalar(size) else tuple(size)
    count = int(np.prod(shape))
    half = (count + 1) // 2
    rng = substream(seed, tag, index)
    u = rng.random(2 * half)
    z = box_muller(1.0 - u[:half], u[half:])
    return z[:count].reshape(shape)
