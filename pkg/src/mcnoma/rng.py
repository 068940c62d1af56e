"""Seedable, splittable random streams.

Every stochastic routine in the package takes an explicit
``numpy.random.Generator``. Streams are derived from a ``SeedSequence`` so
that independent jobs (realizations, sample blocks) get statistically
independent generators whose contents do not depend on execution order.
"""

from __future__ import annotations

import numpy as np

BIT_GENERATOR = "PCG64"


def make_rng(seed: int | np.random.SeedSequence | None) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def child_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    """Return the stream addressed by ``key`` under ``seed``.

    ``child_sequence(s, r)`` is identical to the ``r``-th entry of
    ``SeedSequence(s).spawn(r + 1)``, but can be built directly without
    spawning all earlier siblings.
    """
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))


def child_rng(seed: int, *key: int) -> np.random.Generator:
    return make_rng(child_sequence(seed, *key))


def split(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Split ``n`` independent generators off ``rng``.

    Advances ``rng`` by one draw so repeated calls give fresh children.
    """
    entropy = int(rng.integers(0, 2**63 - 1))
    return [make_rng(s) for s in np.random.SeedSequence(entropy).spawn(n)]
