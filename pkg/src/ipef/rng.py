"""Splittable counter-based random streams.

Every stream is identified by a root seed plus a tuple of integer keys.
Children are addressed, never consumed, so the draws attached to a given
key path are the same no matter which thread (or in which order) asks for
them.  The bit generator is Philox, which is counter-based.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

SEED_ENV = "IPEF_SEED"


@dataclass(frozen=True)
class RngStream:
    seed: int
    key: tuple[int, ...] = field(default=())

    def child(self, *keys: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))

    # convenience pass-throughs; each call starts the stream afresh
    def random(self, size=None) -> np.ndarray:
        return self.generator().random(size)

    def normal(self, size=None) -> np.ndarray:
        return self.generator().standard_normal(size)


def as_stream(rng: "RngStream | int | None") -> RngStream:
    """Coerce a seed, stream or ``None`` into an :class:`RngStream`.

    ``None`` falls back to the ``IPEF_SEED`` environment variable and then 0.
    """
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        rng = int(os.environ.get(SEED_ENV, "0"))
    return RngStream(int(rng))


def blocked_draws(fn, size: int, rng: RngStream, block: int, threads: int | None = 1) -> np.ndarray:
    """Run ``fn(generator, count)`` over fixed-size blocks of draw indices.

    Block ``b`` always covers draws ``[b*block, (b+1)*block)`` and always
    uses substream ``rng.child(b)``; the concatenated result therefore does
    not depend on ``threads``.
    """
    if size < 0:
        raise ValueError("size must be nonnegative")
    block = max(1, int(block))
    counts = [min(block, size - start) for start in range(0, size, block)]

    def run(b: int) -> np.ndarray:
        return np.asarray(fn(rng.child(b).generator(), counts[b]))

    if threads is None:
        threads = os.cpu_count() or 1
    if threads <= 1 or len(counts) <= 1:
        parts = [run(b) for b in range(len(counts))]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(counts))))
    if not parts:
        return np.empty(0)
    return np.concatenate(parts, axis=0)
