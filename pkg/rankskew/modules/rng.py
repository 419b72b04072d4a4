"""Counter-based Gaussian streams.

Each stream is a Philox generator keyed by (seed, stream_id, *key) through
`SeedSequence.spawn_key`, so any chunk of paths can be regenerated on its own
and the output never depends on which worker drew it.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

# paths per stream; recorded in every PathBatch
CHUNK_SIZE = 1024


@dataclass(frozen=True)
class RngStream:
    """Reproducible source of normals for one chunk of paths.
    Args:
        seed (int): Master seed (64-bit, non-negative).
        stream_id (int): Chunk index.
        key (tuple): Sub-stream path, e.g. (asset, factor).
    """
    seed: int
    stream_id: int
    key: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError(f'seed and stream_id must be non-negative, '
                             f'got ({self.seed}, {self.stream_id})')

    def child(self, *key):
        """Sub-stream under this one; independent of its siblings."""
        return RngStream(self.seed, self.stream_id, self.key + tuple(int(k) for k in key))

    def generator(self):
        seq = SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,) + self.key)
        return Generator(Philox(seq))


def standard_normals(stream, count):
    """Draw `count` i.i.d. N(0, 1) samples from `stream`.
    Args:
        stream (RngStream): Source stream.
        count (int or tuple): Number of samples, or an array shape.
    Returns:
        z (np.ndarray): float64 samples, identical for identical streams.
    """
    shape = (count,) if np.isscalar(count) else tuple(count)
    if any(int(s) < 0 for s in shape):
        raise ValueError(f'count must be >= 0, got {count}')
    return stream.generator().standard_normal(shape)


def chunk_sizes(n_paths, chunk_size=CHUNK_SIZE):
    """Split `n_paths` into contiguous chunks; the last one may be short."""
    if n_paths < 1:
        raise ValueError(f'n_paths must be >= 1, got {n_paths}')
    full, rest = divmod(n_paths, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def child_seed(seed, index):
    """Seed for job `index` derived from a master seed (one per maturity)."""
    return int(SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])
