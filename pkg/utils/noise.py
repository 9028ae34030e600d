"""
Seeded random substreams.

Every stochastic draw goes through a counter-based Philox generator keyed by
(seed, purpose tag, index), so trial i of a sweep sees the same numbers whether
the sweep runs serially or split across worker processes.
"""

import zlib

import numpy as np


def _tag_key(tag):
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    return zlib.crc32(str(tag).encode("utf-8"))


def substream(seed, tag, *index):
    """
    Independent generator for one purpose and one trial.

    Args:
        seed: Non-negative integer experiment seed
        tag: Purpose label (e.g. "noise", "signal") or integer
        *index: Further non-negative integers (trial number, grid point, ...)

    Returns:
        numpy.random.Generator backed by Philox
    """
    entropy = [int(seed), _tag_key(tag)] + [int(i) for i in index]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def gaussian_noise(N, seed, *index):
    """Standard normal window of length N for trial `index`."""
    return substream(seed, "noise", *index).standard_normal(int(N))
