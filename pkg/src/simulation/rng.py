"""
Random substreams

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Every physical process draws from its own counter-based Philox generator,
keyed by (seed, process, index) through SeedSequence spawn keys, so that
switching one process on or off never shifts the draws of another.
"""

import logging

import numpy as np

from src.core.errors import ValidationError

logger = logging.getLogger(__name__)

STREAMS = {
    "mechanics": 0,
    "blinking": 1,
    "thinning": 2,
    "routing": 3,
    "jitter": 4,
}

MAX_SEED = 2 ** 64


def validate_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValidationError(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < MAX_SEED:
        raise ValidationError(f"seed must lie in [0, 2**64), got {seed}")
    return int(seed)


class RandomStreams:
    """Factory of independent generators for one simulation seed."""

    def __init__(self, seed):
        self.seed = validate_seed(seed)

    def generator(self, name, *index):
        if name not in STREAMS:
            raise ValidationError(f"unknown random stream {name!r}, expected one of {sorted(STREAMS)}")
        key = (STREAMS[name],) + tuple(int(i) for i in index)
        logger.debug("stream %s%s for seed %d", name, list(index) or "", self.seed)
        sequence = np.random.SeedSequence(self.seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(sequence))


def as_generator(rng, seed, name, *index):
    """Use rng when given, otherwise the named substream of seed."""
    if rng is not None:
        return rng
    return RandomStreams(seed).generator(name, *index)
