"""
Detector response

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Gaussian timing jitter, non-paralyzable dead time per channel and the
50/50 beam splitter of the Hanbury Brown-Twiss arrangement.
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.core.errors import ChannelCountError, ValidationError
from src.simulation.photons import PS_PER_S, PhotonTags
from src.simulation.rng import as_generator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectorModel:
    jitter_sigma: float = 500e-12
    dead_time: float = 100e-9
    channels: int = 1

    def __post_init__(self):
        if not self.jitter_sigma >= 0:
            raise ValidationError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        if not self.dead_time >= 0:
            raise ValidationError(f"dead_time must be >= 0, got {self.dead_time}")
        if self.channels not in (1, 2):
            raise ValidationError(f"channels must be 1 or 2, got {self.channels}")

    @property
    def cutoff_frequency(self):
        """Frequency above which the dead time suppresses count fluctuations, Hz."""
        return np.inf if self.dead_time == 0 else 1.0 / self.dead_time


def dead_time_filter(times_ps, dead_ps):
    """Mask of events kept by a non-paralyzable detector on one channel."""
    n = times_ps.size
    keep = np.ones(n, dtype=bool)
    if n < 2 or dead_ps <= 0:
        return keep
    gaps = np.diff(times_ps)
    # an event preceded by a long gap is always accepted
    big = np.concatenate(([True], gaps >= dead_ps))
    if big.all():
        return keep
    last_big = np.maximum.accumulate(np.where(big, np.arange(n), 0))
    last = -np.inf
    for i in np.flatnonzero(~big):
        last = max(last, times_ps[last_big[i]])
        if times_ps[i] - last < dead_ps:
            keep[i] = False
        else:
            last = times_ps[i]
    return keep


def apply_detector(tags, det, seed=0, rng=None):
    """Jitter every tag, re-sort, then apply the dead time channel by channel."""
    times = tags.times_ps
    channels = tags.channels
    if det.jitter_sigma > 0 and times.size:
        rng = as_generator(rng, seed, "jitter")
        jitter = np.rint(rng.standard_normal(times.size) * det.jitter_sigma * PS_PER_S).astype(np.int64)
        times = times + jitter
        inside = (times >= 0) & (times <= tags.duration_ps)
        times, channels = times[inside], channels[inside]
        order = np.lexsort((channels, times))
        times, channels = times[order], channels[order]
    keep = np.ones(times.size, dtype=bool)
    dead_ps = int(round(det.dead_time * PS_PER_S))
    for ch in range(tags.n_channels):
        sel = np.flatnonzero(channels == ch)
        ch_times = times[sel]
        # jitter can make two tags of a channel coincide
        unique = np.concatenate(([True], np.diff(ch_times) > 0))
        keep[sel] = unique & dead_time_filter(ch_times, dead_ps)
    logger.debug("detector kept %d of %d tags", int(keep.sum()), len(tags))
    return PhotonTags(times[keep], channels[keep], tags.duration_ps, tags.n_channels, tags.digest)


def hbt_split(tags, seed=0, rng=None):
    """Route each photon to one of two detectors with probability 1/2."""
    if tags.n_channels != 1:
        raise ChannelCountError(f"beam splitting needs a single-channel record, got {tags.n_channels} channels")
    rng = as_generator(rng, seed, "routing")
    route = (rng.random(len(tags)) < 0.5).astype(np.uint8)
    return PhotonTags(tags.times_ps, route, tags.duration_ps, 2, tags.digest)
