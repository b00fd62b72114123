"""
Photon emission and detection records

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Time tags are kept as integer picoseconds, the resolution of the tag file
format, so that a simulated record and its file round trip are identical.
Emission is an inhomogeneous Poisson process whose rate follows the
fluorescence profile at the instantaneous detuning, gated by a telegraph
blinking process, and realized by thinning a homogeneous candidate stream.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from src.core.emitter import voigt_rate_at
from src.core.errors import ValidationError
from src.simulation.rng import as_generator

logger = logging.getLogger(__name__)

PS_PER_S = 1_000_000_000_000
CHUNK_SAMPLES = 1 << 20


def seconds_to_ps(t):
    return np.rint(np.asarray(t, dtype=float) * PS_PER_S).astype(np.int64)


@dataclass(frozen=True, eq=False)
class PhotonTags:
    """Time-ordered detection events.

    Attributes:
        times_ps: event times in picoseconds, non-decreasing
        channels: detector index of each event
        duration_ps: length of the record in picoseconds
        n_channels: number of detector channels (1 or 2)
        digest: digest of the configuration that produced the record
    """

    times_ps: np.ndarray
    channels: np.ndarray
    duration_ps: int
    n_channels: int = 1
    digest: str = ""

    def __post_init__(self):
        times = np.ascontiguousarray(self.times_ps, dtype=np.int64)
        channels = np.ascontiguousarray(self.channels, dtype=np.uint8)
        object.__setattr__(self, "times_ps", times)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "duration_ps", int(self.duration_ps))
        if times.shape != channels.shape or times.ndim != 1:
            raise ValidationError("times and channels must be 1-d arrays of equal length")
        if self.duration_ps <= 0:
            raise ValidationError(f"duration must be > 0, got {self.duration_ps} ps")
        if self.n_channels not in (1, 2):
            raise ValidationError(f"channel count must be 1 or 2, got {self.n_channels}")
        if times.size:
            if times[0] < 0 or times[-1] > self.duration_ps:
                raise ValidationError("time tags must lie within [0, duration]")
            if np.any(np.diff(times) < 0):
                raise ValidationError("time tags must be sorted")
            if channels.max() >= self.n_channels:
                raise ValidationError(f"channel index {channels.max()} out of range for {self.n_channels} channels")
            for ch in range(self.n_channels):
                if np.any(np.diff(times[channels == ch]) <= 0):
                    raise ValidationError(f"time tags of channel {ch} are not strictly increasing")

    def __len__(self):
        return int(self.times_ps.size)

    @property
    def times(self):
        return self.times_ps / PS_PER_S

    @property
    def duration(self):
        return self.duration_ps / PS_PER_S

    @property
    def mean_rate(self):
        return len(self) / self.duration

    def channel_times(self, channel):
        return self.times[self.channels == channel]

    def identical_to(self, other):
        return (
            self.duration_ps == other.duration_ps
            and self.n_channels == other.n_channels
            and np.array_equal(self.times_ps, other.times_ps)
            and np.array_equal(self.channels, other.channels)
        )


@dataclass(frozen=True, eq=False)
class TimeTrace:
    bin_width: float
    counts: np.ndarray
    channel: object = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if not self.bin_width > 0:
            raise ValidationError(f"bin width must be > 0, got {self.bin_width}")
        if counts.ndim != 1:
            raise ValidationError("counts must be 1-d")
        if counts.size and (counts.min() < 0 or not np.issubdtype(counts.dtype, np.integer)):
            raise ValidationError("counts must be non-negative integers")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    def __len__(self):
        return int(self.counts.size)

    @property
    def duration(self):
        return self.counts.size * self.bin_width

    @property
    def bin_starts(self):
        return np.arange(self.counts.size) * self.bin_width

    @property
    def mean_rate(self):
        return float(self.counts.mean()) / self.bin_width if self.counts.size else 0.0


@dataclass(frozen=True)
class BlinkingModel:
    """Telegraph on/off switching of the emission.

    on_fraction is the stationary probability of the bright state and
    correlation_time the relaxation time 1 / (k_on + k_off).
    """

    on_fraction: float = 0.1
    correlation_time: float = 100e-9

    def __post_init__(self):
        if not 0.0 < self.on_fraction <= 1.0:
            raise ValidationError(f"on_fraction must lie in (0, 1], got {self.on_fraction}")
        if not self.correlation_time > 0:
            raise ValidationError(f"correlation_time must be > 0, got {self.correlation_time}")

    @property
    def k_off(self):
        return (1.0 - self.on_fraction) / self.correlation_time

    @property
    def k_on(self):
        return self.on_fraction / self.correlation_time

    @property
    def always_on(self):
        return self.on_fraction == 1.0


@dataclass(frozen=True, eq=False)
class TelegraphRealization:
    initially_on: bool
    switch_times: np.ndarray = field(default_factory=lambda: np.empty(0))

    def state_at(self, times):
        flips = np.searchsorted(self.switch_times, np.asarray(times, dtype=float), side="right")
        return (flips % 2 == 0) == self.initially_on


def telegraph_switch_times(blinking, duration, rng=None, seed=0):
    """Draw one realization of the blinking process on [0, duration]."""
    rng = as_generator(rng, seed, "blinking")
    on = bool(rng.random() < blinking.on_fraction)
    if blinking.always_on:
        return TelegraphRealization(initially_on=True)
    mean_cycle = 1.0 / blinking.k_off + 1.0 / blinking.k_on
    chunk = int(1.2 * duration / mean_cycle) + 64
    pieces, t_end, state = [], 0.0, on
    while t_end <= duration:
        on_dwell = rng.exponential(1.0 / blinking.k_off, chunk)
        off_dwell = rng.exponential(1.0 / blinking.k_on, chunk)
        dwell = np.empty(2 * chunk)
        first, second = (on_dwell, off_dwell) if state else (off_dwell, on_dwell)
        dwell[0::2] = first
        dwell[1::2] = second
        times = t_end + np.cumsum(dwell)
        pieces.append(times)
        t_end = times[-1]
    switches = np.concatenate(pieces)
    switches = switches[switches <= duration]
    logger.debug("blinking: %d switches over %.4g s", switches.size, duration)
    return TelegraphRealization(initially_on=on, switch_times=switches)


def generate_photons(detuning_shift, dt, emitter, drive, efficiency, blinking, seed=0, rngs=None):
    """Ideal single-channel detection record.

    Args:
        detuning_shift: emitter detuning shift delta(t) sampled every dt, rad/s
        dt: sample spacing of detuning_shift, s
        emitter: Emitter
        drive: DriveCondition at rest
        efficiency: overall detection efficiency
        blinking: BlinkingModel
        seed: simulation seed, used when rngs is not given
        rngs: optional (blinking, thinning) generators

    Returns:
        PhotonTags with one channel covering len(detuning_shift) * dt.
    """
    if not 0.0 < efficiency <= 1.0:
        raise ValidationError(f"efficiency must lie in (0, 1], got {efficiency}")
    shift = np.asarray(detuning_shift, dtype=float)
    if shift.ndim != 1 or shift.size == 0:
        raise ValidationError("detuning trace must be a non-empty 1-d array")
    blink_rng, thin_rng = rngs if rngs is not None else (None, None)
    blink_rng = as_generator(blink_rng, seed, "blinking")
    thin_rng = as_generator(thin_rng, seed, "thinning")

    duration = shift.size * dt
    telegraph = telegraph_switch_times(blinking, duration, rng=blink_rng)
    bound = efficiency * float(voigt_rate_at(emitter, drive.omega_r, 0.0))
    if bound == 0.0:
        return PhotonTags(np.empty(0, np.int64), np.empty(0, np.uint8), seconds_to_ps(duration))

    kept = []
    for start in range(0, shift.size, CHUNK_SAMPLES):
        stop = min(start + CHUNK_SAMPLES, shift.size)
        t0, t1 = start * dt, stop * dt
        n = thin_rng.poisson(bound * (t1 - t0))
        t = t0 + np.sort(thin_rng.random(n)) * (t1 - t0)
        accept = thin_rng.random(n) * bound
        idx = np.minimum((t / dt).astype(np.int64), shift.size - 1)
        rate = efficiency * voigt_rate_at(emitter, drive.omega_r, drive.detuning + shift[idx])
        keep = accept < rate
        if not blinking.always_on:
            keep &= telegraph.state_at(t)
        kept.append(t[keep])
    times_ps = np.unique(seconds_to_ps(np.concatenate(kept)))
    logger.debug("generated %d photons (%.4g /s)", times_ps.size, times_ps.size / duration)
    return PhotonTags(times_ps, np.zeros(times_ps.size, np.uint8), seconds_to_ps(duration))


def bin_tags(tags, bin_width, channel=None):
    """Count events in consecutive full bins; a partial bin at the end is dropped."""
    bin_ps = int(round(bin_width * PS_PER_S))
    if bin_ps <= 0:
        raise ValidationError(f"bin width must be at least 1 ps, got {bin_width}")
    n_bins = tags.duration_ps // bin_ps
    if n_bins == 0:
        raise ValidationError(f"record of {tags.duration:.4g} s is shorter than one {bin_width:.4g} s bin")
    times = tags.times_ps if channel is None else tags.times_ps[tags.channels == channel]
    index = times // bin_ps
    index = index[index < n_bins]
    if index.size < times.size:
        logger.debug("dropped %d events of the partial last bin", times.size - index.size)
    counts = np.bincount(index, minlength=n_bins)
    return TimeTrace(bin_width=bin_ps / PS_PER_S, counts=counts, channel=channel)
