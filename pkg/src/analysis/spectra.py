"""
Noise spectra and intensity correlations

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Two estimators of the normalized noise power spectral density (NPSD) of
the relative count fluctuations dN/<N>:
    - trace_npsd: Welch average over a binned time trace
    - npsd_from_g2: cosine transform of a two-detector correlation
      histogram, restricted to delays beyond the antibunching and
      blinking region
Both are one-sided, so the white shot-noise floor sits at 2/<N> and the
area under a peak equals the relative variance the mode contributes.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.fft import next_fast_len, rfft, rfftfreq
from scipy.signal import welch

from src.core.errors import ChannelCountError, ValidationError
from src.simulation.photons import PS_PER_S

logger = logging.getLogger(__name__)

MIN_WELCH_SEGMENTS = 8
DEFAULT_TAU_MIN = 0.25e-6
PLATEAU_FRACTION = 0.1


@dataclass(frozen=True, eq=False)
class Spectrum:
    """One-sided NPSD.

    Attributes:
        frequency: grid in Hz, strictly increasing
        density: NPSD in 1/Hz
        mean_rate: detected rate used for the normalization, 1/s
        resolution_bandwidth: frequency resolution, Hz
        n_averages: Welch segment count, None for correlation-derived spectra
    """

    frequency: np.ndarray
    density: np.ndarray
    mean_rate: float
    resolution_bandwidth: float
    n_averages: Optional[int] = None
    sidedness: str = "one-sided"

    def __post_init__(self):
        f = np.asarray(self.frequency, dtype=float)
        s = np.asarray(self.density, dtype=float)
        object.__setattr__(self, "frequency", f)
        object.__setattr__(self, "density", s)
        if f.ndim != 1 or f.shape != s.shape or f.size < 2:
            raise ValidationError("spectrum needs matching 1-d frequency and density arrays")
        if np.any(np.diff(f) <= 0):
            raise ValidationError("spectrum frequency grid must be strictly increasing")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValidationError("spectral density must be finite and >= 0")
        if not self.mean_rate > 0:
            raise ValidationError(f"mean rate must be > 0, got {self.mean_rate}")

    @property
    def shot_floor(self):
        return 2.0 / self.mean_rate

    @property
    def bin_width(self):
        return float(self.frequency[1] - self.frequency[0])

    def band(self, f_lo, f_hi):
        """Boolean mask of the bins with f_lo <= f <= f_hi."""
        return (self.frequency >= f_lo) & (self.frequency <= f_hi)


def welch_segments(n, nperseg):
    step = nperseg - nperseg // 2
    return (n - nperseg) // step + 1


def trace_npsd(trace, segment_length=None, window="hann"):
    """Welch NPSD of a binned trace.

    segment_length is given in bins and defaults to an eighth of the trace,
    which gives 15 half-overlapping segments.
    """
    counts = np.asarray(trace.counts, dtype=float)
    n = counts.size
    if n == 0:
        raise ValidationError("cannot estimate a spectrum from an empty trace")
    mean = counts.mean()
    if not mean > 0:
        raise ValidationError("trace has no counts, the NPSD normalization is undefined")
    nperseg = int(segment_length) if segment_length is not None else max(n // 8, 2)
    if nperseg < 2:
        raise ValidationError(f"segment length must be at least 2 bins, got {nperseg}")
    if n < 2 * nperseg:
        raise ValidationError(f"trace of {n} bins is shorter than two segments of {nperseg} bins")
    n_avg = welch_segments(n, nperseg)
    if n_avg < MIN_WELCH_SEGMENTS:
        logger.warning("only %d Welch segments, the spectrum will be noisy", n_avg)

    fs = 1.0 / trace.bin_width
    freq, psd = welch(
        counts / mean - 1.0, fs=fs, window=window, nperseg=nperseg,
        noverlap=nperseg // 2, detrend="constant", scaling="density", return_onesided=True,
    )
    rate = mean / trace.bin_width
    logger.debug("trace NPSD: %d segments, rbw %.4g Hz, shot floor %.4g /Hz", n_avg, fs / nperseg, 2.0 / rate)
    return Spectrum(freq, np.maximum(psd, 0.0), rate, fs / nperseg, n_averages=n_avg)


@dataclass(frozen=True, eq=False)
class G2Table:
    """Normalized cross-correlation histogram, symmetric in tau."""

    tau: np.ndarray
    g2: np.ndarray
    counts: np.ndarray
    bin_width: float
    mean_rate: float
    duration: float
    plateau: float
    poor_statistics: bool = False

    @property
    def tau_max(self):
        return float(self.tau[-1])


def _pair_histogram(t0, t1, bin_ps, n_half):
    """Histogram of t1 - t0 over all pairs, bins centred on multiples of bin_ps."""
    span = (n_half * bin_ps) + bin_ps // 2
    lo = np.searchsorted(t1, t0 - span, side="left")
    hi = np.searchsorted(t1, t0 + span, side="right")
    n_partners = hi - lo
    hist = np.zeros(2 * n_half + 1, dtype=np.int64)
    active = np.flatnonzero(n_partners > 0)
    k = 0
    while active.size:
        d = t1[lo[active] + k] - t0[active]
        idx = (d + bin_ps // 2) // bin_ps + n_half
        ok = (idx >= 0) & (idx <= 2 * n_half)
        hist += np.bincount(idx[ok], minlength=hist.size)
        k += 1
        active = active[n_partners[active] > k]
    return hist


def g2_histogram(tags, bin_width, tau_max, normalization="plateau"):
    """Exact two-detector g2 over |tau| <= tau_max.

    normalization "plateau" divides by the mean of the outer tenth of the
    delay range, "poisson" by the accidental-coincidence level
    N0 * N1 * bin / duration.
    """
    if tags.n_channels != 2:
        raise ChannelCountError(f"g2 needs a two-channel record, got {tags.n_channels} channel(s)")
    t0 = tags.times_ps[tags.channels == 0]
    t1 = tags.times_ps[tags.channels == 1]
    if t0.size == 0 or t1.size == 0:
        raise ValidationError("both detector channels must hold events")
    bin_ps = int(round(bin_width * PS_PER_S))
    if bin_ps <= 0 or not tau_max > bin_width:
        raise ValidationError(f"need 0 < bin_width < tau_max, got {bin_width} and {tau_max}")
    n_half = int(np.floor(tau_max * PS_PER_S / bin_ps + 1e-9))
    duration = tags.duration
    poor = tau_max > duration / 10.0
    if poor:
        logger.warning("tau_max = %.3g s exceeds a tenth of the record (%.3g s), poor statistics", tau_max, duration)

    hist = _pair_histogram(t0, t1, bin_ps, n_half)
    sym = 0.5 * (hist + hist[::-1])
    tau = np.arange(-n_half, n_half + 1) * bin_ps / PS_PER_S
    if normalization == "plateau":
        outer = np.abs(tau) >= (1.0 - PLATEAU_FRACTION) * tau[-1]
        level = float(sym[outer].mean())
    elif normalization == "poisson":
        level = t0.size * t1.size * (bin_ps / PS_PER_S) / duration
    else:
        raise ValidationError(f"unknown g2 normalization {normalization!r}")
    if not level > 0:
        raise ValidationError("no coincidences in the normalization window")
    logger.debug("g2: %d + %d events, %d bins, plateau %.4g", t0.size, t1.size, tau.size, level)
    return G2Table(
        tau=tau, g2=sym / level, counts=hist, bin_width=bin_ps / PS_PER_S,
        mean_rate=len(tags) / duration, duration=duration, plateau=level, poor_statistics=poor,
    )


def npsd_from_g2(table, mean_rate=None, tau_min=DEFAULT_TAU_MIN, pad_factor=4):
    """NPSD from the positive-delay half of a g2 table.

    S(f) = 4 * int_{tau_min}^{tau_max} (g2 - 1) w(tau) cos(2 pi f tau) dtau + 2 / rate
    with w a half-Hann taper, w(0) = 1 and w(tau_max) = 0.
    """
    rate = table.mean_rate if mean_rate is None else float(mean_rate)
    if not rate > 0:
        raise ValidationError(f"mean rate must be > 0, got {rate}")
    tau_max = table.tau_max
    if not 0 <= tau_min < tau_max:
        raise ValidationError(f"tau_min = {tau_min} must lie in [0, tau_max = {tau_max})")
    positive = table.tau >= -0.5 * table.bin_width
    tau = table.tau[positive]
    excess = table.g2[positive] - 1.0
    taper = np.cos(0.5 * np.pi * tau / tau_max) ** 2
    y = np.where(tau >= tau_min, excess * taper, 0.0)

    nfft = next_fast_len(pad_factor * y.size, real=True)
    transform = rfft(y, n=nfft).real * table.bin_width
    freq = rfftfreq(nfft, table.bin_width)
    density = 4.0 * transform + 2.0 / rate
    negative = density < 0
    if negative.any():
        logger.debug("clipping %d negative NPSD bins of the correlation estimate", int(negative.sum()))
    return Spectrum(freq, np.maximum(density, 0.0), rate, 1.0 / tau_max, n_averages=None)
