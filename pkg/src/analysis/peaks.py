"""
Peak areas and mode assignment

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

A peak is integrated inside a user window after subtracting the floor,
which is the median of two sidebands of half the window width on either
side. For Welch spectra each bin is chi-square distributed, so the median
is corrected for its bias and the area uncertainty follows from the
segment count; correlation-derived spectra use the sideband scatter.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.stats import chi2

from src.core.errors import ValidationError

logger = logging.getLogger(__name__)

ASSIGN_TOLERANCE = 0.075
UNKNOWN = "unknown"
MAD_TO_SIGMA = 1.4826
MEDIAN_STDERR = 1.2533


@dataclass(frozen=True)
class PeakResult:
    label: Optional[str]
    center: float
    area: float
    floor: float
    area_error: float
    window: tuple = (0.0, 0.0)
    clipped: bool = False

    def __post_init__(self):
        if self.area < 0:
            raise ValidationError(f"peak area must be >= 0 after clipping, got {self.area}")


def _normalize_windows(windows):
    if isinstance(windows, dict):
        items = [(str(k), tuple(map(float, v))) for k, v in windows.items()]
    else:
        items = [(None, tuple(map(float, w))) for w in windows]
    for label, (lo, hi) in items:
        if not hi > lo:
            raise ValidationError(f"window {label or ''} ({lo}, {hi}) must have hi > lo")
    ordered = sorted(items, key=lambda item: item[1][0])
    for (_, (_, hi)), (label, (lo, _)) in zip(ordered, ordered[1:]):
        if lo < hi:
            raise ValidationError(f"peak windows overlap near {lo:.6g} Hz")
    return items


def _chi2_median_factor(n_averages):
    dof = 2 * n_averages
    return float(chi2.median(dof) / dof)


def find_peaks_and_areas(spec, windows):
    """Integrate the excess NPSD in each window.

    windows is a sequence of (f_lo, f_hi) pairs in Hz, or a mapping from a
    mode label to such a pair. Results come back in input order.
    """
    items = _normalize_windows(windows)
    f, s = spec.frequency, spec.density
    df = spec.bin_width
    results = []
    for label, (lo, hi) in items:
        if lo < f[0] or hi > f[-1]:
            raise ValidationError(f"window ({lo:.6g}, {hi:.6g}) Hz lies outside the spectrum grid")
        inside = spec.band(lo, hi)
        if not inside.any():
            raise ValidationError(f"window ({lo:.6g}, {hi:.6g}) Hz contains no frequency bin")
        half = 0.5 * (hi - lo)
        side = ((f >= lo - half) & (f < lo)) | ((f > hi) & (f <= hi + half))
        if not side.any():
            raise ValidationError(f"no sideband bins around window ({lo:.6g}, {hi:.6g}) Hz")

        median = float(np.median(s[side]))
        n_in, n_side = int(inside.sum()), int(side.sum())
        if spec.n_averages:
            floor = median / _chi2_median_factor(spec.n_averages)
            bin_sigma = s[inside] / np.sqrt(spec.n_averages)
            floor_sigma = MEDIAN_STDERR * floor / np.sqrt(spec.n_averages * n_side)
            area_var = np.sum(bin_sigma ** 2) * df ** 2
        else:
            floor = median
            scatter = MAD_TO_SIGMA * float(np.median(np.abs(s[side] - median)))
            floor_sigma = MEDIAN_STDERR * scatter / np.sqrt(n_side)
            area_var = n_in * (scatter * df) ** 2
        area_error = float(np.sqrt(area_var + (n_in * df * floor_sigma) ** 2))

        excess = s[inside] - floor
        area = float(np.sum(excess) * df)
        center = float(f[inside][np.argmax(excess)])
        clipped = area < 0
        if clipped:
            logger.warning("peak %s at %.6g Hz has negative area %.3g, clipped to 0", label or "", center, area)
            area = 0.0
        results.append(PeakResult(label, center, area, floor, area_error, (lo, hi), clipped))
        logger.debug("peak %s: centre %.6g Hz, area %.4g +- %.2g", label or "", center, area, area_error)
    return results


def assign_modes(peaks, catalog, tolerance=ASSIGN_TOLERANCE):
    """Label peaks with the nearest catalog mode within a relative tolerance.

    Candidate pairs are taken closest first, each peak and each mode used
    at most once. Unmatched peaks are labelled "unknown".
    """
    modes = list(catalog)
    if not modes:
        raise ValidationError("mode catalog is empty")
    limit = tolerance * (1.0 + 1e-9)
    pairs = []
    for i, peak in enumerate(peaks):
        for mode in modes:
            rel = abs(peak.center - mode.freq_hz) / mode.freq_hz
            if rel <= limit:
                pairs.append((rel, i, mode.label))
    pairs.sort()
    labels, taken = {}, set()
    for rel, i, label in pairs:
        if i in labels or label in taken:
            continue
        labels[i] = label
        taken.add(label)
    out = [replace(peak, label=labels.get(i, UNKNOWN)) for i, peak in enumerate(peaks)]
    logger.info("assigned %d of %d peaks to catalog modes", len(labels), len(peaks))
    return out
