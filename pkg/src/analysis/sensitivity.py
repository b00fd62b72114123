"""
Displacement sensitivity

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Converts a measured NPSD floor into an equivalent displacement noise and
estimates how long the read-out must average to resolve the zero-point
motion.
"""

import logging

import numpy as np

from src.core.emitter import lineshape_profile, lineshape_slope
from src.core.errors import DivergentSensitivityError, ValidationError
from src.core.mechanics import zero_point
from src.core.noise_budget import imprecision_psd

logger = logging.getLogger(__name__)

FLOOR_BAND = 0.05
# 20 min record, 3 sigma peak
RECORD_RBW = 1.0 / 1200.0
AREA_SNR = 3.0


def floor_near(spec, freq_hz, band=FLOOR_BAND):
    """Median NPSD within +-band * freq_hz of freq_hz, 1/Hz."""
    mask = spec.band(freq_hz * (1.0 - band), freq_hz * (1.0 + band))
    if not mask.any():
        raise ValidationError(f"no spectrum bins near {freq_hz:.6g} Hz")
    return float(np.median(spec.density[mask]))


def sensitivity_from_floor(floor, mode, coupling, lineshape, detuning):
    """sqrt of the double-sided displacement PSD equivalent to an NPSD floor, m/sqrt(Hz)."""
    slope = float(lineshape_slope(lineshape, detuning))
    rate = float(lineshape_profile(lineshape, detuning))
    if slope == 0.0 or coupling == 0.0:
        raise DivergentSensitivityError(
            f"{mode.label}: read-out gain vanishes at detuning {detuning:.4g} rad/s"
        )
    gain = zero_point(mode) / coupling * rate / slope
    return float(np.sqrt(gain ** 2 * 0.5 * floor))


def displacement_sensitivity(spec, mode, coupling, lineshape, detuning):
    """Displacement sensitivity at the mode frequency from a measured spectrum.

    The one-sided floor around omega_m is halved, so the result compares
    with the double-sided imprecision of the noise budget.
    """
    floor = floor_near(spec, mode.freq_hz)
    value = sensitivity_from_floor(floor, mode, coupling, lineshape, detuning)
    logger.info("%s: floor %.4g /Hz -> sqrt(S_uu) = %.3g m/sqrt(Hz)", mode.label, floor, value)
    return value


def zpf_integration_time(cfg, resolution_bandwidth=RECORD_RBW, snr=AREA_SNR):
    """Averaging time for a peak of area u_zpf^2 to stand out of the floor, s.

    The peak fills one resolution bin of width b, so its excess height is
    u_zpf^2 / b, while the Welch floor S of that bin fluctuates by
    S / sqrt(T b). Requiring the ratio to reach ``snr`` gives
    T = snr^2 (S / u_zpf^2)^2 b, which falls as 1/eps^2 and 1/lambda^4.
    """
    if not resolution_bandwidth > 0:
        raise ValidationError(f"resolution bandwidth must be > 0, got {resolution_bandwidth}")
    if not snr > 0:
        raise ValidationError(f"snr must be > 0, got {snr}")
    ratio = imprecision_psd(cfg) / zero_point(cfg.mode) ** 2
    return float(snr ** 2 * ratio ** 2 * resolution_bandwidth)
