"""
Intensity correlation model

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

g2(tau) of a resonantly driven two-level emitter with telegraph blinking
and thermal mechanical modulation of the count rate, optionally convolved
with the Gaussian timing response of a detector pair.
"""

import numpy as np
from scipy.ndimage import gaussian_filter1d

from src.core.emitter import voigt_rate, voigt_slope
from src.core.errors import ValidationError
from src.core.mechanics import thermal_to_zpf_ratio


def g2_two_level(tau, gamma_sp, omega_r):
    """Antibunching of resonance fluorescence, exact on resonance without dephasing."""
    t = np.abs(np.asarray(tau, dtype=float))
    a = 0.75 * gamma_sp
    q = 0.25 * gamma_sp
    if omega_r > q:
        mu = np.sqrt(omega_r ** 2 - q ** 2)
        envelope = np.exp(-a * t) * (np.cos(mu * t) + (a / mu) * np.sin(mu * t))
    elif omega_r < q:
        kappa = np.sqrt(q ** 2 - omega_r ** 2)
        fast, slow = np.exp(-(a + kappa) * t), np.exp(-(a - kappa) * t)
        envelope = 0.5 * (slow + fast) + (a / kappa) * 0.5 * (slow - fast)
    else:
        envelope = np.exp(-a * t) * (1.0 + a * t)
    return 1.0 - envelope


def blinking_factor(tau, blinking):
    t = np.abs(np.asarray(tau, dtype=float))
    beta = blinking.on_fraction
    return 1.0 + ((1.0 - beta) / beta) * np.exp(-t / blinking.correlation_time)


def mechanical_contrast(emitter, drive, mode, coupling, temperature):
    """Relative variance of the count rate caused by one thermal mode."""
    rate = voigt_rate(emitter, drive)
    if rate == 0.0:
        return 0.0
    relative_gain = voigt_slope(emitter, drive) / rate
    return (relative_gain * coupling * thermal_to_zpf_ratio(mode, temperature)) ** 2


def mechanical_factor(tau, contrasts):
    """1 + sum of damped cosines; contrasts is a sequence of (mode, c_k)."""
    t = np.abs(np.asarray(tau, dtype=float))
    total = np.ones_like(t)
    for mode, contrast in contrasts:
        total += contrast * np.exp(-0.5 * mode.gamma_m * t) * np.cos(mode.omega_m * t)
    return total


def g2_model(tau, emitter, drive, blinking, modes=(), temperature=4.0, jitter_sigma=0.0):
    """Full g2 model on the delay grid tau (s).

    modes holds (MechMode, coupling) pairs. With jitter_sigma > 0 the grid
    must be uniform; the product is then convolved with a Gaussian of
    std-dev jitter_sigma * sqrt(2), the response of two independent
    detectors.
    """
    tau = np.asarray(tau, dtype=float)
    contrasts = [(mode, mechanical_contrast(emitter, drive, mode, lam, temperature)) for mode, lam in modes]
    g2 = (
        g2_two_level(tau, emitter.gamma_sp, drive.omega_r)
        * blinking_factor(tau, blinking)
        * mechanical_factor(tau, contrasts)
    )
    if jitter_sigma > 0:
        steps = np.diff(tau)
        if tau.ndim != 1 or tau.size < 3 or not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
            raise ValidationError("jitter convolution needs a uniform delay grid")
        g2 = gaussian_filter1d(g2, jitter_sigma * np.sqrt(2.0) / steps[0], mode="nearest")
    return g2
