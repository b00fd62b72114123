"""
Physical constants and unit conversions

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

All angular quantities inside the package are rad/s. Inputs labelled
"/2pi" (mode frequencies, couplings) are converted on ingestion; the
spontaneous emission rate is a plain decay rate in 1/s.
"""

import numpy as np
from scipy import constants

HBAR = constants.hbar
K_B = constants.k
EV = constants.e
TWO_PI = 2.0 * np.pi

# FWHM of a Gaussian in units of its standard deviation
GAUSS_FWHM_PER_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))


def hz_to_rad(freq_over_2pi_hz):
    return TWO_PI * np.asarray(freq_over_2pi_hz, dtype=float)


def rad_to_hz(omega):
    return np.asarray(omega, dtype=float) / TWO_PI


def ev_to_rad_per_s(energy_ev):
    """Convert an energy in eV to an angular frequency via E = hbar * omega."""
    return np.asarray(energy_ev, dtype=float) * EV / HBAR
