"""
Resonantly driven two-level emitter

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Closed-form steady-state resonance fluorescence: total decoherence,
power broadening, the Lorentzian count rate and its slope versus
laser detuning, and the inhomogeneously broadened (Voigt) profile
obtained by convolving the Lorentzian with a Gaussian of std-dev
sigma_inh. The Voigt profile is evaluated through the Faddeeva function
scipy.special.wofz.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import wofz

from src.core.errors import ValidationError
from src.core.units import GAUSS_FWHM_PER_SIGMA

_SQRT2 = np.sqrt(2.0)
_SQRT2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Emitter:
    """Two-level emitter.

    Attributes:
        gamma_sp: spontaneous emission rate, 1/s
        gamma_star: pure dephasing rate, 1/s
        sigma_inh: Gaussian inhomogeneous broadening std-dev, rad/s
    """

    gamma_sp: float
    gamma_star: float = 0.0
    sigma_inh: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.gamma_sp) or self.gamma_sp <= 0:
            raise ValidationError(f"gamma_sp must be > 0, got {self.gamma_sp}")
        if not np.isfinite(self.gamma_star) or self.gamma_star < 0:
            raise ValidationError(f"gamma_star must be >= 0, got {self.gamma_star}")
        if not np.isfinite(self.sigma_inh) or self.sigma_inh < 0:
            raise ValidationError(f"sigma_inh must be >= 0, got {self.sigma_inh}")

    @classmethod
    def from_linewidths(cls, gamma_sp, lorentzian_hwhm, gaussian_hwhm, omega_r):
        """Build the emitter whose measured line has the given half-widths.

        The Lorentzian half-width is the power-broadened HWHM at drive
        omega_r, so the pure dephasing follows from
        gamma**2 + (omega_r**2 / gamma_sp) * gamma - hwhm**2 = 0.

        Args:
            gamma_sp: spontaneous emission rate, 1/s
            lorentzian_hwhm: homogeneous half-width at the drive, rad/s
            gaussian_hwhm: half-width of the Gaussian component, rad/s
            omega_r: Rabi frequency at which the widths were measured, rad/s

        Returns:
            Emitter with gamma_star and sigma_inh reproducing both widths.
        """
        if lorentzian_hwhm <= 0 or gaussian_hwhm < 0 or omega_r < 0:
            raise ValidationError("linewidths must be positive and omega_r >= 0")
        b = omega_r ** 2 / gamma_sp
        gamma = 0.5 * (-b + np.sqrt(b * b + 4.0 * lorentzian_hwhm ** 2))
        gamma_star = gamma - 0.5 * gamma_sp
        if gamma_star < 0:
            raise ValidationError(
                f"Lorentzian half-width {lorentzian_hwhm:.4g} rad/s is narrower than "
                f"the radiative limit at omega_r={omega_r:.4g} rad/s"
            )
        sigma = gaussian_hwhm / np.sqrt(2.0 * np.log(2.0))
        return cls(gamma_sp=gamma_sp, gamma_star=float(gamma_star), sigma_inh=float(sigma))


@dataclass(frozen=True)
class DriveCondition:
    """Laser drive: Rabi frequency and laser-emitter detuning, both rad/s."""

    omega_r: float
    detuning: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.omega_r) or self.omega_r < 0:
            raise ValidationError(f"omega_r must be >= 0, got {self.omega_r}")
        if not np.isfinite(self.detuning):
            raise ValidationError(f"detuning must be finite, got {self.detuning}")


@dataclass(frozen=True)
class LineshapeParams:
    """Voigt lineshape of a detected resonance-fluorescence scan.

    Widths and centre in rad/s; amplitude is the peak count rate in 1/s.
    """

    lorentzian_fwhm: float
    gaussian_fwhm: float
    amplitude: float
    center: float = 0.0

    def __post_init__(self):
        if self.lorentzian_fwhm < 0 or self.gaussian_fwhm < 0:
            raise ValidationError("lineshape widths must be >= 0")
        if self.lorentzian_fwhm == 0 and self.gaussian_fwhm == 0:
            raise ValidationError("lineshape needs a non-zero Lorentzian or Gaussian width")
        if not np.isfinite(self.amplitude) or not np.isfinite(self.center):
            raise ValidationError("lineshape amplitude and center must be finite")


def total_decoherence(e):
    return 0.5 * e.gamma_sp + e.gamma_star


def power_broadened_hwhm(e, omega_r):
    gamma = total_decoherence(e)
    return np.sqrt(gamma ** 2 + (gamma / e.gamma_sp) * np.asarray(omega_r, dtype=float) ** 2)


def saturation_rate(e):
    return 0.5 * e.gamma_sp


def _lorentz_numerator(e, omega_r):
    gamma = total_decoherence(e)
    return 0.5 * e.gamma_sp * (gamma / e.gamma_sp) * omega_r ** 2


def lorentzian_rate(e, omega_r, detuning):
    """Vectorized homogeneous rate for an array of detunings."""
    hwhm = power_broadened_hwhm(e, omega_r)
    delta = np.asarray(detuning, dtype=float)
    return _lorentz_numerator(e, omega_r) / (delta ** 2 + hwhm ** 2)


def lorentzian_slope(e, omega_r, detuning):
    hwhm = power_broadened_hwhm(e, omega_r)
    delta = np.asarray(detuning, dtype=float)
    rate = lorentzian_rate(e, omega_r, delta)
    return -rate * 2.0 * delta / (delta ** 2 + hwhm ** 2)


def _voigt_kernel(delta, sigma, hwhm):
    z = (delta + 1j * hwhm) / (sigma * _SQRT2)
    return wofz(z), z


def voigt_rate_at(e, omega_r, detuning):
    """Vectorized Voigt rate; equals lorentzian_rate when sigma_inh == 0."""
    if e.sigma_inh == 0:
        return lorentzian_rate(e, omega_r, detuning)
    hwhm = power_broadened_hwhm(e, omega_r)
    delta = np.asarray(detuning, dtype=float)
    w, _ = _voigt_kernel(delta, e.sigma_inh, hwhm)
    # A / (delta**2 + hwhm**2) has area pi * A / hwhm
    area = np.pi * _lorentz_numerator(e, omega_r) / hwhm
    return area * w.real / (e.sigma_inh * _SQRT2PI)


def voigt_slope_at(e, omega_r, detuning):
    if e.sigma_inh == 0:
        return lorentzian_slope(e, omega_r, detuning)
    hwhm = power_broadened_hwhm(e, omega_r)
    delta = np.asarray(detuning, dtype=float)
    w, z = _voigt_kernel(delta, e.sigma_inh, hwhm)
    dw = -2.0 * z * w + 2j / np.sqrt(np.pi)
    area = np.pi * _lorentz_numerator(e, omega_r) / hwhm
    return area * dw.real / (e.sigma_inh * _SQRT2 * e.sigma_inh * _SQRT2PI)


def rf_rate(e, d):
    return float(lorentzian_rate(e, d.omega_r, d.detuning))


def rf_slope(e, d):
    return float(lorentzian_slope(e, d.omega_r, d.detuning))


def voigt_rate(e, d):
    return float(voigt_rate_at(e, d.omega_r, d.detuning))


def voigt_slope(e, d):
    return float(voigt_slope_at(e, d.omega_r, d.detuning))


def inhomogeneous_hwhm(e, omega_r):
    """Half-width at half-maximum of the Voigt rate profile in detuning."""
    hwhm = float(power_broadened_hwhm(e, omega_r))
    if e.sigma_inh == 0:
        return hwhm
    if omega_r == 0:
        raise ValidationError("profile width undefined without drive")
    half = 0.5 * voigt_rate_at(e, omega_r, 0.0)
    upper = 10.0 * (hwhm + GAUSS_FWHM_PER_SIGMA * e.sigma_inh)
    return brentq(lambda x: voigt_rate_at(e, omega_r, x) - half, 0.0, upper, xtol=1e-12 * upper)


def lineshape_from_emitter(e, omega_r, efficiency=1.0):
    """Detected lineshape of emitter e scanned at fixed drive omega_r."""
    return LineshapeParams(
        lorentzian_fwhm=2.0 * float(power_broadened_hwhm(e, omega_r)),
        gaussian_fwhm=GAUSS_FWHM_PER_SIGMA * e.sigma_inh,
        amplitude=efficiency * float(voigt_rate_at(e, omega_r, 0.0)),
        center=0.0,
    )


def _profile_parts(p, detuning):
    x = np.asarray(detuning, dtype=float) - p.center
    gamma_l = 0.5 * p.lorentzian_fwhm
    sigma = p.gaussian_fwhm / GAUSS_FWHM_PER_SIGMA
    return x, gamma_l, sigma


def lineshape_profile(p, detuning):
    """Evaluate the lineshape (peak value = amplitude) at the given detunings."""
    x, gamma_l, sigma = _profile_parts(p, detuning)
    if sigma <= 1e-9 * gamma_l:
        return p.amplitude * gamma_l ** 2 / (x ** 2 + gamma_l ** 2)
    if gamma_l == 0:
        return p.amplitude * np.exp(-0.5 * (x / sigma) ** 2)
    w, _ = _voigt_kernel(x, sigma, gamma_l)
    w0, _ = _voigt_kernel(0.0, sigma, gamma_l)
    return p.amplitude * w.real / w0.real


def lineshape_slope(p, detuning):
    """Analytic derivative of lineshape_profile with respect to detuning."""
    x, gamma_l, sigma = _profile_parts(p, detuning)
    if sigma <= 1e-9 * gamma_l:
        return -p.amplitude * gamma_l ** 2 * 2.0 * x / (x ** 2 + gamma_l ** 2) ** 2
    if gamma_l == 0:
        return -p.amplitude * x / sigma ** 2 * np.exp(-0.5 * (x / sigma) ** 2)
    w, z = _voigt_kernel(x, sigma, gamma_l)
    w0, _ = _voigt_kernel(0.0, sigma, gamma_l)
    dw = -2.0 * z * w + 2j / np.sqrt(np.pi)
    return p.amplitude * dw.real / (sigma * _SQRT2) / w0.real


def lineshape_hwhm(p):
    gamma_l = 0.5 * p.lorentzian_fwhm
    half_g = 0.5 * p.gaussian_fwhm
    # Olivero-Longbothum estimate, only used to bracket the root
    estimate = 0.5346 * gamma_l + np.sqrt(0.2166 * gamma_l ** 2 + half_g ** 2)
    target = 0.5 * p.amplitude
    return brentq(
        lambda dx: lineshape_profile(p, p.center + dx) - target,
        0.0,
        4.0 * estimate,
        xtol=1e-12 * estimate,
    )
