"""
Lineshape and coupling fits

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

fit_rf_spectrum fits a Voigt profile to a count rate measured against
laser detuning. extract_coupling then fits the peak areas of one mode
against detuning with the coupling as the only free parameter:

    A(delta) = (lambda * u_th / u_zpf * alpha(delta) / N(delta))^2

where N and alpha are the fitted profile and its analytic slope.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit, least_squares
from scipy.stats import chi2

from src.core.emitter import LineshapeParams, lineshape_profile, lineshape_slope
from src.core.errors import FitFailureError, NoSignalError, ValidationError
from src.core.mechanics import thermal_to_zpf_ratio

logger = logging.getLogger(__name__)

MIN_LINESHAPE_POINTS = 10
MIN_SPAN_IN_FWHM = 3.0
WHITE_RESIDUAL_P = 0.01
PARAM_NAMES = ("lorentzian_fwhm", "gaussian_fwhm", "amplitude", "center")


@dataclass(frozen=True, eq=False)
class LineshapeFit:
    params: LineshapeParams
    stderr: dict
    residuals: np.ndarray
    ljung_box_p: float
    residuals_white: bool
    diagnostics: dict = field(default_factory=dict)


def ljung_box(residuals, lags=None):
    """Ljung-Box portmanteau test; returns (Q, p-value)."""
    r = np.asarray(residuals, dtype=float)
    r = r - r.mean()
    n = r.size
    lags = lags or max(1, min(10, n // 5))
    denom = float(np.dot(r, r))
    if denom == 0:
        return 0.0, 1.0
    acf = np.array([np.dot(r[:-k], r[k:]) / denom for k in range(1, lags + 1)])
    q = n * (n + 2) * np.sum(acf ** 2 / (n - np.arange(1, lags + 1)))
    return float(q), float(chi2.sf(q, lags))


def _half_max_width(x, y):
    above = x[y >= 0.5 * y.max()]
    return float(above.max() - above.min()) if above.size > 1 else float(np.ptp(x)) / 10.0


def _stderr_from_jacobian(jac, cost, n_points, rescale=True):
    _, s, vt = np.linalg.svd(jac, full_matrices=False)
    threshold = np.finfo(float).eps * max(jac.shape) * s[0]
    dof = max(n_points - jac.shape[1], 1)
    s2 = 2.0 * cost / dof if rescale else 1.0
    inv = np.where(s > threshold, 1.0 / np.where(s > threshold, s, 1.0) ** 2, np.inf)
    with np.errstate(invalid="ignore"):
        var = np.sum(vt.T ** 2 * inv, axis=1) * s2
    return np.sqrt(np.nan_to_num(var, nan=np.inf))


def fit_rf_spectrum(detuning, rate, sigma=None, p0=None, max_nfev=2000):
    """Voigt fit of a rate-versus-detuning scan.

    Args:
        detuning: laser detunings, rad/s
        rate: count rates, 1/s
        sigma: optional per-point standard deviations
        p0: optional LineshapeParams starting point
        max_nfev: evaluation budget of the trust-region solver

    Returns:
        LineshapeFit with parameters in rad/s and 1/s.
    """
    x = np.asarray(detuning, dtype=float)
    y = np.asarray(rate, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("detuning and rate must be 1-d arrays of equal length")
    if x.size < MIN_LINESHAPE_POINTS:
        raise ValidationError(f"lineshape fit needs at least {MIN_LINESHAPE_POINTS} points, got {x.size}")
    order = np.argsort(x)
    x, y = x[order], y[order]
    if sigma is None:
        w = np.full_like(y, 1.0 / y.max())
    else:
        w = 1.0 / np.asarray(sigma, dtype=float)[order]
    width = _half_max_width(x, y)
    span = float(np.ptp(x))
    if span <= MIN_SPAN_IN_FWHM * width:
        raise ValidationError(f"scan spans {span / width:.2f} FWHM, need more than {MIN_SPAN_IN_FWHM}")

    # fit in scaled units: detuning / scale, rate / peak
    scale, peak = width, float(y.max())
    if p0 is None:
        start = np.array([1.0 / 1.64, 1.0 / 1.64, 1.0, x[np.argmax(y)] / scale])
    else:
        start = np.array([p0.lorentzian_fwhm / scale, p0.gaussian_fwhm / scale, p0.amplitude / peak, p0.center / scale])
    lower = np.array([1e-6, 0.0, 0.0, x[0] / scale])
    upper = np.array([np.inf, np.inf, np.inf, x[-1] / scale])
    start = np.clip(start, lower + 1e-9, np.where(np.isfinite(upper), upper - 1e-9, np.inf))

    def residual(theta):
        p = LineshapeParams(theta[0] * scale, theta[1] * scale, theta[2] * peak, theta[3] * scale)
        return (lineshape_profile(p, x) - y) * w

    result = least_squares(residual, start, jac="3-point", bounds=(lower, upper), method="trf", max_nfev=max_nfev)
    diagnostics = {"status": int(result.status), "nfev": int(result.nfev), "cost": float(result.cost),
                   "message": str(result.message)}
    if not result.success or not np.all(np.isfinite(result.x)):
        raise FitFailureError("Voigt fit did not converge", diagnostics)
    if np.any(result.active_mask != 0):
        logger.warning("lineshape fit ended on a parameter bound: %s",
                       [n for n, a in zip(PARAM_NAMES, result.active_mask) if a])

    units = np.array([scale, scale, peak, scale])
    theta = result.x
    params = LineshapeParams(*(theta * units))
    stderr_scaled = _stderr_from_jacobian(result.jac, result.cost, x.size, rescale=sigma is None)
    stderr = {name: float(v) for name, v in zip(PARAM_NAMES, stderr_scaled * units)}
    residuals = y - lineshape_profile(params, x)
    _, p_value = ljung_box(residuals * w)
    logger.info(
        "Voigt fit: L=%.4g G=%.4g rad/s, amplitude %.4g /s, Ljung-Box p=%.3g",
        params.lorentzian_fwhm, params.gaussian_fwhm, params.amplitude, p_value,
    )
    return LineshapeFit(params, stderr, residuals, p_value, p_value > WHITE_RESIDUAL_P, diagnostics)


@dataclass(frozen=True)
class CouplingFit:
    coupling: float
    stderr: float
    residual: float
    covariance: float
    n_points: int

    def __post_init__(self):
        if self.coupling < 0:
            raise ValidationError(f"coupling must be >= 0, got {self.coupling}")


def area_gain(detuning, lineshape, mode, temperature):
    """A(delta) / lambda^2, the area per unit squared coupling, (s/rad)^2."""
    delta = np.asarray(detuning, dtype=float)
    profile = lineshape_profile(lineshape, delta)
    slope = lineshape_slope(lineshape, delta)
    ratio = thermal_to_zpf_ratio(mode, temperature)
    return (ratio * slope / profile) ** 2


def predicted_area(coupling, detuning, lineshape, mode, temperature=4.0):
    return coupling ** 2 * area_gain(detuning, lineshape, mode, temperature)


def extract_coupling(detunings, areas, lineshape, mode, temperature=4.0, area_errors=None):
    """Least-squares coupling from peak areas measured at several detunings."""
    delta = np.asarray(detunings, dtype=float)
    a = np.asarray(areas, dtype=float)
    if delta.shape != a.shape or delta.ndim != 1:
        raise ValidationError("detunings and areas must be 1-d arrays of equal length")
    if delta.size < 3:
        raise ValidationError(f"coupling fit needs at least 3 detunings, got {delta.size}")
    if not np.any(a > 0):
        raise NoSignalError(f"{mode.label}: every peak area is zero")
    gain = area_gain(delta, lineshape, mode, temperature)
    sigma = None
    if area_errors is not None:
        sigma = np.asarray(area_errors, dtype=float)
        if sigma.shape != a.shape:
            raise ValidationError("area_errors must match the areas in length")
        positive = sigma > 0
        if positive.any():
            sigma = np.where(positive, sigma, sigma[positive].max())
        else:
            logger.warning("%s: no positive area errors, fitting unweighted", mode.label)
            sigma = None
    guess = np.sqrt(max(np.dot(a, gain) / np.dot(gain, gain), 0.0))

    def model(_, lam):
        return lam ** 2 * gain

    try:
        popt, pcov = curve_fit(model, delta, a, p0=[guess], sigma=sigma, absolute_sigma=sigma is not None,
                               bounds=(0.0, np.inf))
    except RuntimeError as exc:
        raise FitFailureError(f"{mode.label}: coupling fit did not converge", {"guess": guess}) from exc
    lam = float(popt[0])
    var = float(pcov[0, 0])
    residual = float(np.sum((a - model(delta, lam)) ** 2))
    logger.info("%s: lambda/2pi = %.4g Hz +- %.2g", mode.label, lam / (2 * np.pi), np.sqrt(var) / (2 * np.pi))
    return CouplingFit(lam, float(np.sqrt(var)), residual, var, int(delta.size))
