import numpy as np
import pytest
from scipy.integrate import quad

from src.core.emitter import (
    DriveCondition,
    Emitter,
    LineshapeParams,
    inhomogeneous_hwhm,
    lineshape_from_emitter,
    lineshape_hwhm,
    lineshape_profile,
    lineshape_slope,
    lorentzian_rate,
    power_broadened_hwhm,
    rf_rate,
    rf_slope,
    saturation_rate,
    total_decoherence,
    voigt_rate,
    voigt_rate_at,
    voigt_slope,
)
from src.core.errors import ValidationError
from src.core.units import GAUSS_FWHM_PER_SIGMA

TWO_PI = 2.0 * np.pi


@pytest.mark.parametrize("gamma_sp,gamma_star,expected", [
    (1.0e9, 0.0, 5.0e8),
    (1.1e9, 0.0, 5.5e8),
    (1.0e9, 2.5e8, 7.5e8),
])
def test_total_decoherence(gamma_sp, gamma_star, expected):
    assert total_decoherence(Emitter(gamma_sp, gamma_star)) == pytest.approx(expected)


def test_emitter_rejects_invalid_rates():
    with pytest.raises(ValidationError):
        Emitter(gamma_sp=0.0)
    with pytest.raises(ValidationError):
        Emitter(gamma_sp=1e9, gamma_star=-1.0)
    with pytest.raises(ValidationError):
        DriveCondition(omega_r=-1.0)
    with pytest.raises(ValidationError):
        LineshapeParams(lorentzian_fwhm=0.0, gaussian_fwhm=0.0, amplitude=1.0)


def test_power_broadening_limits():
    e = Emitter(gamma_sp=1e9)
    assert power_broadened_hwhm(e, 0.0) == pytest.approx(0.5e9)
    assert power_broadened_hwhm(e, 1e9) == pytest.approx(1e9 * np.sqrt(3.0) / 2.0, rel=1e-12)


def test_power_broadening_grows_quadratically():
    e = Emitter(gamma_sp=1e9, gamma_star=3e8)
    omega = np.logspace(6, 11, 30)
    excess = power_broadened_hwhm(e, omega) ** 2 - total_decoherence(e) ** 2
    slope = np.polyfit(np.log(omega), np.log(excess), 1)[0]
    assert slope == pytest.approx(2.0, abs=1e-6)


def test_rf_rate_basic_properties():
    e = Emitter(gamma_sp=1.1e9, gamma_star=2e8)
    assert rf_rate(e, DriveCondition(0.0, 1e9)) == 0.0
    d = DriveCondition(1.1e9, 3e8)
    assert rf_rate(e, d) == pytest.approx(rf_rate(e, DriveCondition(1.1e9, -3e8)), rel=1e-14)
    hwhm = float(power_broadened_hwhm(e, 1.1e9))
    assert rf_rate(e, DriveCondition(1.1e9, hwhm)) == pytest.approx(0.5 * rf_rate(e, DriveCondition(1.1e9, 0.0)))
    for omega_r in (1e6, 1e9, 1e12):
        assert rf_rate(e, DriveCondition(omega_r, 0.0)) < saturation_rate(e)


def test_saturated_detected_rate_matches_measured_maximum():
    e = Emitter(gamma_sp=1.1e9)
    saturated = rf_rate(e, DriveCondition(1e14, 0.0))
    assert saturated == pytest.approx(saturation_rate(e), rel=1e-6)
    assert 0.0016 * saturated == pytest.approx(0.83e6, rel=0.1)


def test_slope_at_half_maximum():
    e = Emitter(gamma_sp=1e9, gamma_star=1e8)
    hwhm = float(power_broadened_hwhm(e, 7e8))
    d = DriveCondition(7e8, hwhm)
    assert abs(rf_slope(e, d)) == pytest.approx(rf_rate(e, d) / hwhm, rel=1e-12)
    assert rf_slope(e, DriveCondition(7e8, 0.0)) == 0.0


def test_slope_matches_finite_difference():
    e = Emitter(gamma_sp=1e9, gamma_star=1e8)
    omega_r = 1e9
    hwhm = float(power_broadened_hwhm(e, omega_r))
    h = 1e-4 * hwhm
    for delta in np.linspace(-10 * hwhm, 10 * hwhm, 40):
        numeric = (rf_rate(e, DriveCondition(omega_r, delta + h)) - rf_rate(e, DriveCondition(omega_r, delta - h))) / (2 * h)
        assert rf_slope(e, DriveCondition(omega_r, delta)) == pytest.approx(numeric, rel=1e-6)


def test_voigt_reduces_to_lorentzian():
    e = Emitter(gamma_sp=1e9, gamma_star=1e8)
    for delta in (0.0, 3e8, -2e9):
        d = DriveCondition(8e8, delta)
        assert voigt_rate(e, d) == rf_rate(e, d)
        assert voigt_slope(e, d) == rf_slope(e, d)


def test_voigt_conserves_area():
    lorentz = Emitter(gamma_sp=1.0, gamma_star=0.2)
    voigt = Emitter(gamma_sp=1.0, gamma_star=0.2, sigma_inh=0.7)
    hwhm = float(power_broadened_hwhm(lorentz, 1.0))
    expected = np.pi * float(lorentzian_rate(lorentz, 1.0, 0.0)) * hwhm
    area, _ = quad(lambda x: float(voigt_rate_at(voigt, 1.0, x)), -np.inf, np.inf, epsabs=0, epsrel=1e-10)
    assert area == pytest.approx(expected, rel=1e-4)


def test_voigt_slope_matches_finite_difference():
    e = Emitter(gamma_sp=1.0, gamma_star=0.3, sigma_inh=0.8)
    h = 1e-5
    for delta in (-3.0, -0.7, 0.4, 1.9):
        numeric = (voigt_rate(e, DriveCondition(1.0, delta + h)) - voigt_rate(e, DriveCondition(1.0, delta - h))) / (2 * h)
        assert voigt_slope(e, DriveCondition(1.0, delta)) == pytest.approx(numeric, rel=1e-6)


def test_measured_linewidths_give_two_gigahertz_profile(paper_emitter):
    gamma_sp = paper_emitter.gamma_sp
    assert float(power_broadened_hwhm(paper_emitter, gamma_sp)) == pytest.approx(TWO_PI * 0.45e9, rel=1e-9)
    assert GAUSS_FWHM_PER_SIGMA * paper_emitter.sigma_inh / 2 == pytest.approx(TWO_PI * 0.70e9, rel=1e-9)
    fwhm_ghz = 2 * inhomogeneous_hwhm(paper_emitter, gamma_sp) / TWO_PI / 1e9
    assert fwhm_ghz == pytest.approx(2.0, rel=0.05)


def test_from_linewidths_rejects_sub_radiative_width():
    with pytest.raises(ValidationError):
        Emitter.from_linewidths(1e9, 1e8, 0.0, omega_r=0.0)


def test_gaussian_limit_of_profile():
    sigma = 1.3
    p = LineshapeParams(lorentzian_fwhm=1e-7, gaussian_fwhm=GAUSS_FWHM_PER_SIGMA * sigma, amplitude=2.0)
    x = np.linspace(-2 * sigma, 2 * sigma, 41)
    np.testing.assert_allclose(lineshape_profile(p, x), 2.0 * np.exp(-0.5 * (x / sigma) ** 2), rtol=1e-4)


def test_lineshape_from_emitter_matches_rate(paper_emitter):
    omega_r = paper_emitter.gamma_sp
    p = lineshape_from_emitter(paper_emitter, omega_r, efficiency=0.0016)
    deltas = np.linspace(-3e10, 3e10, 13)
    expected = 0.0016 * voigt_rate_at(paper_emitter, omega_r, deltas)
    np.testing.assert_allclose(lineshape_profile(p, deltas), expected, rtol=1e-9)
    assert lineshape_hwhm(p) == pytest.approx(inhomogeneous_hwhm(paper_emitter, omega_r), rel=1e-8)


def test_lineshape_slope_matches_finite_difference():
    p = LineshapeParams(lorentzian_fwhm=0.9, gaussian_fwhm=1.4, amplitude=5.0, center=0.3)
    h = 1e-6
    x = np.array([-2.0, -0.5, 0.8, 2.5])
    numeric = (lineshape_profile(p, x + h) - lineshape_profile(p, x - h)) / (2 * h)
    np.testing.assert_allclose(lineshape_slope(p, x), numeric, rtol=1e-6)
