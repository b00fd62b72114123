import json

import numpy as np
import pytest
from scipy.integrate import quad

from src.core.errors import ValidationError
from src.core.mechanics import (
    DeformationPotentials,
    MechMode,
    QDPosition,
    StrainTensor,
    canonical_position,
    catalog_from_dict,
    coupling_from_strain,
    frequency_shift_from_strain,
    load_catalog,
    strain_at,
    susceptibility,
    thermal_occupation,
    thermal_rms,
    thermal_to_zpf_ratio,
    zero_point,
)
from src.core.units import HBAR, K_B

TWO_PI = 2.0 * np.pi


def test_zero_point_of_first_flexural_mode(f1x):
    assert zero_point(f1x) == pytest.approx(2.3e-14, rel=0.02)


def test_zero_point_scaling():
    base = MechMode("M", "breathing", 1, omega_m=1e6, gamma_m=1e3, m_eff=1e-14)
    heavy = MechMode("M", "breathing", 1, omega_m=1e6, gamma_m=1e3, m_eff=2e-14)
    assert zero_point(base) / zero_point(heavy) == pytest.approx(np.sqrt(2.0))
    unit = MechMode("M", "breathing", 1, omega_m=1e6, gamma_m=1e3, m_eff=HBAR / 2e6)
    assert zero_point(unit) == pytest.approx(1.0)


def test_thermal_amplitude(f1x):
    assert thermal_rms(f1x, 4.0) == pytest.approx(1.2e-11, rel=0.02)
    assert thermal_rms(f1x, 0.0) == 0.0
    with pytest.raises(ValidationError):
        thermal_rms(f1x, -1.0)


def test_thermal_to_zpf_ratio_is_mass_free():
    rng = np.random.default_rng(4)
    for _ in range(20):
        omega = TWO_PI * 10 ** rng.uniform(5, 8)
        mode = MechMode("M", "breathing", 1, omega_m=omega, gamma_m=omega * 1e-3, m_eff=10 ** rng.uniform(-15, -13))
        temperature = rng.uniform(0.1, 300.0)
        ratio = thermal_rms(mode, temperature) / zero_point(mode)
        assert ratio == pytest.approx(np.sqrt(2 * K_B * temperature / (HBAR * omega)), rel=1e-10)
        assert thermal_to_zpf_ratio(mode, temperature) == pytest.approx(ratio, rel=1e-10)


def test_thermal_occupation(f1y):
    assert thermal_occupation(f1y, 0.0) == 0.0
    assert thermal_occupation(f1y, 4.0) == pytest.approx(1.7e5, rel=0.1)


def test_susceptibility_landmarks():
    mode = MechMode("M", "breathing", 1, omega_m=2.0, gamma_m=0.05, m_eff=3.0)
    static = susceptibility(mode, 0.0)
    assert static.imag == 0.0
    assert static.real == pytest.approx(1 / (3.0 * 4.0))
    assert abs(susceptibility(mode, 2.0)) == pytest.approx(1 / (3.0 * 0.05 * 2.0))


def test_susceptibility_integral():
    mode = MechMode("M", "breathing", 1, omega_m=1.0, gamma_m=0.05, m_eff=1.0)
    f = lambda w: abs(susceptibility(mode, w)) ** 2  # noqa: E731
    half = quad(f, 0, 0.8)[0] + quad(f, 0.8, 1.2, points=[1.0], limit=200)[0] + quad(f, 1.2, np.inf)[0]
    assert 2 * half / TWO_PI == pytest.approx(1 / (2 * 0.05), rel=1e-3)


def test_susceptibility_linewidth():
    mode = MechMode("M", "breathing", 1, omega_m=1.0, gamma_m=0.01, m_eff=1.0)
    omega = np.linspace(0.95, 1.05, 200001)
    power = np.abs(susceptibility(mode, omega)) ** 2
    above = omega[power >= 0.5 * power.max()]
    assert above[-1] - above[0] == pytest.approx(0.01, rel=0.01)


def test_mode_validation():
    with pytest.raises(ValidationError):
        MechMode("M", "torsional", 1, omega_m=1e6, gamma_m=1e3, m_eff=1e-14)
    with pytest.raises(ValidationError):
        MechMode("M", "breathing", 1, omega_m=1e6, gamma_m=2e5, m_eff=1e-14)
    with pytest.raises(ValidationError):
        MechMode("M", "breathing", 1, omega_m=1e6, gamma_m=1e3, m_eff=0.0)
    with pytest.raises(ValidationError):
        MechMode("M", "flexural-y", 1, omega_m=1e6, gamma_m=1e3, m_eff=1e-14, anchor_phi=0.0)


def test_strain_anchor_and_neutral_axis(f1x):
    anchor = strain_at(f1x, QDPosition(45e-9, 0.0))
    assert (anchor.e_zz, anchor.e_xx, anchor.e_yy) == pytest.approx((5.9e-8, -1.6e-8, -1.9e-8))
    assert strain_at(f1x, QDPosition(0.0, 0.0)) == StrainTensor(0.0, 0.0, 0.0)
    on_axis = strain_at(f1x, QDPosition(80e-9, np.pi / 2))
    assert abs(on_axis.e_zz) < 1e-20
    half = strain_at(f1x, QDPosition(45e-9, np.pi / 3))
    assert half.e_zz == pytest.approx(0.5 * 5.9e-8)


def test_breathing_strain_is_homogeneous(b2):
    for r, phi in [(0.0, 0.0), (35e-9, 0.3), (120e-9, np.pi / 2)]:
        assert strain_at(b2, QDPosition(r, phi)).e_zz == pytest.approx(7.0e-8)


def test_strain_outside_cross_section(b2):
    with pytest.raises(ValidationError):
        strain_at(b2, QDPosition(200e-9, 0.0))


def test_deformation_potential_shifts(f1x, b2):
    dp = DeformationPotentials()
    f1x_shift = frequency_shift_from_strain(f1x.strain_anchor, dp)
    b2_shift = frequency_shift_from_strain(b2.strain_anchor, dp)
    assert abs(f1x_shift) / TWO_PI == pytest.approx(0.08e9, rel=0.1)
    assert abs(b2_shift) / TWO_PI == pytest.approx(0.10e9, rel=0.1)
    assert frequency_shift_from_strain(StrainTensor(0.0, 0.0, 0.0), dp) == 0.0


def test_frequency_shift_is_additive():
    s1 = StrainTensor(3e-8, -1e-8, -0.9e-8)
    s2 = StrainTensor(-2e-9, 4e-9, 1e-9)
    total = frequency_shift_from_strain(s1 + s2)
    assert total == pytest.approx(frequency_shift_from_strain(s1) + frequency_shift_from_strain(s2), rel=1e-12)


def test_coupling_from_strain(f1x, b2):
    lam = coupling_from_strain(f1x, QDPosition(45e-9, 0.0))
    assert 1.4e5 < lam / TWO_PI < 1.9e5
    assert 0.1 < lam / (TWO_PI * 280e3) < 10
    doubled = MechMode(
        "F1x", f1x.family, 1, f1x.omega_m, f1x.gamma_m, f1x.m_eff,
        strain_anchor=f1x.strain_anchor.scaled(2.0),
    )
    assert coupling_from_strain(doubled, QDPosition(45e-9, 0.0)) == pytest.approx(2 * lam)
    assert coupling_from_strain(b2, QDPosition(10e-9, 0.2)) == pytest.approx(
        coupling_from_strain(b2, QDPosition(90e-9, 1.2))
    )
    with pytest.raises(ValidationError):
        coupling_from_strain(f1x, QDPosition(45e-9, 0.0), temperature=0.0)


@pytest.mark.parametrize("phi", [np.pi - np.deg2rad(20), -np.deg2rad(20), np.pi + np.deg2rad(20)])
def test_canonical_position_folds_mirrors(phi):
    pos = canonical_position(35e-9, phi)
    assert pos.r == pytest.approx(35e-9)
    assert pos.phi == pytest.approx(np.deg2rad(20))


def test_position_quadrant_is_closed():
    assert QDPosition(10e-9, np.pi / 2).phi == np.pi / 2
    with pytest.raises(ValidationError):
        QDPosition(10e-9, 2.0)
    with pytest.raises(ValidationError):
        QDPosition(-1e-9, 0.0)


def test_uniaxial_check(f1x):
    assert f1x.strain_anchor.uniaxial_mismatch(0.31) < 0.1


def test_device_catalog(device_catalog):
    assert device_catalog.labels == ["F1y", "F1x", "B1", "F2x", "B2", "F3x"]
    assert device_catalog.get("F1x").gamma_m == pytest.approx(TWO_PI * 203.6)
    b1 = device_catalog.get("B1")
    assert b1.gamma_m == pytest.approx(b1.omega_m / 1000)
    assert device_catalog.reference_temperature == 4.0
    with pytest.raises(ValidationError):
        device_catalog.get("T1")


@pytest.mark.parametrize("label, u_th", [
    ("F1x", 12e-12), ("B1", 1.2e-12), ("F2x", 0.5e-12), ("B2", 0.1e-12), ("F3x", 0.1e-12),
])
def test_fem_masses_reproduce_thermal_amplitudes(fem_catalog, device_catalog, label, u_th):
    mode = fem_catalog.get(label)
    assert thermal_rms(mode, 4.0) == pytest.approx(u_th, rel=0.1)
    assert device_catalog.get(label).m_eff == pytest.approx(mode.m_eff)


def test_catalog_schema_errors(tmp_path):
    bad_json = tmp_path / "broken.json"
    bad_json.write_text('{"modes": [\n  {"label": "F1x",}\n]}')
    with pytest.raises(ValidationError, match="broken.json:2"):
        load_catalog(bad_json)
    record = {"label": "F1x", "family": "flexural-x", "order": 1, "freq_over_2pi_Hz": 6e5, "m_eff_kg": 2.6e-14,
              "anchor": {"r_m": 4.5e-8, "phi_rad": 0.0, "e_zz": 1e-8, "e_xx": 0.0, "e_yy": 0.0}}
    with pytest.raises(ValidationError, match="gamma_m_over_2pi_Hz or Q"):
        catalog_from_dict({"modes": [record]})
    missing = dict(record, Q=1000)
    del missing["m_eff_kg"]
    with pytest.raises(ValidationError, match="m_eff_kg"):
        catalog_from_dict({"modes": [missing]})
    path = tmp_path / "ok.json"
    path.write_text(json.dumps({"modes": [dict(record, Q=1000), dict(record, label="F1x", Q=500)]}))
    with pytest.raises(ValidationError, match="duplicate"):
        load_catalog(path)
    with pytest.raises(ValidationError):
        load_catalog(tmp_path / "absent.json")
