"""
Mechanical modes of the photonic trumpet

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Mode catalog records, zero-point and thermal amplitudes, the mechanical
susceptibility, analytic strain-shape maps anchored to simulated strain
tensors, and the deformation-potential conversion from strain to an
emitter frequency shift.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.core.errors import ValidationError
from src.core.units import HBAR, K_B, TWO_PI, ev_to_rad_per_s

logger = logging.getLogger(__name__)

FAMILIES = ("flexural-x", "flexural-y", "breathing")
DEFAULT_CROSS_SECTION_RADIUS = 150e-9
DEFAULT_TEMPERATURE = 4.0
MAX_DAMPING_RATIO = 0.1


@dataclass(frozen=True)
class StrainTensor:
    e_zz: float
    e_xx: float
    e_yy: float

    def __post_init__(self):
        if not all(np.isfinite([self.e_zz, self.e_xx, self.e_yy])):
            raise ValidationError("strain components must be finite")

    def __add__(self, other):
        return StrainTensor(self.e_zz + other.e_zz, self.e_xx + other.e_xx, self.e_yy + other.e_yy)

    def scaled(self, factor):
        return StrainTensor(factor * self.e_zz, factor * self.e_xx, factor * self.e_yy)

    @property
    def hydrostatic(self):
        return self.e_xx + self.e_yy + self.e_zz

    @property
    def shear(self):
        return 2.0 * self.e_zz - self.e_xx - self.e_yy

    def uniaxial_mismatch(self, nu):
        """Largest of |e_xx + nu e_zz|, |e_yy + nu e_zz| relative to |e_zz|."""
        if self.e_zz == 0:
            return 0.0
        worst = max(abs(self.e_xx + nu * self.e_zz), abs(self.e_yy + nu * self.e_zz))
        return worst / abs(self.e_zz)


@dataclass(frozen=True)
class QDPosition:
    """Emitter position in the wire cross-section, canonical quadrant."""

    r: float
    phi: float

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r < 0:
            raise ValidationError(f"r must be >= 0, got {self.r}")
        if not (0.0 <= self.phi <= 0.5 * np.pi + 1e-12):
            raise ValidationError(f"phi must lie in [0, pi/2], got {self.phi}")

    @property
    def x(self):
        return self.r * np.cos(self.phi)

    @property
    def y(self):
        return self.r * np.sin(self.phi)


def canonical_position(r, phi):
    """Fold any (r, phi) onto the quadrant the read-out cannot distinguish from."""
    x = abs(r * np.cos(phi))
    y = abs(r * np.sin(phi))
    return QDPosition(r=float(np.hypot(x, y)), phi=float(np.arctan2(y, x)))


@dataclass(frozen=True)
class DeformationPotentials:
    a: float = -8.33
    b: float = -2.0
    nu: float = 0.31

    def __post_init__(self):
        if not 0.0 < self.nu < 0.5:
            raise ValidationError(f"Poisson ratio must lie in (0, 0.5), got {self.nu}")


@dataclass(frozen=True)
class MechMode:
    """One mechanical eigenmode.

    Attributes:
        label: identifier such as F1x or B2
        family: flexural-x, flexural-y or breathing
        order: mode order within the family
        omega_m: angular frequency, rad/s
        gamma_m: energy damping rate, rad/s
        m_eff: motional mass, kg
        strain_anchor: strain per thermal displacement at (anchor_r, anchor_phi)
        anchor_r: radial coordinate of the anchor point, m
        anchor_phi: azimuth of the anchor point, rad
    """

    label: str
    family: str
    order: int
    omega_m: float
    gamma_m: float
    m_eff: float
    strain_anchor: StrainTensor = field(default_factory=lambda: StrainTensor(0.0, 0.0, 0.0))
    anchor_r: float = 45e-9
    anchor_phi: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"{self.label}: unknown family {self.family!r}")
        if not self.omega_m > 0:
            raise ValidationError(f"{self.label}: omega_m must be > 0")
        if not self.gamma_m > 0:
            raise ValidationError(f"{self.label}: gamma_m must be > 0")
        if self.gamma_m / self.omega_m >= MAX_DAMPING_RATIO:
            raise ValidationError(
                f"{self.label}: gamma_m/omega_m = {self.gamma_m / self.omega_m:.3g} "
                f"is not underdamped (limit {MAX_DAMPING_RATIO})"
            )
        if not self.m_eff > 0:
            raise ValidationError(f"{self.label}: m_eff must be > 0")
        if self.family != "breathing" and abs(_shape_coordinate(self, self.anchor_r, self.anchor_phi)) == 0:
            raise ValidationError(f"{self.label}: anchor point lies on the neutral axis")

    @property
    def freq_hz(self):
        return self.omega_m / TWO_PI

    @property
    def is_flexural(self):
        return self.family != "breathing"


def _shape_coordinate(mode, r, phi):
    if mode.family == "flexural-x":
        return r * np.cos(phi)
    if mode.family == "flexural-y":
        return r * np.sin(phi)
    return 1.0


def zero_point(mode):
    return float(np.sqrt(HBAR / (2.0 * mode.m_eff * mode.omega_m)))


def thermal_rms(mode, temperature):
    if temperature < 0:
        raise ValidationError(f"temperature must be >= 0, got {temperature}")
    return float(np.sqrt(K_B * temperature / (mode.m_eff * mode.omega_m ** 2)))


def thermal_to_zpf_ratio(mode, temperature):
    if temperature < 0:
        raise ValidationError(f"temperature must be >= 0, got {temperature}")
    return float(np.sqrt(2.0 * K_B * temperature / (HBAR * mode.omega_m)))


def thermal_occupation(mode, temperature):
    """Bose occupation of the mode at temperature (K)."""
    if temperature < 0:
        raise ValidationError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        return 0.0
    return float(1.0 / np.expm1(HBAR * mode.omega_m / (K_B * temperature)))


def susceptibility(mode, omega):
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (mode.m_eff * (mode.omega_m ** 2 - omega ** 2 - 1j * mode.gamma_m * omega))


def strain_at(mode, pos, cross_section_radius=DEFAULT_CROSS_SECTION_RADIUS):
    """Strain tensor per thermal displacement at pos.

    Flexural modes scale with the signed distance from their neutral plane,
    breathing modes are uniform over the cross-section.
    """
    if pos.r > cross_section_radius:
        raise ValidationError(
            f"position r={pos.r:.3g} m lies outside the cross-section radius {cross_section_radius:.3g} m"
        )
    if not mode.is_flexural:
        return mode.strain_anchor
    factor = _shape_coordinate(mode, pos.r, pos.phi) / _shape_coordinate(mode, mode.anchor_r, mode.anchor_phi)
    return mode.strain_anchor.scaled(float(factor))


def predicted_zz_strain(mode, pos, cross_section_radius=DEFAULT_CROSS_SECTION_RADIUS):
    return strain_at(mode, pos, cross_section_radius).e_zz


def frequency_shift_from_strain(strain, dp=DeformationPotentials()):
    energy_ev = dp.a * strain.hydrostatic + 0.5 * dp.b * strain.shear
    return float(ev_to_rad_per_s(energy_ev))


def coupling_from_strain(mode, pos, dp=DeformationPotentials(), temperature=DEFAULT_TEMPERATURE,
                         cross_section_radius=DEFAULT_CROSS_SECTION_RADIUS):
    """Hybrid coupling (rad/s) implied by the anchored strain at pos.

    temperature is the one at which the anchor tensors were normalized to
    the thermal displacement; the coupling itself is temperature free.
    """
    if not temperature > 0:
        raise ValidationError("coupling_from_strain needs temperature > 0 for the thermal normalization")
    shift = frequency_shift_from_strain(strain_at(mode, pos, cross_section_radius), dp)
    return abs(shift) / thermal_to_zpf_ratio(mode, temperature)


@dataclass(frozen=True)
class ModeCatalog:
    modes: tuple
    reference_temperature: float = DEFAULT_TEMPERATURE
    cross_section_radius: float = DEFAULT_CROSS_SECTION_RADIUS
    source: str = ""

    def __post_init__(self):
        if not self.modes:
            raise ValidationError("mode catalog is empty")
        labels = [m.label for m in self.modes]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate mode labels in catalog: {labels}")

    def __iter__(self):
        return iter(self.modes)

    def __len__(self):
        return len(self.modes)

    @property
    def labels(self):
        return [m.label for m in self.modes]

    def get(self, label):
        for mode in self.modes:
            if mode.label == label:
                return mode
        raise ValidationError(f"mode {label!r} not in catalog ({', '.join(self.labels)})")


_REQUIRED_KEYS = ("label", "family", "order", "freq_over_2pi_Hz", "m_eff_kg", "anchor")
_ANCHOR_KEYS = ("r_m", "phi_rad", "e_zz", "e_xx", "e_yy")


def _mode_from_record(record, where):
    missing = [k for k in _REQUIRED_KEYS if k not in record]
    if missing:
        raise ValidationError(f"{where}: missing keys {missing}")
    anchor = record["anchor"]
    missing = [k for k in _ANCHOR_KEYS if k not in anchor]
    if missing:
        raise ValidationError(f"{where}.anchor: missing keys {missing}")
    omega_m = TWO_PI * float(record["freq_over_2pi_Hz"])
    if "gamma_m_over_2pi_Hz" in record:
        gamma_m = TWO_PI * float(record["gamma_m_over_2pi_Hz"])
    elif "Q" in record:
        gamma_m = omega_m / float(record["Q"])
    else:
        raise ValidationError(f"{where}: give gamma_m_over_2pi_Hz or Q")
    try:
        return MechMode(
            label=str(record["label"]),
            family=str(record["family"]),
            order=int(record["order"]),
            omega_m=omega_m,
            gamma_m=gamma_m,
            m_eff=float(record["m_eff_kg"]),
            strain_anchor=StrainTensor(float(anchor["e_zz"]), float(anchor["e_xx"]), float(anchor["e_yy"])),
            anchor_r=float(anchor["r_m"]),
            anchor_phi=float(anchor["phi_rad"]),
        )
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def catalog_from_dict(data, source="<dict>"):
    if not isinstance(data, dict) or not isinstance(data.get("modes"), list):
        raise ValidationError(f"{source}: catalog must be an object with a 'modes' list")
    modes = tuple(_mode_from_record(rec, f"{source}: modes[{i}]") for i, rec in enumerate(data["modes"]))
    catalog = ModeCatalog(
        modes=modes,
        reference_temperature=float(data.get("reference_temperature_K", DEFAULT_TEMPERATURE)),
        cross_section_radius=float(data.get("cross_section_radius_m", DEFAULT_CROSS_SECTION_RADIUS)),
        source=str(source),
    )
    dp = DeformationPotentials()
    for mode in catalog:
        if mode.family != "breathing" and mode.strain_anchor.uniaxial_mismatch(dp.nu) > 0.5:
            logger.debug("%s: anchor strain far from uniaxial", mode.label)
    return catalog


def load_catalog(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"catalog file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    catalog = catalog_from_dict(data, source=str(path))
    logger.debug("loaded %d modes from %s", len(catalog), path)
    return catalog
