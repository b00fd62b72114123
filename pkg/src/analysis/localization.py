"""
Emitter localization from relative mode amplitudes

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

The noise power of a mode scales with the square of the axial strain it
produces at the emitter. Dividing every peak area by that of a breathing
reference mode, whose strain is uniform over the cross-section, leaves the
spatial dependence of the flexural modes. A two-stage grid search over the
canonical quadrant then finds the position that reproduces the measured
ratios best.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from src.core.errors import UnresolvablePositionError, ValidationError
from src.core.mechanics import QDPosition, canonical_position, predicted_zz_strain

logger = logging.getLogger(__name__)

DEFAULT_REFERENCE = "B2"
R_MAX = 100e-9
COARSE_STEP = (5e-9, np.deg2rad(5.0))
FINE_STEP = (1e-9, np.deg2rad(1.0))
REFINE_HALF_WIDTH = 2
RELATIVE_SIGMA = 0.1
ABSOLUTE_SIGMA = 0.01


@dataclass(frozen=True, eq=False)
class LocalizationResult:
    position: QDPosition
    chi2: float
    comparison: pd.DataFrame
    reference: str
    r_grid: np.ndarray = field(default_factory=lambda: np.empty(0))
    phi_grid: np.ndarray = field(default_factory=lambda: np.empty(0))
    chi2_map: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))


def predicted_amplitudes(catalog, pos, labels, reference=DEFAULT_REFERENCE):
    """(e_zz,k / e_zz,ref)^2 at pos for each label."""
    radius = catalog.cross_section_radius
    ref = predicted_zz_strain(catalog.get(reference), pos, radius)
    if ref == 0:
        raise UnresolvablePositionError(f"reference mode {reference} has no axial strain")
    return np.array([(predicted_zz_strain(catalog.get(k), pos, radius) / ref) ** 2 for k in labels])


def _chi2_grid(catalog, labels, measured, sigma, reference, r_values, phi_values):
    out = np.empty((r_values.size, phi_values.size))
    for i, r in enumerate(r_values):
        for j, phi in enumerate(phi_values):
            pred = predicted_amplitudes(catalog, QDPosition(float(r), float(phi)), labels, reference)
            out[i, j] = np.sum(((measured - pred) / sigma) ** 2)
    return out


def _axis(center, step, n_half, upper):
    values = center + step * np.arange(-n_half, n_half + 1)
    return values[(values >= -1e-15) & (values <= upper + 1e-15)].clip(0.0, upper)


def localize_qd(amplitudes, catalog, reference=DEFAULT_REFERENCE, sigma=None, r_max=R_MAX,
                coarse_step=COARSE_STEP, fine_step=FINE_STEP):
    """Grid-search the emitter position.

    Args:
        amplitudes: mapping from mode label to peak area relative to the
            reference mode; the reference itself may be omitted
        catalog: ModeCatalog holding every labelled mode
        reference: label of the breathing mode used as unit
        sigma: optional mapping of per-mode uncertainties; defaults to 10 %
            of each amplitude plus 1 % of the largest
        r_max: outer radius of the search, m
        coarse_step, fine_step: (dr in m, dphi in rad) of the two stages

    Returns:
        LocalizationResult with the refined position and the coarse chi2 map.
    """
    if reference not in catalog.labels:
        raise ValidationError(f"reference mode {reference} missing from the catalog")
    if catalog.get(reference).is_flexural:
        raise ValidationError(f"reference mode {reference} must be a breathing mode")
    measured = {str(k): float(v) for k, v in amplitudes.items() if str(k) != reference}
    for label, value in measured.items():
        if label not in catalog.labels:
            raise ValidationError(f"mode {label} is not in the catalog")
        if value < 0 or not np.isfinite(value):
            raise ValidationError(f"relative amplitude of {label} must be finite and >= 0")
    labels = list(measured)
    if not any(catalog.get(k).is_flexural for k in labels):
        raise UnresolvablePositionError("no flexural mode among the amplitudes, position is not resolvable")
    if r_max > catalog.cross_section_radius:
        raise ValidationError("search radius exceeds the wire cross-section")

    values = np.array([measured[k] for k in labels])
    if sigma is None:
        errors = RELATIVE_SIGMA * values + ABSOLUTE_SIGMA * max(values.max(), 1e-12)
    else:
        errors = np.array([float(sigma[k]) for k in labels])
        if np.any(errors <= 0):
            raise ValidationError("amplitude uncertainties must be > 0")

    dr, dphi = coarse_step
    r_coarse = np.linspace(0.0, r_max, int(round(r_max / dr)) + 1)
    phi_coarse = np.linspace(0.0, 0.5 * np.pi, int(round(0.5 * np.pi / dphi)) + 1)
    coarse = _chi2_grid(catalog, labels, values, errors, reference, r_coarse, phi_coarse)
    i, j = np.unravel_index(np.argmin(coarse), coarse.shape)

    fr, fphi = fine_step
    r_fine = _axis(r_coarse[i], fr, int(round(REFINE_HALF_WIDTH * dr / fr)), r_max)
    phi_fine = _axis(phi_coarse[j], fphi, int(round(REFINE_HALF_WIDTH * dphi / fphi)), 0.5 * np.pi)
    fine = _chi2_grid(catalog, labels, values, errors, reference, r_fine, phi_fine)
    k, m = np.unravel_index(np.argmin(fine), fine.shape)
    position = canonical_position(float(r_fine[k]), float(phi_fine[m]))

    predicted = predicted_amplitudes(catalog, position, labels, reference)
    comparison = pd.DataFrame({"label": labels, "measured": values, "predicted": predicted, "sigma": errors})
    logger.info(
        "QD localized at r = %.1f nm, phi = %.1f deg (chi2 %.3g over %d modes)",
        position.r * 1e9, np.rad2deg(position.phi), fine[k, m], len(labels),
    )
    return LocalizationResult(position, float(fine[k, m]), comparison, reference, r_coarse, phi_coarse, coarse)
