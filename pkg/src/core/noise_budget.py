"""
Read-out noise budget

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Closed-form theory of the added noise of the fluorescence read-out:
imprecision from photon shot noise, back-action from fluctuations of the
force exerted by the emitter, the thermal displacement spectrum, the
Heisenberg product and the standard-quantum-limit conditions. All PSDs in
this module are double-sided symmetrized densities.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from tqdm import tqdm

from src.core.emitter import (
    DriveCondition,
    Emitter,
    inhomogeneous_hwhm,
    power_broadened_hwhm,
    rf_rate,
    rf_slope,
    voigt_rate,
    voigt_slope,
)
from src.core.errors import DivergentSensitivityError, NoCrossoverError, NumericalError, ValidationError
from src.core.mechanics import (
    MechMode,
    susceptibility,
    thermal_occupation,
    thermal_to_zpf_ratio,
    zero_point,
)
from src.core.units import HBAR

logger = logging.getLogger(__name__)

SWEEP_VARIABLES = ("omega_r", "detuning", "efficiency", "coupling")
HEISENBERG_FLOOR = (0.5 * HBAR) ** 2


@dataclass(frozen=True)
class ReadoutConfig:
    """Operating point of the read-out.

    Attributes:
        emitter: two-level emitter
        drive: Rabi frequency and detuning
        mode: mechanical mode being read out
        coupling: hybrid coupling lambda, rad/s
        efficiency: overall detection efficiency, (0, 1]
        temperature: bath temperature, K
        inhomogeneous: evaluate rate and slope on the Voigt profile
    """

    emitter: Emitter
    drive: DriveCondition
    mode: MechMode
    coupling: float
    efficiency: float = 1.0
    temperature: float = 4.0
    inhomogeneous: bool = False

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ValidationError(f"efficiency must lie in (0, 1], got {self.efficiency}")
        if not np.isfinite(self.coupling) or self.coupling < 0:
            raise ValidationError(f"coupling must be >= 0, got {self.coupling}")
        if not np.isfinite(self.temperature) or self.temperature < 0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")

    def with_drive(self, omega_r=None, detuning=None):
        drive = DriveCondition(
            omega_r=self.drive.omega_r if omega_r is None else omega_r,
            detuning=self.drive.detuning if detuning is None else detuning,
        )
        return replace(self, drive=drive)


@dataclass(frozen=True)
class FiguresOfMerit:
    gamma_opt: float
    cooperativity: float
    n_coherent: float
    n_thermal: float
    dephasing: float


@dataclass(frozen=True, eq=False)
class NoiseBudget:
    """Noise contributions at one operating point, on the grid `omega`."""

    omega: np.ndarray
    s_xx_imprecision: float
    s_ff_backaction: float
    s_xx_backaction: np.ndarray
    s_xx_thermal: np.ndarray
    s_xx_added: np.ndarray
    heisenberg_product: float
    gamma_opt: float
    cooperativity: float

    @property
    def s_xx_total(self):
        return self.s_xx_thermal + self.s_xx_added


def operating_hwhm(cfg):
    if cfg.inhomogeneous:
        return float(inhomogeneous_hwhm(cfg.emitter, cfg.drive.omega_r))
    return float(power_broadened_hwhm(cfg.emitter, cfg.drive.omega_r))


def emitted_rate(cfg):
    if cfg.inhomogeneous:
        return voigt_rate(cfg.emitter, cfg.drive)
    return rf_rate(cfg.emitter, cfg.drive)


def emitted_slope(cfg):
    if cfg.inhomogeneous:
        return voigt_slope(cfg.emitter, cfg.drive)
    return rf_slope(cfg.emitter, cfg.drive)


def imprecision_psd(cfg):
    """White imprecision noise (u_zpf/lambda)^2 * N / (eps * alpha^2), m^2/Hz."""
    slope = emitted_slope(cfg)
    if slope == 0.0 or cfg.coupling == 0.0:
        raise DivergentSensitivityError(
            f"read-out gain vanishes (slope={slope:.3g}, coupling={cfg.coupling:.3g}) at "
            f"detuning={cfg.drive.detuning:.4g} rad/s, omega_r={cfg.drive.omega_r:.4g} rad/s"
        )
    u_zpf = zero_point(cfg.mode)
    return (u_zpf / cfg.coupling) ** 2 * emitted_rate(cfg) / (cfg.efficiency * slope ** 2)


def imprecision_psd_at_rate(cfg, rate):
    """Imprecision of the half-maximum operating point at emitted rate `rate`."""
    if cfg.coupling == 0.0 or rate <= 0.0:
        raise DivergentSensitivityError("imprecision diverges for zero coupling or zero rate")
    hwhm = float(power_broadened_hwhm(cfg.emitter, cfg.drive.omega_r))
    return (zero_point(cfg.mode) * hwhm / cfg.coupling) ** 2 / (cfg.efficiency * rate)


def _force_per_photon(cfg):
    return (HBAR * cfg.coupling / (zero_point(cfg.mode) * cfg.emitter.gamma_sp)) ** 2


def backaction_force_psd(cfg):
    return _force_per_photon(cfg) * emitted_rate(cfg)


def backaction_displacement_psd(cfg, omega):
    return np.abs(susceptibility(cfg.mode, omega)) ** 2 * backaction_force_psd(cfg)


def backaction_psd_at_rate(cfg, rate, omega=None):
    omega = cfg.mode.omega_m if omega is None else omega
    return np.abs(susceptibility(cfg.mode, omega)) ** 2 * _force_per_photon(cfg) * rate


def thermal_psd(mode, temperature, omega):
    """Thermal displacement PSD including the zero-point contribution."""
    n_bar = thermal_occupation(mode, temperature)
    chi2 = np.abs(susceptibility(mode, omega)) ** 2
    return chi2 * mode.m_eff * mode.gamma_m * HBAR * mode.omega_m * (2.0 * n_bar + 1.0)


def heisenberg_product(cfg):
    """Product of imprecision and back-action force PSDs, (J s)^2."""
    delta = cfg.drive.detuning
    if delta == 0.0:
        raise DivergentSensitivityError("Heisenberg product diverges at zero detuning")
    if cfg.inhomogeneous:
        ratio = (emitted_rate(cfg) / emitted_slope(cfg)) ** 2
    else:
        hwhm = float(power_broadened_hwhm(cfg.emitter, cfg.drive.omega_r))
        ratio = ((delta ** 2 + hwhm ** 2) / (2.0 * delta)) ** 2
    return (HBAR / cfg.emitter.gamma_sp) ** 2 * ratio / cfg.efficiency


def crossover_rate(cfg):
    """Emitted rate at which imprecision and back-action balance at omega_m."""
    if cfg.coupling == 0.0:
        raise NoCrossoverError("no crossover without coupling")
    hwhm = float(power_broadened_hwhm(cfg.emitter, cfg.drive.omega_r))
    return (
        hwhm * cfg.emitter.gamma_sp * cfg.mode.gamma_m
        / (2.0 * np.sqrt(cfg.efficiency) * cfg.coupling ** 2)
    )


def observability_threshold(cfg):
    """Smallest lambda^2 for which the crossover stays below gamma_sp / 4."""
    hwhm = float(power_broadened_hwhm(cfg.emitter, cfg.drive.omega_r))
    return 2.0 * hwhm * cfg.mode.gamma_m / np.sqrt(cfg.efficiency)


def figures_of_merit(cfg):
    lam2 = cfg.coupling ** 2
    return FiguresOfMerit(
        gamma_opt=lam2 / cfg.emitter.gamma_sp,
        cooperativity=lam2 / (cfg.emitter.gamma_sp * cfg.mode.gamma_m),
        n_coherent=lam2 / cfg.mode.gamma_m ** 2,
        n_thermal=thermal_occupation(cfg.mode, cfg.temperature),
        dephasing=cfg.coupling * thermal_to_zpf_ratio(cfg.mode, cfg.temperature),
    )


def evaluate_budget(cfg, omega_grid=None):
    omega = np.atleast_1d(np.asarray(cfg.mode.omega_m if omega_grid is None else omega_grid, dtype=float))
    s_imp = imprecision_psd(cfg)
    s_ff = backaction_force_psd(cfg)
    s_ba = np.abs(susceptibility(cfg.mode, omega)) ** 2 * s_ff
    fom = figures_of_merit(cfg)
    return NoiseBudget(
        omega=omega,
        s_xx_imprecision=s_imp,
        s_ff_backaction=s_ff,
        s_xx_backaction=s_ba,
        s_xx_thermal=thermal_psd(cfg.mode, cfg.temperature, omega),
        s_xx_added=s_imp + s_ba,
        heisenberg_product=heisenberg_product(cfg),
        gamma_opt=fom.gamma_opt,
        cooperativity=fom.cooperativity,
    )


def noise_spectrum(cfg, omega_grid):
    budget = evaluate_budget(cfg, omega_grid)
    return pd.DataFrame({
        "omega_rad_per_s": budget.omega,
        "freq_Hz": budget.omega / (2.0 * np.pi),
        "s_xx_thermal": budget.s_xx_thermal,
        "s_xx_imprecision": np.full_like(budget.omega, budget.s_xx_imprecision),
        "s_xx_backaction": budget.s_xx_backaction,
        "s_xx_added": budget.s_xx_added,
        "s_xx_total": budget.s_xx_total,
    })


def _validate_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("sweep grid must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(grid)):
        raise ValidationError("sweep grid contains non-finite values")
    if grid.size > 1:
        steps = np.diff(grid)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValidationError("sweep grid must be strictly monotone")
    return grid


def _point_config(cfg, variable, value, lock_detuning):
    if variable == "omega_r":
        point = cfg.with_drive(omega_r=value)
    elif variable == "detuning":
        return cfg.with_drive(detuning=value)
    elif variable == "efficiency":
        point = replace(cfg, efficiency=value)
    else:
        point = replace(cfg, coupling=value)
    if lock_detuning:
        point = point.with_drive(detuning=operating_hwhm(point))
    return point


def _sweep_row(cfg, variable, value, lock_detuning):
    point = _point_config(cfg, variable, value, lock_detuning)
    u_zpf = zero_point(point.mode)
    row = {
        variable: value,
        "omega_r": point.drive.omega_r,
        "detuning": point.drive.detuning,
        "efficiency": point.efficiency,
        "coupling": point.coupling,
        "hwhm": operating_hwhm(point),
        "emitted_rate": emitted_rate(point),
        "zpf_level": u_zpf ** 2 / point.mode.gamma_m,
    }
    try:
        budget = evaluate_budget(point)
    except DivergentSensitivityError as exc:
        logger.warning("%s=%.4g: %s", variable, value, exc)
        s_ff = backaction_force_psd(point)
        s_ba = float(backaction_displacement_psd(point, point.mode.omega_m))
        fom = figures_of_merit(point)
        row.update(
            s_xx_imprecision=np.inf, s_ff_backaction=s_ff, s_xx_backaction=s_ba,
            s_xx_thermal=float(thermal_psd(point.mode, point.temperature, point.mode.omega_m)),
            s_xx_added=np.inf, heisenberg_product=np.inf,
            gamma_opt=fom.gamma_opt, cooperativity=fom.cooperativity,
        )
    else:
        row.update(
            s_xx_imprecision=budget.s_xx_imprecision,
            s_ff_backaction=budget.s_ff_backaction,
            s_xx_backaction=float(budget.s_xx_backaction[0]),
            s_xx_thermal=float(budget.s_xx_thermal[0]),
            s_xx_added=float(budget.s_xx_added[0]),
            heisenberg_product=budget.heisenberg_product,
            gamma_opt=budget.gamma_opt,
            cooperativity=budget.cooperativity,
        )
    row["heisenberg_ratio"] = row["heisenberg_product"] / HEISENBERG_FLOOR
    return row


def budget_sweep(cfg, variable, grid, lock_detuning=True, workers=1):
    """Evaluate the budget at omega_m for every value of one sweep variable.

    Args:
        cfg: template ReadoutConfig
        variable: one of omega_r, detuning, efficiency, coupling
        grid: strictly monotone values of the variable (SI, rad/s for rates)
        lock_detuning: keep the detuning at the half-maximum point of each row
            (ignored for detuning sweeps)
        workers: thread count for evaluating rows

    Returns:
        DataFrame with one row per grid point, in grid order.
    """
    if variable not in SWEEP_VARIABLES:
        raise ValidationError(f"unknown sweep variable {variable!r}, expected one of {SWEEP_VARIABLES}")
    grid = _validate_grid(grid)
    lock = lock_detuning and variable != "detuning"
    quiet = not logger.isEnabledFor(logging.INFO)

    def evaluate(value):
        return _sweep_row(cfg, variable, float(value), lock)

    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        rows = list(tqdm(pool.map(evaluate, grid), total=grid.size, desc=f"sweep {variable}", disable=quiet))
    return pd.DataFrame(rows)


@dataclass(frozen=True)
class SqlDrive:
    omega_r: float
    detuning: float
    s_xx_imprecision: float
    s_xx_backaction: float
    s_xx_added: float
    zpf_level: float


def _added_at_resonance(cfg, omega_r, lock_detuning):
    point = cfg.with_drive(omega_r=omega_r)
    if lock_detuning:
        point = point.with_drive(detuning=operating_hwhm(point))
    s_imp = imprecision_psd(point)
    s_ba = float(backaction_displacement_psd(point, point.mode.omega_m))
    return point, s_imp, s_ba


def locate_sql_drive(cfg, bounds=None, lock_detuning=True, n_scan=241, xtol=1e-10):
    """Drive that minimizes the added noise at omega_m.

    A log-spaced scan brackets the minimum, which golden-section search then
    refines in log(omega_r).
    """
    gamma_sp = cfg.emitter.gamma_sp
    lo, hi = bounds if bounds is not None else (1e-4 * gamma_sp, 1e2 * gamma_sp)
    if not 0.0 < lo < hi:
        raise ValidationError(f"invalid drive bounds ({lo}, {hi})")

    def objective(log_omega):
        _, s_imp, s_ba = _added_at_resonance(cfg, float(np.exp(log_omega)), lock_detuning)
        return s_imp + s_ba

    scan = np.linspace(np.log(lo), np.log(hi), n_scan)
    values = np.array([objective(x) for x in scan])
    i = int(np.argmin(values))
    if i == 0 or i == n_scan - 1:
        raise NumericalError(f"added-noise minimum lies on the drive bound ({np.exp(scan[i]):.4g} rad/s)")
    result = minimize_scalar(objective, bracket=(scan[i - 1], scan[i], scan[i + 1]),
                             method="golden", tol=xtol)
    omega_r = float(np.exp(result.x))
    point, s_imp, s_ba = _added_at_resonance(cfg, omega_r, lock_detuning)
    logger.debug("SQL drive at omega_r=%.5g rad/s (%d evaluations)", omega_r, result.nfev)
    return SqlDrive(
        omega_r=omega_r,
        detuning=point.drive.detuning,
        s_xx_imprecision=s_imp,
        s_xx_backaction=s_ba,
        s_xx_added=s_imp + s_ba,
        zpf_level=zero_point(cfg.mode) ** 2 / cfg.mode.gamma_m,
    )
