"""
Figure recipes

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Named presets that regenerate the data behind each figure with
a single command:

    fig2a   NPSD of the F1x/F1y doublet from a simulated record
    fig2b   peak areas against detuning and the coupling fits
    fig3b   HBT mode ladder (correlation model, or simulated tags with a
            duration), with localization
    fig4a   budget versus drive at lambda = 0.1 sqrt(gamma_sp gamma_m)
    fig4b   budget versus drive at lambda = 10 sqrt(gamma_sp gamma_m)
    fig4c   Heisenberg product versus drive
    figs2   back-action force noise versus drive
    figs3   imprecision noise versus drive
    figs4   displacement spectra at the drive of minimum added noise, T = 0

The simulation recipes start from configs/fast_config.yaml, a desk-scale
stand-in for the device (higher efficiency, no blinking, sub-second
records); pass another configuration to change that.
"""

import logging
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.analysis.fitting import extract_coupling, predicted_area
from src.analysis.peaks import assign_modes, find_peaks_and_areas
from src.analysis.spectra import G2Table, g2_histogram, npsd_from_g2, trace_npsd
from src.core.emitter import DriveCondition, Emitter, lineshape_from_emitter, voigt_rate
from src.core.errors import NumericalError, ValidationError
from src.core.mechanics import (
    MechMode,
    QDPosition,
    coupling_from_strain,
    predicted_zz_strain,
    thermal_to_zpf_ratio,
    zero_point,
)
from src.core.noise_budget import ReadoutConfig, budget_sweep, locate_sql_drive, noise_spectrum
from src.core.units import TWO_PI
from src.pipeline.commands import CommandResult, area_table, catalog_windows, cmd_analyze, cmd_localize, cmd_simulate
from src.pipeline.config import load_run_config
from src.simulation.brownian import MAX_STEP_FRACTION
from src.simulation.g2_model import g2_model
from src.simulation.photons import BlinkingModel, bin_tags
from src.simulation.simulator import run_simulation
from src.utils.plotting import plot_area_fits, plot_spectrum, plot_sweep
from src.utils.utils import provenance, thread_count, write_csv, write_json

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parents[2]
DEFAULT_CONFIG = PROJECT_ROOT / "configs" / "fast_config.yaml"

FIG2B_DETUNINGS = (0.5, 0.75, 1.0, 1.25, 1.5)
FIG3B_POSITION = (35e-9, 20.0)
FIG3B_BIN = 2e-9
FIG3B_TAU_MAX = 200e-6
FIG3B_WINDOW = 15e3
FIG3B_WINDOW_IN_RBW = 2.0
FIG3B_WINDOW_IN_LINEWIDTHS = 25.0
FIG3B_RECORD = 1200.0
# the model carries no blinking or detector artefacts to cut away
FIG3B_TAU_MIN = 0.0

# parameter set of the noise-budget figures
FIGURE_GAMMA_SP = 1e9
FIGURE_MODE = MechMode(label="F1", family="flexural-x", order=1,
                       omega_m=TWO_PI * 607.9e3, gamma_m=TWO_PI * 300.0, m_eff=2.6e-14)
FIGURE_DRIVE_RANGE = (1e-3, 1e2)
FIGURE_DRIVE_POINTS = 121
FIGURE_COUPLING = TWO_PI * 280e3

RECIPES = {}


def recipe(name):
    def register(func):
        RECIPES[name] = func
        return func
    return register


def run_recipe(name, out_dir, duration=None, seed=None, config=None):
    """Run a named recipe; simulation recipes accept duration, seed and config."""
    if name not in RECIPES:
        raise ValidationError(f"unknown recipe {name!r}, expected one of {', '.join(sorted(RECIPES))}")
    out = Path(out_dir) / name
    logger.info("recipe %s -> %s", name, out)
    return RECIPES[name](out, duration=duration, seed=seed, config=config)


def _load(config, duration, seed, extra=None):
    overrides = {"simulation.duration_s": duration, "seed": seed}
    overrides.update(extra or {})
    return load_run_config(config or DEFAULT_CONFIG, overrides)


# ---------------------------------------------------------------------------
# simulated spectra
# ---------------------------------------------------------------------------

@recipe("fig2a")
def fig2a(out, duration=None, seed=None, config=None):
    cfg = _load(config, duration, seed)
    result = cmd_simulate(cfg, out)
    analysis = cmd_analyze(result.files["tags"], cfg=cfg, out_dir=out)
    result.files.update(analysis.files)
    result.products.update(analysis.products)
    return result


@recipe("fig2b")
def fig2b(out, duration=None, seed=None, config=None):
    base = _load(config, duration, seed)
    sim = base.require("simulation")
    labels = [m.label for m, _ in sim.modes]
    temperature = sim.temperature
    quiet = not logger.isEnabledFor(logging.INFO)

    detunings, peak_lists = [], []
    for i, multiple in enumerate(tqdm(FIG2B_DETUNINGS, desc="detunings", disable=quiet)):
        cfg = _load(config, duration, base.seed + i, {"drive.detuning_in_hwhm": multiple})
        run = run_simulation(cfg.simulation)
        options = cfg.analysis
        spec = trace_npsd(bin_tags(run.tags, options.bin_width), segment_length=options.segment_length)
        windows = dict(options.windows) or catalog_windows(spec, cfg.catalog, options.window_half_width, labels)
        peaks = assign_modes(find_peaks_and_areas(spec, windows), cfg.catalog, options.assign_tolerance)
        detunings.append(cfg.simulation.drive.detuning)
        peak_lists.append(peaks)

    lineshape = lineshape_from_emitter(sim.emitter, sim.drive.omega_r, sim.efficiency)
    table = area_table(detunings, peak_lists, lineshape, base.catalog, temperature)
    fits, rows = {}, []
    for label in labels:
        group = table[table["label"] == label]
        fit = extract_coupling(group["detuning_rad_per_s"].to_numpy(), group["area"].to_numpy(), lineshape,
                               base.catalog.get(label), temperature=temperature,
                               area_errors=group["area_error"].to_numpy())
        fits[label] = fit
        true = dict((m.label, lam) for m, lam in sim.modes)[label]
        rows.append({"label": label, "lambda_over_2pi_Hz": fit.coupling / TWO_PI,
                     "stderr_over_2pi_Hz": fit.stderr / TWO_PI, "simulated_over_2pi_Hz": true / TWO_PI})
    table["predicted"] = [
        float(predicted_area(fits[row.label].coupling, row.detuning_rad_per_s, lineshape,
                             base.catalog.get(row.label), temperature))
        if row.label in fits else np.nan
        for row in table.itertuples()
    ]

    record = provenance("recipe fig2b", config=base.raw, detunings_in_hwhm=list(FIG2B_DETUNINGS))
    result = CommandResult()
    result.add("areas", write_csv(table, out / "areas.csv", record))
    result.add("couplings", write_csv(pd.DataFrame(rows), out / "couplings.csv", record))
    plot_frame = table.rename(columns={"detuning_rad_per_s": "detuning"})
    result.add("areas_svg", plot_area_fits(plot_frame, out / "areas.svg", fits))
    result.products.update(areas=table, couplings=fits)
    return result


@recipe("fig3b")
def fig3b(out, duration=None, seed=None, config=None):
    """Mode ladder of the two-detector correlation at the reference QD position (35 nm, 20 deg).

    Couplings follow the axial strain at the emitter and are scaled so that
    the breathing reference keeps its deformation-potential coupling; the
    relative peak areas are then localized again. Without a duration the
    ladder comes from the correlation model; with one, a record of that
    length is simulated, split onto two detectors and histogrammed.
    """
    cfg = _load(config, duration, seed)
    catalog, emitter = cfg.require("catalog"), cfg.require("emitter")
    drive = cfg.require("drive")
    temperature = catalog.reference_temperature
    radius = catalog.cross_section_radius
    r, phi_deg = FIG3B_POSITION
    pos = QDPosition(r, np.deg2rad(phi_deg))

    ref = catalog.get("B2")
    scale = coupling_from_strain(ref, pos, temperature=temperature, cross_section_radius=radius) \
        * thermal_to_zpf_ratio(ref, temperature) / abs(predicted_zz_strain(ref, pos, radius))
    modes = [(m, scale * abs(predicted_zz_strain(m, pos, radius)) / thermal_to_zpf_ratio(m, temperature))
             for m in catalog]

    if duration is None:
        spec = _modelled_ladder(cfg, emitter, drive, modes, temperature)
        source = "model"
    else:
        spec = _simulated_ladder(cfg, modes)
        source = "tags"
    half_width = max(FIG3B_WINDOW, FIG3B_WINDOW_IN_RBW * spec.resolution_bandwidth)
    windows = {m.label: (m.freq_hz - w, m.freq_hz + w)
               for m, w in ((m, max(half_width, FIG3B_WINDOW_IN_LINEWIDTHS * m.gamma_m / TWO_PI)) for m in catalog)}
    peaks = assign_modes(find_peaks_and_areas(spec, windows), catalog, cfg.analysis.assign_tolerance)

    record = provenance("recipe fig3b", config=cfg.raw, position_nm_deg=[r * 1e9, phi_deg], source=source)
    result = CommandResult()
    couplings = pd.DataFrame({"label": [m.label for m, _ in modes],
                              "lambda_over_2pi_Hz": [lam / TWO_PI for _, lam in modes]})
    result.add("couplings", write_csv(couplings, out / "couplings.csv", record))
    result.add("spectrum", write_csv(pd.DataFrame({"frequency_Hz": spec.frequency, "npsd_per_Hz": spec.density}),
                                     out / "ladder.csv", record))
    result.add("spectrum_svg", plot_spectrum(spec, out / "ladder.svg", peaks, title="HBT mode ladder"))
    amplitudes = pd.DataFrame({"label": [p.label for p in peaks], "amplitude": [p.area for p in peaks]})
    amplitudes_path = result.add("amplitudes", write_csv(amplitudes, out / "amplitudes.csv", record))
    located = cmd_localize(amplitudes_path, catalog, out_dir=out, config=cfg.raw)
    result.files.update(located.files)
    result.products.update(spectrum=spec, peaks=peaks, localization=located.products["localization"])
    return result


def _modelled_ladder(cfg, emitter, drive, modes, temperature):
    sim = cfg.simulation
    blinking = sim.blinking if sim is not None else BlinkingModel()
    efficiency = sim.efficiency if sim is not None else 1.0
    n_half = int(round(FIG3B_TAU_MAX / FIG3B_BIN))
    tau = np.arange(-n_half, n_half + 1) * FIG3B_BIN
    g2 = g2_model(tau, emitter, drive, blinking, modes, temperature=temperature)
    rate = efficiency * blinking.on_fraction * voigt_rate(emitter, drive)
    table = G2Table(tau=tau, g2=g2, counts=np.zeros(tau.size, dtype=np.int64), bin_width=FIG3B_BIN,
                    mean_rate=rate, duration=FIG3B_RECORD, plateau=1.0)
    return npsd_from_g2(table, tau_min=FIG3B_TAU_MIN)


def _simulated_ladder(cfg, modes):
    sim = cfg.require("simulation")
    f_max = max(m.freq_hz for m, _ in modes)
    run_cfg = replace(sim, modes=tuple(modes), detector=replace(sim.detector, channels=2),
                      dt=min(sim.dt, MAX_STEP_FRACTION / f_max))
    tags = run_simulation(run_cfg).tags
    options = cfg.analysis
    table = g2_histogram(tags, FIG3B_BIN, options.tau_max)
    return npsd_from_g2(table, tau_min=options.tau_min)



# ---------------------------------------------------------------------------
# noise budget
# ---------------------------------------------------------------------------

def figure_readout(coupling, temperature=0.0, efficiency=1.0):
    emitter = Emitter(gamma_sp=FIGURE_GAMMA_SP)
    return ReadoutConfig(
        emitter=emitter,
        drive=DriveCondition(omega_r=FIGURE_GAMMA_SP, detuning=FIGURE_GAMMA_SP),
        mode=FIGURE_MODE,
        coupling=coupling,
        efficiency=efficiency,
        temperature=temperature,
    )


def _drive_grid():
    lo, hi = FIGURE_DRIVE_RANGE
    return FIGURE_GAMMA_SP * np.geomspace(lo, hi, FIGURE_DRIVE_POINTS)


def _sweep_recipe(out, name, readout, columns, ylabel, reference=None, extra=None):
    frame = budget_sweep(readout, "omega_r", _drive_grid(), workers=thread_count())
    frame["omega_r_over_gamma_sp"] = frame["omega_r"] / readout.emitter.gamma_sp
    for key, values in (extra or {}).items():
        frame[key] = values(frame)
    record = provenance(f"recipe {name}", config={
        "gamma_sp_per_s": readout.emitter.gamma_sp,
        "mode": FIGURE_MODE.label,
        "lambda_rad_per_s": readout.coupling,
        "efficiency_fraction": readout.efficiency,
        "temperature_K": readout.temperature,
    })
    result = CommandResult()
    result.add("sweep", write_csv(frame, out / f"{name}.csv", record))
    result.add("sweep_svg", plot_sweep(frame, "omega_r_over_gamma_sp", columns, out / f"{name}.svg",
                                       xlabel="Omega_R / gamma_sp", ylabel=ylabel, reference=reference))
    result.products["sweep"] = frame
    try:
        sql = locate_sql_drive(readout)
    except NumericalError as exc:
        logger.warning("%s: %s", name, exc)
    else:
        result.add("sql", write_json(asdict(sql), out / f"{name}_sql.json", record))
        result.products["sql"] = sql
    return result


def _sqrt_gamma(factor):
    return factor * np.sqrt(FIGURE_GAMMA_SP * FIGURE_MODE.gamma_m)


@recipe("fig4a")
def fig4a(out, **_):
    readout = figure_readout(_sqrt_gamma(0.1))
    return _sweep_recipe(out, "fig4a", readout, ("s_xx_imprecision", "s_xx_backaction", "s_xx_added"),
                         "S_xx (m^2/Hz)", reference=_zpf_level(readout))


@recipe("fig4b")
def fig4b(out, **_):
    readout = figure_readout(_sqrt_gamma(10.0))
    return _sweep_recipe(out, "fig4b", readout, ("s_xx_imprecision", "s_xx_backaction", "s_xx_added"),
                         "S_xx (m^2/Hz)", reference=_zpf_level(readout))


@recipe("fig4c")
def fig4c(out, **_):
    readout = figure_readout(_sqrt_gamma(1.0))
    closed = {"heisenberg_closed_form": lambda f: 1.0 + 2.0 * (f["omega_r"] / FIGURE_GAMMA_SP) ** 2}
    return _sweep_recipe(out, "fig4c", readout, ("heisenberg_ratio", "heisenberg_closed_form"),
                         "S_xx^I S_FF / (hbar/2)^2", reference=1.0, extra=closed)


@recipe("figs2")
def figs2(out, **_):
    return _sweep_recipe(out, "figs2", figure_readout(FIGURE_COUPLING, temperature=4.0),
                         ("s_ff_backaction",), "S_FF (N^2/Hz)")


@recipe("figs3")
def figs3(out, **_):
    return _sweep_recipe(out, "figs3", figure_readout(FIGURE_COUPLING, temperature=4.0),
                         ("s_xx_imprecision",), "S_xx^I (m^2/Hz)")


@recipe("figs4")
def figs4(out, **_):
    """Thermal, imprecision, back-action and total spectra at the SQL drive."""
    result = CommandResult()
    for tag, factor in (("a", 0.1), ("b", 10.0)):
        readout = figure_readout(_sqrt_gamma(factor))
        sql = locate_sql_drive(readout)
        point = readout.with_drive(omega_r=sql.omega_r, detuning=sql.detuning)
        mode = point.mode
        omega = mode.omega_m + mode.gamma_m * np.linspace(-20.0, 20.0, 801)
        frame = noise_spectrum(point, omega)
        record = provenance(f"recipe figs4{tag}", config={
            "gamma_sp_per_s": FIGURE_GAMMA_SP, "lambda_rad_per_s": point.coupling,
            "omega_r_rad_per_s": sql.omega_r, "detuning_rad_per_s": sql.detuning, "temperature_K": 0.0,
        })
        result.add(f"spectrum_{tag}", write_csv(frame, out / f"figs4{tag}.csv", record))
        result.add(f"spectrum_{tag}_svg", plot_sweep(
            frame, "freq_Hz", ("s_xx_thermal", "s_xx_imprecision", "s_xx_backaction", "s_xx_total"),
            out / f"figs4{tag}.svg", xlabel="Frequency (Hz)", ylabel="S_xx (m^2/Hz)",
            reference=_zpf_level(point), logx=False,
        ))
        result.products[f"spectrum_{tag}"] = frame
        result.products[f"sql_{tag}"] = sql
    return result


def _zpf_level(readout):
    return zero_point(readout.mode) ** 2 / readout.mode.gamma_m
