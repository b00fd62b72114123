"""
Pipeline commands

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

One function per command-line verb. Each writes canonical CSV/JSON files
carrying the provenance block of src.utils.utils, plus SVG renderings,
and returns the paths it wrote together with the computed objects.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from src.analysis.fitting import area_gain, extract_coupling, fit_rf_spectrum, predicted_area
from src.analysis.localization import DEFAULT_REFERENCE, localize_qd
from src.analysis.peaks import assign_modes, find_peaks_and_areas
from src.analysis.sensitivity import displacement_sensitivity
from src.analysis.spectra import g2_histogram, npsd_from_g2, trace_npsd
from src.core.emitter import LineshapeParams
from src.core.errors import ChannelCountError, DecodeError, NoCrossoverError, ValidationError
from src.core.mechanics import load_catalog
from src.core.noise_budget import (
    budget_sweep,
    crossover_rate,
    figures_of_merit,
    observability_threshold,
)
from src.pipeline.config import AnalysisOptions
from src.simulation.photons import bin_tags
from src.simulation.simulator import run_simulation
from src.simulation.tag_files import (
    MAGIC,
    describe_tags,
    read_tags,
    read_trace_csv,
    write_tags_binary,
    write_trace_csv,
)
from src.utils.plotting import plot_area_fits, plot_residual_map, plot_spectrum, plot_sweep
from src.utils.utils import (
    file_digest,
    provenance,
    read_csv,
    read_json,
    read_provenance,
    thread_count,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)


@dataclass
class CommandResult:
    """Files written by a command and the objects behind them."""

    files: dict = field(default_factory=dict)
    products: dict = field(default_factory=dict)

    def add(self, key, path):
        self.files[key] = Path(path)
        return path


def _digests(paths):
    return {str(Path(p).name): file_digest(p) for p in paths if p is not None}


def _spectrum_frame(spec):
    return pd.DataFrame({"frequency_Hz": spec.frequency, "npsd_per_Hz": spec.density})


def _peaks_frame(peaks):
    return pd.DataFrame([
        {
            "label": p.label, "center_Hz": p.center, "area": p.area, "area_error": p.area_error,
            "floor_per_Hz": p.floor, "window_lo_Hz": p.window[0], "window_hi_Hz": p.window[1],
            "clipped": p.clipped,
        }
        for p in peaks
    ], columns=["label", "center_Hz", "area", "area_error", "floor_per_Hz", "window_lo_Hz",
                "window_hi_Hz", "clipped"])


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(cfg, out_dir=None):
    """Simulate the configured record and write tags, trace and manifest.

    Outputs carry no timestamps, so the same configuration and seed always
    produce byte-identical files.
    """
    sim = cfg.require("simulation")
    out = Path(out_dir or cfg.out_dir)
    result = CommandResult()
    run = run_simulation(sim)
    tags = run.tags
    record = provenance("simulate", config=cfg.raw, simulation_digest=sim.digest())

    tags_path = result.add("tags", write_tags_binary(tags, out / "tags.ptag"))
    trace = bin_tags(tags, cfg.analysis.bin_width)
    trace_path = result.add("trace", write_trace_csv(trace, out / "trace.csv", record))
    manifest = {
        "command": "simulate",
        "config": cfg.raw,
        "simulation": sim.to_dict(),
        "record": describe_tags(tags),
        "ideal_photons": run.ideal_count,
        "detuning_rms_rad_per_s": run.detuning_rms,
        "digests": _digests([tags_path, trace_path]),
    }
    result.add("manifest", write_json(manifest, out / "manifest.json", provenance("simulate", config=cfg.raw)))
    result.products.update(tags=tags, trace=trace, simulation=run)
    logger.info("simulate: %d tags written to %s", len(tags), out)
    return result


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def load_record(path):
    """Read a tag file (binary or CSV) or a trace CSV; returns (kind, record)."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"input not found: {path}")
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        kind, record = "tags", read_tags(path)
    elif head.startswith(b"#"):
        fmt = read_provenance(path).get("format")
        if fmt == "PTAG-CSV":
            kind, record = "tags", read_tags(path)
        elif fmt == "TRACE-CSV":
            kind, record = "trace", read_trace_csv(path)
        else:
            raise DecodeError(f"{path}: unknown record format {fmt!r}")
    else:
        raise DecodeError(f"{path}: neither a photon tag file nor a time trace")
    if len(record) == 0 or (kind == "trace" and record.counts.sum() == 0):
        raise ValidationError(f"{path}: record holds no events")
    return kind, record


def catalog_windows(spec, catalog, half_width, labels=None):
    """Windows of +-half_width around every catalog mode inside the spectrum grid."""
    windows = {}
    for mode in catalog:
        if labels is not None and mode.label not in labels:
            continue
        lo, hi = mode.freq_hz - half_width, mode.freq_hz + half_width
        if lo - 0.5 * (hi - lo) >= spec.frequency[0] and hi + 0.5 * (hi - lo) <= spec.frequency[-1]:
            windows[mode.label] = (lo, hi)
    return windows


def _lineshape_from_json(path):
    data = read_json(path)
    if "detuning_rad_per_s" in data:
        fit = fit_rf_spectrum(data["detuning_rad_per_s"], data["rate_per_s"], sigma=data.get("rate_error_per_s"))
        return fit.params, fit
    try:
        params = LineshapeParams(
            lorentzian_fwhm=float(data["lorentzian_fwhm_rad_per_s"]),
            gaussian_fwhm=float(data["gaussian_fwhm_rad_per_s"]),
            amplitude=float(data["amplitude_per_s"]),
            center=float(data.get("center_rad_per_s", 0.0)),
        )
    except KeyError as exc:
        raise ValidationError(f"{path}: lineshape needs key {exc}") from exc
    return params, None


def _lineshape_payload(params):
    return {
        "lorentzian_fwhm_rad_per_s": params.lorentzian_fwhm,
        "gaussian_fwhm_rad_per_s": params.gaussian_fwhm,
        "amplitude_per_s": params.amplitude,
        "center_rad_per_s": params.center,
    }


def _peaks_for(spec, windows, catalog, tolerance):
    if not windows:
        return []
    peaks = find_peaks_and_areas(spec, windows)
    if catalog is not None:
        peaks = assign_modes(peaks, catalog, tolerance)
    return peaks


def cmd_analyze(input_path=None, cfg=None, out_dir=None, g2=False, lineshape=None, areas=None,
                mode=None, catalog=None, detuning=None, temperature=None):
    """Spectra, peaks, correlation, coupling and sensitivity from a record.

    Args:
        input_path: photon tags or time trace; optional when only areas are fitted
        cfg: optional RunConfig supplying analysis options and the catalog
        out_dir: output directory, default cfg.out_dir or ./results
        g2: also build the two-detector correlation and its NPSD
        lineshape: JSON with Voigt parameters or a rate-versus-detuning scan
        areas: CSV of peak areas against detuning for extract_coupling
        mode: catalog label of the mode the areas belong to
        catalog: JSON mode catalog, overrides the configured one
        detuning: operating detuning of the record, rad/s, for the sensitivity
        temperature: bath temperature, K
    """
    if input_path is None and areas is None:
        raise ValidationError("analyze needs an input record or --areas")
    options = cfg.analysis if cfg is not None else AnalysisOptions()
    modes = load_catalog(catalog) if catalog is not None else (cfg.catalog if cfg is not None else None)
    if temperature is None:
        temperature = cfg.simulation.temperature if cfg is not None and cfg.simulation is not None else 4.0
    out = Path(out_dir or (cfg.out_dir if cfg is not None else "results"))
    config_echo = cfg.raw if cfg is not None else {}
    given = [p for p in (input_path, lineshape, areas, catalog) if p is not None]
    for p in given:
        if not Path(p).is_file():
            raise ValidationError(f"input not found: {p}")
    inputs = {str(p): file_digest(p) for p in given}
    record = provenance("analyze", config=config_echo, inputs=inputs)
    result = CommandResult()

    spec = None
    if input_path is not None:
        kind, data = load_record(input_path)
        if g2 and kind != "tags":
            raise ChannelCountError("g2 needs photon tags from two detector channels, got a time trace")
        if g2 and data.n_channels != 2:
            raise ChannelCountError(f"g2 needs a two-channel record, got {data.n_channels} channel(s)")
        trace = bin_tags(data, options.bin_width) if kind == "tags" else data
        spec = trace_npsd(trace, segment_length=options.segment_length)
        result.add("spectrum", write_csv(_spectrum_frame(spec), out / "spectrum.csv", record))
        windows = dict(options.windows) or (
            catalog_windows(spec, modes, options.window_half_width) if modes is not None else {}
        )
        peaks = _peaks_for(spec, windows, modes, options.assign_tolerance)
        result.add("peaks", write_csv(_peaks_frame(peaks), out / "peaks.csv", record))
        result.add("spectrum_svg", plot_spectrum(spec, out / "spectrum.svg", peaks, title="Welch NPSD"))
        result.products.update(spectrum=spec, peaks=peaks, trace=trace)

        if g2:
            table = g2_histogram(data, options.g2_bin_width, options.tau_max)
            g2_frame = pd.DataFrame({"tau_s": table.tau, "g2": table.g2, "counts": table.counts})
            result.add("g2", write_csv(g2_frame, out / "g2.csv", dict(record, poor_statistics=table.poor_statistics)))
            spec_g2 = npsd_from_g2(table, tau_min=options.tau_min)
            result.add("spectrum_g2", write_csv(_spectrum_frame(spec_g2), out / "spectrum_g2.csv", record))
            g2_windows = dict(options.windows) or (
                catalog_windows(spec_g2, modes, max(options.window_half_width, 3.0 / table.tau_max))
                if modes is not None else {}
            )
            peaks_g2 = _peaks_for(spec_g2, g2_windows, modes, options.assign_tolerance)
            result.add("peaks_g2", write_csv(_peaks_frame(peaks_g2), out / "peaks_g2.csv", record))
            result.add("spectrum_g2_svg", plot_spectrum(spec_g2, out / "spectrum_g2.svg", peaks_g2,
                                                        title="NPSD from g2"))
            result.products.update(g2=table, spectrum_g2=spec_g2, peaks_g2=peaks_g2)

    if lineshape is not None:
        params, fit = _lineshape_from_json(lineshape)
        payload = {"lineshape": _lineshape_payload(params)}
        if fit is not None:
            payload.update(stderr=fit.stderr, ljung_box_p=fit.ljung_box_p, residuals_white=fit.residuals_white)
        result.add("lineshape", write_json(payload, out / "lineshape.json", record))
        result.products["lineshape"] = params

        if areas is not None:
            if mode is None or modes is None:
                raise ValidationError("--areas needs --mode and a mode catalog")
            target = modes.get(mode)
            frame = read_csv(areas, required=("detuning_rad_per_s", "area"),
                             numeric=("detuning_rad_per_s", "area", "area_error"))
            if "label" in frame.columns:
                frame = frame[frame["label"] == mode]
            errors = frame["area_error"].to_numpy() if "area_error" in frame.columns else None
            coupling = extract_coupling(frame["detuning_rad_per_s"].to_numpy(), frame["area"].to_numpy(),
                                        params, target, temperature=temperature, area_errors=errors)
            payload = {
                "mode": mode,
                "lambda_rad_per_s": coupling.coupling,
                "lambda_over_2pi_Hz": coupling.coupling / (2.0 * np.pi),
                "stderr_rad_per_s": coupling.stderr,
                "residual": coupling.residual,
                "n_points": coupling.n_points,
            }
            if spec is not None and detuning is not None:
                payload["sensitivity_m_per_sqrt_Hz"] = displacement_sensitivity(
                    spec, target, coupling.coupling, params, detuning)
            result.add("coupling", write_json(payload, out / "coupling.json", record))
            plot_frame = pd.DataFrame({
                "label": mode,
                "detuning": frame["detuning_rad_per_s"].to_numpy(),
                "area": frame["area"].to_numpy(),
                "predicted": predicted_area(coupling.coupling, frame["detuning_rad_per_s"].to_numpy(),
                                            params, target, temperature),
            })
            if errors is not None:
                plot_frame["area_error"] = errors
            result.add("area_fit_svg", plot_area_fits(plot_frame, out / "area_fit.svg", {mode: coupling}))
            result.products["coupling"] = coupling
    elif areas is not None:
        raise ValidationError("--areas needs --lineshape")
    return result


# ---------------------------------------------------------------------------
# budget
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("s_xx_imprecision", "s_xx_backaction", "s_xx_added")


def budget_scalars(readout):
    """Figures of merit plus crossover and observability of one operating point."""
    fom = figures_of_merit(readout)
    payload = {
        "gamma_opt_rad_per_s": fom.gamma_opt,
        "cooperativity": fom.cooperativity,
        "n_coherent": fom.n_coherent,
        "n_thermal": fom.n_thermal,
        "dephasing_rad_per_s": fom.dephasing,
        "observability_threshold_rad2_per_s2": observability_threshold(readout),
    }
    try:
        payload["crossover_rate_per_s"] = crossover_rate(readout)
    except NoCrossoverError as exc:
        logger.warning("%s", exc)
        payload["crossover_rate_per_s"] = None
    return payload


def cmd_budget(cfg, out_dir=None, name="budget"):
    """Sweep the configured operating point and write the table and figure."""
    options = cfg.require("budget")
    out = Path(out_dir or cfg.out_dir)
    result = CommandResult()
    frame = budget_sweep(options.readout, options.variable, options.grid,
                         lock_detuning=options.lock_detuning, workers=thread_count())
    record = provenance("budget", config=cfg.raw, variable=options.variable)
    result.add("sweep", write_csv(frame, out / f"{name}_sweep.csv", record))
    result.add("sweep_svg", plot_sweep(
        frame, options.variable, SWEEP_COLUMNS, out / f"{name}_sweep.svg",
        ylabel="S_xx (m^2/Hz)", reference=float(frame["zpf_level"].iloc[0]),
        logx=bool(np.all(frame[options.variable] > 0)),
    ))
    result.add("scalars", write_json(budget_scalars(options.readout), out / f"{name}_scalars.json", record))
    result.products["sweep"] = frame
    return result


# ---------------------------------------------------------------------------
# localize
# ---------------------------------------------------------------------------

def read_amplitudes(path, reference=DEFAULT_REFERENCE):
    """Relative amplitudes (and optional sigmas) from a label/amplitude CSV.

    When the reference mode is listed, every amplitude is divided by it;
    otherwise the values are taken as already relative.
    """
    frame = read_csv(path, required=("label", "amplitude"), numeric=("amplitude", "sigma"))
    frame = frame.assign(label=frame["label"].astype(str))
    if frame["label"].duplicated().any():
        raise ValidationError(f"{path}: duplicate mode labels")
    values = dict(zip(frame["label"], frame["amplitude"].astype(float)))
    sigma = dict(zip(frame["label"], frame["sigma"].astype(float))) if "sigma" in frame.columns else None
    if reference in values:
        unit = values.pop(reference)
        if not unit > 0:
            raise ValidationError(f"{path}: reference amplitude of {reference} must be > 0")
        values = {k: v / unit for k, v in values.items()}
        if sigma is not None:
            sigma.pop(reference, None)
            sigma = {k: v / unit for k, v in sigma.items()}
    return values, sigma, len(frame)


def cmd_localize(amplitudes_path, catalog, out_dir="results", reference=DEFAULT_REFERENCE, config=None):
    """Localize the emitter from a CSV of mode amplitudes.

    catalog is a ModeCatalog or a path to one.
    """
    if not hasattr(catalog, "get"):
        catalog = load_catalog(catalog)
    values, sigma, n_rows = read_amplitudes(amplitudes_path, reference)
    flexural = [k for k in values if k in catalog.labels and catalog.get(k).is_flexural]
    if flexural and n_rows < 2:
        raise ValidationError(f"localization needs at least 2 labelled amplitudes, got {n_rows}")
    loc = localize_qd(values, catalog, reference=reference, sigma=sigma)
    out = Path(out_dir)
    inputs = {str(amplitudes_path): file_digest(amplitudes_path)}
    if catalog.source:
        inputs[catalog.source] = file_digest(catalog.source) if Path(catalog.source).is_file() else ""
    record = provenance("localize", config=config or {}, inputs=inputs)
    result = CommandResult()
    payload = {
        "r_m": loc.position.r,
        "phi_rad": loc.position.phi,
        "r_nm": loc.position.r * 1e9,
        "phi_deg": float(np.rad2deg(loc.position.phi)),
        "chi2": loc.chi2,
        "reference": loc.reference,
    }
    result.add("localization", write_json(payload, out / "localization.json", record))
    result.add("comparison", write_csv(loc.comparison, out / "localization_modes.csv", record))
    result.add("residual_map_svg", plot_residual_map(loc, out / "localization_map.svg"))
    result.products["localization"] = loc
    return result


def area_table(detunings, peak_lists, lineshape, catalog, temperature):
    """Long table of areas per mode and detuning with the area gain attached."""
    rows = []
    for delta, peaks in zip(detunings, peak_lists):
        for peak in peaks:
            gain = float(area_gain(delta, lineshape, catalog.get(peak.label), temperature)) \
                if peak.label in catalog.labels else np.nan
            rows.append({"label": peak.label, "detuning_rad_per_s": float(delta), "area": peak.area,
                         "area_error": peak.area_error, "center_Hz": peak.center, "gain": gain})
    return pd.DataFrame(rows)
