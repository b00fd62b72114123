"""
Run configuration

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Reads a YAML run configuration into a RunConfig. The YAML node tree is
composed once so every key path can be traced back to its source line;
validation messages then read "paper_device.yaml:12: simulation.duration_s
must be > 0". Physical keys carry their unit in the name, and referenced
files are resolved relative to the configuration file.

Blocks: seed, paths, simulation, emitter, drive, modes, blinking,
detector, analysis, budget. Only the blocks a command needs are required.
"""

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from src.core.emitter import DriveCondition, Emitter, inhomogeneous_hwhm, power_broadened_hwhm
from src.core.errors import ConfigError, ValidationError
from src.core.mechanics import load_catalog
from src.core.noise_budget import SWEEP_VARIABLES, ReadoutConfig
from src.core.units import TWO_PI
from src.simulation.detector import DetectorModel
from src.simulation.photons import BlinkingModel
from src.simulation.simulator import SimConfig

logger = logging.getLogger(__name__)

_MISSING = object()

# accepted unit suffixes of sweep grids, per variable
GRID_UNITS = {
    "omega_r": ("_rad_per_s", "_over_gamma_sp"),
    "detuning": ("_rad_per_s", "_over_gamma_sp"),
    "efficiency": ("_fraction",),
    "coupling": ("_rad_per_s", "_over_2pi_Hz", "_over_sqrt_gamma_sp_gamma_m"),
}


def _line_index(node, prefix="", out=None):
    """Map dotted key paths to 1-based source lines."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            out[path] = key_node.start_mark.line + 1
            _line_index(value_node, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            path = f"{prefix}[{i}]"
            out[path] = item.start_mark.line + 1
            _line_index(item, path, out)
    return out


class ConfigSource:
    """Parsed YAML document plus the line of every key."""

    def __init__(self, path, data, lines):
        self.path = Path(path)
        self.data = data
        self.lines = lines

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError("configuration file not found", path=path)
        text = path.read_text()
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            raise ConfigError(f"invalid YAML ({getattr(exc, 'problem', exc)})", path=path, line=line) from exc
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("top level must be a mapping", path=path, line=1)
        return cls(path, data, _line_index(node) if node is not None else {})

    def line_of(self, key_path):
        prefix = key_path
        while prefix:
            if prefix in self.lines:
                return self.lines[prefix]
            prefix = prefix.rpartition(".")[0]
        return None

    def error(self, key_path, message):
        return ConfigError(f"{key_path} {message}" if key_path else message, path=self.path,
                           line=self.line_of(key_path))

    def block(self, name, required=False):
        value = self.data.get(name, _MISSING)
        if value is _MISSING or value is None:
            if required:
                raise self.error(name, "block is required")
            return None
        if not isinstance(value, dict):
            raise self.error(name, "must be a mapping")
        return value

    def number(self, block, prefix, key, default=_MISSING, positive=False, non_negative=False, integer=False):
        path = f"{prefix}.{key}" if prefix else key
        raw = (block or {}).get(key, _MISSING)
        if raw is _MISSING or raw is None:
            if default is _MISSING:
                raise self.error(path, "is required")
            return default
        if isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
            raise self.error(path, f"must be a number, got {raw!r}")
        try:
            value = int(raw) if integer else float(raw)
        except ValueError:
            raise self.error(path, f"must be a number, got {raw!r}") from None
        if integer and float(raw) != value:
            raise self.error(path, f"must be an integer, got {raw!r}")
        if not np.isfinite(value):
            raise self.error(path, "must be finite")
        if positive and not value > 0:
            raise self.error(path, "must be > 0")
        if non_negative and value < 0:
            raise self.error(path, "must be >= 0")
        return value

    def file(self, block, prefix, key, required=True):
        path = f"{prefix}.{key}"
        raw = (block or {}).get(key)
        if raw is None:
            if required:
                raise self.error(path, "is required")
            return None
        resolved = (self.path.parent / str(raw)).resolve()
        if not resolved.is_file():
            raise self.error(path, f"file not found: {resolved}")
        return resolved


def apply_overrides(data, overrides):
    """Copy of data with dotted-path overrides such as {"simulation.duration_s": 0.1}."""
    out = copy.deepcopy(data)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return out


@dataclass(frozen=True)
class AnalysisOptions:
    bin_width: float = 100e-9
    segment_length: Optional[int] = None
    window_half_width: float = 3e3
    windows: dict = field(default_factory=dict)
    g2_bin_width: float = 50e-9
    tau_max: float = 50e-6
    tau_min: float = 0.25e-6
    assign_tolerance: float = 0.075


@dataclass(frozen=True, eq=False)
class BudgetOptions:
    readout: ReadoutConfig
    variable: str
    grid: np.ndarray
    lock_detuning: bool = True


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated run configuration.

    raw is the configuration as loaded (after overrides); it is echoed into
    every output file so a run can be repeated from its products alone.
    """

    path: Path
    raw: dict
    seed: int
    out_dir: Path
    catalog_path: Optional[Path] = None
    catalog: object = None
    emitter: Optional[Emitter] = None
    drive: Optional[DriveCondition] = None
    simulation: Optional[SimConfig] = None
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    budget: Optional[BudgetOptions] = None

    def require(self, name):
        value = getattr(self, name)
        if value is None:
            raise ConfigError(f"block '{name}' is required for this command", path=self.path)
        return value


def _reanchor(src, key_path, exc):
    """ConfigError for a value type rejected while building key_path."""
    if isinstance(exc, ConfigError):
        return exc
    return src.error(key_path, f"is invalid: {exc}")


def _emitter(src):
    block = src.block("emitter")
    if block is None:
        return None
    gamma_sp = src.number(block, "emitter", "gamma_sp_per_s", positive=True)
    try:
        if "lorentzian_hwhm_over_2pi_Hz" in block:
            return Emitter.from_linewidths(
                gamma_sp,
                TWO_PI * src.number(block, "emitter", "lorentzian_hwhm_over_2pi_Hz", positive=True),
                TWO_PI * src.number(block, "emitter", "gaussian_hwhm_over_2pi_Hz", 0.0, non_negative=True),
                omega_r=src.number(block, "emitter", "linewidth_drive_rad_per_s", gamma_sp, non_negative=True),
            )
        return Emitter(
            gamma_sp=gamma_sp,
            gamma_star=src.number(block, "emitter", "gamma_star_per_s", 0.0, non_negative=True),
            sigma_inh=src.number(block, "emitter", "sigma_inh_rad_per_s", 0.0, non_negative=True),
        )
    except ValidationError as exc:
        raise _reanchor(src, "emitter", exc) from exc


def _operating_hwhm(emitter, omega_r, inhomogeneous):
    if inhomogeneous:
        return float(inhomogeneous_hwhm(emitter, omega_r))
    return float(power_broadened_hwhm(emitter, omega_r))


def _drive(src, emitter, inhomogeneous=True):
    block = src.block("drive")
    if block is None or emitter is None:
        return None
    if "omega_r_rad_per_s" in block:
        omega_r = src.number(block, "drive", "omega_r_rad_per_s", non_negative=True)
    else:
        omega_r = emitter.gamma_sp * src.number(block, "drive", "omega_r_over_gamma_sp", 1.0, non_negative=True)
    if "detuning_rad_per_s" in block:
        detuning = src.number(block, "drive", "detuning_rad_per_s")
    else:
        multiple = src.number(block, "drive", "detuning_in_hwhm", 1.0)
        try:
            detuning = multiple * _operating_hwhm(emitter, omega_r, inhomogeneous and emitter.sigma_inh > 0)
        except ValidationError as exc:
            raise _reanchor(src, "drive", exc) from exc
    return DriveCondition(omega_r=omega_r, detuning=detuning)


def _coupling(src, block, prefix, emitter, mode):
    if "lambda_over_sqrt_gamma_sp_gamma_m" in block:
        factor = src.number(block, prefix, "lambda_over_sqrt_gamma_sp_gamma_m", non_negative=True)
        return factor * np.sqrt(emitter.gamma_sp * mode.gamma_m)
    if "lambda_rad_per_s" in block:
        return src.number(block, prefix, "lambda_rad_per_s", non_negative=True)
    return TWO_PI * src.number(block, prefix, "lambda_over_2pi_Hz", non_negative=True)


def _mode(src, catalog, key_path, label):
    if catalog is None:
        raise src.error(key_path, "needs paths.catalog")
    try:
        return catalog.get(str(label))
    except ValidationError as exc:
        raise _reanchor(src, key_path, exc) from exc


def _simulation(src, seed, catalog, emitter, drive):
    block = src.block("simulation")
    if block is None:
        return None
    if emitter is None or drive is None:
        raise src.error("simulation", "needs the emitter and drive blocks")
    entries = src.data.get("modes") or []
    if not isinstance(entries, list):
        raise src.error("modes", "must be a list")
    modes = []
    for i, entry in enumerate(entries):
        where = f"modes[{i}]"
        if not isinstance(entry, dict) or "label" not in entry:
            raise src.error(where, "needs a label")
        mode = _mode(src, catalog, where, entry["label"])
        modes.append((mode, _coupling(src, entry, where, emitter, mode)))

    blink = src.block("blinking") or {}
    det = src.block("detector") or {}
    try:
        blinking = BlinkingModel(
            on_fraction=src.number(blink, "blinking", "on_fraction", 0.1, positive=True),
            correlation_time=src.number(blink, "blinking", "correlation_time_s", 100e-9, positive=True),
        )
    except ValidationError as exc:
        raise _reanchor(src, "blinking", exc) from exc
    try:
        detector = DetectorModel(
            jitter_sigma=src.number(det, "detector", "jitter_sigma_s", 500e-12, non_negative=True),
            dead_time=src.number(det, "detector", "dead_time_s", 100e-9, non_negative=True),
            channels=src.number(det, "detector", "channels", 1, integer=True),
        )
    except ValidationError as exc:
        raise _reanchor(src, "detector", exc) from exc

    duration = src.number(block, "simulation", "duration_s", positive=True)
    dt = src.number(block, "simulation", "dt_s", 1e-8, positive=True)
    try:
        return SimConfig(
            modes=tuple(modes),
            emitter=emitter,
            drive=drive,
            efficiency=src.number(det, "detector", "efficiency_fraction", 1.0, positive=True),
            blinking=blinking,
            detector=detector,
            duration=duration,
            dt=dt,
            seed=seed,
            temperature=src.number(block, "simulation", "temperature_K", 4.0, non_negative=True),
        )
    except ValidationError as exc:
        raise _reanchor(src, "simulation", exc) from exc


def _analysis(src):
    block = src.block("analysis") or {}
    windows = {}
    raw_windows = block.get("windows_Hz") or {}
    if not isinstance(raw_windows, dict):
        raise src.error("analysis.windows_Hz", "must map mode labels to [lo, hi]")
    for label, pair in raw_windows.items():
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise src.error(f"analysis.windows_Hz.{label}", "must be a [lo, hi] pair")
        lo, hi = (float(v) for v in pair)
        if not hi > lo:
            raise src.error(f"analysis.windows_Hz.{label}", "needs hi > lo")
        windows[str(label)] = (lo, hi)
    segment = block.get("segment_length")
    return AnalysisOptions(
        bin_width=src.number(block, "analysis", "bin_width_s", 100e-9, positive=True),
        segment_length=None if segment is None else src.number(block, "analysis", "segment_length",
                                                               positive=True, integer=True),
        window_half_width=src.number(block, "analysis", "window_half_width_Hz", 3e3, positive=True),
        windows=windows,
        g2_bin_width=src.number(block, "analysis", "g2_bin_width_s", 50e-9, positive=True),
        tau_max=src.number(block, "analysis", "tau_max_s", 50e-6, positive=True),
        tau_min=src.number(block, "analysis", "tau_min_s", 0.25e-6, non_negative=True),
        assign_tolerance=src.number(block, "analysis", "assign_tolerance_fraction", 0.075, positive=True),
    )


def _grid(src, sweep, emitter, mode, variable):
    prefix = "budget.sweep"
    unit_scale = {
        "_rad_per_s": 1.0,
        "_fraction": 1.0,
        "_over_gamma_sp": emitter.gamma_sp,
        "_over_2pi_Hz": TWO_PI,
        "_over_sqrt_gamma_sp_gamma_m": float(np.sqrt(emitter.gamma_sp * mode.gamma_m)),
    }
    for suffix in GRID_UNITS[variable]:
        scale = unit_scale[suffix]
        if f"values{suffix}" in sweep:
            values = sweep[f"values{suffix}"]
            if not isinstance(values, list) or not values:
                raise src.error(f"{prefix}.values{suffix}", "must be a non-empty list")
            return scale * np.asarray(values, dtype=float)
        if f"start{suffix}" in sweep:
            start = src.number(sweep, prefix, f"start{suffix}")
            stop = src.number(sweep, prefix, f"stop{suffix}", start)
            points = src.number(sweep, prefix, "points", 1 if stop == start else 50, positive=True, integer=True)
            spacing = str(sweep.get("spacing", "log"))
            if spacing == "log":
                if start <= 0 or stop <= 0:
                    raise src.error(prefix, "log spacing needs start and stop > 0")
                grid = np.geomspace(start, stop, points)
            elif spacing == "linear":
                grid = np.linspace(start, stop, points)
            else:
                raise src.error(f"{prefix}.spacing", f"must be log or linear, got {spacing!r}")
            return scale * grid
    raise src.error(prefix, f"needs values or start/stop with a suffix in {GRID_UNITS[variable]}")


def _budget(src, catalog, emitter, drive):
    block = src.block("budget")
    if block is None:
        return None
    if emitter is None:
        raise src.error("budget", "needs the emitter block")
    mode = _mode(src, catalog, "budget.mode", block.get("mode", "F1x"))
    inhomogeneous = bool(block.get("inhomogeneous", False))
    omega_r = drive.omega_r if drive is not None else emitter.gamma_sp
    drive_block = src.block("drive") or {}
    try:
        if drive is not None and "detuning_rad_per_s" in drive_block:
            base_drive = drive
        else:
            multiple = src.number(drive_block, "drive", "detuning_in_hwhm", 1.0)
            base_drive = DriveCondition(omega_r, multiple * _operating_hwhm(emitter, omega_r, inhomogeneous))
        readout = ReadoutConfig(
            emitter=emitter,
            drive=base_drive,
            mode=mode,
            coupling=_coupling(src, block, "budget", emitter, mode),
            efficiency=src.number(block, "budget", "efficiency_fraction", 1.0, positive=True),
            temperature=src.number(block, "budget", "temperature_K", 4.0, non_negative=True),
            inhomogeneous=inhomogeneous,
        )
    except ValidationError as exc:
        raise _reanchor(src, "budget", exc) from exc
    sweep = block.get("sweep") or {}
    if not isinstance(sweep, dict):
        raise src.error("budget.sweep", "must be a mapping")
    variable = str(sweep.get("variable", "omega_r"))
    if variable not in SWEEP_VARIABLES:
        raise src.error("budget.sweep.variable", f"must be one of {SWEEP_VARIABLES}, got {variable!r}")
    grid = _grid(src, sweep, emitter, mode, variable) if sweep else np.array([base_drive.omega_r])
    return BudgetOptions(readout, variable, grid, bool(block.get("lock_detuning", True)))


def load_run_config(path, overrides=None):
    """Load and validate a run configuration.

    Args:
        path: YAML file
        overrides: optional dotted-path values applied before validation,
            e.g. {"seed": 3, "simulation.duration_s": 0.2}

    Returns:
        RunConfig
    """
    src = ConfigSource.load(path)
    if overrides:
        src = ConfigSource(src.path, apply_overrides(src.data, overrides), src.lines)
    seed = src.number(src.data, "", "seed", 0, non_negative=True, integer=True) if "seed" in src.data else 0

    paths = src.block("paths") or {}
    catalog_path = src.file(paths, "paths", "catalog", required=False)
    catalog = None
    if catalog_path is not None:
        try:
            catalog = load_catalog(catalog_path)
        except ValidationError as exc:
            raise _reanchor(src, "paths.catalog", exc) from exc
    out_dir = (src.path.parent / str(paths.get("out_dir", "results"))).resolve()

    emitter = _emitter(src)
    drive = _drive(src, emitter)
    cfg = RunConfig(
        path=src.path,
        raw=src.data,
        seed=seed,
        out_dir=out_dir,
        catalog_path=catalog_path,
        catalog=catalog,
        emitter=emitter,
        drive=drive,
        simulation=_simulation(src, seed, catalog, emitter, drive),
        analysis=_analysis(src),
        budget=_budget(src, catalog, emitter, drive),
    )
    logger.debug("loaded run configuration %s (seed %d)", src.path, seed)
    return cfg
