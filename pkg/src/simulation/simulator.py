"""
Monte-Carlo read-out simulation

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Runs the chain thermal mechanics -> emitter detuning -> photon emission
-> beam splitter -> detectors for one seeded configuration. Each stage
draws from its own random substream, so a fixed configuration always
produces the same record.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from src.core.emitter import DriveCondition, Emitter
from src.core.errors import ValidationError
from src.core.mechanics import zero_point
from src.simulation.brownian import MAX_STEP_FRACTION, simulate_displacement
from src.simulation.detector import DetectorModel, apply_detector, hbt_split
from src.simulation.photons import BlinkingModel, generate_photons
from src.simulation.rng import RandomStreams, validate_seed

logger = logging.getLogger(__name__)

MIN_PERIODS = 100


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines one simulated record.

    modes holds (MechMode, coupling) pairs with the coupling in rad/s.
    """

    modes: tuple
    emitter: Emitter
    drive: DriveCondition
    efficiency: float
    blinking: BlinkingModel = field(default_factory=BlinkingModel)
    detector: DetectorModel = field(default_factory=DetectorModel)
    duration: float = 1.0
    dt: float = 1e-8
    seed: int = 0
    temperature: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple((m, float(lam)) for m, lam in self.modes))
        validate_seed(self.seed)
        if not self.duration > 0:
            raise ValidationError(f"duration must be > 0, got {self.duration}")
        if not self.dt > 0 or self.dt > self.duration:
            raise ValidationError(f"dt must lie in (0, duration], got {self.dt}")
        if not 0.0 < self.efficiency <= 1.0:
            raise ValidationError(f"efficiency must lie in (0, 1], got {self.efficiency}")
        if self.temperature < 0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")
        labels = [m.label for m, _ in self.modes]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate modes in simulation: {labels}")
        for mode, lam in self.modes:
            if lam < 0:
                raise ValidationError(f"{mode.label}: coupling must be >= 0")
        if self.modes:
            f_max = max(m.freq_hz for m, _ in self.modes)
            if self.dt > MAX_STEP_FRACTION / f_max * (1 + 1e-9):
                raise ValidationError(
                    f"dt={self.dt:.4g} s exceeds {MAX_STEP_FRACTION}/f_max = {MAX_STEP_FRACTION / f_max:.4g} s"
                )
            f_min = min(m.freq_hz for m, _ in self.modes)
            if self.duration < MIN_PERIODS / f_min * (1 - 1e-9):
                raise ValidationError(
                    f"duration={self.duration:.4g} s is shorter than {MIN_PERIODS} periods of the slowest mode"
                )

    @property
    def n_samples(self):
        return int(round(self.duration / self.dt))

    def to_dict(self):
        return {
            "modes": [
                {
                    "label": m.label, "family": m.family, "order": m.order,
                    "omega_m": m.omega_m, "gamma_m": m.gamma_m, "m_eff": m.m_eff,
                    "coupling": lam,
                }
                for m, lam in self.modes
            ],
            "emitter": {"gamma_sp": self.emitter.gamma_sp, "gamma_star": self.emitter.gamma_star,
                        "sigma_inh": self.emitter.sigma_inh},
            "drive": {"omega_r": self.drive.omega_r, "detuning": self.drive.detuning},
            "efficiency": self.efficiency,
            "blinking": {"on_fraction": self.blinking.on_fraction,
                         "correlation_time": self.blinking.correlation_time},
            "detector": {"jitter_sigma": self.detector.jitter_sigma, "dead_time": self.detector.dead_time,
                         "channels": self.detector.channels},
            "duration": self.duration,
            "dt": self.dt,
            "seed": self.seed,
            "temperature": self.temperature,
        }

    def digest(self):
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:32]


@dataclass(frozen=True, eq=False)
class SimulationResult:
    tags: object
    ideal_count: int
    detuning_rms: float
    config: SimConfig


def detuning_trace(trajectories, modes, couplings):
    """Emitter detuning shift sum_k lambda_k u_k(t) / u_zpf,k in rad/s."""
    if not (len(trajectories) == len(modes) == len(couplings)):
        raise ValidationError("trajectories, modes and couplings must have equal length")
    if not trajectories:
        raise ValidationError("detuning trace needs at least one trajectory")
    n = len(trajectories[0])
    total = np.zeros(n)
    for u, mode, lam in zip(trajectories, modes, couplings):
        if len(u) != n:
            raise ValidationError("trajectories are sampled on different time grids")
        total += (lam / zero_point(mode)) * np.asarray(u, dtype=float)
    return total


def run_simulation(cfg):
    """Simulate one configuration and return its detected record."""
    streams = RandomStreams(cfg.seed)
    n = cfg.n_samples
    shift = np.zeros(n)
    quiet = not logger.isEnabledFor(logging.INFO)
    # one trajectory in memory at a time
    for index, (mode, lam) in enumerate(tqdm(cfg.modes, desc="mechanics", disable=quiet)):
        if lam == 0.0:
            continue
        u = simulate_displacement(mode, cfg.temperature, cfg.duration, cfg.dt,
                                  rng=streams.generator("mechanics", index))
        shift += detuning_trace([u[:n]], [mode], [lam])
    ideal = generate_photons(
        shift, cfg.dt, cfg.emitter, cfg.drive, cfg.efficiency, cfg.blinking,
        rngs=(streams.generator("blinking"), streams.generator("thinning")),
    )
    tags = ideal
    if cfg.detector.channels == 2:
        tags = hbt_split(tags, rng=streams.generator("routing"))
    tags = apply_detector(tags, cfg.detector, rng=streams.generator("jitter"))
    digest = cfg.digest()
    tags = type(tags)(tags.times_ps, tags.channels, tags.duration_ps, tags.n_channels, digest)
    rms = float(np.sqrt(np.mean(shift ** 2))) if n else 0.0
    logger.info(
        "simulated %.4g s: %d ideal photons, %d detected (%.4g /s), detuning rms %.4g rad/s",
        cfg.duration, len(ideal), len(tags), tags.mean_rate, rms,
    )
    return SimulationResult(tags=tags, ideal_count=len(ideal), detuning_rms=rms, config=cfg)
