"""
Brownian motion of a mechanical mode

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

The damped, thermally driven oscillator is advanced with its exact
one-step Gaussian transition: the mean propagator exp(A dt) and the step
covariance P - Phi P Phi^T, where P is the stationary covariance. Working
in coordinates scaled by the thermal amplitude keeps P the identity.
The position record is then the output of a two-pole IIR filter driven by
the step noise, evaluated with scipy.signal.lfilter.
"""

import logging

import numpy as np
from scipy.linalg import cholesky, eigh, expm
from scipy.signal import lfilter

from src.core.errors import ValidationError
from src.core.mechanics import thermal_rms
from src.simulation.rng import as_generator

logger = logging.getLogger(__name__)

MAX_STEP_FRACTION = 0.05


def check_time_step(mode, dt):
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    limit = MAX_STEP_FRACTION / mode.freq_hz
    if dt > limit * (1 + 1e-9):
        raise ValidationError(
            f"dt={dt:.4g} s is too coarse for {mode.label} at {mode.freq_hz:.4g} Hz (max {limit:.4g} s)"
        )


def scaled_propagator(mode, dt):
    """exp(A dt) for (x / u_th, v / (omega_m u_th))."""
    w, g = mode.omega_m, mode.gamma_m
    return expm(np.array([[0.0, w], [-w, -g]]) * dt)


def physical_propagator(mode, dt):
    scale = np.diag([1.0, mode.omega_m])
    return scale @ scaled_propagator(mode, dt) @ np.linalg.inv(scale)


def step_noise_factor(phi):
    """Lower factor L with L L^T = I - Phi Phi^T."""
    q = np.eye(2) - phi @ phi.T
    q = 0.5 * (q + q.T)
    try:
        return cholesky(q, lower=True)
    except np.linalg.LinAlgError:
        vals, vecs = eigh(q)
        return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))


def _powers(phi, state, n):
    vals, vecs = np.linalg.eig(phi)
    coeff = np.linalg.solve(vecs, state.astype(complex))
    steps = np.arange(n)
    return (vecs @ (coeff[:, None] * np.power(vals[:, None], steps[None, :]))).real


def propagate_free(mode, x0, v0, dt, n):
    """Noise-free exact propagation; returns positions and velocities."""
    states = _powers(physical_propagator(mode, dt), np.array([x0, v0], dtype=float), int(n))
    return states[0], states[1]


def simulate_displacement(mode, temperature, duration, dt, seed=0, index=0, rng=None):
    """Stationary thermal trajectory u(t) sampled at t = k dt, in metres.

    The initial state is drawn from the stationary distribution, so the
    record has no transient. T = 0 gives the zero trajectory: quantum
    fluctuations are not part of the classical record.
    """
    check_time_step(mode, dt)
    if not duration > 0:
        raise ValidationError(f"duration must be > 0, got {duration}")
    n = int(round(duration / dt))
    u_th = thermal_rms(mode, temperature)
    if u_th == 0.0:
        return np.zeros(n)
    rng = as_generator(rng, seed, "mechanics", index)
    phi = scaled_propagator(mode, dt)
    factor = step_noise_factor(phi)
    start = rng.standard_normal(2)
    # the stationary start enters as the first input sample, the output is read one step later
    drive = np.empty((n + 1, 2))
    drive[0] = start
    drive[1:] = rng.standard_normal((n, 2)) @ factor.T
    a = [1.0, -np.trace(phi), np.linalg.det(phi)]
    x = lfilter([0.0, 1.0, -phi[1, 1]], a, drive[:, 0])
    x += lfilter([0.0, 0.0, phi[0, 1]], a, drive[:, 1])
    x = x[1:]
    logger.debug("%s: %d samples, sample rms %.4g m (u_th %.4g m)", mode.label, n, u_th * x.std(), u_th)
    return u_th * x
