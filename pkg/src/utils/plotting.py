"""
Plotting

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

SVG renderings of spectra, budget sweeps and localization maps. CSV files
remain the canonical outputs; these figures are a convenience.
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

FIGSIZE = (8, 5)


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    logger.debug("wrote %s", path)
    return path


def plot_spectrum(spec, path, peaks=(), title=None):
    """NPSD with the shot floor as a dashed line and one label per peak."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    positive = spec.frequency > 0
    ax.semilogy(spec.frequency[positive], spec.density[positive], lw=0.8, color="C0", label="NPSD")
    ax.axhline(spec.shot_floor, color="k", ls="--", lw=0.8, label="shot floor 2/<N>")
    for peak in peaks:
        lo, hi = peak.window
        ax.axvspan(lo, hi, color="C1", alpha=0.15)
        ax.annotate(
            peak.label or f"{peak.center:.4g} Hz",
            xy=(peak.center, peak.floor),
            xytext=(0, 24),
            textcoords="offset points",
            ha="center",
            fontsize=9,
            arrowprops={"arrowstyle": "-", "lw": 0.5},
        )
    ax.set_xscale("log")
    ax.set_xlabel("Frequency (Hz)")
    ax.set_ylabel("NPSD (1/Hz)")
    ax.set_title(title or f"RBW {spec.resolution_bandwidth:.3g} Hz")
    ax.legend(loc="upper right")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_sweep(frame, x, columns, path, xlabel=None, ylabel=None, reference=None, logx=True, logy=True):
    """One line per column of a budget sweep against the column x.

    reference, when given, is drawn as a horizontal dashed line, e.g. the
    zero-point level u_zpf^2 / gamma_m.
    """
    fig, ax = plt.subplots(figsize=FIGSIZE)
    xs = frame[x].to_numpy(dtype=float)
    for column in columns:
        ys = frame[column].to_numpy(dtype=float)
        finite = np.isfinite(ys)
        ax.plot(xs[finite], ys[finite], label=column)
    if reference is not None:
        ax.axhline(reference, color="k", ls="--", lw=0.8, label="reference")
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel or x)
    ax.set_ylabel(ylabel or "")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_area_fits(frame, path, fits=None):
    """Peak areas against detuning with the fitted model per mode.

    frame needs the columns label, detuning, area and optionally
    area_error and predicted.
    """
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for i, (label, group) in enumerate(frame.groupby("label", sort=True)):
        group = group.sort_values("detuning")
        x = group["detuning"].to_numpy() / (2.0 * np.pi * 1e9)
        err = group["area_error"].to_numpy() if "area_error" in group else None
        ax.errorbar(x, group["area"].to_numpy(), yerr=err, fmt="o", color=f"C{i}", label=label)
        if "predicted" in group:
            fit = (fits or {}).get(label)
            name = f"{label} fit" if fit is None else f"{label}: lambda/2pi = {fit.coupling / (2 * np.pi) / 1e3:.0f} kHz"
            ax.plot(x, group["predicted"].to_numpy(), "-", color=f"C{i}", label=name)
    ax.set_xlabel("Detuning / 2pi (GHz)")
    ax.set_ylabel("Peak area")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_residual_map(result, path):
    """Coarse chi2 map of a localization in Cartesian nm with the best position marked."""
    fig, ax = plt.subplots(figsize=(6, 5))
    r, phi = np.meshgrid(result.r_grid, result.phi_grid, indexing="ij")
    x, y = r * np.cos(phi) * 1e9, r * np.sin(phi) * 1e9
    mesh = ax.pcolormesh(x, y, np.log10(result.chi2_map + 1e-12), shading="gouraud", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="log10 chi2")
    ax.plot(result.position.x * 1e9, result.position.y * 1e9, "r*", ms=12, label="best fit")
    ax.set_aspect("equal")
    ax.set_xlabel("x (nm)")
    ax.set_ylabel("y (nm)")
    ax.set_title(f"r = {result.position.r * 1e9:.1f} nm, phi = {np.rad2deg(result.position.phi):.1f} deg")
    ax.legend(loc="upper right")
    return _save(fig, path)
