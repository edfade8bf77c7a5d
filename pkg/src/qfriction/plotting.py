"""Figure rendering for trajectories, check reports, spectra and forces.

Uses the Agg canvas directly instead of pyplot so that rendering is free
of global state and safe to call from worker processes.
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .criteria import _derivative

__all__ = [
    "render_trajectory",
    "render_report",
    "render_spectrum",
    "render_forces",
]

_LOG_FLOOR = 1e-18


def _save(fig: Figure, path) -> str:
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=130)
    return str(path)


def _floor(values) -> np.ndarray:
    return np.maximum(np.abs(np.asarray(values, dtype=float)), _LOG_FLOOR)


def render_trajectory(path, traj, observable_names=None) -> str:
    """Two panels: observable expectations, and conservation monitors."""
    names = [n for n in (observable_names or [])
             if n in traj.monitors] or [
        n for n in traj.monitors
        if n not in ("trace", "herm_defect", "min_eig")]
    fig = Figure(figsize=(7.5, 6.5))
    ax1 = fig.add_subplot(2, 1, 1)
    ax2 = fig.add_subplot(2, 1, 2)
    t = traj.times
    for name in names:
        ax1.plot(t, traj.monitors[name], label=name)
    ax1.set_ylabel("expectation")
    ax1.grid(True, alpha=0.3)
    if names:
        ax1.legend(loc="best", fontsize=8)
    ax2.semilogy(t, _floor(np.asarray(traj.monitors["trace"]) - 1.0),
                 label="|trace - 1|")
    ax2.semilogy(t, _floor(traj.monitors["herm_defect"]),
                 label="hermiticity defect")
    neg = np.maximum(-np.asarray(traj.monitors["min_eig"]), 0.0)
    ax2.semilogy(t, np.maximum(neg, _LOG_FLOOR), label="negative eigenvalue")
    ax2.set_xlabel("t")
    ax2.set_ylabel("monitor")
    ax2.grid(True, alpha=0.3)
    ax2.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_report(path, report) -> str:
    """Horizontal bars of measured check values against their tolerances."""
    checks = report.checks
    n = max(len(checks), 1)
    fig = Figure(figsize=(7.5, 1.0 + 0.55 * n))
    ax = fig.add_subplot(1, 1, 1)
    labels = [c.name for c in checks]
    values = _floor([c.value for c in checks])
    tols = _floor([c.tolerance for c in checks])
    ypos = np.arange(len(checks))[::-1]
    colors = ["#2a7e43" if c.passed else "#b0413e" for c in checks]
    ax.barh(ypos, values, color=colors, height=0.6)
    for y, tol in zip(ypos, tols):
        ax.plot([tol, tol], [y - 0.38, y + 0.38], color="k", lw=1.4)
    ax.set_xscale("log")
    ax.set_yticks(ypos)
    ax.set_yticklabels(labels, fontsize=8)
    ax.set_xlabel("measured value (bars) vs tolerance (ticks)")
    ax.grid(True, axis="x", alpha=0.3)
    verdict = "all checks passed" if report.passed else "check failures present"
    ax.set_title(verdict)
    fig.tight_layout()
    return _save(fig, path)


def render_spectrum(path, result) -> str:
    """Eigenvalues of the generator in the complex plane."""
    ev = np.asarray(result.eigenvalues)
    kernel = np.abs(ev) <= max(1e-9, 10 * np.finfo(float).eps)
    fig = Figure(figsize=(6.5, 5.5))
    ax = fig.add_subplot(1, 1, 1)
    ax.scatter(ev.real[~kernel], ev.imag[~kernel], s=14, alpha=0.65,
               label="decaying")
    if kernel.any():
        ax.scatter(ev.real[kernel], ev.imag[kernel], s=42, marker="x",
                   color="#b0413e", label=f"kernel (dim {result.kernel_dim})")
    ax.axvline(0.0, color="k", lw=0.8, alpha=0.5)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_title(f"spectral gap {result.gap:.3e}, "
                 f"max Re {result.max_real:.3e}")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_forces(path, traj, keys=("p1", "p1_rhs", "x1", "x1_rhs")) -> str:
    """Numerical d<O>/dt against the recorded generator expectation."""
    if traj.step_series is not None:
        times, series = traj.step_times, traj.step_series
    else:
        times, series = traj.times, traj.monitors
    pairs = [(v, r) for v, r in zip(keys[::2], keys[1::2]) if v in series]
    fig = Figure(figsize=(7.5, 3.0 * max(len(pairs), 1)))
    for i, (val_key, rhs_key) in enumerate(pairs):
        ax = fig.add_subplot(len(pairs), 1, i + 1)
        deriv, inner = _derivative(np.asarray(series[val_key]),
                                   np.asarray(times))
        tt = np.asarray(times)[inner]
        ax.plot(tt, deriv, label=f"d<{val_key}>/dt (numerical)")
        ax.plot(tt, np.asarray(series[rhs_key])[inner], "--",
                label=f"<{rhs_key}>")
        ax.set_xlabel("t")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
