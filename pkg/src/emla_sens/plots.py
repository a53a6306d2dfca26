"""Static SVG figures for a payload sweep.

Each figure pairs a value panel with a payload-derivative panel, one curve per
actuator, plotted against TCP payload.  Rendering is best-effort: failures
are logged and never abort a run.
"""

from __future__ import annotations

import logging
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import SensitivityReport  # noqa: E402

logger = logging.getLogger(__name__)

# metric -> (file stem, value label, derivative label)
FIGURES = {
    "psi1": ("power", "peak |delivered power| [W]", "d/dm [W/kg]"),
    "psi2": ("force", "peak |load force| [N]", "d/dm [N/kg]"),
    "psi3": ("energy", "energy drawn [J]", "d/dm [J/kg]"),
    "psi4": ("efficiency", "mean efficiency [-]", "d/dm [1/kg]"),
}

_RC = {
    "svg.hashsalt": "emla-sens",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.3,
}


def _series(report: SensitivityReport, metric: str, deriv: bool) -> np.ndarray:
    key = "aggregate_derivatives" if deriv else "aggregates"
    return np.array([getattr(e, key)[metric] for e in report.entries], dtype=float)


def _figure(report: SensitivityReport, metric: str, path: Path) -> None:
    stem, vlabel, dlabel = FIGURES[metric]
    m = np.asarray(report.payloads, dtype=float)
    single = len(m) < 2
    style = "o" if single else "-"
    fig, axes = plt.subplots(1 if single else 2, 1, figsize=(6.0, 3.2 if single else 5.6),
                             sharex=True, squeeze=False)
    ax_v = axes[0, 0]
    vals = _series(report, metric, False)
    for i, name in enumerate(report.actuator_names):
        ax_v.plot(m, vals[:, i], style, label=name)
    ax_v.set_ylabel(vlabel)
    ax_v.set_title(f"{stem} vs TCP payload")
    ax_v.legend(loc="best", frameon=False)
    if single:
        ax_v.text(0.02, 0.02, "payload derivative panel omitted: single-payload grid",
                  transform=ax_v.transAxes, fontsize=7, color="0.4")
        ax_v.set_xlabel("TCP payload [kg]")
    else:
        ax_d = axes[1, 0]
        d = _series(report, metric, True)
        for i, name in enumerate(report.actuator_names):
            ax_d.plot(m, d[:, i], style, label=name)
        ax_d.set_ylabel(dlabel)
        ax_d.set_xlabel("TCP payload [kg]")
        ax_d.legend(loc="best", frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_plots(report: SensitivityReport, out_dir, efficiency_maps=None) -> list:
    """Write ``power.svg``, ``force.svg``, ``energy.svg`` and ``efficiency.svg``.

    ``efficiency_maps`` optionally maps actuator name to ``(forces, velocities, eta)``
    and adds ``efficiency_maps.svg``.  Returns the paths actually written.
    """
    out_dir = Path(out_dir)
    written = []
    if not report.entries:
        warnings.warn("empty report; no plots written", RuntimeWarning, stacklevel=2)
        return written
    with plt.rc_context(_RC):
        for metric, (stem, _, _) in FIGURES.items():
            path = out_dir / f"{stem}.svg"
            try:
                _figure(report, metric, path)
                written.append(path)
            except Exception as exc:  # noqa: BLE001 - plots are best-effort
                plt.close("all")
                logger.warning("plot %s failed: %s", path.name, exc)
                warnings.warn(f"plot {path.name} failed: {exc}", RuntimeWarning, stacklevel=2)
        if efficiency_maps:
            path = out_dir / "efficiency_maps.svg"
            try:
                _maps(efficiency_maps, path)
                written.append(path)
            except Exception as exc:  # noqa: BLE001
                plt.close("all")
                warnings.warn(f"plot {path.name} failed: {exc}", RuntimeWarning, stacklevel=2)
    return written


def _maps(maps: dict, path: Path) -> None:
    n = len(maps)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.0), squeeze=False)
    for ax, (name, (forces, vels, eta)) in zip(axes[0], maps.items()):
        cs = ax.contourf(vels, forces / 1e3, eta, levels=np.linspace(0.0, 1.0, 11), cmap="viridis")
        ax.set_title(name)
        ax.set_xlabel("velocity [m/s]")
        ax.set_ylabel("force [kN]")
        ax.grid(False)
    fig.colorbar(cs, ax=axes[0].tolist(), label="efficiency [-]")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
