"""Actuator performance metrics and their finite-difference payload sensitivities.

Metrics per actuator, sampled on the run's time grid:

* ``psi1`` delivered load-side power ``v_x f_x`` [W]
* ``psi2`` load-side force ``f_x`` [N]
* ``psi3`` cumulative energy drawn, ``dt * sum(v_x f_x / eta)`` [J]
* ``psi4`` instantaneous efficiency from the steady-state electrical input [-]
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .actuator import Actuator, motor_torque, operating_point, steady_state_electrical, efficiency
from .dynamics import ActuatorState, rnea
from .kinematics import KinematicRun, run_trajectory
from .robot import ConfigError, RobotModel, update_payload
from .trajectory import TrajectorySpec

logger = logging.getLogger(__name__)

METRICS = ("psi1", "psi2", "psi3", "psi4")
AGGREGATES = {
    "psi1": "peak_abs_power",
    "psi2": "peak_abs_force",
    "psi3": "total_energy",
    "psi4": "mean_efficiency",
}
SCHEMES = ("forward", "central")


class PrecisionError(ValueError):
    """The payload perturbation is lost in floating-point rounding."""


@dataclass(frozen=True, eq=False)
class MetricsSeries:
    """Time-indexed metrics, arrays shaped ``(N, n_actuators)``."""

    t: np.ndarray
    v_x: np.ndarray
    f_x: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    psi3: np.ndarray          # cumulative
    psi4: np.ndarray          # NaN where undefined
    motor_torque: np.ndarray  # dynamic drive torque incl. drivetrain inertia
    undefined_psi4: np.ndarray  # count per actuator

    def aggregates(self) -> dict:
        """Scalar summaries per metric, each an array over actuators."""
        with np.errstate(invalid="ignore"):
            defined = ~np.isnan(self.psi4)
            counts = defined.sum(axis=0)
            mean_eff = np.where(counts > 0, np.where(defined, self.psi4, 0.0).sum(axis=0) / np.maximum(counts, 1),
                                np.nan)
        return {
            "psi1": np.max(np.abs(self.psi1), axis=0),
            "psi2": np.max(np.abs(self.psi2), axis=0),
            "psi3": self.psi3[-1],
            "psi4": mean_eff,
        }

    def decimate(self, stride: int) -> "MetricsSeries":
        """Every ``stride``-th sample; the last sample is always kept."""
        idx = _stride_index(len(self.t), stride)
        return MetricsSeries(self.t[idx], self.v_x[idx], self.f_x[idx], self.psi1[idx], self.psi2[idx],
                             self.psi3[idx], self.psi4[idx], self.motor_torque[idx], self.undefined_psi4)


def _stride_index(n: int, stride: int) -> np.ndarray:
    idx = np.arange(0, n, max(1, int(stride)))
    if n and idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def evaluate_metrics(state: ActuatorState, actuators: Sequence[Actuator], dt: float, t=None) -> MetricsSeries:
    """Compute psi1..psi4 from load-side actuator traces.

    Energy integrand per sample: ``P / eta`` while motoring, ``P * eta`` while
    regenerating (both equal the electrical input power), and 0 where no
    mechanical power flows.  ``psi4`` is left undefined (NaN) at zero power and
    where regeneration returns no net power; such samples are counted.
    """
    v = np.atleast_2d(state.v_x)
    f = np.atleast_2d(state.f_x)
    a = np.atleast_2d(state.a_x)
    N, n = v.shape
    if len(actuators) != n:
        raise ConfigError(f"expected {n} actuator blocks, got {len(actuators)}", "actuators")
    if t is None:
        t = np.arange(N) * dt
    P = v * f
    integrand = np.zeros_like(P)
    psi4 = np.full_like(P, np.nan)
    tau_dyn = np.empty_like(P)
    for i, act in enumerate(actuators):
        Pi = P[:, i]
        eta = efficiency(act.mechanics, act.pmsm, f[:, i], v[:, i])
        with np.errstate(invalid="ignore", divide="ignore"):
            integrand[:, i] = np.where(Pi > 0, Pi / eta, np.where(Pi < 0, Pi * eta, 0.0))
        tau_em, omega = operating_point(act.mechanics, act.pmsm, f[:, i], v[:, i])
        P_elec = steady_state_electrical(act.pmsm, tau_em, omega).power
        with np.errstate(invalid="ignore", divide="ignore"):
            motoring = (Pi > 0) & (P_elec > 0)
            generating = (Pi < 0) & (P_elec < 0)
            psi4[:, i] = np.where(motoring, Pi / P_elec, np.where(generating, P_elec / Pi, np.nan))
        tau_dyn[:, i] = motor_torque(act.mechanics, 0.0, v[:, i], a[:, i], f[:, i])[0]
    psi3 = dt * np.cumsum(integrand, axis=0)
    return MetricsSeries(np.asarray(t, dtype=float), v, f, P, f.copy(), psi3, psi4, tau_dyn,
                         np.isnan(psi4).sum(axis=0))


@dataclass(frozen=True, eq=False)
class SensitivityEntry:
    """Metrics at one payload with their payload derivatives."""

    payload: float
    series: MetricsSeries          # possibly decimated
    derivatives: dict              # metric -> array like series.psiN
    aggregates: dict               # metric -> per-actuator value
    aggregate_derivatives: dict
    scheme: str
    delta_m: float


def check_perturbation(mass: float, delta_m: float, what: str = "m_TCP") -> None:
    if not delta_m > 0:
        raise PrecisionError(f"delta_m must be > 0, got {delta_m!r}")
    if (mass + delta_m) - mass < delta_m / 2:
        raise PrecisionError(
            f"delta_m={delta_m!r} kg is below the floating-point resolution of {what}={mass!r} kg "
            f"((m + delta_m) - m = {(mass + delta_m) - mass!r}); use a larger delta_m"
        )


def _fd(hi, lo, h):
    with np.errstate(invalid="ignore"):
        return (hi - lo) / h


def sensitivity_pd(metric_fn: Callable[[float], MetricsSeries], m_tcp: float, delta_m: float,
                   scheme: str = "central", stride: int = 1) -> SensitivityEntry:
    """Finite-difference derivative of every metric trace with respect to payload.

    ``forward``: ``(Psi(m + d) - Psi(m)) / d``; ``central``:
    ``(Psi(m + d) - Psi(m - d)) / 2d``.  Central differences fall back to
    forward ones when ``m - d`` would be a negative payload.

    Raises:
        PrecisionError: if ``m + d`` is not distinguishable from ``m``.
    """
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}", "sweep.scheme")
    check_perturbation(m_tcp, delta_m)
    base = metric_fn(m_tcp)
    up = metric_fn(m_tcp + delta_m)
    used = scheme
    if scheme == "central" and m_tcp - delta_m < 0:
        used = "forward"
    if used == "central":
        down = metric_fn(m_tcp - delta_m)
        h = 2.0 * delta_m
    else:
        down = base
        h = delta_m
    deriv = {k: _fd(getattr(up, k), getattr(down, k), h) for k in METRICS}
    agg, agg_up, agg_down = base.aggregates(), up.aggregates(), down.aggregates()
    agg_deriv = {k: _fd(agg_up[k], agg_down[k], h) for k in METRICS}
    idx = _stride_index(len(base.t), stride)
    return SensitivityEntry(
        payload=float(m_tcp),
        series=base.decimate(stride),
        derivatives={k: v[idx] for k, v in deriv.items()},
        aggregates=agg,
        aggregate_derivatives=agg_deriv,
        scheme=used,
        delta_m=float(delta_m),
    )


@dataclass(frozen=True)
class SweepSpec:
    m_min: float = 0.0
    m_max: float = 200.0
    n_points: int = 101
    delta_m: float = 1e-4
    scheme: str = "central"
    dt: float = 1e-3
    output_stride: int = 1

    def validate(self) -> None:
        if not (self.m_min >= 0 and math.isfinite(self.m_min)):
            raise ConfigError(f"must be >= 0, got {self.m_min!r}", "sweep.m_min")
        if not (isinstance(self.n_points, int) and self.n_points >= 2):
            raise ConfigError(f"must be an integer >= 2, got {self.n_points!r}", "sweep.n_points")
        if not (self.m_max > self.m_min and math.isfinite(self.m_max)):
            raise ConfigError("m_max must exceed m_min (degenerate payload grid)", "sweep.m_max")
        if not self.delta_m > 0:
            raise ConfigError(f"must be > 0, got {self.delta_m!r}", "sweep.delta_m")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}", "sweep.scheme")
        if not self.dt > 0:
            raise ConfigError(f"must be > 0, got {self.dt!r}", "sweep.dt")
        if not (isinstance(self.output_stride, int) and self.output_stride >= 1):
            raise ConfigError(f"must be an integer >= 1, got {self.output_stride!r}", "sweep.output_stride")

    def grid(self) -> np.ndarray:
        return np.linspace(self.m_min, self.m_max, self.n_points)


@dataclass(frozen=True, eq=False)
class SensitivityReport:
    payloads: np.ndarray
    actuator_names: list
    entries: list = field(default_factory=list)
    delta_m: float = 1e-4
    scheme: str = "central"
    dt: float = 1e-3
    max_tracking_error: float = 0.0

    @property
    def t(self) -> np.ndarray:
        return self.entries[0].series.t if self.entries else np.zeros(0)


class PayloadFailure(RuntimeError):
    def __init__(self, payload, cause):
        super().__init__(f"payload {payload!r} kg: {cause}")
        self.payload = payload
        self.cause = cause


def metrics_for_run(model: RobotModel, kin: KinematicRun, actuators: Sequence[Actuator]):
    """Return ``m_TCP -> MetricsSeries`` for a fixed kinematic run."""
    def fn(m_tcp: float) -> MetricsSeries:
        loaded = update_payload(model, m_tcp)
        _, state = rnea(loaded, kin.q, kin.qdot, kin.qddot)
        return evaluate_metrics(state, actuators, kin.dt, kin.t)
    return fn


def payload_sweep(model: RobotModel, trajectory: TrajectorySpec, actuators: Sequence[Actuator], sweep: SweepSpec,
                  q0, parallel: int = 1, kin: KinematicRun | None = None) -> SensitivityReport:
    """Metrics and payload derivatives over the payload grid.

    The joint motion does not depend on payload, so the trajectory is tracked
    once and shared by every grid point; only the inverse dynamics and the
    metrics are re-evaluated per payload.  Grid points run on ``parallel``
    worker threads and are reported in grid order.
    """
    sweep.validate()
    if kin is None:
        kin = run_trajectory(model, trajectory, sweep.dt, q0)
    last_mass = model.link_inertias[-1].mass
    payloads = sweep.grid()
    for m in payloads:
        check_perturbation(m, sweep.delta_m)
        check_perturbation(last_mass + m, sweep.delta_m, what="last-link mass incl. payload")
    fn = metrics_for_run(model, kin, actuators)

    def one(m):
        try:
            return sensitivity_pd(fn, float(m), sweep.delta_m, sweep.scheme, sweep.output_stride)
        except Exception as exc:  # noqa: BLE001 - re-raised with the payload attached
            raise PayloadFailure(float(m), exc) from exc

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            entries = list(pool.map(one, payloads))
    else:
        entries = [one(m) for m in payloads]
    return SensitivityReport(payloads, [a.name for a in actuators], entries, sweep.delta_m, sweep.scheme,
                             sweep.dt, float(np.max(kin.tracking_error)))
