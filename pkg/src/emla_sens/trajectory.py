"""Analytic TCP reference trajectories (position, velocity, acceleration)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .robot import ConfigError

KINDS = ("spiral", "constant", "linear")


class TrajectoryDomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TrajectorySpec:
    """Reference trajectory parameters.

    The spiral is ``center + ((r0 + r1 t) cos wt, (r0 + r1 t) sin wt, z0 + k_z t)``
    for ``t`` in ``[0, M]``.  An optional static ``hold`` (s) is prepended, during
    which the reference rests at the spiral's start point; the total duration is
    then ``hold + M``.
    """

    kind: str = "spiral"
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r0: float = 0.0
    r1: float = 0.0
    omega: float = 0.0
    z0: float = 0.0
    k_z: float = 0.0
    M: float = 8.0 * math.pi
    hold: float = 0.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    workspace_min: Optional[np.ndarray] = None
    workspace_max: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "center", np.array(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "velocity", np.array(self.velocity, dtype=float).reshape(3))
        for name in ("workspace_min", "workspace_max"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.array(v, dtype=float).reshape(3))

    @property
    def duration(self) -> float:
        return self.hold + self.M

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {KINDS}", "trajectory.kind")
        if not (self.M >= 0 and math.isfinite(self.M)):
            raise ConfigError(f"must be a finite value >= 0, got {self.M!r}", "trajectory.M")
        if not (self.hold >= 0 and math.isfinite(self.hold)):
            raise ConfigError(f"must be a finite value >= 0, got {self.hold!r}", "trajectory.hold")
        lo, hi = self.workspace_min, self.workspace_max
        if lo is not None or hi is not None:
            t = np.linspace(0.0, self.duration, 2001)
            x, _, _ = evaluate(self, t)
            if lo is not None and np.any(x < lo - 1e-12):
                raise ConfigError("trajectory leaves the workspace (below workspace_min)", "trajectory")
            if hi is not None and np.any(x > hi + 1e-12):
                raise ConfigError("trajectory leaves the workspace (above workspace_max)", "trajectory")


def evaluate(spec: TrajectorySpec, t):
    """Reference position, velocity and acceleration at time ``t``.

    ``t`` may be a scalar (returns three 3-vectors) or a 1-D array (returns
    three ``(len(t), 3)`` arrays).

    Raises:
        TrajectoryDomainError: if any ``t`` lies outside ``[0, duration]``.
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    T = spec.duration
    if np.any(t < 0.0) or np.any(t > T * (1.0 + 1e-12)):
        raise TrajectoryDomainError(f"t outside [0, {T!r}]")

    s = np.clip(t - spec.hold, 0.0, None)
    moving = (t >= spec.hold)[:, None]
    n = len(t)
    if spec.kind == "spiral":
        w = spec.omega
        r = spec.r0 + spec.r1 * s
        c, sn = np.cos(w * s), np.sin(w * s)
        x = np.column_stack([r * c, r * sn, spec.z0 + spec.k_z * s])
        v = np.column_stack([spec.r1 * c - r * w * sn, spec.r1 * sn + r * w * c, np.full(n, spec.k_z)])
        a = np.column_stack([
            -2.0 * spec.r1 * w * sn - r * w * w * c,
            2.0 * spec.r1 * w * c - r * w * w * sn,
            np.zeros(n),
        ])
    elif spec.kind == "linear":
        x = np.outer(s, spec.velocity)
        v = np.tile(spec.velocity, (n, 1))
        a = np.zeros((n, 3))
    elif spec.kind == "constant":
        x = np.zeros((n, 3))
        v = np.zeros((n, 3))
        a = np.zeros((n, 3))
    else:
        raise ConfigError(f"unknown kind {spec.kind!r}", "trajectory.kind")
    x = x + spec.center
    v = np.where(moving, v, 0.0)
    a = np.where(moving, a, 0.0)
    if scalar:
        return x[0], v[0], a[0]
    return x, v, a


def sample_times(duration: float, dt: float) -> np.ndarray:
    """Fixed-step grid ``0, dt, 2dt, ...`` up to and including ``duration``."""
    if not dt > 0:
        raise ConfigError(f"time step must be > 0, got {dt!r}", "dt")
    n = int(math.floor(duration / dt + 1e-9)) + 1
    return np.arange(n) * dt


def spec_from_dict(d: dict) -> TrajectorySpec:
    known = {"kind", "center", "r0", "r1", "omega", "z0", "k_z", "M", "hold", "velocity",
             "workspace_min", "workspace_max"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", "trajectory")
    try:
        spec = TrajectorySpec(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "trajectory") from None
    spec.validate()
    return spec
