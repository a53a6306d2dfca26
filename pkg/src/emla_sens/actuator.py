"""PMSM-driven electromechanical linear actuator (motor, planetary, gear, screw).

Sign conventions: positive load force ``F_l`` and speed ``v`` in the same
direction mean the actuator is motoring.  All functions broadcast over numpy
arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .robot import ConfigError

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)

#: Marker returned where efficiency is undefined (no mechanical power).
NO_POWER = float("nan")


def is_no_power(x):
    return np.isnan(x)


@dataclass(frozen=True)
class PMSMParams:
    """Surface/interior PM machine constants.

    R_s [ohm], L_d / L_q [H], n_p pole pairs, psi_pm [Wb].  ``R_s = 0`` is
    allowed to model an ideal (lossless) machine.
    """

    R_s: float
    L_d: float
    L_q: float
    n_p: int
    psi_pm: float

    def validate(self, where: str = "pmsm") -> None:
        if not (self.R_s >= 0 and math.isfinite(self.R_s)):
            raise ConfigError(f"must be >= 0, got {self.R_s!r}", f"{where}.R_s")
        for name in ("L_d", "L_q", "psi_pm"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ConfigError(f"must be > 0, got {val!r}", f"{where}.{name}")
        if not (isinstance(self.n_p, int) and self.n_p > 0):
            raise ConfigError(f"must be a positive integer, got {self.n_p!r}", f"{where}.n_p")


@dataclass(frozen=True)
class LossModel:
    """Copper (from R_s), iron (c_h |w| + c_e w^2) and screw Coulomb/viscous losses."""

    c_h: float = 0.0        # W*s/rad
    c_e: float = 0.0        # W*s^2/rad^2
    coulomb: float = 0.0    # N
    viscous: float = 0.0    # N*s/m

    def validate(self, where: str = "loss") -> None:
        for name in ("c_h", "c_e", "coulomb", "viscous"):
            val = getattr(self, name)
            if not (val >= 0 and math.isfinite(val)):
                raise ConfigError(f"must be >= 0, got {val!r}", f"{where}.{name}")


@dataclass(frozen=True)
class EMLAParams:
    """Drivetrain constants.

    ``lead`` is the screw travel per revolution [m/rev].  The series
    stiffnesses only enter when ``rigid`` is false.
    """

    lead: float
    m_s: float = 0.0
    j_m: float = 0.0
    j_p: float = 0.0
    j_g: float = 0.0
    N_g: float = 1.0
    N_p: float = 1.0
    b_s: float = 0.0
    b_m: float = 0.0
    k_mp: float = math.inf
    k_pg: float = math.inf
    k_gs: float = math.inf
    k_l: float = math.inf
    rigid: bool = True
    loss: LossModel = field(default_factory=LossModel)

    def validate(self, where: str = "mechanics") -> None:
        if not (self.lead > 0 and math.isfinite(self.lead)):
            raise ConfigError(f"screw lead must be > 0, got {self.lead!r}", f"{where}.lead")
        for name in ("m_s", "j_m", "j_p", "j_g", "b_s", "b_m"):
            val = getattr(self, name)
            if not (val >= 0 and math.isfinite(val)):
                raise ConfigError(f"must be >= 0, got {val!r}", f"{where}.{name}")
        for name in ("N_g", "N_p"):
            val = getattr(self, name)
            if not (val >= 1 and math.isfinite(val)):
                raise ConfigError(f"gear ratio must be >= 1, got {val!r}", f"{where}.{name}")
        if not self.rigid:
            for name in ("k_mp", "k_pg", "k_gs", "k_l"):
                val = getattr(self, name)
                if not val > 0:
                    raise ConfigError(f"stiffness must be > 0, got {val!r}", f"{where}.{name}")
        self.loss.validate(where.rsplit(".", 1)[0] + ".loss" if "." in where else "loss")

    @property
    def alpha(self) -> float:
        return 2.0 * math.pi / self.lead

    @property
    def ratio(self) -> float:
        """Motor angle per unit load travel, alpha * N_g * N_p [rad/m]."""
        return self.alpha * self.N_g * self.N_p


@dataclass(frozen=True)
class EquivalentCoefficients:
    a_eq: float
    b_eq: float
    c_eq: float
    alpha: float


def equivalent_coefficients(p: EMLAParams) -> EquivalentCoefficients:
    """Load-side equivalent mass, damping and stiffness of the drivetrain."""
    if not p.lead > 0:
        raise ConfigError(f"screw lead must be > 0, got {p.lead!r}", "mechanics.lead")
    alpha = 2.0 * math.pi / p.lead
    Ng, Np = p.N_g, p.N_p
    a_eq = alpha ** 2 * (p.m_s / alpha ** 2 + p.j_g + Ng ** 2 * p.j_p + (Ng * Np) ** 2 * p.j_m)
    b_eq = p.b_s + (alpha * Ng * Np) ** 2 * p.b_m
    if p.rigid:
        c_eq = 0.0
    else:
        compliance = 1.0 / ((Np * Ng) ** 2 * p.k_mp) + 1.0 / (Ng ** 2 * p.k_pg) + 1.0 / p.k_gs + 1.0 / p.k_l
        c_eq = alpha ** 2 / compliance
    return EquivalentCoefficients(a_eq, b_eq, c_eq, alpha)


def motor_torque(p: EMLAParams, x, xdot, xddot, F_l):
    """Motor shaft torque needed to drive the load, and the motor speed.

    The load-side force balance ``a_eq x'' + b_eq x' + c_eq x + F_l`` is
    reflected through the total ratio ``alpha N_g N_p``.  ``x`` is the series
    deflection and only matters in compliant mode.

    Returns:
        (tau_m [N*m], omega_m [rad/s])
    """
    c = equivalent_coefficients(p)
    force = c.a_eq * np.asarray(xddot) + c.b_eq * np.asarray(xdot) + np.asarray(F_l)
    if c.c_eq:
        force = force + c.c_eq * np.asarray(x)
    return force / p.ratio, p.ratio * np.asarray(xdot)


@dataclass(frozen=True, eq=False)
class ElectricalState:
    i_d: np.ndarray
    i_q: np.ndarray
    V_d: np.ndarray
    V_q: np.ndarray
    V_LL: np.ndarray      # line-to-line RMS voltage
    I_LL: np.ndarray      # line RMS current
    cos_phi: np.ndarray
    omega_m: np.ndarray

    @property
    def power(self):
        """Three-phase input power sqrt(3) V_LL I_LL cos(phi)."""
        return SQRT3 * self.V_LL * self.I_LL * self.cos_phi


def em_torque(m: PMSMParams, i_d, i_q):
    """Electromagnetic torque of the dq model."""
    return 1.5 * m.n_p * (i_q * (i_d * m.L_d + m.psi_pm) - i_d * i_q * m.L_q)


def steady_state_electrical(m: PMSMParams, tau_m, omega_m) -> ElectricalState:
    """Steady-state dq operating point with i_d = 0 (amplitude-invariant scaling)."""
    tau_m = np.asarray(tau_m, dtype=float)
    omega_m = np.asarray(omega_m, dtype=float)
    i_q = tau_m / (1.5 * m.n_p * m.psi_pm)
    i_d = np.zeros_like(i_q)
    we = m.n_p * omega_m
    V_d = m.R_s * i_d - we * m.L_q * i_q
    V_q = m.R_s * i_q + we * m.L_d * i_d + we * m.psi_pm
    V_ph = np.hypot(V_d, V_q)
    I_ph = np.hypot(i_d, i_q)
    denom = V_ph * I_ph
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_phi = np.where(denom > 0, (V_d * i_d + V_q * i_q) / np.where(denom > 0, denom, 1.0), 0.0)
    cos_phi = np.clip(cos_phi, -1.0, 1.0)
    return ElectricalState(i_d, i_q, V_d, V_q, SQRT3 * V_ph / SQRT2, I_ph / SQRT2, cos_phi, omega_m)


@dataclass(frozen=True, eq=False)
class Losses:
    copper: np.ndarray
    iron: np.ndarray
    mechanical: np.ndarray

    @property
    def total(self):
        return self.copper + self.iron + self.mechanical


def operating_point(p: EMLAParams, m: PMSMParams, f_x, v_x):
    """Quasi-static motor torque and speed for a load force and speed.

    The motor supplies the load force plus screw friction (opposing motion)
    reflected through the drivetrain, plus the iron-loss drag torque.

    Returns:
        (tau_em, omega_m)
    """
    f_x = np.asarray(f_x, dtype=float)
    v_x = np.asarray(v_x, dtype=float)
    L = p.loss
    omega = p.ratio * v_x
    friction = np.sign(v_x) * (L.coulomb + L.viscous * np.abs(v_x))
    drag = np.sign(omega) * (L.c_h + L.c_e * np.abs(omega))
    return (f_x + friction) / p.ratio + drag, omega


def losses(p: EMLAParams, m: PMSMParams, f_x, v_x) -> Losses:
    tau, omega = operating_point(p, m, f_x, v_x)
    i_q = tau / (1.5 * m.n_p * m.psi_pm)
    v = np.abs(np.asarray(v_x, dtype=float))
    w = np.abs(omega)
    L = p.loss
    return Losses(1.5 * m.R_s * i_q ** 2, L.c_h * w + L.c_e * w ** 2, L.coulomb * v + L.viscous * v ** 2)


def efficiency(p: EMLAParams, m: PMSMParams, f_x, v_x):
    """Actuator efficiency at a load-side operating point.

    Motoring (``f_x v_x > 0``): ``P_mech / (P_mech + losses)``.
    Regenerating (``f_x v_x < 0``): power returned to the bus over mechanical
    power absorbed, ``(|P_mech| - losses) / |P_mech|``, which is <= 0 when the
    losses exceed the absorbed power.  Zero mechanical power gives
    :data:`NO_POWER`.
    """
    f_x = np.asarray(f_x, dtype=float)
    v_x = np.asarray(v_x, dtype=float)
    P = f_x * v_x
    Pabs = np.abs(P)
    lost = losses(p, m, f_x, v_x).total
    with np.errstate(invalid="ignore", divide="ignore"):
        eta = np.where(P > 0, Pabs / (Pabs + lost), (Pabs - lost) / Pabs)
    eta = np.where(P == 0, NO_POWER, eta)
    return float(eta) if eta.ndim == 0 else eta


def efficiency_map_grid(p: EMLAParams, m: PMSMParams, f_range, v_range, n_f: int, n_v: int):
    """Efficiency sampled on an ``(n_f, n_v)`` force x velocity grid.

    Returns:
        (forces, velocities, eta) with ``eta[i, j]`` at ``(forces[i], velocities[j])``.
    """
    if n_f < 1 or n_v < 1:
        raise ValueError("grid counts must be positive")
    forces = np.linspace(f_range[0], f_range[1], n_f)
    vels = np.linspace(v_range[0], v_range[1], n_v)
    F, V = np.meshgrid(forces, vels, indexing="ij")
    return forces, vels, np.asarray(efficiency(p, m, F, V)).reshape(n_f, n_v)


@dataclass(frozen=True)
class Actuator:
    """One EMLA: drivetrain and motor."""

    name: str
    mechanics: EMLAParams
    pmsm: PMSMParams
    map_force_max: Optional[float] = None
    map_speed_max: Optional[float] = None


def actuator_from_dict(d: dict, where: str) -> Actuator:
    try:
        pm = PMSMParams(**d["pmsm"])
        loss = LossModel(**d.get("loss", {}))
        mech = dict(d["mechanics"])
        for k in ("k_mp", "k_pg", "k_gs", "k_l"):
            if mech.get(k) is None:
                mech.pop(k, None)
        mp = EMLAParams(loss=loss, **mech)
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}", where) from None
    except TypeError as exc:
        raise ConfigError(str(exc), where) from None
    pm.validate(f"{where}.pmsm")
    mp.validate(f"{where}.mechanics")
    return Actuator(d.get("name", where), mp, pm, d.get("map_force_max"), d.get("map_speed_max"))
