"""Robot description: joint screws, link inertias, TCP payload and joint transmissions."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Optional

import jsonschema
import numpy as np

from .spatial import (
    ANG,
    LIN,
    InertiaError,
    SpatialInertia,
    Transform,
    TransformError,
    compose,
    exp_twist,
    orthonormalize,
)

logger = logging.getLogger(__name__)

REVOLUTE = "revolute"
PRISMATIC = "prismatic"

SINGULAR_TRANSMISSION_TOL = 1e-9


class ConfigError(ValueError):
    """Malformed or invalid configuration.  ``field`` names the offending entry."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class SingularTransmissionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TransmissionSpec:
    """Crank-triangle linkage between a revolute joint and a linear actuator.

    The actuator spans the side opposite the joint in a triangle with sides
    ``anchor_a`` and ``anchor_b`` enclosing the angle ``theta + angle_offset``.
    The dimensions in the shipped configuration are illustrative.
    """

    anchor_a: float
    anchor_b: float
    angle_offset: float = 0.0


@dataclass(frozen=True)
class TransmissionState:
    x: float
    xdot: float
    dx_dtheta: float
    force: float


def transmission_map(t: Optional[TransmissionSpec], theta, theta_dot, tau):
    """Map joint angle, rate and torque to actuator length, speed, lever arm and force.

    ``t=None`` is the rigid-direct (identity) transmission used for prismatic
    joints driven in line.  Works elementwise on arrays.

    Raises:
        SingularTransmissionError: if ``|dx/dtheta| < 1e-9`` anywhere, since
            the actuator force is unbounded there.
    """
    x, dxdth, _ = transmission_geometry(t, theta)
    if np.any(np.abs(dxdth) < SINGULAR_TRANSMISSION_TOL):
        raise SingularTransmissionError(
            f"singular transmission: |dx/dtheta| < {SINGULAR_TRANSMISSION_TOL:g} at theta={theta!r}"
        )
    xdot = dxdth * theta_dot
    force = tau / dxdth
    if np.ndim(x) == 0:
        return TransmissionState(float(x), float(xdot), float(dxdth), float(force))
    return TransmissionState(x, xdot, dxdth, force)


def transmission_geometry(t: Optional[TransmissionSpec], theta):
    """Actuator length x(theta) with its first and second derivatives."""
    theta = np.asarray(theta, dtype=float)
    if t is None:
        return theta.copy(), np.ones_like(theta), np.zeros_like(theta)
    a, b = t.anchor_a, t.anchor_b
    phi = theta + t.angle_offset
    ab = a * b
    x2 = a * a + b * b - 2.0 * ab * np.cos(phi)
    if np.any(x2 <= 0.0):
        raise SingularTransmissionError(f"actuator length vanishes at theta={theta!r}")
    x = np.sqrt(x2)
    d1 = ab * np.sin(phi) / x
    d2 = (ab * np.cos(phi) - d1 * d1) / x
    return x, d1, d2


@dataclass(frozen=True)
class JointSpec:
    kind: str
    screw: np.ndarray
    limits: tuple = (-math.inf, math.inf)
    transmission: Optional[TransmissionSpec] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "screw", np.array(self.screw, dtype=float).reshape(6))
        object.__setattr__(self, "limits", (float(self.limits[0]), float(self.limits[1])))

    def validate(self, where: str = "joint") -> None:
        s = self.screw
        if self.kind == REVOLUTE:
            if abs(np.linalg.norm(s[ANG]) - 1.0) > 1e-9:
                raise ConfigError("revolute screw needs a unit angular part", f"{where}.screw")
        elif self.kind == PRISMATIC:
            if np.any(s[ANG] != 0.0) or abs(np.linalg.norm(s[LIN]) - 1.0) > 1e-9:
                raise ConfigError("prismatic screw needs zero angular and unit linear part", f"{where}.screw")
            if self.transmission is not None:
                raise ConfigError("prismatic joints use the rigid-direct transmission", f"{where}.transmission")
        else:
            raise ConfigError(f"unknown joint kind {self.kind!r}", f"{where}.kind")
        lo, hi = self.limits
        if not lo < hi:
            raise ConfigError("limits must satisfy min < max", f"{where}.limits")
        t = self.transmission
        if t is not None:
            if not (t.anchor_a > 0 and t.anchor_b > 0):
                raise ConfigError("anchors must be > 0", f"{where}.transmission")
            if math.isfinite(lo) and math.isfinite(hi):
                grid = np.linspace(lo, hi, 201)
                try:
                    _, d1, _ = transmission_geometry(t, grid)
                except SingularTransmissionError as exc:
                    raise ConfigError(str(exc), f"{where}.transmission") from None
                if np.any(np.abs(d1) < SINGULAR_TRANSMISSION_TOL) or np.any(np.sign(d1) != np.sign(d1[0])):
                    raise ConfigError("transmission passes a singular point within the joint limits",
                                      f"{where}.transmission")


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Serial chain description.

    ``link_inertias`` are the bare links; the TCP payload is a point mass kept
    separately in ``payload_mass`` and folded into the last link by
    :meth:`effective_inertias`.
    """

    joints: tuple
    link_inertias: tuple
    parent_transforms: tuple
    tcp_offset: Transform = field(default_factory=Transform.identity)
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    payload_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "link_inertias", tuple(self.link_inertias))
        object.__setattr__(self, "parent_transforms", tuple(self.parent_transforms))
        object.__setattr__(self, "gravity", np.array(self.gravity, dtype=float).reshape(3))
        object.__setattr__(self, "payload_mass", float(self.payload_mass))

    @property
    def n(self) -> int:
        return len(self.joints)

    @property
    def joint_names(self) -> list:
        return [j.name or f"joint{i + 1}" for i, j in enumerate(self.joints)]

    def validate(self) -> None:
        n = self.n
        if n == 0:
            raise ConfigError("at least one joint is required", "robot.joints")
        if len(self.link_inertias) != n:
            raise ConfigError(f"expected {n} entries, got {len(self.link_inertias)}", "robot.link_inertias")
        if len(self.parent_transforms) != n:
            raise ConfigError(f"expected {n} entries, got {len(self.parent_transforms)}", "robot.parent_transforms")
        for i, j in enumerate(self.joints):
            j.validate(f"robot.joints[{i}]")
        for i, inertia in enumerate(self.link_inertias):
            if not inertia.mass >= 0:
                raise ConfigError(f"must be >= 0, got {inertia.mass!r}", f"robot.link_inertias[{i}].mass")
            try:
                inertia.validate()
            except InertiaError as exc:
                raise ConfigError(str(exc), f"robot.link_inertias[{i}].rotational_inertia") from None
        for i, g in enumerate(self.parent_transforms):
            try:
                g.validate()
            except TransformError as exc:
                raise ConfigError(str(exc), f"robot.parent_transforms[{i}]") from None
        try:
            self.tcp_offset.validate()
        except TransformError as exc:
            raise ConfigError(str(exc), "robot.tcp_offset") from None
        if not np.all(np.isfinite(self.gravity)):
            raise ConfigError("must be finite", "robot.gravity")
        if not self.payload_mass >= 0:
            raise ConfigError(f"must be >= 0, got {self.payload_mass!r}", "payload_mass")

    def payload_inertia(self) -> SpatialInertia:
        return SpatialInertia.point_mass(self.payload_mass, self.tcp_offset.translation)

    def effective_inertias(self) -> list:
        """Link inertias with the payload point mass added to the last link."""
        out = list(self.link_inertias)
        if self.payload_mass != 0.0:
            out[-1] = out[-1] + self.payload_inertia()
        return out


def update_payload(model: RobotModel, m_tcp: float) -> RobotModel:
    """Return a copy of ``model`` carrying a point-mass payload of ``m_tcp`` kg at the TCP."""
    if not (m_tcp >= 0 and math.isfinite(m_tcp)):
        raise ConfigError(f"payload mass must be a finite value >= 0, got {m_tcp!r}", "payload_mass")
    return replace(model, payload_mass=float(m_tcp))


def forward_kinematics(model: RobotModel, q):
    """Frames of every link and of the TCP in the base frame.

    Link ``i`` sits at ``G_0^i = G_0^{i-1} * parent_i * exp(s_i q_i)``.

    Returns:
        (frames, tcp): list of ``G_0^i`` for i = 1..n, and ``G_0^TCP``.
    """
    q = np.asarray(q, dtype=float)
    frames = []
    g = Transform.identity()
    for joint, parent, qi in zip(model.joints, model.parent_transforms, q):
        lo, hi = joint.limits
        if not lo <= qi <= hi:
            logger.debug("joint %s at %.6g outside limits [%g, %g]", joint.name, qi, lo, hi)
        g = compose(compose(g, parent), exp_twist(joint.screw, qi))
        frames.append(g)
    return frames, compose(g, model.tcp_offset)


def tcp_position(model: RobotModel, q) -> np.ndarray:
    return forward_kinematics(model, q)[1].translation


# --- configuration loading --------------------------------------------------

def _schema() -> dict:
    text = resources.files(__package__).joinpath("schemas/robot.schema.json").read_text()
    return json.loads(text)


def _transform_from(obj, where: str) -> Transform:
    R = np.asarray(obj.get("rotation", np.eye(3)), dtype=float)
    t = np.asarray(obj.get("translation", [0.0, 0.0, 0.0]), dtype=float)
    if R.shape != (3, 3):
        raise ConfigError("rotation must be 3x3", f"{where}.rotation")
    if t.shape != (3,):
        raise ConfigError("translation must have 3 entries", f"{where}.translation")
    g = Transform(R, t)
    try:
        g.validate(tol=1e-9)
    except TransformError as exc:
        raise ConfigError(str(exc), f"{where}.rotation") from None
    # re-project so downstream invariants hold at 1e-12
    return Transform(orthonormalize(R), t)


def model_from_dict(data: dict) -> RobotModel:
    """Build a :class:`RobotModel` from the parsed robot config (``{"robot": {...}}``)."""
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) if not isinstance(p, int) else f"[{p}]" for p in exc.absolute_path)
        raise ConfigError(exc.message, path.replace(".[", "[") or "<root>") from None

    r = data["robot"]
    joints = []
    for i, jd in enumerate(r["joints"]):
        td = jd.get("transmission")
        trans = None
        if td is not None and td != "rigid":
            trans = TransmissionSpec(float(td["anchor_a"]), float(td["anchor_b"]), float(td.get("angle_offset", 0.0)))
        joints.append(JointSpec(
            kind=jd["kind"],
            screw=np.asarray(jd["screw"], dtype=float),
            limits=tuple(jd.get("limits", (-math.inf, math.inf))),
            transmission=trans,
            name=jd.get("name", ""),
        ))
    inertias = []
    for i, ld in enumerate(r["link_inertias"]):
        if ld["mass"] < 0:
            raise ConfigError(f"must be >= 0, got {ld['mass']!r}", f"robot.link_inertias[{i}].mass")
        inertias.append(SpatialInertia(ld["mass"], ld.get("center_of_mass", [0, 0, 0]),
                                       ld.get("rotational_inertia", np.zeros((3, 3)))))
    parents = [_transform_from(pd, f"robot.parent_transforms[{i}]") for i, pd in enumerate(r["parent_transforms"])]
    tcp = _transform_from(r.get("tcp_offset", {}), "robot.tcp_offset")
    model = RobotModel(
        joints=joints,
        link_inertias=inertias,
        parent_transforms=parents,
        tcp_offset=tcp,
        gravity=r.get("gravity", [0.0, 0.0, -9.81]),
        payload_mass=float(r.get("payload_mass", 0.0)),
    )
    model.validate()
    return model


def load_model(config_text: str) -> RobotModel:
    """Parse JSON robot configuration text.

    Raises:
        ConfigError: on malformed JSON or any invariant violation; the
            ``field`` attribute names the offending entry.
    """
    try:
        data = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", "<text>") from None
    return model_from_dict(data)
