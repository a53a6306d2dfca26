"""Recursive Newton-Euler inverse dynamics and actuator-side force/velocity.

The recursion runs in body frames with gravity folded in as an upward base
acceleration, and is vectorised over time samples: every state argument may be
an ``(N, n)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import get_jacobian
from .robot import RobotModel, forward_kinematics, transmission_geometry
from .spatial import ANG, LIN, adjoint, invert


@dataclass(frozen=True, eq=False)
class ActuatorState:
    """Per-actuator load-side kinematics and force; arrays shaped like the joint states."""

    x: np.ndarray
    v_x: np.ndarray
    a_x: np.ndarray
    f_x: np.ndarray


def _batched_exp(screw, theta):
    """Rotation (N,3,3) and translation (N,3) of exp(screw * theta)."""
    w, v = screw[ANG], screw[LIN]
    N = theta.shape[0]
    if not np.any(w):
        return np.broadcast_to(np.eye(3), (N, 3, 3)), np.outer(theta, v)
    W = np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
    WW = W @ W
    st = np.sin(theta)[:, None, None]
    ct = np.cos(theta)[:, None, None]
    R = np.eye(3) + st * W + (1.0 - ct) * WW
    G = np.eye(3) * theta[:, None, None] + (1.0 - ct) * W + (theta[:, None, None] - st) * WW
    return R, G @ v


def _local_frames(model: RobotModel, q):
    """Parent-to-child transforms (R, p) of every joint for each sample."""
    frames = []
    for i, (joint, parent) in enumerate(zip(model.joints, model.parent_transforms)):
        Re, pe = _batched_exp(joint.screw, q[:, i])
        R = parent.rotation @ Re
        p = pe @ parent.rotation.T + parent.translation
        frames.append((R, p))
    return frames


def _rot_t(R, x):
    """Apply R^T row-wise: (N,3,3), (N,3) -> (N,3)."""
    return np.einsum("nji,nj->ni", R, x)


def _rot(R, x):
    return np.einsum("nij,nj->ni", R, x)


def joint_efforts(model: RobotModel, q, qdot, qddot, inertias=None) -> np.ndarray:
    """Joint torques/forces from the Newton-Euler recursion.

    ``inertias`` defaults to the payload-augmented link inertias of ``model``.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    qd = np.atleast_2d(np.asarray(qdot, dtype=float))
    qdd = np.atleast_2d(np.asarray(qddot, dtype=float))
    N, n = q.shape
    if n != model.n or qd.shape != q.shape or qdd.shape != q.shape:
        raise ValueError(f"state arrays must have {model.n} columns and matching shapes")
    if inertias is None:
        inertias = model.effective_inertias()
    frames = _local_frames(model, q)

    w = np.zeros((N, 3))
    v = np.zeros((N, 3))
    dw = np.zeros((N, 3))
    dv = np.tile(-model.gravity, (N, 1))
    twists, accels = [], []
    for i, joint in enumerate(model.joints):
        R, p = frames[i]
        sw, sv = joint.screw[ANG], joint.screw[LIN]
        # transform parent twist/acceleration into frame i
        w_i = _rot_t(R, w)
        v_i = _rot_t(R, v - np.cross(p, w))
        dw_i = _rot_t(R, dw)
        dv_i = _rot_t(R, dv - np.cross(p, dw))
        qdi = qd[:, i:i + 1]
        qddi = qdd[:, i:i + 1]
        w_i = w_i + sw * qdi
        v_i = v_i + sv * qdi
        # ad_{V_i} s_i qdot_i
        dw_i = dw_i + np.cross(w_i, sw) * qdi + sw * qddi
        dv_i = dv_i + (np.cross(v_i, sw) + np.cross(w_i, sv)) * qdi + sv * qddi
        twists.append((w_i, v_i))
        accels.append((dw_i, dv_i))
        w, v, dw, dv = w_i, v_i, dw_i, dv_i

    tau = np.empty((N, n))
    m_next = np.zeros((N, 3))
    f_next = np.zeros((N, 3))
    for i in range(n - 1, -1, -1):
        body = inertias[i]
        m, c, I = body.mass, body.center_of_mass, body.rotational_inertia
        w_i, v_i = twists[i]
        dw_i, dv_i = accels[i]
        # momentum and its rate: G V, G dV
        h = w_i @ I.T + m * np.cross(c, v_i)
        pl = m * v_i - m * np.cross(c, w_i)
        dh = dw_i @ I.T + m * np.cross(c, dv_i)
        dp = m * dv_i - m * np.cross(c, dw_i)
        mom = dh + np.cross(w_i, h) + np.cross(v_i, pl)
        frc = dp + np.cross(w_i, pl)
        if i + 1 < n:
            R, p = frames[i + 1]
            fc = _rot(R, f_next)
            mom = mom + _rot(R, m_next) + np.cross(p, fc)
            frc = frc + fc
        joint = model.joints[i]
        tau[:, i] = mom @ joint.screw[ANG] + frc @ joint.screw[LIN]
        m_next, f_next = mom, frc
    return tau


def actuator_states(model: RobotModel, q, qdot, qddot, tau) -> ActuatorState:
    """Map joint states and efforts through each joint's transmission."""
    q = np.atleast_2d(q)
    qdot = np.atleast_2d(qdot)
    qddot = np.atleast_2d(qddot)
    tau = np.atleast_2d(tau)
    cols = [[], [], [], []]
    for i, joint in enumerate(model.joints):
        x, d1, d2 = transmission_geometry(joint.transmission, q[:, i])
        cols[0].append(x)
        cols[1].append(d1 * qdot[:, i])
        cols[2].append(d2 * qdot[:, i] ** 2 + d1 * qddot[:, i])
        cols[3].append(tau[:, i] / d1)
    return ActuatorState(*(np.column_stack(c) for c in cols))


def rnea(model: RobotModel, q, qdot, qddot):
    """Inverse dynamics of ``model`` (payload already applied).

    Accepts single states (length-n vectors) or stacks of states ``(N, n)``.

    Returns:
        (tau, ActuatorState): joint efforts and the load-side actuator
        position, velocity, acceleration and force.
    """
    single = np.ndim(q) == 1
    tau = joint_efforts(model, q, qdot, qddot)
    act = actuator_states(model, q, qdot, qddot, tau)
    if single:
        return tau[0], ActuatorState(act.x[0], act.v_x[0], act.a_x[0], act.f_x[0])
    return tau, act


# --- energy bookkeeping (independent of the recursion above) ----------------

def kinetic_energy(model: RobotModel, q, qdot) -> float:
    """Kinetic energy from spatial-Jacobian link twists."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    frames, _ = forward_kinematics(model, q)
    Js = get_jacobian(model, q, np.zeros_like(q)).Js
    total = 0.0
    for i, (g, body) in enumerate(zip(frames, model.effective_inertias())):
        V_spatial = Js[:, :i + 1] @ qdot[:i + 1]
        V_body = adjoint(invert(g)) @ V_spatial
        total += 0.5 * V_body @ body.matrix() @ V_body
    return float(total)


def potential_energy(model: RobotModel, q) -> float:
    frames, _ = forward_kinematics(model, q)
    total = 0.0
    for g, body in zip(frames, model.effective_inertias()):
        total -= body.mass * model.gravity @ g.apply(body.center_of_mass)
    return float(total)


def mechanical_energy_rate(model: RobotModel, q, qdot, qddot, h: float = 1e-4):
    """d/dt of kinetic and potential energy at a state, by a 4-point central stencil.

    The state is advanced along ``q + qdot s + qddot s^2 / 2``.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    qddot = np.asarray(qddot, dtype=float)

    def at(s):
        qs = q + qdot * s + 0.5 * qddot * s * s
        return kinetic_energy(model, qs, qdot + qddot * s), potential_energy(model, qs)

    (k1p, p1p), (k1m, p1m) = at(h), at(-h)
    (k2p, p2p), (k2m, p2m) = at(2 * h), at(-2 * h)
    dk = (8 * (k1p - k1m) - (k2p - k2m)) / (12 * h)
    dp = (8 * (p1p - p1m) - (p2p - p2m)) / (12 * h)
    return dk, dp
