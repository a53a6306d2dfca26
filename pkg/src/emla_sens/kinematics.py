"""Jacobians and second-order inverse differential kinematics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .robot import RobotModel, tcp_position, update_payload
from .spatial import ANG, LIN, ad_bracket, adjoint, compose, exp_twist, skew
from .trajectory import TrajectorySpec, evaluate, sample_times

logger = logging.getLogger(__name__)

SINGULAR_SIGMA = 1e-6
AUTO_DAMPING = 1e-4
PINV_RCOND = 1e-10
DIVERGENCE_LIMIT = 0.1


class DivergenceError(RuntimeError):
    """Tracking error exceeded the divergence guard."""


@dataclass(frozen=True, eq=False)
class JacobianPair:
    J: np.ndarray     # 3 x n, TCP linear velocity per joint rate
    Jdot: np.ndarray
    Js: np.ndarray    # 6 x n spatial Jacobian
    Jsdot: np.ndarray
    tcp: np.ndarray   # TCP position in the base frame


def _position_terms(model: RobotModel, q):
    """Spatial Jacobian plus the adjoints needed for its time derivative."""
    n = model.n
    Js = np.empty((6, n))
    Ad0 = []
    Adloc = []
    g = None
    for i, (joint, parent) in enumerate(zip(model.joints, model.parent_transforms)):
        local = compose(parent, exp_twist(joint.screw, q[i]))
        g = local if g is None else compose(g, local)
        A = adjoint(g)
        Ad0.append(A)
        Adloc.append(adjoint(local))
        Js[:, i] = A @ joint.screw
    r = compose(g, model.tcp_offset).translation
    return Js, Ad0, Adloc, r


def _task_selector(r) -> np.ndarray:
    """3x6 map from a spatial twist to the linear velocity of the point ``r``."""
    S = np.empty((3, 6))
    S[:, ANG] = -skew(r)
    S[:, LIN] = np.eye(3)
    return S


def _rate_terms(model: RobotModel, qdot, Js, Ad0, Adloc, r):
    n = model.n
    Jsdot = np.empty((6, n))
    Addot = np.zeros((6, 6))
    for i, joint in enumerate(model.joints):
        s = joint.screw
        Addot = Addot @ Adloc[i] + Ad0[i] @ ad_bracket(s) * qdot[i]
        Jsdot[:, i] = Addot @ s
    S = _task_selector(r)
    J = S @ Js
    rdot = J @ qdot
    Jdot = -skew(rdot) @ Js[ANG] + S @ Jsdot
    return JacobianPair(J, Jdot, Js, Jsdot, r)


def get_jacobian(model: RobotModel, q, qdot) -> JacobianPair:
    """Task Jacobian of the TCP position and its time derivative.

    Columns of the spatial Jacobian are ``Ad_{G_0^i} s_i``; the derivative of
    each adjoint follows the recursion
    ``d/dt Ad_{G_0^i} = d/dt Ad_{G_0^{i-1}} Ad_{G_{i-1}^i} + Ad_{G_0^i} ad_{s_i} qdot_i``.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    Js, Ad0, Adloc, r = _position_terms(model, q)
    return _rate_terms(model, qdot, Js, Ad0, Adloc, r)


def task_jacobian(model: RobotModel, q) -> np.ndarray:
    Js, _, _, r = _position_terms(model, np.asarray(q, dtype=float))
    return _task_selector(r) @ Js


def pseudoinverse(J, damping: float = 0.0) -> np.ndarray:
    """Moore-Penrose (``damping == 0``) or damped least-squares inverse of ``J``.

    The undamped form drops singular values below ``1e-10 * sigma_max``.
    """
    J = np.asarray(J, dtype=float)
    if damping < 0:
        raise ValueError("damping must be >= 0")
    if damping > 0:
        m = J.shape[0]
        return J.T @ np.linalg.inv(J @ J.T + damping ** 2 * np.eye(m))
    U, sv, Vt = np.linalg.svd(J, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        return np.zeros(J.T.shape)
    keep = sv > PINV_RCOND * sv[0]
    inv = np.zeros_like(sv)
    inv[keep] = 1.0 / sv[keep]
    return (Vt.T * inv) @ U.T


def _robust_pinv(J):
    U, sv, Vt = np.linalg.svd(J, full_matrices=False)
    sigma_min = float(sv[-1]) if sv.size else 0.0
    if sigma_min < SINGULAR_SIGMA:
        return pseudoinverse(J, AUTO_DAMPING), sigma_min, True
    return (Vt.T / sv) @ U.T, sigma_min, False


@dataclass(frozen=True, eq=False)
class IKStep:
    q_next: np.ndarray
    qdot_next: np.ndarray
    qddot: np.ndarray
    qdot: np.ndarray      # joint rate at the current sample
    tcp: np.ndarray       # TCP position at the current sample
    sigma_min: float
    damped: bool


def ik_step(model: RobotModel, q, qdot, x_r, xdot_r, xddot_r, dt: float) -> IKStep:
    """One step of second-order inverse differential kinematics.

    ``qdot_sample = J+ xdot_r`` and ``qddot = J+ (xddot_r - Jdot qdot_sample)``,
    with ``Jdot`` evaluated at the fresh joint rate.  The state then advances
    by explicit Euler.  The incoming ``qdot`` is only carried for callers that
    track the integrated rate.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    q = np.asarray(q, dtype=float)
    Js, Ad0, Adloc, r = _position_terms(model, q)
    J = _task_selector(r) @ Js
    Jp, sigma_min, damped = _robust_pinv(J)
    if damped:
        logger.debug("near-singular Jacobian (sigma_min=%.3e); damping %.1e engaged", sigma_min, AUTO_DAMPING)
    qd = Jp @ np.asarray(xdot_r, dtype=float)
    pair = _rate_terms(model, qd, Js, Ad0, Adloc, r)
    qdd = Jp @ (np.asarray(xddot_r, dtype=float) - pair.Jdot @ qd)
    return IKStep(q + qd * dt, qd + qdd * dt, qdd, qd, r, sigma_min, damped)


def solve_position(model: RobotModel, q0, target, tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """Newton refinement of ``q0`` so the TCP reaches ``target``."""
    q = np.array(q0, dtype=float)
    target = np.asarray(target, dtype=float)
    for _ in range(max_iter):
        err = target - tcp_position(model, q)
        if np.linalg.norm(err) <= tol:
            return q
        J = task_jacobian(model, q)
        Jp, _, _ = _robust_pinv(J)
        q = q + Jp @ err
    err = np.linalg.norm(target - tcp_position(model, q))
    if err > 1e-9:
        raise DivergenceError(f"initial configuration cannot reach the trajectory start (residual {err:.3e} m)")
    return q


@dataclass(frozen=True, eq=False)
class KinematicRun:
    t: np.ndarray
    q: np.ndarray          # (N, n)
    qdot: np.ndarray
    qddot: np.ndarray
    x_ref: np.ndarray      # (N, 3)
    x_tcp: np.ndarray
    dt: float
    damped_steps: int

    @property
    def tracking_error(self) -> np.ndarray:
        return np.linalg.norm(self.x_tcp - self.x_ref, axis=1)

    def __len__(self):
        return len(self.t)


def run_trajectory(model: RobotModel, trajectory: TrajectorySpec, dt: float, q0, m_tcp=None,
                   refine_start: bool = True) -> KinematicRun:
    """Track ``trajectory`` from the joint guess ``q0`` with a fixed step ``dt``.

    The returned run holds one sample per grid time ``k*dt <= duration``.  The
    start configuration is Newton-refined onto ``x_r(0)`` unless
    ``refine_start`` is false.  Payload does not enter the kinematics; ``m_tcp``
    is accepted so callers can pass the payload-updated model unchanged.

    Raises:
        DivergenceError: if the TCP strays more than 0.1 m from the reference.
    """
    if m_tcp is not None:
        model = update_payload(model, m_tcp)
    t = sample_times(trajectory.duration, dt)
    N, n = len(t), model.n
    x_ref, xd_ref, xdd_ref = evaluate(trajectory, t)

    q = np.array(q0, dtype=float)
    if q.shape != (n,):
        raise ValueError(f"initial q must have {n} entries")
    if refine_start:
        q = solve_position(model, q, x_ref[0])

    Q = np.empty((N, n))
    QD = np.empty((N, n))
    QDD = np.empty((N, n))
    X = np.empty((N, 3))
    qd = np.zeros(n)
    damped = 0
    for k in range(N):
        step = ik_step(model, q, qd, x_ref[k], xd_ref[k], xdd_ref[k], dt)
        X[k] = step.tcp
        err = np.linalg.norm(X[k] - x_ref[k])
        if err > DIVERGENCE_LIMIT:
            raise DivergenceError(f"tracking error {err:.4f} m exceeds {DIVERGENCE_LIMIT} m at t={t[k]:.4f} s")
        Q[k], QD[k], QDD[k] = q, step.qdot, step.qddot
        damped += step.damped
        q, qd = step.q_next, step.qdot_next
    if damped:
        logger.warning("damped least squares engaged on %d of %d steps (near-singular Jacobian)", damped, N)
    return KinematicRun(t, Q, QD, QDD, x_ref, X, dt, damped)
