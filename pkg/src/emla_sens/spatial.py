"""Rigid-body spatial algebra on SE(3).

Twists are ordered (angular, linear) everywhere in this package and wrenches
(moment, force).  The adjoint of a transform ``g = (R, t)`` is

    Ad_g = [[R,       0],
            [[t]x R,  R]]

which maps a twist expressed in the child frame into the parent frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Canonical twist layout.  Import this rather than hard-coding slices.
TWIST_ORDER = ("angular", "linear")
ANG = slice(0, 3)
LIN = slice(3, 6)

ORTHO_TOL = 1e-10
_I3 = np.eye(3)
_I3.flags.writeable = False


def skew(v):
    """Return the 3x3 cross-product matrix ``[v]x`` so that ``[v]x @ u == v x u``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def orthonormalize(R):
    """Project ``R`` onto SO(3) (nearest rotation in the Frobenius norm)."""
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] *= -1
        Q = U @ Vt
    return Q


def orthonormality_error(R):
    return float(np.max(np.abs(R.T @ R - _I3)))


class TransformError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Transform:
    """Rigid transform ``x -> R x + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Transform":
        return cls()

    @classmethod
    def from_translation(cls, t) -> "Transform":
        return cls(np.eye(3), t)

    @classmethod
    def checked(cls, rotation, translation) -> "Transform":
        """Build a transform, raising :class:`TransformError` if the rotation is not in SO(3)."""
        g = cls(rotation, translation)
        g.validate()
        return g

    def validate(self, tol: float = 1e-12) -> None:
        R = self.rotation
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(self.translation)):
            raise TransformError("transform has non-finite entries")
        err = orthonormality_error(R)
        if err > tol:
            raise TransformError(f"rotation is not orthonormal (max |R^T R - I| = {err:.3e})")
        det = np.linalg.det(R)
        if abs(det - 1.0) > tol:
            raise TransformError(f"rotation determinant is {det!r}, expected +1")

    def compose(self, other: "Transform") -> "Transform":
        return compose(self, other)

    def __matmul__(self, other: "Transform") -> "Transform":
        return compose(self, other)

    def inverse(self) -> "Transform":
        return invert(self)

    def apply(self, point) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        H = np.eye(4)
        H[:3, :3] = self.rotation
        H[:3, 3] = self.translation
        return H

    def allclose(self, other: "Transform", atol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0.0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0.0, atol=atol)
        )


def compose(a: Transform, b: Transform) -> Transform:
    """``a`` followed by ``b``: R = Ra Rb, t = Ra tb + ta.

    The product rotation is re-projected onto SO(3) once its orthonormality
    error exceeds 1e-10, which bounds drift over long chains of products.
    """
    R = a.rotation @ b.rotation
    if orthonormality_error(R) > ORTHO_TOL:
        R = orthonormalize(R)
    return Transform(R, a.rotation @ b.translation + a.translation)


def invert(g: Transform) -> Transform:
    Rt = g.rotation.T
    return Transform(Rt, -Rt @ g.translation)


def adjoint(g: Transform) -> np.ndarray:
    """6x6 adjoint of ``g`` for (angular, linear) twists."""
    R = g.rotation
    Ad = np.zeros((6, 6))
    Ad[ANG, ANG] = R
    Ad[LIN, LIN] = R
    Ad[LIN, ANG] = skew(g.translation) @ R
    return Ad


def ad_bracket(s) -> np.ndarray:
    """Lie-bracket matrix ``ad_s`` so that ``ad_s @ u == [s, u]``."""
    s = np.asarray(s, dtype=float)
    W = skew(s[ANG])
    ad = np.zeros((6, 6))
    ad[ANG, ANG] = W
    ad[LIN, LIN] = W
    ad[LIN, ANG] = skew(s[LIN])
    return ad


def exp_twist(s, theta: float) -> Transform:
    """Matrix exponential of the unit screw ``s`` scaled by ``theta``.

    ``s`` is either a unit-rotation screw (|w| = 1) or a pure translation
    (w = 0, |v| = 1); general pitch is handled by the closed form.
    """
    s = np.asarray(s, dtype=float)
    w, v = s[ANG], s[LIN]
    if not np.any(w):
        return Transform(_I3, v * theta)
    W = skew(w)
    st, ct = np.sin(theta), np.cos(theta)
    WW = W @ W
    R = _I3 + st * W + (1.0 - ct) * WW
    G = _I3 * theta + (1.0 - ct) * W + (theta - st) * WW
    return Transform(R, G @ v)


@dataclass(frozen=True, eq=False)
class Twist:
    """Spatial velocity (angular rad/s, linear m/s)."""

    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))
    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "angular", np.array(self.angular, dtype=float).reshape(3))
        object.__setattr__(self, "linear", np.array(self.linear, dtype=float).reshape(3))

    @classmethod
    def from_vector(cls, x) -> "Twist":
        x = np.asarray(x, dtype=float)
        return cls(x[ANG], x[LIN])

    def vector(self) -> np.ndarray:
        return np.concatenate([self.angular, self.linear])

    def __array__(self, dtype=None, copy=None):
        out = self.vector()
        return out if dtype is None else out.astype(dtype)


@dataclass(frozen=True, eq=False)
class Wrench:
    """Spatial force (moment N*m, force N), dual to :class:`Twist`."""

    moment: np.ndarray = field(default_factory=lambda: np.zeros(3))
    force: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "moment", np.array(self.moment, dtype=float).reshape(3))
        object.__setattr__(self, "force", np.array(self.force, dtype=float).reshape(3))

    @classmethod
    def from_vector(cls, x) -> "Wrench":
        x = np.asarray(x, dtype=float)
        return cls(x[ANG], x[LIN])

    def vector(self) -> np.ndarray:
        return np.concatenate([self.moment, self.force])

    def __array__(self, dtype=None, copy=None):
        out = self.vector()
        return out if dtype is None else out.astype(dtype)


class InertiaError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpatialInertia:
    """Mass properties of a body, expressed in its link frame.

    ``rotational_inertia`` is taken about the link frame origin (not the
    centre of mass).
    """

    mass: float = 0.0
    center_of_mass: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotational_inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "center_of_mass", np.array(self.center_of_mass, dtype=float).reshape(3))
        object.__setattr__(self, "rotational_inertia", np.array(self.rotational_inertia, dtype=float).reshape(3, 3))

    def validate(self, tol: float = 1e-12) -> None:
        if not np.isfinite(self.mass) or self.mass < 0:
            raise InertiaError(f"mass must be >= 0, got {self.mass!r}")
        I = self.rotational_inertia
        scale = max(1.0, float(np.max(np.abs(I))))
        if np.max(np.abs(I - I.T)) > tol * scale:
            raise InertiaError("rotational_inertia is not symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (I + I.T))) < -tol * scale:
            raise InertiaError("rotational_inertia is not positive semidefinite")

    @classmethod
    def point_mass(cls, mass: float, position) -> "SpatialInertia":
        p = np.asarray(position, dtype=float)
        return cls(mass, p, mass * (p @ p * np.eye(3) - np.outer(p, p)))

    @classmethod
    def from_com_inertia(cls, mass: float, com, inertia_about_com) -> "SpatialInertia":
        """Shift a centroidal inertia to the frame origin (parallel-axis theorem)."""
        c = np.asarray(com, dtype=float)
        return cls(mass, c, np.asarray(inertia_about_com, dtype=float) + mass * (c @ c * np.eye(3) - np.outer(c, c)))

    def __add__(self, other: "SpatialInertia") -> "SpatialInertia":
        m = self.mass + other.mass
        if m > 0:
            com = (self.mass * self.center_of_mass + other.mass * other.center_of_mass) / m
        else:
            com = np.zeros(3)
        return SpatialInertia(m, com, self.rotational_inertia + other.rotational_inertia)

    def matrix(self) -> np.ndarray:
        """6x6 inertia about the frame origin acting on (angular, linear) twists."""
        m = self.mass
        C = skew(m * self.center_of_mass)
        G = np.zeros((6, 6))
        G[ANG, ANG] = self.rotational_inertia
        G[ANG, LIN] = C
        G[LIN, ANG] = C.T
        G[LIN, LIN] = m * np.eye(3)
        return G
