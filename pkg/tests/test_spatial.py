import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emla_sens.spatial import (
    ANG, LIN, TWIST_ORDER, SpatialInertia, Transform, TransformError, Twist, Wrench, ad_bracket, adjoint,
    compose, exp_twist, invert, orthonormality_error, skew,
)
from models import random_transform, rotation

finite = st.floats(-10, 10, allow_nan=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)
angle = st.floats(-math.pi, math.pi, allow_nan=False)
unit = vec3.filter(lambda v: np.linalg.norm(v) > 1e-3).map(lambda v: v / np.linalg.norm(v))
transforms = st.builds(lambda a, th, t: Transform(rotation(a, th), t), unit, angle, vec3)


def test_twist_order_constant():
    assert TWIST_ORDER == ("angular", "linear")
    t = Twist.from_vector([1, 2, 3, 4, 5, 6])
    assert np.array_equal(t.angular, [1, 2, 3])
    assert np.array_equal(np.asarray(t)[LIN], [4, 5, 6])


def test_compose_identity():
    assert compose(Transform.identity(), Transform.identity()).allclose(Transform.identity(), atol=0.0)


def test_compose_inverse(rng):
    for _ in range(20):
        g = random_transform(rng)
        assert compose(g, invert(g)).allclose(Transform.identity(), atol=1e-12)


def test_compose_translations():
    c = compose(Transform.from_translation([1, 0, 0]), Transform.from_translation([0, 2, 0]))
    assert np.array_equal(c.rotation, np.eye(3))
    assert np.allclose(c.translation, [1, 2, 0], atol=0)


def test_compose_matches_homogeneous_product(rng):
    a, b = random_transform(rng), random_transform(rng)
    assert np.allclose((a @ b).matrix(), a.matrix() @ b.matrix(), atol=1e-12)
    c = compose(a, b)
    c.validate()


def test_checked_rejects_non_rotation():
    with pytest.raises(TransformError):
        Transform.checked(np.diag([1.0, 1.0, 1.01]), np.zeros(3))
    with pytest.raises(TransformError):
        Transform.checked(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_adjoint_identity():
    assert np.array_equal(adjoint(Transform.identity()), np.eye(6))


def test_adjoint_pure_translation_example():
    Ad = adjoint(Transform.from_translation([1, 0, 0]))
    out = Ad @ Twist([0, 0, 1], [0, 0, 0]).vector()
    assert np.allclose(out, [0, 0, 1, 0, -1, 0], atol=1e-15)


def test_adjoint_maps_point_velocity(rng):
    # twist of a body moving with child-frame velocity, seen from the parent
    g = random_transform(rng)
    V = rng.normal(size=6)
    Vp = adjoint(g) @ V
    p_child = rng.normal(size=3)
    v_child = V[LIN] + np.cross(V[ANG], p_child)
    p_parent = g.apply(p_child)
    v_parent = Vp[LIN] + np.cross(Vp[ANG], p_parent)
    assert np.allclose(v_parent, g.rotation @ v_child, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(transforms, transforms)
def test_adjoint_homomorphism(a, b):
    assert np.allclose(adjoint(compose(a, b)), adjoint(a) @ adjoint(b), atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(transforms)
def test_adjoint_of_inverse(g):
    assert np.allclose(adjoint(invert(g)), np.linalg.inv(adjoint(g)), atol=1e-10)


def test_ad_bracket_zero():
    assert np.array_equal(ad_bracket(np.zeros(6)), np.zeros((6, 6)))


@settings(max_examples=100, deadline=None)
@given(vec3, vec3)
def test_ad_bracket_self_annihilates(w, v):
    s = np.r_[w, v]
    assert np.allclose(ad_bracket(s) @ s, 0.0, atol=1e-12)


def test_ad_bracket_example():
    out = ad_bracket([0, 0, 1, 0, 0, 0]) @ np.array([0, 0, 0, 1, 0, 0])
    assert np.allclose(out, [0, 0, 0, 0, 1, 0], atol=0)


def test_ad_bracket_is_adjoint_derivative(rng):
    s = rng.normal(size=6)
    s[ANG] /= np.linalg.norm(s[ANG])
    h = 1e-6
    dAd = (adjoint(exp_twist(s, h)) - adjoint(exp_twist(s, -h))) / (2 * h)
    assert np.allclose(dAd, ad_bracket(s), atol=1e-8)


def test_exp_twist_revolute_and_prismatic():
    g = exp_twist([0, 0, 1, 0, 0, 0], math.pi / 2)
    assert np.allclose(g.apply([1, 0, 0]), [0, 1, 0], atol=1e-15)
    g = exp_twist([0, 0, 0, 0, 0, 1], 0.5)
    assert np.array_equal(g.translation, [0, 0, 0.5])


def test_exp_twist_rotation_about_offset_axis():
    # axis along z through (1, 0, 0): linear part v = -w x p
    p = np.array([1.0, 0, 0])
    w = np.array([0, 0, 1.0])
    g = exp_twist(np.r_[w, -np.cross(w, p)], math.pi)
    assert np.allclose(g.apply(p), p, atol=1e-14)
    assert np.allclose(g.apply([0, 0, 0]), [2, 0, 0], atol=1e-14)


def test_composition_drift_bounded():
    g = Transform(rotation([0.3, -1.2, 0.7], 0.0137), [1e-3, 0, 0])
    acc = Transform.identity()
    for _ in range(1_000_000):
        acc = compose(acc, g)
    assert orthonormality_error(acc.rotation) < 1e-9
    assert abs(np.linalg.det(acc.rotation) - 1.0) < 1e-9


def test_skew_cross(rng):
    a, b = rng.normal(size=3), rng.normal(size=3)
    assert np.allclose(skew(a) @ b, np.cross(a, b))


def test_wrench_twist_pairing_invariant(rng):
    # power V.F is frame independent when wrenches transform by Ad^-T
    g = random_transform(rng)
    V, F = rng.normal(size=6), rng.normal(size=6)
    Vp = adjoint(g) @ V
    Fp = np.linalg.inv(adjoint(g)).T @ F
    assert math.isclose(V @ F, Vp @ Fp, rel_tol=1e-10)
    assert np.array_equal(np.asarray(Wrench.from_vector(F)), F)


def test_spatial_inertia_point_mass_energy():
    I = SpatialInertia.point_mass(2.0, [1, 0, 0])
    # spinning about z at 3 rad/s: the point moves at 3 m/s
    V = np.array([0, 0, 3.0, 0, 0, 0])
    assert math.isclose(0.5 * V @ I.matrix() @ V, 0.5 * 2.0 * 9.0)


def test_spatial_inertia_sum_and_validate():
    a = SpatialInertia.point_mass(1.0, [1, 0, 0])
    b = SpatialInertia.point_mass(3.0, [-1, 0, 0])
    s = a + b
    assert s.mass == 4.0
    assert np.allclose(s.center_of_mass, [-0.5, 0, 0])
    assert np.allclose(s.matrix(), a.matrix() + b.matrix())
    s.validate()
    with pytest.raises(ValueError, match="mass"):
        SpatialInertia(-1.0).validate()
    with pytest.raises(ValueError, match="symmetric"):
        SpatialInertia(1.0, rotational_inertia=[[1, 1, 0], [0, 1, 0], [0, 0, 1]]).validate()


def test_from_com_inertia_parallel_axis():
    I = SpatialInertia.from_com_inertia(10.0, [0, 0, 1], np.diag([1.0, 2.0, 3.0]))
    assert np.allclose(I.rotational_inertia, np.diag([11.0, 12.0, 3.0]))
