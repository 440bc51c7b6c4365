import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from telelink.geometry import (Pose6D, Twist, Wrench, apply_error, compose, interpolate, inverse,
                               pose_error, quat_log, rot_z, rotation_angle, translate)

from conftest import random_pose


def close(a: Pose6D, b: Pose6D, tol=1e-12):
    """Same rigid transform (quaternion sign ignored)."""
    return np.allclose(a.matrix(), b.matrix(), atol=tol, rtol=0)


def test_compose_identities():
    I = Pose6D.identity()
    assert close(compose(I, I), I)
    assert close(compose(translate(1, 0, 0), translate(0, 2, 0)), translate(1, 2, 0))


def test_compose_matches_homogeneous_product(rng):
    a = compose(rot_z(math.pi / 2), translate(1, 0, 0))
    assert np.allclose(a.translation, (0, 1, 0), atol=1e-15)
    assert rotation_angle(a, rot_z(math.pi / 2)) < 1e-12
    for _ in range(50):
        p, q = random_pose(rng), random_pose(rng)
        assert np.allclose(compose(p, q).matrix(), p.matrix() @ q.matrix(), atol=1e-12)


def test_compose_right_identity_and_norm(rng):
    for _ in range(100):
        p = random_pose(rng, 3.0)
        c = compose(p, Pose6D.identity())
        assert np.max(np.abs(c.as_array() - p.as_array())) <= 1e-12
        assert abs(np.linalg.norm(c.rotation) - 1.0) < 1e-9


def test_inverse_cases(rng):
    assert close(inverse(Pose6D.identity()), Pose6D.identity())
    assert close(inverse(translate(1, 2, 3)), translate(-1, -2, -3))
    p = compose(rot_z(math.pi / 2), translate(1, 0, 0))
    assert np.allclose(inverse(p).matrix(), np.linalg.inv(p.matrix()), atol=1e-12)
    for _ in range(100):
        p = random_pose(rng, 5.0)
        assert close(compose(p, inverse(p)), Pose6D.identity(), 1e-9)


def test_associativity(rng):
    for _ in range(200):
        a, b, c = (random_pose(rng, 2.0) for _ in range(3))
        assert close(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-9)


def test_pose_error_examples():
    p = translate(0.3, -1, 2)
    assert np.array_equal(pose_error(p, p), np.zeros(6))
    assert np.allclose(pose_error(translate(0.1, 0, 0), Pose6D()), (0.1, 0, 0, 0, 0, 0), atol=1e-15)
    e = pose_error(rot_z(math.radians(30)), Pose6D())
    assert np.allclose(e, (0, 0, 0, 0, 0, math.pi / 6), atol=1e-12)
    assert abs(e[5] - 0.5236) < 5e-5


def _matrix_log(R):
    """Rotation vector from a rotation matrix (independent of quaternions)."""
    c = (np.trace(R) - 1.0) / 2.0
    th = math.acos(max(-1.0, min(1.0, c)))
    if th < 1e-12:
        return np.zeros(3)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return th * w / (2 * math.sin(th))


def test_pose_error_rotation_matches_matrix_log(rng):
    for _ in range(200):
        a, b = random_pose(rng), random_pose(rng)
        e = pose_error(a, b)
        R = a.rotation_matrix() @ b.rotation_matrix().T
        if np.linalg.norm(_matrix_log(R)) > math.pi - 1e-3:
            continue
        assert np.allclose(e[3:], _matrix_log(R), atol=1e-9)


def test_pose_error_antisymmetric(rng):
    for _ in range(200):
        a, b = random_pose(rng), random_pose(rng)
        e1, e2 = pose_error(a, b), pose_error(b, a)
        if np.linalg.norm(e1[3:]) > math.pi - 1e-6:
            continue
        assert np.allclose(e1[3:], -e2[3:], atol=1e-9)
        assert np.allclose(e1[:3], -e2[:3], atol=1e-12)


def test_apply_error_round_trip(rng):
    for _ in range(200):
        target, current = random_pose(rng), random_pose(rng)
        assert close(apply_error(current, pose_error(target, current)), target, 1e-9)


def test_half_turn_axis_is_deterministic():
    # 180 deg about z: either quaternion sign must give the same +z axis
    for q in ((0.0, 0.0, 0.0, 1.0), (0.0, 0.0, 0.0, -1.0)):
        v = quat_log(q)
        assert np.allclose(v, (0, 0, math.pi))


def test_interpolate_endpoints(rng):
    a, b = random_pose(rng), random_pose(rng)
    assert interpolate(a, b, 0.0) is a
    assert interpolate(a, b, 1.0) is b
    m = interpolate(translate(0, 0, 0), translate(2, 0, 0), 0.5)
    assert np.allclose(m.translation, (1, 0, 0))


def test_value_types_are_immutable_and_finite():
    p = translate(1, 2, 3)
    with pytest.raises(AttributeError):
        p.foo = 1
    with pytest.raises(ValueError):
        p.translation[0] = 5.0
    with pytest.raises(ValueError):
        Twist((math.nan, 0, 0))
    with pytest.raises(ValueError):
        Wrench((0, 0, 0), (0, math.inf, 0))


finite = st.floats(-10, 10, allow_nan=False)
quat = st.tuples(finite, finite, finite, finite).filter(lambda q: np.linalg.norm(q) > 1e-3)


@settings(max_examples=200, deadline=None)
@given(st.tuples(finite, finite, finite), quat, st.tuples(finite, finite, finite), quat)
def test_constructors_keep_unit_norm(t1, q1, t2, q2):
    a, b = Pose6D(t1, q1), Pose6D(t2, q2)
    for p in (a, b, compose(a, b), inverse(a), interpolate(a, b, 0.3)):
        assert abs(np.linalg.norm(p.rotation) - 1.0) <= 1e-9
