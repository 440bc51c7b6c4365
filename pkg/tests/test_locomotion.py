import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from telelink.geometry import Twist
from telelink.locomotion import (MecanumBase, RudderState, TwistLimits, WheelSaturation,
                                 clamp_twist, integrate_odometry, rudder_to_twist, twist_to_wheels,
                                 wheels_residual, wheels_to_twist)

BASE = MecanumBase(0.05, 0.25, 0.25, 60.0)


def planar(t: Twist):
    return np.array([t.linear[0], t.linear[1], t.angular[2]])


def test_rudder_examples():
    assert planar(rudder_to_twist(RudderState(), 5, 2, 0.1)).tolist() == [0, 0, 0]
    assert rudder_to_twist(RudderState(pitch=0.05), 5, 2, 0.1).linear[0] == 0.0
    t = rudder_to_twist(RudderState(pitch=0.3), 5, 2, 0.1)
    assert t.linear[0] == pytest.approx(1.0, abs=1e-15)
    t = rudder_to_twist(RudderState(pitch=-0.3, roll=0.2, yaw=0.6), 5, 2, 0.1)
    assert np.allclose(planar(t), (-1.0, 0.5, 1.0))
    assert t.linear[2] == 0 and t.angular[0] == 0 and t.angular[1] == 0
    with pytest.raises(ValueError):
        RudderState(pitch=2.0)


def test_rudder_continuity_scan():
    prev = None
    grid = np.linspace(-1.5, 1.5, 3001)
    for a in grid:
        v = planar(rudder_to_twist(RudderState(a, a, a), 5, 2, 0.1))
        if prev is not None:
            assert np.all(np.abs(v - prev) <= np.array([5, 5, 2]) * (grid[1] - grid[0]) + 1e-12)
        prev = v


def test_clamp_examples():
    lim = TwistLimits(1.5, 2.5, 1.0)
    assert np.allclose(planar(clamp_twist(Twist.planar(2.0, 0, 0.3), lim)), (1.5, 0, 0.3))
    t = Twist.planar(0.5, 0.2, 0.1)
    assert clamp_twist(t, lim).as_array().tolist() == t.as_array().tolist()
    c = clamp_twist(Twist.planar(1.2, 1.2, 0), lim)
    assert np.allclose(planar(c)[:2], (1.0607, 1.0607), atol=1e-4)
    assert math.hypot(*planar(c)[:2]) == pytest.approx(1.5, abs=1e-15)
    assert clamp_twist(Twist.planar(0, 0, -4), lim).angular[2] == -1.0
    with pytest.raises(ValueError):
        TwistLimits(3.0, 2.5)


vel = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(vel, vel, vel)
def test_clamp_idempotent_and_direction_preserving(vx, vy, wz):
    lim = TwistLimits()
    t = Twist.planar(vx, vy, wz)
    c = clamp_twist(t, lim)
    assert clamp_twist(c, lim).as_array().tolist() == c.as_array().tolist()
    assert math.hypot(c.linear[0], c.linear[1]) <= lim.v_cap * (1 + 1e-15)
    cross = vx * c.linear[1] - vy * c.linear[0]
    assert abs(cross) <= 1e-12 * max(1.0, abs(vx) + abs(vy))
    assert vx * c.linear[0] + vy * c.linear[1] >= 0


def test_wheel_examples():
    assert np.allclose(twist_to_wheels(BASE, Twist.planar(1, 0, 0)), 20.0)
    assert np.allclose(twist_to_wheels(BASE, Twist.planar(0, 0, 1)), (-10, 10, -10, 10))
    assert np.array_equal(twist_to_wheels(BASE, Twist()), np.zeros(4))


def test_wheel_saturation_carries_scale():
    with pytest.raises(WheelSaturation) as exc:
        twist_to_wheels(BASE, Twist.planar(2.5, 1.0, 0.5))
    s = exc.value.scale
    assert 0 < s < 1
    w = twist_to_wheels(BASE, Twist.planar(2.5 * s, 1.0 * s, 0.5 * s))
    assert np.max(np.abs(w)) == pytest.approx(60.0, rel=1e-12)


def test_round_trip(rng):
    big = MecanumBase(0.05, 0.25, 0.25, 1e9)
    worst = 0.0
    for _ in range(2000):
        t = Twist.planar(*rng.uniform(-3, 3, 3))
        back = wheels_to_twist(big, twist_to_wheels(big, t))
        worst = max(worst, np.max(np.abs(planar(back) - planar(t))))
    assert worst <= 1e-10


def test_forward_kinematics_cases():
    t = wheels_to_twist(BASE, [7.0] * 4)
    assert np.allclose(planar(t), (7.0 * 0.05, 0, 0), atol=1e-14)
    w = np.array([1.0, 0, 0, 0])
    A = BASE.matrix()
    oracle = np.linalg.solve(A.T @ A, A.T @ w)
    assert np.allclose(planar(wheels_to_twist(BASE, w)), oracle, atol=1e-14)
    assert wheels_residual(BASE, w) == pytest.approx(np.linalg.norm(w - A @ oracle), abs=1e-14)
    assert wheels_residual(BASE, twist_to_wheels(BASE, Twist.planar(0.3, -0.2, 0.4))) < 1e-12


def test_odometry_examples():
    assert integrate_odometry((1, 2, 0.3), Twist(), 0.5) == (1, 2, 0.3)
    assert np.allclose(integrate_odometry((0, 0, 0), Twist.planar(1, 0, 0), 1.0), (1, 0, 0))
    end = integrate_odometry((0, 0, 0), Twist.planar(1, 0, math.pi / 2), 1.0)
    assert np.allclose(end, (2 / math.pi, 2 / math.pi, math.pi / 2), atol=1e-15)
    with pytest.raises(ValueError):
        integrate_odometry((0, 0, 0), Twist(), -1.0)


def test_odometry_composable(rng):
    for _ in range(200):
        t = Twist.planar(*rng.uniform(-2, 2, 2), rng.choice([0.0, *rng.uniform(-2, 2, 1)]))
        n, dt = int(rng.integers(1, 200)), float(rng.uniform(1e-4, 0.05))
        p = tuple(rng.uniform(-1, 1, 3))
        one = integrate_odometry(p, t, n * dt)
        many = p
        for _ in range(n):
            many = integrate_odometry(many, t, dt)
        assert np.allclose(one, many, atol=1e-9, rtol=0)


def test_odometry_small_angle_branch_is_continuous():
    t_small = Twist.planar(1.0, 0.5, 0.999e-6)
    t_big = Twist.planar(1.0, 0.5, 1.001e-6)
    a = integrate_odometry((0, 0, 0), t_small, 1.0)
    b = integrate_odometry((0, 0, 0), t_big, 1.0)
    assert np.allclose(a, b, atol=1e-8)
