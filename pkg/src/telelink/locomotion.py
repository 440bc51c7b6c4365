"""Foot-paddle mapping, velocity capping and Mecanum base kinematics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Twist


class WheelSaturation(ValueError):
    """A wheel would exceed its speed limit; ``scale`` makes the twist feasible."""

    def __init__(self, scale: float, wheels: np.ndarray):
        super().__init__(f"wheel speed limit exceeded; feasible scale {scale:.6g}")
        self.scale = scale
        self.wheels = wheels


@dataclass(frozen=True)
class RudderState:
    pitch: float = 0.0
    roll: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("pitch", "roll", "yaw"):
            if abs(getattr(self, name)) > math.pi / 2:
                raise ValueError(f"rudder {name} must lie within +-pi/2")


@dataclass(frozen=True)
class MecanumBase:
    wheel_radius: float = 0.05
    half_length: float = 0.25
    half_width: float = 0.25
    wheel_speed_limit: float = 60.0

    def __post_init__(self):
        if min(self.wheel_radius, self.half_length, self.half_width, self.wheel_speed_limit) <= 0:
            raise ValueError("base geometry and wheel limit must be positive")

    def matrix(self) -> np.ndarray:
        """4x3 map from planar twist ``(vx, vy, wz)`` to wheel rates (fl, fr, rl, rr)."""
        k = self.half_length + self.half_width
        return np.array([
            [1.0, -1.0, -k],
            [1.0, 1.0, k],
            [1.0, 1.0, -k],
            [1.0, -1.0, k],
        ]) / self.wheel_radius


@dataclass(frozen=True)
class TwistLimits:
    v_cap: float = 1.5
    v_capability: float = 2.5
    w_cap: float = 1.0

    def __post_init__(self):
        if not 0 < self.v_cap <= self.v_capability:
            raise ValueError("need 0 < v_cap <= v_capability")
        if self.w_cap <= 0:
            raise ValueError("w_cap must be positive")


def _dz(a: float, deadzone: float) -> float:
    return math.copysign(max(0.0, abs(a) - deadzone), a)


def rudder_to_twist(r: RudderState, k_lin: float, k_ang: float, deadzone: float) -> Twist:
    """Pitch drives forward speed, roll lateral speed and yaw the turn rate."""
    if k_lin < 0 or k_ang < 0:
        raise ValueError("gains must be non-negative")
    return Twist.planar(k_lin * _dz(r.pitch, deadzone), k_lin * _dz(r.roll, deadzone),
                        k_ang * _dz(r.yaw, deadzone))


def clamp_twist(t: Twist, lim: TwistLimits) -> Twist:
    """Cap planar speed by norm (direction kept) and yaw rate by magnitude."""
    vx, vy, vz = t.linear
    wx, wy, wz = t.angular
    speed = math.hypot(vx, vy)
    if speed > lim.v_cap:
        s = lim.v_cap / speed
        # rounding can leave the result an ulp above the cap; shrink until it is not,
        # which also makes the clamp idempotent
        while math.hypot(vx * s, vy * s) > lim.v_cap:
            s = math.nextafter(s, 0.0)
        vx, vy = vx * s, vy * s
    wz = max(-lim.w_cap, min(lim.w_cap, wz))
    return Twist((vx, vy, vz), (wx, wy, wz))


def twist_to_wheels(base: MecanumBase, t: Twist) -> np.ndarray:
    """Wheel angular rates ``(fl, fr, rl, rr)`` for a planar twist."""
    v = np.array([t.linear[0], t.linear[1], t.angular[2]])
    w = base.matrix() @ v
    peak = float(np.max(np.abs(w)))
    if peak > base.wheel_speed_limit:
        raise WheelSaturation(base.wheel_speed_limit / peak, w)
    return w


def wheels_to_twist(base: MecanumBase, w) -> Twist:
    """Least-squares planar twist for four wheel rates."""
    sol = np.linalg.lstsq(base.matrix(), np.asarray(w, dtype=float), rcond=None)[0]
    return Twist.planar(*sol)


def wheels_residual(base: MecanumBase, w) -> float:
    """Norm of the wheel-rate mismatch left by :func:`wheels_to_twist`."""
    w = np.asarray(w, dtype=float)
    t = wheels_to_twist(base, w)
    fit = base.matrix() @ np.array([t.linear[0], t.linear[1], t.angular[2]])
    return float(np.linalg.norm(w - fit))


def integrate_odometry(pose, t: Twist, dt: float) -> tuple[float, float, float]:
    """Exact planar flow of a constant body twist over ``dt``; pose is ``(x, y, theta)``."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    x, y, th = (float(c) for c in pose)
    vx, vy = float(t.linear[0]), float(t.linear[1])
    a = float(t.angular[2]) * dt
    if abs(a) < 1e-6:
        s = 1.0 - a * a / 6.0
        c = a / 2.0 - a ** 3 / 24.0
    else:
        s = math.sin(a) / a
        c = (1.0 - math.cos(a)) / a
    bx = dt * (vx * s - vy * c)
    by = dt * (vx * c + vy * s)
    ct, st = math.cos(th), math.sin(th)
    return (x + ct * bx - st * by, y + st * bx + ct * by, th + a)
