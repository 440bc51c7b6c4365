"""Viewpoint compensation for sphere-projected wide-angle video.

Each camera image is painted on a sphere of radius ``r`` centred on the
camera pose at exposure time. When the operator's eye has since moved, a
pixel's ray is intersected with that sphere and re-expressed from the eye.
Rotations cancel exactly; translations leave a depth-dependent residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose6D, quat_conjugate, quat_from_rotvec, quat_log, quat_multiply, quat_rotate

DEGENERATE_EPS = 1e-9


class OutOfFieldOfView(ValueError):
    pass


class DegenerateView(ValueError):
    """The eye sits on (or numerically at) the sphere point being viewed."""


@dataclass(frozen=True)
class SphereCamera:
    """Equidistant fisheye camera with its capture pose and sphere radius."""

    capture_pose: Pose6D = field(default_factory=Pose6D)
    radius: float = 1.0
    fov_h: float = math.radians(190.0)
    focal: float = 600.0
    cx: float = 1920.0
    cy: float = 1080.0
    width: int = 3840
    height: int = 2160

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")
        if not 0 < self.fov_h <= 2 * math.pi:
            raise ValueError("fov_h must lie in (0, 2 pi]")
        if self.focal <= 0:
            raise ValueError("focal length must be positive")

    def at(self, capture_pose: Pose6D) -> SphereCamera:
        return SphereCamera(capture_pose, self.radius, self.fov_h, self.focal, self.cx, self.cy,
                            self.width, self.height)


def pixel_to_ray(cam: SphereCamera, pixel) -> np.ndarray:
    """Unit viewing ray (camera frame, +z forward) of an image point."""
    u, v = float(pixel[0]), float(pixel[1])
    if not (0.0 <= u <= cam.width and 0.0 <= v <= cam.height):
        raise ValueError(f"pixel ({u}, {v}) outside the {cam.width}x{cam.height} image")
    dx, dy = u - cam.cx, v - cam.cy
    theta = math.hypot(dx, dy) / cam.focal
    if theta > 0.5 * cam.fov_h:
        raise OutOfFieldOfView(f"pixel is {math.degrees(theta):.2f} deg off-axis")
    phi = math.atan2(dy, dx)
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])


def ray_to_pixel(cam: SphereCamera, ray) -> np.ndarray:
    x, y, z = (float(c) for c in ray)
    theta = math.atan2(math.hypot(x, y), z)
    phi = math.atan2(y, x)
    rho = cam.focal * theta
    return np.array([cam.cx + rho * math.cos(phi), cam.cy + rho * math.sin(phi)])


def _eye_direction(point, eye_pose: Pose6D) -> np.ndarray:
    d = np.asarray(point) - eye_pose.translation
    n = float(np.linalg.norm(d))
    if n < DEGENERATE_EPS:
        raise DegenerateView("eye coincides with the viewed point")
    return quat_rotate(quat_conjugate(eye_pose.q), d / n)


def sphere_point(cam: SphereCamera, ray, depth: float | None = None) -> np.ndarray:
    r = cam.radius if depth is None else depth
    return cam.capture_pose.translation + r * quat_rotate(cam.capture_pose.q, ray)


def compensated_direction(cam: SphereCamera, ray, eye_pose: Pose6D) -> np.ndarray:
    """Direction (eye frame) at which the renderer shows the sample for ``ray``."""
    return _eye_direction(sphere_point(cam, ray), eye_pose)


def _angle_between(a, b) -> float:
    return math.atan2(float(np.linalg.norm(np.cross(a, b))), float(np.dot(a, b)))


def angular_error(cam: SphereCamera, ray, eye_pose: Pose6D, true_depth: float) -> float:
    """Angle between the rendered and the true direction of a scene point at ``true_depth``."""
    if true_depth <= 0:
        raise ValueError("true_depth must be positive")
    shown = compensated_direction(cam, ray, eye_pose)
    truth = _eye_direction(sphere_point(cam, ray, true_depth), eye_pose)
    return _angle_between(shown, truth)


@dataclass
class HeadFollower:
    """Rate-limited pursuit of the operator head pose by the robot head."""

    current_pose: Pose6D = field(default_factory=Pose6D)
    v_max: float = 1.0
    w_max: float = math.pi

    def __post_init__(self):
        if self.v_max <= 0 or self.w_max <= 0:
            raise ValueError("v_max and w_max must be positive")

    def at_target(self, target: Pose6D) -> bool:
        return self.current_pose == target


_REACH_SLACK = 1e-9


def head_follow_step(h: HeadFollower, target: Pose6D, dt: float) -> Pose6D:
    """Move ``h`` one step toward ``target``; snaps exactly when within reach."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cur = h.current_pose
    delta = target.translation - cur.translation
    dist = float(np.linalg.norm(delta))
    step = h.v_max * dt
    if dist <= step * (1.0 + _REACH_SLACK):
        t = target.t
    else:
        t = cur.translation + delta * (step / dist)

    rel = quat_multiply(target.q, quat_conjugate(cur.q))
    rv = quat_log(rel)
    angle = float(np.linalg.norm(rv))
    rstep = h.w_max * dt
    if angle <= rstep * (1.0 + _REACH_SLACK):
        q = target.q
    else:
        q = quat_multiply(quat_from_rotvec(rv * (rstep / angle)), cur.q)

    new = Pose6D(t, q)
    h.current_pose = new
    return new


def error_map(cam: SphereCamera, eye_pose: Pose6D, true_depth: float, step_px: float = 64.0):
    """Angular error over a pixel grid; rows of ``(u, v, error_rad)``.

    Pixels outside the field of view are skipped.
    """
    rows = []
    for v in np.arange(0.0, cam.height + 1e-9, step_px):
        for u in np.arange(0.0, cam.width + 1e-9, step_px):
            try:
                ray = pixel_to_ray(cam, (u, v))
                err = angular_error(cam, ray, eye_pose, true_depth)
            except (OutOfFieldOfView, DegenerateView):
                continue
            rows.append((float(u), float(v), err))
    return np.array(rows).reshape(-1, 3)
