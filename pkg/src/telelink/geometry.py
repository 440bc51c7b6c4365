"""Rigid-body value types: poses, twists and wrenches.

Quaternions are stored scalar-first ``(w, x, y, z)``. All values are
immutable; the numpy arrays they hold are flagged read-only.
"""

from __future__ import annotations

import math
import numpy as np

_RENORM_TOL = 1e-12


def _floats(values, size: int, name: str) -> tuple[float, ...]:
    if isinstance(values, np.ndarray):
        vals = tuple(values.ravel().tolist())
    else:
        vals = tuple(map(float, values))
    if len(vals) != size:
        raise ValueError(f"{name} must have {size} components, got {len(vals)}")
    if not all(map(math.isfinite, vals)):
        raise ValueError(f"{name} must be finite")
    return vals


def _readonly(vals) -> np.ndarray:
    arr = np.array(vals, dtype=float)
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# quaternion helpers (plain floats, scalar-first)
# ---------------------------------------------------------------------------

def quat_multiply(a, b) -> tuple[float, float, float, float]:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_conjugate(q) -> tuple[float, float, float, float]:
    return (q[0], -q[1], -q[2], -q[3])


def quat_normalize(q) -> tuple[float, float, float, float]:
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n == 0.0 or not math.isfinite(n):
        raise ValueError("quaternion has zero or non-finite norm")
    if abs(n - 1.0) <= _RENORM_TOL:
        return (float(q[0]), float(q[1]), float(q[2]), float(q[3]))
    return (q[0] / n, q[1] / n, q[2] / n, q[3] / n)


def quat_rotate(q, v) -> np.ndarray:
    """Rotate 3-vector ``v`` by unit quaternion ``q``."""
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 * cross(q.xyz, v)
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array([
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    ])


def quat_from_axis_angle(axis, angle: float) -> tuple[float, float, float, float]:
    axis = np.asarray(axis, dtype=float)
    n = float(np.linalg.norm(axis))
    if n == 0.0:
        return (1.0, 0.0, 0.0, 0.0)
    s = math.sin(0.5 * angle) / n
    return quat_normalize((math.cos(0.5 * angle), axis[0] * s, axis[1] * s, axis[2] * s))


def quat_from_rotvec(rotvec) -> tuple[float, float, float, float]:
    rx, ry, rz = (float(c) for c in rotvec)
    angle = math.sqrt(rx * rx + ry * ry + rz * rz)
    if angle < 1e-8:
        # second-order series keeps the map smooth through zero
        half = 0.5 - angle * angle / 48.0
        return quat_normalize((1.0 - angle * angle / 8.0, rx * half, ry * half, rz * half))
    s = math.sin(0.5 * angle) / angle
    return quat_normalize((math.cos(0.5 * angle), rx * s, ry * s, rz * s))


def quat_log(q) -> np.ndarray:
    """Rotation vector (axis * angle) of a unit quaternion, angle in [0, pi].

    At exactly pi the axis sign is ambiguous; the component with the largest
    magnitude is made positive.
    """
    w, x, y, z = q
    if w < 0.0:
        w, x, y, z = -w, -x, -y, -z
    vn = math.sqrt(x * x + y * y + z * z)
    if vn < 1e-12:
        # angle ~ 2*vn/w; first-order is exact to double precision here
        return np.array([2.0 * x, 2.0 * y, 2.0 * z]) / max(w, 1e-300)
    angle = 2.0 * math.atan2(vn, w)
    v = np.array([x, y, z]) / vn
    if w == 0.0:
        k = int(np.argmax(np.abs(v)))
        if v[k] < 0.0:
            v = -v
    return v * angle


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R) -> tuple[float, float, float, float]:
    """Shepperd's method; returns the representative with w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = (0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s)
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = ((R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s)
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = ((R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s)
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = ((R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s)
    if q[0] < 0.0:
        q = tuple(-c for c in q)
    return quat_normalize(q)


def quat_slerp(a, b, s: float) -> tuple[float, float, float, float]:
    """Shortest-arc spherical interpolation from ``a`` (s=0) to ``b`` (s=1)."""
    dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
    if dot < 0.0:
        b = (-b[0], -b[1], -b[2], -b[3])
        dot = -dot
    if dot > 0.9995:
        q = tuple(a[i] + s * (b[i] - a[i]) for i in range(4))
        return quat_normalize(q)
    theta = math.acos(min(1.0, dot))
    sin_t = math.sin(theta)
    wa = math.sin((1.0 - s) * theta) / sin_t
    wb = math.sin(s * theta) / sin_t
    return quat_normalize(tuple(wa * a[i] + wb * b[i] for i in range(4)))


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

class Pose6D:
    """Rigid transform: a rotation followed by a translation (meters).

    Components are stored as float tuples; ``translation`` and ``rotation``
    are read-only numpy views built on first access.
    """

    __slots__ = ("_t", "_q", "_ta", "_qa")

    def __init__(self, translation=(0.0, 0.0, 0.0), rotation=(1.0, 0.0, 0.0, 0.0)):
        sa = object.__setattr__
        sa(self, "_t", _floats(translation, 3, "translation"))
        sa(self, "_q", quat_normalize(_floats(rotation, 4, "rotation")))
        sa(self, "_ta", None)
        sa(self, "_qa", None)

    def __setattr__(self, name, value):
        raise AttributeError("Pose6D is immutable")

    @property
    def translation(self) -> np.ndarray:
        if self._ta is None:
            object.__setattr__(self, "_ta", _readonly(self._t))
        return self._ta

    @property
    def rotation(self) -> np.ndarray:
        """Unit quaternion ``(w, x, y, z)``."""
        if self._qa is None:
            object.__setattr__(self, "_qa", _readonly(self._q))
        return self._qa

    @property
    def t(self) -> tuple[float, float, float]:
        return self._t

    @property
    def q(self) -> tuple[float, float, float, float]:
        return self._q

    def __eq__(self, other):
        if not isinstance(other, Pose6D):
            return NotImplemented
        return self._t == other._t and self._q == other._q

    def __hash__(self):
        return hash((self._t, self._q))

    def __reduce__(self):
        return (Pose6D, (self._t, self._q))

    def __repr__(self):
        t = ", ".join(f"{c:.6g}" for c in self._t)
        q = ", ".join(f"{c:.6g}" for c in self._q)
        return f"Pose6D(t=({t}), q=({q}))"

    @classmethod
    def identity(cls) -> Pose6D:
        return cls()

    @classmethod
    def from_matrix(cls, T) -> Pose6D:
        T = np.asarray(T, dtype=float)
        return cls(T[:3, 3], matrix_to_quat(T[:3, :3]))

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0)) -> Pose6D:
        return cls(translation, quat_from_rotvec(rotvec))

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = quat_to_matrix(self._q)
        T[:3, 3] = self._t
        return T

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self._q)

    def transform_point(self, p) -> np.ndarray:
        return quat_rotate(self._q, p) + self.translation

    def as_array(self) -> np.ndarray:
        """``(tx, ty, tz, qw, qx, qy, qz)``"""
        return np.array(self._t + self._q)


def translate(x: float, y: float, z: float) -> Pose6D:
    return Pose6D((x, y, z))


def rot_x(angle: float) -> Pose6D:
    return Pose6D(rotation=quat_from_axis_angle((1.0, 0.0, 0.0), angle))


def rot_y(angle: float) -> Pose6D:
    return Pose6D(rotation=quat_from_axis_angle((0.0, 1.0, 0.0), angle))


def rot_z(angle: float) -> Pose6D:
    return Pose6D(rotation=quat_from_axis_angle((0.0, 0.0, 1.0), angle))


class _Pair:
    """Two frozen 3-vectors; subclasses name them via ``_names``."""

    __slots__ = ("_a", "_b", "_aa", "_ba")
    _names = ("a", "b")

    def __init__(self, a=(0.0, 0.0, 0.0), b=(0.0, 0.0, 0.0)):
        sa = object.__setattr__
        sa(self, "_a", _floats(a, 3, self._names[0]))
        sa(self, "_b", _floats(b, 3, self._names[1]))
        sa(self, "_aa", None)
        sa(self, "_ba", None)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def _first(self) -> np.ndarray:
        if self._aa is None:
            object.__setattr__(self, "_aa", _readonly(self._a))
        return self._aa

    def _second(self) -> np.ndarray:
        if self._ba is None:
            object.__setattr__(self, "_ba", _readonly(self._b))
        return self._ba

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self._a == other._a and self._b == other._b

    def __hash__(self):
        return hash((self._a, self._b))

    def __reduce__(self):
        return (type(self), (self._a, self._b))

    def __repr__(self):
        a = ", ".join(f"{c:.6g}" for c in self._a)
        b = ", ".join(f"{c:.6g}" for c in self._b)
        return f"{type(self).__name__}({self._names[0]}=({a}), {self._names[1]}=({b}))"

    def as_array(self) -> np.ndarray:
        return np.array(self._a + self._b)

    def as_tuple(self) -> tuple[float, ...]:
        return self._a + self._b

    @classmethod
    def from_array(cls, v):
        v = np.asarray(v, dtype=float).ravel()
        return cls(v[:3], v[3:6])


class Twist(_Pair):
    """Spatial velocity: linear (m/s) and angular (rad/s)."""

    __slots__ = ()
    _names = ("linear", "angular")

    linear = property(_Pair._first)
    angular = property(_Pair._second)

    @classmethod
    def planar(cls, vx: float, vy: float, wz: float) -> Twist:
        return cls((vx, vy, 0.0), (0.0, 0.0, wz))


class Wrench(_Pair):
    """Spatial force: force (N) and torque (N m)."""

    __slots__ = ()
    _names = ("force", "torque")

    force = property(_Pair._first)
    torque = property(_Pair._second)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def compose(a: Pose6D, b: Pose6D) -> Pose6D:
    """``a`` then ``b``: the transform ``T_a @ T_b``."""
    t = quat_rotate(a.q, b.t) + a.translation
    return Pose6D(t, quat_multiply(a.q, b.q))


def inverse(p: Pose6D) -> Pose6D:
    qi = quat_conjugate(p.q)
    return Pose6D(-quat_rotate(qi, p.t), qi)


def relative(a: Pose6D, b: Pose6D) -> Pose6D:
    """Pose of ``b`` expressed in the frame of ``a``, i.e. ``inverse(a) o b``."""
    return compose(inverse(a), b)


def pose_error(target: Pose6D, current: Pose6D) -> np.ndarray:
    """6-vector ``(dx, dy, dz, rx, ry, rz)`` taking ``current`` to ``target``.

    Both parts are expressed in the common reference frame: the translation
    difference, then the rotation vector of ``R_target @ R_current^T``.
    """
    dt = target.translation - current.translation
    q_rel = quat_multiply(target.q, quat_conjugate(current.q))
    return np.concatenate([dt, quat_log(q_rel)])


def apply_error(current: Pose6D, error) -> Pose6D:
    """Inverse of :func:`pose_error`: ``pose_error(apply_error(c, e), c) == e``."""
    error = np.asarray(error, dtype=float)
    q = quat_multiply(quat_from_rotvec(error[3:6]), current.q)
    return Pose6D(current.translation + error[:3], q)


def interpolate(a: Pose6D, b: Pose6D, s: float) -> Pose6D:
    """Linear translation, spherical rotation; exact endpoints."""
    if s <= 0.0:
        return a
    if s >= 1.0:
        return b
    t = a.translation + s * (b.translation - a.translation)
    return Pose6D(t, quat_slerp(a.q, b.q, s))


def rotation_angle(a: Pose6D, b: Pose6D) -> float:
    """Angle (rad) of the relative rotation between two poses."""
    q = quat_multiply(b.q, quat_conjugate(a.q))
    return float(np.linalg.norm(quat_log(q)))
