"""Compiled inner loops for the 1 kHz control path.

These mirror the pure-Python operations in :mod:`telelink.geometry`; the
test-suite cross-checks the two. Chains are passed as flat arrays:
``axes`` (n, 3), ``offsets`` (n, 4, 4) and ``tool`` (4, 4).
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _axis_rotation(axis, angle, out):
    c = math.cos(angle)
    s = math.sin(angle)
    C = 1.0 - c
    x, y, z = axis[0], axis[1], axis[2]
    out[0, 0] = c + x * x * C
    out[0, 1] = x * y * C - z * s
    out[0, 2] = x * z * C + y * s
    out[1, 0] = y * x * C + z * s
    out[1, 1] = c + y * y * C
    out[1, 2] = y * z * C - x * s
    out[2, 0] = z * x * C - y * s
    out[2, 1] = z * y * C + x * s
    out[2, 2] = c + z * z * C


@njit(cache=True)
def _mul_rt(R, t, A):
    """(R, t) <- (R, t) @ A for a homogeneous 4x4 ``A``."""
    R2 = np.empty((3, 3))
    t2 = np.empty(3)
    for i in range(3):
        for j in range(3):
            R2[i, j] = R[i, 0] * A[0, j] + R[i, 1] * A[1, j] + R[i, 2] * A[2, j]
        t2[i] = R[i, 0] * A[0, 3] + R[i, 1] * A[1, 3] + R[i, 2] * A[2, 3] + t[i]
    R[:, :] = R2
    t[:] = t2


@njit(cache=True)
def fk_jacobian(axes, offsets, tool, q):
    """End-effector rotation, position and 6xn geometric Jacobian (base frame)."""
    n = q.shape[0]
    R = np.eye(3)
    t = np.zeros(3)
    zs = np.empty((n, 3))
    ps = np.empty((n, 3))
    A = np.eye(4)
    rot = np.empty((3, 3))
    for i in range(n):
        _mul_rt(R, t, offsets[i])
        for k in range(3):
            zs[i, k] = R[k, 0] * axes[i, 0] + R[k, 1] * axes[i, 1] + R[k, 2] * axes[i, 2]
            ps[i, k] = t[k]
        _axis_rotation(axes[i], q[i], rot)
        A[:3, :3] = rot
        _mul_rt(R, t, A)
    _mul_rt(R, t, tool)
    J = np.empty((6, n))
    for i in range(n):
        dx = t[0] - ps[i, 0]
        dy = t[1] - ps[i, 1]
        dz = t[2] - ps[i, 2]
        zx, zy, zz = zs[i, 0], zs[i, 1], zs[i, 2]
        J[0, i] = zy * dz - zz * dy
        J[1, i] = zz * dx - zx * dz
        J[2, i] = zx * dy - zy * dx
        J[3, i] = zx
        J[4, i] = zy
        J[5, i] = zz
    return R, t, J


@njit(cache=True)
def fk(axes, offsets, tool, q):
    n = q.shape[0]
    R = np.eye(3)
    t = np.zeros(3)
    A = np.eye(4)
    rot = np.empty((3, 3))
    for i in range(n):
        _mul_rt(R, t, offsets[i])
        _axis_rotation(axes[i], q[i], rot)
        A[:3, :3] = rot
        _mul_rt(R, t, A)
    _mul_rt(R, t, tool)
    return R, t


@njit(cache=True)
def quat_to_matrix(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3))
    R[0, 0] = 1 - 2 * (y * y + z * z)
    R[0, 1] = 2 * (x * y - w * z)
    R[0, 2] = 2 * (x * z + w * y)
    R[1, 0] = 2 * (x * y + w * z)
    R[1, 1] = 1 - 2 * (x * x + z * z)
    R[1, 2] = 2 * (y * z - w * x)
    R[2, 0] = 2 * (x * z - w * y)
    R[2, 1] = 2 * (y * z + w * x)
    R[2, 2] = 1 - 2 * (x * x + y * y)
    return R


@njit(cache=True)
def matrix_to_quat(R):
    q = np.empty(4)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q[0] = 0.25 * s
        q[1] = (R[2, 1] - R[1, 2]) / s
        q[2] = (R[0, 2] - R[2, 0]) / s
        q[3] = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q[0] = (R[2, 1] - R[1, 2]) / s
        q[1] = 0.25 * s
        q[2] = (R[0, 1] + R[1, 0]) / s
        q[3] = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q[0] = (R[0, 2] - R[2, 0]) / s
        q[1] = (R[0, 1] + R[1, 0]) / s
        q[2] = 0.25 * s
        q[3] = (R[1, 2] + R[2, 1]) / s
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q[0] = (R[1, 0] - R[0, 1]) / s
        q[1] = (R[0, 2] + R[2, 0]) / s
        q[2] = (R[1, 2] + R[2, 1]) / s
        q[3] = 0.25 * s
    if q[0] < 0.0:
        q[:] = -q
    q /= math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q


@njit(cache=True)
def quat_log(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    if w < 0.0:
        w, x, y, z = -w, -x, -y, -z
    out = np.empty(3)
    vn = math.sqrt(x * x + y * y + z * z)
    if vn < 1e-12:
        inv = 2.0 / max(w, 1e-300)
        out[0] = x * inv
        out[1] = y * inv
        out[2] = z * inv
        return out
    angle = 2.0 * math.atan2(vn, w)
    out[0] = x / vn
    out[1] = y / vn
    out[2] = z / vn
    if w == 0.0:
        k = 0
        for i in range(1, 3):
            if abs(out[i]) > abs(out[k]):
                k = i
        if out[k] < 0.0:
            out[:] = -out
    out *= angle
    return out


@njit(cache=True)
def rotation_error(R_target, R_current):
    """Rotation vector of ``R_target @ R_current^T``."""
    return quat_log(matrix_to_quat(R_target @ R_current.T))


@njit(cache=True)
def pose_error(t_target, R_target, t_current, R_current):
    e = np.empty(6)
    e[:3] = t_target - t_current
    e[3:] = rotation_error(R_target, R_current)
    return e


@njit(cache=True)
def impedance_torque(axes, offsets, tool, q, qd, t_target, R_target, v_target, gains, tau_max, ff):
    """Joint torques ``clamp(J^T F, tau_max)`` and the Cartesian command ``F``.

    ``F = K e + D (v_target - J qd) + ff`` with diagonal gains
    ``(kp_lin, kd_lin, kp_ang, kd_ang)``.
    """
    R, t, J = fk_jacobian(axes, offsets, tool, q)
    e = pose_error(t_target, R_target, t, R)
    v = J @ qd
    F = np.empty(6)
    for k in range(3):
        F[k] = gains[0] * e[k] + gains[1] * (v_target[k] - v[k]) + ff[k]
        F[k + 3] = gains[2] * e[k + 3] + gains[3] * (v_target[k + 3] - v[k + 3]) + ff[k + 3]
    tau = J.T @ F
    for i in range(tau.shape[0]):
        if tau[i] > tau_max[i]:
            tau[i] = tau_max[i]
        elif tau[i] < -tau_max[i]:
            tau[i] = -tau_max[i]
    return tau, F


@njit(cache=True)
def limit_proximity(q, q_min, q_max, margin):
    n = q.shape[0]
    out = np.zeros(n)
    for i in range(n):
        upper = margin - (q_max[i] - q[i])
        lower = margin - (q[i] - q_min[i])
        if upper > 0.0:
            out[i] += upper
        if lower > 0.0:
            out[i] -= lower
    return out


@njit(cache=True)
def resolved_rate_predict(axes, offsets, tool, q0, t_target, R_target, qd_max, q_min, q_max,
                          elapsed, max_step, damping):
    """Damped-least-squares pursuit of a target pose, rate-limited per joint.

    Substeps are at most ``max_step`` long; each substep's joint increment is
    scaled uniformly so that no joint exceeds ``qd_max * h``.
    """
    q = q0.copy()
    n = q.shape[0]
    if elapsed <= 0.0:
        return q
    steps = int(math.ceil(elapsed / max_step - 1e-9))
    if steps < 1:
        steps = 1
    h = elapsed / steps
    lam2 = damping * damping
    for _ in range(steps):
        R, t, J = fk_jacobian(axes, offsets, tool, q)
        e = pose_error(t_target, R_target, t, R)
        A = J @ J.T
        for k in range(6):
            A[k, k] += lam2
        dq = J.T @ np.linalg.solve(A, e)
        scale = 1.0
        for i in range(n):
            lim = qd_max[i] * h
            if abs(dq[i]) * scale > lim:
                scale = lim / abs(dq[i])
        for i in range(n):
            qi = q[i] + scale * dq[i]
            if qi > q_max[i]:
                qi = q_max[i]
            elif qi < q_min[i]:
                qi = q_min[i]
            q[i] = qi
    return q


@njit(cache=True)
def avatar_step(axes, offsets, tool, q, qd, t_target, R_target, v_target, gains, tau_max,
                q_min, q_max, margin, k_rep, M, Minv, joint_damping, env, dt, active, locked):
    """One control tick of a torque-driven arm touching its environment.

    ``env`` packs ``(nx, ny, nz, offset, stiffness, damping, kind, ax, ay, az)``.
    Kind 1 is a one-sided wall whose free side is ``n . p >= offset``; kind 2
    is a grasped fixture tied to anchor ``a`` by a spring-damper; kind 0 is
    free space. Returns the next ``(q, qd)``, the applied
    torque, the contact wrench, the palm position, pose error and impedance
    force at the start of the tick, and the stored energies
    ``(kinetic, impedance, environment)`` at that instant.
    """
    n = q.shape[0]
    R, t, J = fk_jacobian(axes, offsets, tool, q)
    e = pose_error(t_target, R_target, t, R)
    v = J @ qd
    F = np.empty(6)
    for k in range(3):
        F[k] = gains[0] * e[k] + gains[1] * (v_target[k] - v[k])
        F[k + 3] = gains[2] * e[k + 3] + gains[3] * (v_target[k + 3] - v[k + 3])
    tau = J.T @ F
    prox = limit_proximity(q, q_min, q_max, margin)
    for i in range(n):
        ti = tau[i] - k_rep * prox[i]
        if ti > tau_max[i]:
            ti = tau_max[i]
        elif ti < -tau_max[i]:
            ti = -tau_max[i]
        tau[i] = ti if active else 0.0

    Fc = np.zeros(6)
    pe_env = 0.0
    if env[6] == 1.0:
        depth = env[3] - (env[0] * t[0] + env[1] * t[1] + env[2] * t[2])
        if depth > 0.0:
            vn = env[0] * v[0] + env[1] * v[1] + env[2] * v[2]
            fn = env[4] * depth - env[5] * vn
            pe_env = 0.5 * env[4] * depth * depth
            if fn > 0.0:
                for k in range(3):
                    Fc[k] = fn * env[k]
    elif env[6] == 2.0:
        for k in range(3):
            d = t[k] - env[7 + k]
            Fc[k] = -env[4] * d - env[5] * v[k]
            pe_env += 0.5 * env[4] * d * d

    ke = 0.5 * (qd @ (M @ qd))
    pe_imp = 0.5 * (gains[0] * (e[0] ** 2 + e[1] ** 2 + e[2] ** 2)
                    + gains[2] * (e[3] ** 2 + e[4] ** 2 + e[5] ** 2))

    if locked:
        return q.copy(), np.zeros(n), tau, Fc, t, e, F, np.array([ke, pe_imp, pe_env])

    acc = Minv @ (tau + J.T @ Fc - joint_damping * qd)
    qd_new = qd + dt * acc
    q_new = q + dt * qd_new
    for i in range(n):
        if q_new[i] > q_max[i]:
            q_new[i] = q_max[i]
            qd_new[i] = 0.0
        elif q_new[i] < q_min[i]:
            q_new[i] = q_min[i]
            qd_new[i] = 0.0
    return q_new, qd_new, tau, Fc, t, e, F, np.array([ke, pe_imp, pe_env])
