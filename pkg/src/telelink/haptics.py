"""Force-feedback and impedance control primitives.

Everything here is expressed in the common palm frame: poses, twists and
wrenches refer to the middle of the palm, in the arm's base orientation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .geometry import Pose6D, Twist, Wrench, quat_slerp
from .kinematics import ChainModel, ContractError, JointState, limit_proximity

SVH_DOF = 9
SIH_DOF = 5
GLOVE_DOF = 20
FINGERS = 5
BRAKE_HYSTERESIS = 0.1


@dataclass(frozen=True)
class ImpedanceGains:
    kp_lin: float = 400.0
    kd_lin: float = 40.0
    kp_ang: float = 30.0
    kd_ang: float = 3.0

    def __post_init__(self):
        vals = (self.kp_lin, self.kd_lin, self.kp_ang, self.kd_ang)
        if any(v < 0 for v in vals):
            raise ContractError("impedance gains must be non-negative")
        if (self.kp_lin > 0 and self.kd_lin <= 0) or (self.kp_ang > 0 and self.kd_ang <= 0):
            raise ContractError("a positive stiffness needs a positive damping")

    def as_array(self) -> np.ndarray:
        return np.array([self.kp_lin, self.kd_lin, self.kp_ang, self.kd_ang])


# ---------------------------------------------------------------------------
# sensor filtering
# ---------------------------------------------------------------------------

@dataclass
class LowPassFilter:
    """First-order IIR smoother ``y += alpha * (x - y)``."""

    cutoff_hz: float
    sample_hz: float
    state: np.ndarray | None = None

    def __post_init__(self):
        if not 0 < self.cutoff_hz < self.sample_hz / 2:
            raise ContractError("cutoff must lie in (0, sample_hz / 2)")

    @property
    def alpha(self) -> float:
        dt = 1.0 / self.sample_hz
        tau = 1.0 / (2.0 * math.pi * self.cutoff_hz)
        return dt / (tau + dt)

    def reset(self, value=None):
        self.state = None if value is None else np.array(value, dtype=float)


def lowpass_step(f: LowPassFilter, sample) -> np.ndarray:
    """Advance the filter by one sample; the first sample seeds the state."""
    x = np.asarray(sample, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ContractError("filter input must be finite")
    if f.state is None:
        f.state = x.copy()
    else:
        f.state = f.state + f.alpha * (x - f.state)
    return f.state.copy()


# ---------------------------------------------------------------------------
# operator side
# ---------------------------------------------------------------------------

def _deadband(v: np.ndarray, width: float) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n <= width:
        return np.zeros(3)
    return v * ((n - width) / n)


def weightless_assist(measured: Wrench, gain_lin: float, gain_ang: float,
                      deadband: float, deadband_torque: float | None = None) -> Twist:
    """Admittance mapping from the operator's measured wrench to an assist twist.

    Force and torque are handled independently; each is shrunk radially by
    its deadband, so the output is continuous and direction-preserving.
    """
    if gain_lin < 0 or gain_ang < 0:
        raise ContractError("assist gains must be non-negative")
    db_t = deadband if deadband_torque is None else deadband_torque
    return Twist(gain_lin * _deadband(measured.force, deadband),
                 gain_ang * _deadband(measured.torque, db_t))


def limit_repulsion(model: ChainModel, q, margin: float, k_rep: float) -> np.ndarray:
    """Joint torques pushing each joint back out of its limit margin."""
    if k_rep < 0:
        raise ContractError("k_rep must be non-negative")
    return -k_rep * limit_proximity(model, q, margin)


def repulsion_wrench(jac: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Cartesian wrench whose Jacobian-transpose image best matches ``tau``."""
    return np.linalg.lstsq(jac.T, tau, rcond=None)[0]


# ---------------------------------------------------------------------------
# avatar side
# ---------------------------------------------------------------------------

def impedance_step(model: ChainModel, state: JointState, target: Pose6D, target_twist: Twist,
                   gains: ImpedanceGains, feedforward: Wrench | None = None) -> np.ndarray:
    """Cartesian impedance law mapped to joint torques, ``clamp(J^T F, tau_max)``.

    ``F`` is a spring on :func:`~telelink.geometry.pose_error` plus a damper on
    the twist error; an optional feed-forward wrench is added to ``F``.
    """
    q = np.ascontiguousarray(state.q, dtype=float)
    qd = np.ascontiguousarray(state.qd, dtype=float)
    if q.shape[0] != model.n or qd.shape[0] != model.n:
        raise ContractError(f"joint state must have {model.n} entries")
    ff = np.zeros(6) if feedforward is None else feedforward.as_array()
    tau, _ = _kernels.impedance_torque(
        *model.kernel_args(), q, qd, target.translation.copy(), target.rotation_matrix(),
        target_twist.as_array(), gains.as_array(), model.tau_max, ff)
    return tau


@dataclass(frozen=True)
class FadeState:
    start_pose: Pose6D
    duration: float = 1.0
    progress: float = 0.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ContractError("fade duration must be positive")
        if not 0.0 <= self.progress <= 1.0:
            raise ContractError("fade progress must lie in [0, 1]")

    @property
    def done(self) -> bool:
        return self.progress >= 1.0


def smoothstep(u: float) -> float:
    return u * u * (3.0 - 2.0 * u)


def fade_target(fade: FadeState, final_target: Pose6D, dt: float) -> tuple[Pose6D, FadeState]:
    """Advance a fade by ``dt`` and return the blended target.

    The blend weight follows a smoothstep in progress, so the target starts
    and ends with zero rate of change.
    """
    if dt < 0:
        raise ContractError("dt must be non-negative")
    progress = fade.progress + dt / fade.duration
    if progress >= 1.0 - 1e-12:
        return final_target, replace(fade, progress=1.0)
    fade = replace(fade, progress=progress)
    s = smoothstep(progress)
    a = fade.start_pose
    t = a.translation + s * (final_target.translation - a.translation)
    return Pose6D(t, quat_slerp(a.rotation, final_target.rotation, s)), fade


# ---------------------------------------------------------------------------
# hands
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HandMapping:
    """Linear glove-to-hand retargeting plus per-finger brake thresholds."""

    retarget: np.ndarray
    out_min: np.ndarray
    out_max: np.ndarray
    brake_threshold: np.ndarray = field(default_factory=lambda: np.full(FINGERS, 0.5))
    finger_of_output: tuple[int, ...] = ()

    def __post_init__(self):
        M = np.array(self.retarget, dtype=float)
        if M.ndim != 2 or M.shape[0] not in (SVH_DOF, SIH_DOF) or M.shape[1] != GLOVE_DOF:
            raise ContractError(f"retarget must be 9x20 or 5x20, got {M.shape}")
        rows = M.shape[0]
        lo = np.array(self.out_min, dtype=float).reshape(-1)
        hi = np.array(self.out_max, dtype=float).reshape(-1)
        if lo.shape != (rows,) or hi.shape != (rows,) or np.any(lo > hi):
            raise ContractError("out_min/out_max must match the output count and be ordered")
        th = np.array(self.brake_threshold, dtype=float).reshape(-1)
        if th.shape != (FINGERS,) or np.any(th <= 0):
            raise ContractError("brake_threshold needs 5 positive entries")
        fo = tuple(self.finger_of_output) or _DEFAULT_FINGER_OF_OUTPUT[rows]
        if len(fo) != rows or any(not 0 <= f < FINGERS for f in fo):
            raise ContractError("finger_of_output must name a finger (0-4) per output")
        for name, arr in (("retarget", M), ("out_min", lo), ("out_max", hi), ("brake_threshold", th)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "finger_of_output", fo)

    @property
    def dof(self) -> int:
        return self.retarget.shape[0]

    @property
    def variant(self) -> str:
        return "svh" if self.dof == SVH_DOF else "sih"


# glove layout: four joints per finger, thumb..pinky; the first joint of
# each finger is its abduction
_DEFAULT_FINGER_OF_OUTPUT = {
    SVH_DOF: (0, 0, 1, 1, 2, 2, 3, 4, 1),
    SIH_DOF: (0, 0, 1, 2, 3),
}


def default_hand_mapping(variant: str = "svh") -> HandMapping:
    """Synthetic retargeting for the 9-DoF (svh) or 5-DoF (sih) hand."""
    M = np.zeros((SVH_DOF if variant == "svh" else SIH_DOF, GLOVE_DOF))
    if variant == "svh":
        M[0, [2, 3]] = 0.5                 # thumb flexion
        M[1, 0] = 1.0                      # thumb opposition
        M[2, [6, 7]] = 0.5                 # index distal
        M[3, 5] = 1.0                      # index proximal
        M[4, [10, 11]] = 0.5               # middle distal
        M[5, 9] = 1.0                      # middle proximal
        M[6, [13, 14, 15]] = 1.0 / 3.0     # ring
        M[7, [17, 18, 19]] = 1.0 / 3.0     # pinky
        M[8, [4, 16]] = 0.5                # spread
        lo = np.zeros(SVH_DOF)
        hi = np.array([1.0, 1.0, 1.3, 0.8, 1.3, 0.8, 1.0, 1.0, 0.5])
    elif variant == "sih":
        M[0, [1, 2, 3]] = 1.0 / 3.0
        M[1, 0] = 1.0
        M[2, [5, 6, 7]] = 1.0 / 3.0
        M[3, [9, 10, 11]] = 1.0 / 3.0
        M[4, [13, 14, 15, 17, 18, 19]] = 1.0 / 6.0
        lo = np.zeros(SIH_DOF)
        hi = np.full(SIH_DOF, 1.5)
    else:
        raise ContractError(f"unknown hand variant {variant!r}")
    return HandMapping(M, lo, hi, np.full(FINGERS, 0.5))


def retarget_fingers(mapping: HandMapping, operator_joints) -> np.ndarray:
    x = np.asarray(operator_joints, dtype=float).reshape(-1)
    if x.shape != (GLOVE_DOF,):
        raise ContractError(f"expected {GLOVE_DOF} glove joints, got {x.shape[0]}")
    return np.clip(mapping.retarget @ x, mapping.out_min, mapping.out_max)


def finger_feedback(mapping: HandMapping, motor_currents, engaged=None) -> np.ndarray:
    """Per-finger brake decision with a hysteresis band.

    A brake engages above its threshold and releases only once the current
    falls below ``(1 - 0.1) * threshold``. ``engaged`` is the previous
    decision (all released when omitted).
    """
    c = np.asarray(motor_currents, dtype=float).reshape(-1)
    if c.shape != (FINGERS,):
        raise ContractError(f"expected {FINGERS} finger currents")
    if np.any(c < 0):
        raise ContractError("motor currents must be non-negative")
    prev = np.zeros(FINGERS, dtype=bool) if engaged is None else np.asarray(engaged, dtype=bool)
    th = mapping.brake_threshold
    on = c > th
    hold = prev & (c >= (1.0 - BRAKE_HYSTERESIS) * th)
    return on | hold


def finger_flexion(mapping: HandMapping, command) -> np.ndarray:
    """Mean commanded flexion per finger (spread/opposition outputs included)."""
    cmd = np.asarray(command, dtype=float)
    out = np.zeros(FINGERS)
    count = np.zeros(FINGERS)
    for i, f in enumerate(mapping.finger_of_output):
        out[f] += cmd[i]
        count[f] += 1
    return np.divide(out, count, out=np.zeros(FINGERS), where=count > 0)
