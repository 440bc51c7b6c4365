"""Serial-chain kinematics for revolute arms.

A chain is described URDF-style: every joint has a fixed parent-to-joint
offset pose and a rotation axis in the joint frame. An optional tool pose
maps the last joint frame to the palm (the common control frame).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import Pose6D, translate

MAX_JOINTS = 16
DEFAULT_STALENESS = 0.1
PREDICT_DAMPING = 0.01
PREDICT_MAX_STEP = 0.005


class ContractError(ValueError):
    """Argument shapes or values violate an operation's precondition."""


@dataclass(frozen=True)
class Joint:
    axis: tuple[float, float, float]
    offset: Pose6D = field(default_factory=Pose6D)

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(axis)
        if axis.shape != (3,) or n == 0.0:
            raise ContractError("joint axis must be a nonzero 3-vector")
        object.__setattr__(self, "axis", tuple(float(c) for c in axis / n))


@dataclass(frozen=True, eq=False)
class ChainModel:
    joints: tuple[Joint, ...]
    q_min: np.ndarray
    q_max: np.ndarray
    qd_max: np.ndarray
    tau_max: np.ndarray
    tool: Pose6D = field(default_factory=Pose6D)
    name: str = ""

    def __post_init__(self):
        joints = tuple(self.joints)
        n = len(joints)
        if not 1 <= n <= MAX_JOINTS:
            raise ContractError(f"chain needs 1..{MAX_JOINTS} joints, got {n}")
        object.__setattr__(self, "joints", joints)
        for name in ("q_min", "q_max", "qd_max", "tau_max"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            if arr.shape != (n,):
                raise ContractError(f"{name} must have {n} entries, got {arr.shape[0]}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if np.any(self.q_min >= self.q_max):
            raise ContractError("q_min must be strictly below q_max")
        if np.any(self.qd_max <= 0) or np.any(self.tau_max <= 0):
            raise ContractError("qd_max and tau_max must be positive")
        # flat views for the compiled kernels
        object.__setattr__(self, "_axes", np.array([j.axis for j in joints]))
        object.__setattr__(self, "_offsets", np.array([j.offset.matrix() for j in joints]))
        object.__setattr__(self, "_tool", self.tool.matrix())

    @property
    def n(self) -> int:
        return len(self.joints)

    def kernel_args(self):
        return self._axes, self._offsets, self._tool

    def with_base(self, base: Pose6D) -> ChainModel:
        """Same chain mounted at ``base`` (pre-multiplies the first offset)."""
        from .geometry import compose

        first = Joint(self.joints[0].axis, compose(base, self.joints[0].offset))
        return ChainModel((first,) + self.joints[1:], self.q_min, self.q_max, self.qd_max,
                          self.tau_max, self.tool, self.name)


@dataclass(frozen=True, eq=False)
class JointState:
    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        qd = np.array(self.qd, dtype=float).reshape(-1)
        if q.shape != qd.shape:
            raise ContractError("q and qd must have the same length")
        q.flags.writeable = False
        qd.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)

    def __eq__(self, other):
        if not isinstance(other, JointState):
            return NotImplemented
        return bool(np.array_equal(self.q, other.q) and np.array_equal(self.qd, other.qd))

    @classmethod
    def at_rest(cls, q) -> JointState:
        q = np.asarray(q, dtype=float)
        return cls(q, np.zeros_like(q))


@dataclass(frozen=True)
class PredictedAvatarState:
    state: JointState
    prediction_horizon: float
    stale: bool


def _check_q(model: ChainModel, q) -> np.ndarray:
    q = np.ascontiguousarray(q, dtype=float).reshape(-1)
    if q.shape[0] != model.n:
        raise ContractError(f"expected {model.n} joint values, got {q.shape[0]}")
    if not np.all(np.isfinite(q)):
        raise ContractError("joint values must be finite")
    return q


def forward_kinematics(model: ChainModel, q) -> Pose6D:
    """Palm pose in the chain base frame."""
    R, t = _kernels.fk(*model.kernel_args(), _check_q(model, q))
    return Pose6D.from_matrix(_homogeneous(R, t))


def jacobian(model: ChainModel, q) -> np.ndarray:
    """6xn geometric Jacobian at the palm, base frame, linear rows first."""
    _, _, J = _kernels.fk_jacobian(*model.kernel_args(), _check_q(model, q))
    return J


def limit_proximity(model: ChainModel, q, margin: float) -> np.ndarray:
    """Signed depth of each joint into its limit margin band.

    Positive near the upper limit, negative near the lower one, zero when the
    joint is farther than ``margin`` from both.
    """
    if margin <= 0:
        raise ContractError("margin must be positive")
    return _kernels.limit_proximity(_check_q(model, q), model.q_min, model.q_max, float(margin))


def predict_avatar(model: ChainModel, last_reported: JointState, last_command: Pose6D,
                   elapsed: float, staleness_horizon: float = DEFAULT_STALENESS) -> PredictedAvatarState:
    """Extrapolate the remote arm from its last report toward the last command.

    The arm is assumed to pursue ``last_command`` with damped-least-squares
    resolved rates, never faster than ``qd_max``. Predictions further out than
    ``staleness_horizon`` are integrated only up to the horizon and flagged
    stale.
    """
    if elapsed < 0:
        raise ContractError("elapsed must be non-negative")
    q0 = _check_q(model, last_reported.q)
    horizon = min(float(elapsed), float(staleness_horizon))
    if horizon == 0.0:
        return PredictedAvatarState(last_reported, 0.0, elapsed > staleness_horizon)
    R_target = last_command.rotation_matrix()
    q = _kernels.resolved_rate_predict(
        *model.kernel_args(), q0, last_command.translation.copy(), R_target,
        model.qd_max, model.q_min, model.q_max, horizon, PREDICT_MAX_STEP, PREDICT_DAMPING)
    qd = (q - q0) / horizon
    return PredictedAvatarState(JointState(q, qd), float(elapsed), elapsed > staleness_horizon)


def _homogeneous(R, t) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = t
    return T


def planar_chain(lengths, name: str = "planar") -> ChainModel:
    """Revolute z-axis chain along +x; handy for analytic checks."""
    lengths = list(lengths)
    joints = [Joint((0.0, 0.0, 1.0), translate(0.0 if i == 0 else lengths[i - 1], 0.0, 0.0))
              for i in range(len(lengths))]
    n = len(lengths)
    return ChainModel(tuple(joints), [-np.pi] * n, [np.pi] * n, [2.0] * n, [100.0] * n,
                      tool=translate(lengths[-1], 0.0, 0.0), name=name)


def pose_error_kernel(target: Pose6D, current: Pose6D) -> np.ndarray:
    """Compiled twin of :func:`telelink.geometry.pose_error` (for cross-checks)."""
    return _kernels.pose_error(target.translation.copy(), target.rotation_matrix(),
                               current.translation.copy(), current.rotation_matrix())


__all__ = [
    "ChainModel", "ContractError", "Joint", "JointState", "PredictedAvatarState",
    "forward_kinematics", "jacobian", "limit_proximity", "predict_avatar", "planar_chain",
    "pose_error_kernel",
]
