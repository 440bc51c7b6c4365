"""Discrete-event replay of the operator station and avatar over two links.

Time is kept in integer nanoseconds. Events at equal times run in kind order
(operator tick, avatar tick, sensor sample, video capture, video send) and
then in scheduling order, so a run is a pure function of (config, trace,
seed).
"""

from __future__ import annotations

import heapq
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .. import _kernels
from ..config import ArmConfig, SessionConfig, derive_seed
from ..geometry import Pose6D, Twist, Wrench
from ..haptics import (FINGERS, FadeState, LowPassFilter, fade_target, finger_feedback,
                       limit_repulsion, lowpass_step, repulsion_wrench, retarget_fingers)
from ..kinematics import JointState, jacobian, predict_avatar
from ..locomotion import (RudderState, WheelSaturation, clamp_twist, integrate_odometry,
                          rudder_to_twist, twist_to_wheels, wheels_to_twist)
from ..netlink.channel import BandwidthMeter, Channel
from ..netlink.codec import (ArmStateFeedback, BaseVelocityCmd, DecodeError, EefPoseCmd,
                             HandCurrentFeedback, HandJointCmd, HeadPoseCmd, VideoFrame,
                             WrenchFeedback, decode, encode)
from ..televis import DegenerateView, HeadFollower, angular_error, head_follow_step
from .metrics import MetricsLog, VideoRecord, metric_columns
from .trace import OperatorTrace

log = logging.getLogger(__name__)

NS = 1_000_000_000
FORWARD_RAY = np.array([0.0, 0.0, 1.0])
UPLINK_SALT, DOWNLINK_SALT = 1, 2


class Mode(IntEnum):
    RUNNING = 0
    HOLDING = 1
    FADING = 2
    ESTOPPED = 3


class EventKind(IntEnum):
    OPERATOR = 0
    AVATAR = 1
    SENSOR = 2
    VIDEO_CAPTURE = 3
    VIDEO_SEND = 4


_LEGAL = {(Mode.RUNNING, Mode.HOLDING), (Mode.HOLDING, Mode.FADING), (Mode.FADING, Mode.RUNNING)}


class IllegalTransition(RuntimeError):
    pass


@dataclass
class SafetyState:
    """Avatar safety mode; every change goes through :meth:`to`."""

    mode: Mode = Mode.RUNNING
    fade: dict[str, FadeState] = field(default_factory=dict)
    history: list[tuple[float, Mode]] = field(default_factory=list)

    def to(self, mode: Mode, t: float):
        if mode == self.mode:
            return
        if mode != Mode.ESTOPPED and (self.mode, mode) not in _LEGAL:
            raise IllegalTransition(f"{self.mode.name} -> {mode.name}")
        if mode != Mode.FADING:
            self.fade = {}
        self.mode = mode
        self.history.append((t, mode))


# ---------------------------------------------------------------------------
# avatar side
# ---------------------------------------------------------------------------

class AvatarArm:
    """Torque-controlled arm plant with its impedance controller.

    Joint-space inertia is held constant at ``J0^T diag(m, m, m, I, I, I) J0``
    (plus a small null-space term) evaluated at the start posture, so the
    palm behaves like the effective mass the default gains were tuned for.
    """

    def __init__(self, arm: ArmConfig, cfg: SessionConfig):
        self.side = arm.side
        self.chain = arm.chain
        n = arm.chain.n
        p = cfg.plant
        J0 = jacobian(arm.chain, arm.q_init)
        lam = np.diag([p.mass] * 3 + [p.inertia] * 3)
        self.M = J0.T @ lam @ J0 + p.nullspace_inertia * np.eye(n)
        self.Minv = np.linalg.inv(self.M)
        self.joint_damping = float(p.joint_damping)
        self.gains = cfg.gains.as_array()
        self.margin = float(cfg.repulsion_margin)
        self.k_rep = float(cfg.repulsion_gain)
        self.dt = 1.0 / cfg.operator_rate
        self.q = np.array(arm.q_init, dtype=float)
        self.qd = np.zeros(n)
        self._args = arm.chain.kernel_args()
        R, t = _kernels.fk(*self._args, self.q)
        self.env = cfg.environment.packed(t)
        self.target_t = t.copy()
        self.target_R = R.copy()
        self.target_twist = np.zeros(6)
        self.tau = np.zeros(n)
        self.contact = np.zeros(6)
        self.palm = t.copy()
        self.error = np.zeros(6)
        self.force = np.zeros(6)
        self.energy = np.zeros(3)

    def set_target(self, pose: Pose6D, twist: np.ndarray):
        self.target_t = pose.translation.copy()
        self.target_R = pose.rotation_matrix()
        self.target_twist = twist

    def current_pose(self) -> Pose6D:
        R, t = _kernels.fk(*self._args, self.q)
        T = np.eye(4)
        T[:3, :3] = R
        T[:3, 3] = t
        return Pose6D.from_matrix(T)

    def tick(self, active: bool, locked: bool):
        c = self.chain
        (self.q, self.qd, self.tau, self.contact, self.palm, self.error, self.force,
         self.energy) = _kernels.avatar_step(
            *self._args, self.q, self.qd, self.target_t, self.target_R, self.target_twist,
            self.gains, c.tau_max, c.q_min, c.q_max, self.margin, self.k_rep, self.M, self.Minv,
            self.joint_damping, self.env, self.dt, active, locked)


class AvatarHand:
    """First-order finger servos; motor current grows with tracking effort and
    with closure past a virtual grasped object."""

    def __init__(self, arm: ArmConfig, cfg: SessionConfig):
        self.mapping = arm.hand
        self.plant = cfg.hand_plant
        self.pos = np.clip(np.zeros(arm.hand.dof), arm.hand.out_min, arm.hand.out_max)
        self.cmd = self.pos.copy()
        self.dt = 1.0 / cfg.operator_rate
        self._finger = np.array(arm.hand.finger_of_output)

    def tick(self, active: bool):
        if active:
            a = min(1.0, self.plant.tracking_rate * self.dt)
            self.pos = self.pos + a * (self.cmd - self.pos)

    def currents(self) -> np.ndarray:
        p = self.plant
        effort = p.current_per_rad * np.abs(self.cmd - self.pos)
        effort += p.contact_gain * np.maximum(0.0, self.pos - p.closure)
        out = np.zeros(FINGERS)
        np.maximum.at(out, self._finger, effort)
        return out


# ---------------------------------------------------------------------------
# operator side
# ---------------------------------------------------------------------------

class OperatorHand:
    """Simulated operator hand: 1-DoF-per-axis mass on a spring to the trace."""

    def __init__(self, arm: ArmConfig, cfg: SessionConfig, start: Pose6D):
        self.side = arm.side
        self.arm = arm
        om = cfg.operator
        self.m, self.k, self.c = om.mass, om.stiffness, om.damping
        self.dt = 1.0 / cfg.operator_rate
        self.x = start.translation.copy()
        self.v = np.zeros(3)
        self.rot = start.q
        self.feedback = np.zeros(3)
        self.repulsion = np.zeros(3)
        self.reported: JointState | None = None
        self.reported_at = 0.0
        self.brakes = np.zeros(FINGERS, dtype=bool)
        margin = cfg.repulsion_margin
        self.margin = margin
        self.k_rep = cfg.repulsion_gain
        self._reach = margin + arm.chain.qd_max * 0.1

    def energy(self, trace_x: np.ndarray) -> float:
        d = trace_x - self.x
        return 0.5 * self.m * float(self.v @ self.v) + 0.5 * self.k * float(d @ d)

    def update_repulsion(self, now: float, command: Pose6D):
        """Limit-repulsion force from the predicted avatar state (zero when no
        joint can reach its margin band within the prediction horizon)."""
        st = self.reported
        if st is None or self.k_rep == 0.0:
            self.repulsion = np.zeros(3)
            return
        ch = self.arm.chain
        if np.all(st.q - ch.q_min > self._reach) and np.all(ch.q_max - st.q > self._reach):
            self.repulsion = np.zeros(3)
            return
        pred = predict_avatar(ch, st, command, max(0.0, now - self.reported_at))
        tau = limit_repulsion(ch, pred.state.q, self.margin, self.k_rep)
        if not np.any(tau):
            self.repulsion = np.zeros(3)
            return
        w = repulsion_wrench(jacobian(ch, pred.state.q), tau)
        self.repulsion = w[:3]

    def step(self, trace_x: np.ndarray):
        f = self.k * (trace_x - self.x) - self.c * self.v + self.feedback + self.repulsion
        self.v = self.v + (self.dt / self.m) * f
        self.x = self.x + self.dt * self.v


# ---------------------------------------------------------------------------
# session
# ---------------------------------------------------------------------------

class Session:
    """One operator/avatar pairing replaying ``trace`` through simulated links."""

    def __init__(self, cfg: SessionConfig, trace: OperatorTrace, seed: int | None = None,
                 duration: float | None = None, abort_energy: float | None = None):
        if len(trace) == 0:
            raise ValueError("trace is empty")
        self.cfg = cfg
        self.trace = trace
        self.seed = cfg.seed if seed is None else int(seed)
        dur = duration if duration is not None else cfg.duration
        if dur is None:
            dur = trace.duration
        if not dur > 0:
            raise ValueError("session duration must be positive")
        self.duration = float(dur)
        self.end_ns = int(round(self.duration * NS))
        self.abort_energy = abort_energy
        self.aborted = False

        self.uplink = Channel(replace(cfg.uplink, rng_seed=derive_seed(self.seed, UPLINK_SALT)))
        self.downlink = Channel(replace(cfg.downlink, rng_seed=derive_seed(self.seed, DOWNLINK_SALT)))
        self.meter = BandwidthMeter(cfg.bandwidth_window)

        self.sides = tuple(a.side for a in cfg.arms)
        self.arms = {a.side: AvatarArm(a, cfg) for a in cfg.arms}
        self.hands = {a.side: AvatarHand(a, cfg) for a in cfg.arms}
        first = trace.sample(trace.t0)
        self.op_hands = {a.side: OperatorHand(a, cfg, first.palm(a.side)) for a in cfg.arms}
        self.filters = {s: LowPassFilter(cfg.filter_cutoff, cfg.sensor_rate) for s in self.sides}
        self.head = HeadFollower(cfg.head_init, cfg.head_v_max, cfg.head_w_max)
        self.head_target = cfg.head_init
        self.base_pose = (0.0, 0.0, 0.0)
        self.base_cmd = Twist()
        self.wheels = np.zeros(4)
        self.safety = SafetyState()
        self.hold_pose: dict[str, Pose6D] = {}

        # latest command per side and the header time of the one in force
        self.cmd_pose: dict[str, Pose6D] = {s: self.arms[s].current_pose() for s in self.sides}
        self.cmd_twist: dict[str, np.ndarray] = {s: np.zeros(6) for s in self.sides}
        self.cmd_ts: dict[str, float] = {s: 0.0 for s in self.sides}
        self.last_cmd_arrival: float | None = None  # watchdog arms on the first command
        self.cmd_since_hold = False
        self.timeout = cfg.comm_timeout_intervals / cfg.operator_rate + 1e-9

        # operator-side bookkeeping
        self.op_seq = 0
        self.av_seq = 0
        self.fb_origin: dict[int, float] = {}
        self.rtt = math.nan
        self.displayed: Pose6D | None = None
        self.pending_display: deque[tuple[float, Pose6D]] = deque()
        self.pending_frames: dict[int, tuple[int, Pose6D]] = {}
        self._payload = bytes(cfg.frame_bytes)
        self._televis_cache: tuple | None = None
        self.decode_errors = 0

        self.log = MetricsLog(metric_columns(cfg), seed=self.seed,
                              capacity=int(self.duration * cfg.operator_rate) + 2)
        self.now_ns = 0
        self._heap: list[tuple[int, int, int, int]] = []
        self._order = 0
        self._eye = first.head
        self._trace_x = {s: first.palm(s).translation.copy() for s in self.sides}
        self._op_energy = 0.0
        self._estop_at: list[int] = []
        self._rates = {
            EventKind.OPERATOR: cfg.operator_rate, EventKind.AVATAR: cfg.operator_rate,
            EventKind.SENSOR: cfg.sensor_rate, EventKind.VIDEO_CAPTURE: cfg.video_rate,
        }
        # video ticks mark exposure end, so the first one waits for a full exposure
        self._offset = {k: 0 for k in self._rates}
        self._offset[EventKind.VIDEO_CAPTURE] = int(round(cfg.exposure * NS))
        for kind in self._rates:
            self._push(self._offset[kind], kind, 0)

    # -- scheduling ---------------------------------------------------------

    def _push(self, t_ns: int, kind: int, index: int):
        heapq.heappush(self._heap, (t_ns, kind, self._order, index))
        self._order += 1

    def _reschedule(self, kind: EventKind, index: int):
        t = int(round((index + 1) * NS / self._rates[kind])) + self._offset[kind]
        if t <= self.end_ns:
            self._push(t, kind, index + 1)

    def add_blackout(self, start: float, end: float):
        """Drop every packet, in both directions, sent during ``[start, end)``."""
        self.uplink.add_blackout(start, end)
        self.downlink.add_blackout(start, end)

    def schedule_estop(self, t: float):
        self._estop_at.append(int(round(t * NS)))
        self._estop_at.sort()

    def estop(self):
        """Latch the E-stop at the current simulated instant."""
        if self.safety.mode != Mode.ESTOPPED:
            log.info("e-stop at t=%.6f s", self.now)
            self.safety.to(Mode.ESTOPPED, self.now)
            self.wheels = np.zeros(4)
            for arm in self.arms.values():
                arm.qd = np.zeros_like(arm.qd)

    @property
    def now(self) -> float:
        return self.now_ns / NS

    @property
    def mode(self) -> Mode:
        return self.safety.mode

    # -- main loop ------------------------------------------------------------

    def run_until(self, t: float | None = None) -> MetricsLog:
        stop = self.end_ns if t is None else min(self.end_ns, int(round(t * NS)))
        heap = self._heap
        handlers = (self._operator_tick, self._avatar_tick, self._sensor_tick,
                    self._video_capture, self._video_send)
        while heap and heap[0][0] <= stop and not self.aborted:
            t_ns, kind, _, index = heapq.heappop(heap)
            while self._estop_at and self._estop_at[0] <= t_ns:
                self.now_ns = self._estop_at.pop(0)
                self.estop()
            self.now_ns = t_ns
            handlers[kind](index)
            if kind != EventKind.VIDEO_SEND:
                self._reschedule(EventKind(kind), index)
        if t is not None and not self.aborted:
            self.now_ns = max(self.now_ns, stop)
        return self.log

    def run(self) -> MetricsLog:
        self.run_until(None)
        self.log.finish(self.uplink, self.downlink, self.decode_errors, self.aborted)
        return self.log

    # -- operator station -------------------------------------------------------

    def _send_up(self, msg):
        self.uplink.send(encode(msg, self.op_seq, self.now_ns), self.now)
        self.op_seq = (self.op_seq + 1) & 0xFFFFFFFF

    def _send_down(self, msg) -> int:
        seq = self.av_seq
        self.downlink.send(encode(msg, seq, self.now_ns), self.now)
        self.av_seq = (seq + 1) & 0xFFFFFFFF
        return seq

    def _operator_receive(self):
        now = self.now
        for t_del, data in self.downlink.poll_timed(now):
            self.meter.add(t_del, 8 * len(data))
            try:
                d = decode(data)
            except DecodeError:
                self.decode_errors += 1
                continue
            m = d.message
            if isinstance(m, WrenchFeedback):
                self.op_hands[m.side].feedback = np.array(m.wrench.force)
                origin = self.fb_origin.pop(d.seq, None)
                if origin is not None:
                    self.rtt = now - origin
            elif isinstance(m, ArmStateFeedback):
                h = self.op_hands[m.side]
                h.reported = m.state
                h.reported_at = d.timestamp_ns / NS
            elif isinstance(m, HandCurrentFeedback):
                h = self.op_hands[m.side]
                h.brakes = finger_feedback(h.arm.hand, m.currents, h.brakes)
            elif isinstance(m, VideoFrame):
                display = t_del + self.cfg.decode_latency
                self.log.video.append(VideoRecord(
                    m.stream, m.capture_ts_ns / NS, d.timestamp_ns / NS, t_del, display,
                    len(m.payload), self.cfg.exposure))
                if m.stream == 0:
                    self.pending_display.append((display, m.capture_pose))

    def _operator_tick(self, index: int):
        self._operator_receive()
        now = self.now
        pend = self.pending_display
        while pend and pend[0][0] <= now + 1e-12:
            self.displayed = pend.popleft()[1]
        s = self.trace.sample(self.trace.t0 + now)
        self._eye = s.head
        energy = 0.0
        for side in self.sides:
            h = self.op_hands[side]
            tx = s.palm(side).translation
            self._trace_x[side] = tx
            energy += h.energy(tx)
            pose = Pose6D(h.x, s.palm(side).q)
            h.update_repulsion(now, pose)
            self._send_up(EefPoseCmd(side, pose, Twist(h.v, (0.0, 0.0, 0.0))))
            self._send_up(HandJointCmd(side, retarget_fingers(h.arm.hand, s.fingers(side))))
            h.step(tx)
        self._op_energy = energy
        self._send_up(HeadPoseCmd(s.head))
        r = np.clip(s.rudder, -math.pi / 2, math.pi / 2)
        twist = rudder_to_twist(RudderState(*r), self.cfg.rudder_k_lin, self.cfg.rudder_k_ang,
                                self.cfg.rudder_deadzone)
        self._send_up(BaseVelocityCmd(clamp_twist(twist, self.cfg.twist_limits)))

    # -- avatar ---------------------------------------------------------------------

    def _avatar_receive(self):
        got_cmd = False
        for data in self.uplink.poll(self.now):
            try:
                d = decode(data)
            except DecodeError:
                self.decode_errors += 1
                continue
            m = d.message
            if isinstance(m, EefPoseCmd):
                self.cmd_pose[m.side] = m.pose
                self.cmd_twist[m.side] = m.twist.as_array()
                self.cmd_ts[m.side] = d.timestamp_ns / NS
                got_cmd = True
            elif isinstance(m, HandJointCmd):
                hand = self.hands[m.side]
                if len(m.joints) == hand.mapping.dof:
                    hand.cmd = np.array(m.joints)
            elif isinstance(m, HeadPoseCmd):
                self.head_target = m.pose
            elif isinstance(m, BaseVelocityCmd):
                self.base_cmd = m.twist
        if got_cmd:
            self.last_cmd_arrival = self.now
            if self.safety.mode == Mode.HOLDING:
                self.cmd_since_hold = True

    def _update_safety(self, dt: float):
        st = self.safety
        now = self.now
        if (st.mode == Mode.RUNNING and self.last_cmd_arrival is not None
                and now - self.last_cmd_arrival > self.timeout):
            st.to(Mode.HOLDING, now)
            self.cmd_since_hold = False
            for side, arm in self.arms.items():
                pose = arm.current_pose()
                self.hold_pose[side] = pose
                arm.set_target(pose, np.zeros(6))
                arm.qd = np.zeros_like(arm.qd)
            log.info("comm loss: holding at t=%.6f s", now)
        elif st.mode == Mode.HOLDING and self.cmd_since_hold:
            st.to(Mode.FADING, now)
            st.fade = {s: FadeState(self.hold_pose[s], self.cfg.fade_duration) for s in self.sides}
        if st.mode == Mode.FADING:
            for side, arm in self.arms.items():
                pose, st.fade[side] = fade_target(st.fade[side], self.cmd_pose[side], dt)
                arm.set_target(pose, np.zeros(6))
            if all(f.done for f in st.fade.values()):
                st.to(Mode.RUNNING, now)
        elif st.mode == Mode.RUNNING:
            for side, arm in self.arms.items():
                arm.set_target(self.cmd_pose[side], self.cmd_twist[side])

    def _avatar_tick(self, index: int):
        self._avatar_receive()
        dt = 1.0 / self.cfg.operator_rate
        if self.safety.mode != Mode.ESTOPPED:
            self._update_safety(dt)
        mode = self.safety.mode
        active = mode in (Mode.RUNNING, Mode.FADING)
        locked = mode in (Mode.HOLDING, Mode.ESTOPPED)
        energy = self._op_energy
        for arm in self.arms.values():
            arm.tick(mode != Mode.ESTOPPED, locked)
            energy += float(arm.energy.sum())
        for hand in self.hands.values():
            hand.tick(active)
        if mode != Mode.ESTOPPED and not self.head.at_target(self.head_target):
            head_follow_step(self.head, self.head_target, dt)
        self._drive_base(active, dt)
        self._record(energy)
        if self.abort_energy is not None and not energy <= self.abort_energy:
            self.aborted = True

    def _drive_base(self, active: bool, dt: float):
        cmd = self.base_cmd
        if not active or not any(cmd.as_tuple()):
            self.wheels = np.zeros(4)
            return
        try:
            self.wheels = twist_to_wheels(self.cfg.base, cmd)
        except WheelSaturation as sat:
            self.wheels = sat.wheels * sat.scale
        self.base_pose = integrate_odometry(self.base_pose, wheels_to_twist(self.cfg.base, self.wheels), dt)

    def _televis_error(self) -> float:
        if self.displayed is None:
            return math.nan
        key = (self.displayed.t, self.displayed.q, self._eye.t, self._eye.q)
        c = self._televis_cache
        if c is not None and c[0] == key:
            return c[1]
        try:
            err = angular_error(self.cfg.camera.at(self.displayed), FORWARD_RAY, self._eye,
                                self.cfg.eval_depth)
        except DegenerateView:
            err = math.nan
        self._televis_cache = (key, err)
        return err

    def _record(self, energy: float):
        row = [self.now, float(self.safety.mode)]
        for side in self.sides:
            e = self.arms[side].error
            row += [math.sqrt(e[0] ** 2 + e[1] ** 2 + e[2] ** 2),
                    math.sqrt(e[3] ** 2 + e[4] ** 2 + e[5] ** 2)]
        row += [self.rtt, self._televis_error(), self.meter.rate(self.now), energy]
        for side in self.sides:
            f = self.op_hands[side].feedback
            row.append(math.sqrt(f[0] ** 2 + f[1] ** 2 + f[2] ** 2))
        for side in self.sides:
            row += list(self.arms[side].palm)
        for side in self.sides:
            row += list(self.arms[side].tau)
        row += list(self.wheels)
        row += list(self.base_pose)
        row += list(self.head.current_pose.t)
        for side in self.sides:
            row.append(float(int(np.dot(self.op_hands[side].brakes, 1 << np.arange(FINGERS)))))
        self.log.append(row)

    # -- sensors and video ------------------------------------------------------------

    def _sensor_tick(self, index: int):
        for side in self.sides:
            arm = self.arms[side]
            w = lowpass_step(self.filters[side], arm.contact)
            seq = self._send_down(WrenchFeedback(side, Wrench(w[:3], w[3:])))
            self.fb_origin[seq] = self.cmd_ts[side]
            self._send_down(ArmStateFeedback(side, JointState(arm.q, arm.qd)))
            self._send_down(HandCurrentFeedback(side, self.hands[side].currents()))

    def _video_capture(self, index: int):
        cfg = self.cfg
        capture_ns = self.now_ns - self._offset[EventKind.VIDEO_CAPTURE]
        self.pending_frames[index] = (capture_ns, self.head.current_pose)
        send_ns = self.now_ns + int(round(cfg.encode_latency * NS))
        if send_ns <= self.end_ns:
            self._push(send_ns, EventKind.VIDEO_SEND, index)

    def _video_send(self, index: int):
        capture_ns, pose = self.pending_frames.pop(index)
        for stream in range(self.cfg.video_streams):
            self._send_down(VideoFrame(stream, capture_ns, pose, self._payload))


def run_session(cfg: SessionConfig, trace: OperatorTrace, seed: int | None = None, *,
                duration: float | None = None, blackouts=(), estop_at: float | None = None,
                abort_energy: float | None = None) -> MetricsLog:
    """Replay ``trace`` through a fresh session and return its metrics."""
    s = Session(cfg, trace, seed=seed, duration=duration, abort_energy=abort_energy)
    for a, b in blackouts:
        s.add_blackout(a, b)
    if estop_at is not None:
        s.schedule_estop(estop_at)
    return s.run()


def estop(session: Session):
    session.estop()

