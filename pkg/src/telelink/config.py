"""Shared configuration tree: YAML text in, validated domain objects out.

Every key is optional and falls back to the documented default; unknown keys,
wrong types and out-of-range values are rejected with ``file:line:col``
context taken from the YAML node marks.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .geometry import Pose6D, compose, rot_x, rot_y, rot_z, translate
from .haptics import FINGERS, GLOVE_DOF, HandMapping, ImpedanceGains, default_hand_mapping
from .kinematics import ChainModel, ContractError, Joint, forward_kinematics
from .locomotion import MecanumBase, TwistLimits
from .netlink.channel import ChannelModel
from .televis import SphereCamera

SCHEMA_VERSION = 1
SIDES = ("left", "right")


class ConfigError(ValueError):
    """Schema violation anchored to a position in the source text."""

    def __init__(self, message: str, source: str = "<config>", line: int | None = None,
                 col: int | None = None):
        self.message = message
        self.source = source
        self.line = line
        self.col = col
        where = source if line is None else f"{source}:{line}:{col}"
        super().__init__(f"{where}: {message}")


# ---------------------------------------------------------------------------
# domain records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorHandModel:
    """Simulated operator hand: point mass on a spring to the trace pose."""

    mass: float = 1.0
    stiffness: float = 200.0
    damping: float = 2.0 * math.sqrt(200.0)


ENV_KINDS = {"none": 0.0, "wall": 1.0, "fixture": 2.0}


@dataclass(frozen=True)
class Environment:
    """What the avatar palms touch.

    ``wall`` is a one-sided half-space whose free side is
    ``normal . p >= offset``. ``fixture`` is a grasped handle tied to an
    anchor (each palm's start position plus ``anchor_offset``) by a
    spring-damper that pulls both ways. ``none`` is free space.
    """

    kind: str = "fixture"
    normal: tuple[float, float, float] = (-1.0, 0.0, 0.0)
    offset: float = -0.59
    anchor_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    stiffness: float = 2000.0
    damping: float = 20.0

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise ContractError(f"environment kind must be one of {sorted(ENV_KINDS)}")
        if self.stiffness < 0 or self.damping < 0:
            raise ContractError("environment stiffness and damping must be non-negative")

    def packed(self, start_palm) -> np.ndarray:
        anchor = np.asarray(start_palm, dtype=float) + np.asarray(self.anchor_offset)
        return np.array([*self.normal, self.offset, self.stiffness, self.damping,
                         ENV_KINDS[self.kind], *anchor])


@dataclass(frozen=True)
class AvatarPlant:
    """Effective task-space inertia used to build the arm's joint mass matrix."""

    mass: float = 1.0
    inertia: float = 0.075
    joint_damping: float = 0.5
    nullspace_inertia: float = 0.01


@dataclass(frozen=True, eq=False)
class ArmConfig:
    side: str
    chain: ChainModel
    q_init: np.ndarray
    hand: HandMapping

    def initial_palm(self) -> Pose6D:
        return forward_kinematics(self.chain, self.q_init)


@dataclass(frozen=True)
class HandPlant:
    tracking_rate: float = 20.0
    current_per_rad: float = 0.6
    closure: float = 0.9
    contact_gain: float = 4.0


@dataclass(frozen=True, eq=False)
class SessionConfig:
    operator_rate: float = 1000.0
    sensor_rate: float = 500.0
    video_rate: float = 45.0
    frame_bytes: int = 270_000
    video_streams: int = 2
    duration: float | None = None
    seed: int = 0
    uplink: ChannelModel = field(default_factory=ChannelModel)
    downlink: ChannelModel = field(default_factory=ChannelModel)
    arms: tuple[ArmConfig, ...] = ()
    gains: ImpedanceGains = field(default_factory=ImpedanceGains)
    repulsion_margin: float = 0.1
    repulsion_gain: float = 50.0
    filter_cutoff: float = 15.0
    operator: OperatorHandModel = field(default_factory=OperatorHandModel)
    plant: AvatarPlant = field(default_factory=AvatarPlant)
    hand_plant: HandPlant = field(default_factory=HandPlant)
    environment: Environment = field(default_factory=Environment)
    head_v_max: float = 1.0
    head_w_max: float = math.pi
    head_init: Pose6D = field(default_factory=lambda: translate(0.0, 0.0, 0.6))
    camera: SphereCamera = field(default_factory=SphereCamera)
    eval_depth: float = 2.0
    base: MecanumBase = field(default_factory=MecanumBase)
    twist_limits: TwistLimits = field(default_factory=TwistLimits)
    rudder_k_lin: float = 5.0
    rudder_k_ang: float = 2.0
    rudder_deadzone: float = 0.05
    exposure: float = 0.008
    encode_latency: float = 0.010
    decode_latency: float = 0.012
    comm_timeout_intervals: int = 3
    fade_duration: float = 1.0
    bandwidth_window: float = 1.0
    trace: str | None = None

    def __post_init__(self):
        if not (self.operator_rate > 0 and self.sensor_rate > 0 and self.video_rate > 0):
            raise ContractError("all rates must be positive")
        if self.operator_rate < self.sensor_rate:
            raise ContractError("operator_rate must be >= sensor_rate")
        if not self.arms:
            object.__setattr__(self, "arms", default_arms())
        if self.duration is not None and self.duration <= 0:
            raise ContractError("duration must be positive")

    def arm(self, side: str) -> ArmConfig:
        for a in self.arms:
            if a.side == side:
                return a
        raise KeyError(side)


# ---------------------------------------------------------------------------
# default avatar arm (Panda-like geometry and limits, synthetic palm offset)
# ---------------------------------------------------------------------------

_H = math.pi / 2
PANDA_LIKE = dict(
    offsets=[(0.0, 0.0, 0.333, 0.0), (0.0, 0.0, 0.0, -_H), (0.0, -0.316, 0.0, _H),
             (0.0825, 0.0, 0.0, _H), (-0.0825, 0.384, 0.0, -_H), (0.0, 0.0, 0.0, _H),
             (0.088, 0.0, 0.0, _H)],
    q_min=[-2.8973, -1.7628, -2.8973, -3.0718, -2.8973, -0.0175, -2.8973],
    q_max=[2.8973, 1.7628, 2.8973, -0.0698, 2.8973, 3.7525, 2.8973],
    qd_max=[2.175] * 4 + [2.61] * 3,
    tau_max=[87.0] * 4 + [12.0] * 3,
    palm=0.207,
    q_init=[0.0, -0.7, 0.0, -2.5, 0.0, 1.8, 0.0],
)
ARM_MOUNTS = {"left": (0.0, 0.3, 0.0), "right": (0.0, -0.3, 0.0)}
HAND_VARIANT = {"left": "sih", "right": "svh"}


def panda_like_chain(base: Pose6D | None = None, name: str = "arm") -> ChainModel:
    joints = [Joint((0.0, 0.0, 1.0), compose(translate(x, y, z), rot_x(r)))
              for x, y, z, r in PANDA_LIKE["offsets"]]
    chain = ChainModel(tuple(joints), PANDA_LIKE["q_min"], PANDA_LIKE["q_max"],
                       PANDA_LIKE["qd_max"], PANDA_LIKE["tau_max"],
                       tool=translate(0.0, 0.0, PANDA_LIKE["palm"]), name=name)
    return chain if base is None else chain.with_base(base)


def default_arms() -> tuple[ArmConfig, ...]:
    return tuple(
        ArmConfig(side, panda_like_chain(translate(*ARM_MOUNTS[side]), side),
                  np.array(PANDA_LIKE["q_init"]), default_hand_mapping(HAND_VARIANT[side]))
        for side in SIDES)


def default_config() -> SessionConfig:
    return SessionConfig()


# ---------------------------------------------------------------------------
# YAML front end
# ---------------------------------------------------------------------------

class _Node:
    __slots__ = ("value", "line", "col", "kind")

    def __init__(self, value, line, col, kind):
        self.value = value
        self.line = line
        self.col = col
        self.kind = kind


class _Ctx:
    def __init__(self, source: str):
        self.source = source

    def fail(self, node: _Node | None, msg: str):
        if node is None:
            raise ConfigError(msg, self.source)
        raise ConfigError(msg, self.source, node.line, node.col)


_FLOAT12 = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)[eE][-+]?\d+")


def _convert(node, ctx: _Ctx, constructor) -> _Node:
    line, col = node.start_mark.line + 1, node.start_mark.column + 1
    if isinstance(node, yaml.MappingNode):
        own = sum(1 for k, _ in node.value if k.tag != "tag:yaml.org,2002:merge")
        try:
            constructor.flatten_mapping(node)
        except yaml.YAMLError as exc:
            ctx.fail(_Node(None, line, col, "map"), f"bad merge: {exc}")
        merged = len(node.value) - own
        out: dict[str, tuple[_Node, _Node]] = {}
        seen: set[str] = set()
        for i, (k, v) in enumerate(node.value):
            kn = _convert(k, ctx, constructor)
            if kn.kind != "scalar" or not isinstance(kn.value, str):
                ctx.fail(kn, "mapping keys must be strings")
            if kn.value in seen:
                ctx.fail(kn, f"duplicate key {kn.value!r}")
            if i >= merged:
                seen.add(kn.value)
            out[kn.value] = (kn, _convert(v, ctx, constructor))
        return _Node(out, line, col, "map")
    if isinstance(node, yaml.SequenceNode):
        return _Node([_convert(v, ctx, constructor) for v in node.value], line, col, "seq")
    try:
        value = constructor.construct_object(node)
    except yaml.YAMLError as exc:
        ctx.fail(_Node(None, line, col, "scalar"), f"bad scalar: {exc}")
    if isinstance(value, str) and node.style is None and _FLOAT12.fullmatch(value):
        value = float(value)  # YAML 1.1 reads 1e9 as a string; accept it as a number
    return _Node(value, line, col, "scalar")


class _Section:
    """Cursor over one mapping that remembers which keys were consumed."""

    def __init__(self, node: _Node | None, path: str, ctx: _Ctx):
        if node is not None and node.kind != "map":
            ctx.fail(node, f"{path or 'document'}: expected a mapping")
        self.node = node
        self.items = {} if node is None else node.value
        self.path = path
        self.ctx = ctx
        self.used: set[str] = set()

    def _key(self, key):
        return f"{self.path}.{key}" if self.path else key

    def raw(self, key) -> _Node | None:
        self.used.add(key)
        item = self.items.get(key)
        if item is None or (item[1].kind == "scalar" and item[1].value is None):
            return None
        return item[1]

    def has(self, key) -> bool:
        return self.raw(key) is not None

    def section(self, key) -> _Section:
        return _Section(self.raw(key), self._key(key), self.ctx)

    def number(self, key, default, *, lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False,
               integer=False):
        node = self.raw(key)
        if node is None:
            return default
        v = node.value
        if node.kind != "scalar" or isinstance(v, bool) or not isinstance(v, (int, float)):
            self.ctx.fail(node, f"{self._key(key)}: expected a number, got {_describe(node)}")
        if integer and not isinstance(v, int):
            self.ctx.fail(node, f"{self._key(key)}: expected an integer")
        if not math.isfinite(v):
            self.ctx.fail(node, f"{self._key(key)}: must be finite")
        below = v <= lo if lo_open else v < lo
        above = v >= hi if hi_open else v > hi
        if below or above:
            lb = "(" if lo_open else "["
            rb = ")" if hi_open else "]"
            self.ctx.fail(node, f"{self._key(key)}: {v} outside {lb}{lo}, {hi}{rb}")
        return int(v) if integer else float(v)

    def vector(self, key, default, size=None):
        node = self.raw(key)
        if node is None:
            return default
        return _vector(node, self._key(key), self.ctx, size)

    def string(self, key, default, choices=None):
        node = self.raw(key)
        if node is None:
            return default
        if node.kind != "scalar" or not isinstance(node.value, str):
            self.ctx.fail(node, f"{self._key(key)}: expected a string")
        if choices is not None and node.value not in choices:
            self.ctx.fail(node, f"{self._key(key)}: {node.value!r} not one of {sorted(choices)}")
        return node.value

    def boolean(self, key, default):
        node = self.raw(key)
        if node is None:
            return default
        if node.kind != "scalar" or not isinstance(node.value, bool):
            self.ctx.fail(node, f"{self._key(key)}: expected true or false")
        return node.value

    def finish(self):
        for key, (kn, _) in self.items.items():
            if key not in self.used:
                self.ctx.fail(kn, f"unknown key {self._key(key)!r}")


def _describe(node: _Node) -> str:
    if node.kind != "scalar":
        return "a " + ("mapping" if node.kind == "map" else "list")
    return repr(node.value)


def _vector(node: _Node, path: str, ctx: _Ctx, size=None) -> np.ndarray:
    if node.kind != "seq":
        ctx.fail(node, f"{path}: expected a list of numbers, got {_describe(node)}")
    vals = []
    for item in node.value:
        v = item.value
        if item.kind != "scalar" or isinstance(v, bool) or not isinstance(v, (int, float)):
            ctx.fail(item, f"{path}: expected a number, got {_describe(item)}")
        if not math.isfinite(v):
            ctx.fail(item, f"{path}: entries must be finite")
        vals.append(float(v))
    if size is not None and len(vals) != size:
        ctx.fail(node, f"{path}: expected {size} numbers, got {len(vals)}")
    return np.array(vals)


def _pose(sec: _Section, default: Pose6D) -> Pose6D:
    """A pose given as ``translation`` plus either ``rotation`` (w,x,y,z) or ``rpy``."""
    if sec.node is None:
        return default
    t = sec.vector("translation", np.asarray(default.t), 3)
    rot_node, rpy_node = sec.raw("rotation"), sec.raw("rpy")
    if rot_node is not None and rpy_node is not None:
        sec.ctx.fail(rpy_node, f"{sec.path}: give either rotation or rpy, not both")
    if rot_node is not None:
        q = _vector(rot_node, sec._key("rotation"), sec.ctx, 4)
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            sec.ctx.fail(rot_node, f"{sec.path}.rotation: quaternion must have unit norm")
    elif rpy_node is not None:
        r, p, y = _vector(rpy_node, sec._key("rpy"), sec.ctx, 3)
        q = compose(compose(rot_z(y), rot_y(p)), rot_x(r)).q
    else:
        q = default.q
    sec.finish()
    return Pose6D(t, q)


def _channel(sec: _Section) -> ChannelModel:
    m = ChannelModel(
        base_latency=sec.number("base_latency", 0.0005, lo=0.0),
        jitter_std=sec.number("jitter_std", 0.0, lo=0.0),
        loss_prob=sec.number("loss_prob", 0.0, lo=0.0, hi=1.0),
        bandwidth_limit=sec.number("bandwidth_limit", 1e9, lo=0.0, lo_open=True),
    )
    sec.finish()
    return m


def derive_seed(seed: int, salt: int) -> int:
    """Independent 64-bit stream seed for component ``salt`` of a session seed."""
    return int(np.random.SeedSequence([seed, salt]).generate_state(1, dtype=np.uint64)[0])


def _arm(sec: _Section, side: str, ctx: _Ctx) -> ArmConfig:
    mount = _pose(sec.section("base"), translate(*ARM_MOUNTS[side]))
    tool = _pose(sec.section("tool"), translate(0.0, 0.0, PANDA_LIKE["palm"]))
    jn = sec.raw("joints")
    if jn is None:
        chain = panda_like_chain(name=side)
        joints = chain.joints
        limits = {k: np.array(PANDA_LIKE[k]) for k in ("q_min", "q_max", "qd_max", "tau_max")}
    else:
        if jn.kind != "seq" or not jn.value:
            ctx.fail(jn, f"arms.{side}.joints: expected a nonempty list")
        joints, cols = [], {k: [] for k in ("q_min", "q_max", "qd_max", "tau_max")}
        for i, item in enumerate(jn.value):
            js = _Section(item, f"arms.{side}.joints[{i}]", ctx)
            axis_node = js.raw("axis")
            if axis_node is None:
                ctx.fail(item, f"{js.path}: axis is required")
            axis = _vector(axis_node, js._key("axis"), ctx, 3)
            if np.linalg.norm(axis) == 0:
                ctx.fail(axis_node, f"{js.path}.axis: must be nonzero")
            offset = _pose(js.section("offset"), Pose6D())
            for k in cols:
                kn = js.raw(k)
                if kn is None:
                    ctx.fail(item, f"{js.path}: {k} is required")
                cols[k].append(js.number(k, None))
            if cols["q_min"][-1] >= cols["q_max"][-1]:
                ctx.fail(item, f"{js.path}: q_min must be below q_max")
            if cols["qd_max"][-1] <= 0 or cols["tau_max"][-1] <= 0:
                ctx.fail(item, f"{js.path}: qd_max and tau_max must be positive")
            js.finish()
            joints.append(Joint(tuple(axis), offset))
        limits = {k: np.array(v) for k, v in cols.items()}
    try:
        chain = ChainModel(tuple(joints), limits["q_min"], limits["q_max"], limits["qd_max"],
                           limits["tau_max"], tool=tool, name=side).with_base(mount)
    except ContractError as exc:
        ctx.fail(jn, f"arms.{side}: {exc}")
    q_init = sec.vector("q_init", None, chain.n)
    if q_init is None:
        if chain.n != len(PANDA_LIKE["q_init"]):
            ctx.fail(sec.node, f"arms.{side}: q_init is required for a custom chain")
        q_init = np.array(PANDA_LIKE["q_init"])
    if np.any(q_init < chain.q_min) or np.any(q_init > chain.q_max):
        ctx.fail(sec.raw("q_init") or sec.node, f"arms.{side}.q_init: outside joint limits")
    hand = _hand(sec.section("hand"), side, ctx)
    sec.finish()
    return ArmConfig(side, chain, q_init, hand)


def _hand(sec: _Section, side: str, ctx: _Ctx) -> HandMapping:
    variant = sec.string("variant", HAND_VARIANT[side], {"svh", "sih"})
    base = default_hand_mapping(variant)
    retarget = base.retarget
    rn = sec.raw("retarget")
    if rn is not None:
        rs = _Section(rn, sec._key("retarget"), ctx)
        rows = rs.number("rows", None, integer=True, lo=1)
        cols = rs.number("cols", None, integer=True, lo=1)
        data = rs.vector("data", None)
        if rows is None or cols is None or data is None:
            ctx.fail(rn, f"{rs.path}: rows, cols and data are required")
        if rows != base.dof or cols != GLOVE_DOF:
            ctx.fail(rn, f"{rs.path}: {variant} needs a {base.dof}x{GLOVE_DOF} matrix")
        if data.size != rows * cols:
            ctx.fail(rs.raw("data"), f"{rs.path}.data: expected {rows * cols} numbers, got {data.size}")
        rs.finish()
        retarget = data.reshape(rows, cols)
    out_min = sec.vector("out_min", base.out_min, base.dof)
    out_max = sec.vector("out_max", base.out_max, base.dof)
    if np.any(out_min > out_max):
        ctx.fail(sec.raw("out_max"), f"{sec.path}: out_min must not exceed out_max")
    th = sec.vector("brake_threshold", base.brake_threshold, FINGERS)
    if np.any(th <= 0):
        ctx.fail(sec.raw("brake_threshold"), f"{sec.path}.brake_threshold: must be positive")
    sec.finish()
    return HandMapping(retarget, out_min, out_max, th)


def _build(root: _Section, ctx: _Ctx) -> SessionConfig:
    version = root.number("version", SCHEMA_VERSION, integer=True)
    if version != SCHEMA_VERSION:
        ctx.fail(root.raw("version"), f"unsupported config version {version}")
    seed = root.number("seed", 0, integer=True, lo=0, hi=2**63 - 1)

    s = root.section("session")
    rates = dict(
        operator_rate=s.number("operator_rate", 1000.0, lo=0.0, lo_open=True),
        sensor_rate=s.number("sensor_rate", 500.0, lo=0.0, lo_open=True),
        video_rate=s.number("video_rate", 45.0, lo=0.0, lo_open=True),
    )
    if rates["operator_rate"] < rates["sensor_rate"]:
        ctx.fail(s.raw("sensor_rate") or s.raw("operator_rate"),
                 "session.sensor_rate must not exceed operator_rate")
    dur_node = s.raw("duration")
    duration = None if dur_node is None else s.number("duration", None, lo=0.0, lo_open=True)
    timing = dict(
        frame_bytes=s.number("frame_bytes", 270_000, integer=True, lo=0, hi=2**32 - 1024),
        video_streams=s.number("video_streams", 2, integer=True, lo=0, hi=255),
        exposure=s.number("exposure", 0.008, lo=0.0),
        encode_latency=s.number("encode_latency", 0.010, lo=0.0),
        decode_latency=s.number("decode_latency", 0.012, lo=0.0),
        comm_timeout_intervals=s.number("comm_timeout_intervals", 3, integer=True, lo=1),
        fade_duration=s.number("fade_duration", 1.0, lo=0.0, lo_open=True),
        bandwidth_window=s.number("bandwidth_window", 1.0, lo=0.0, lo_open=True),
    )
    trace = s.string("trace", None)
    s.finish()

    ch = root.section("channel")
    uplink = _channel(ch.section("uplink"))
    downlink = _channel(ch.section("downlink"))
    ch.finish()

    arms_sec = root.section("arms")
    arms = tuple(_arm(arms_sec.section(side), side, ctx) for side in SIDES)
    arms_sec.finish()

    g = root.section("gains")
    try:
        gains = ImpedanceGains(g.number("kp_lin", 400.0, lo=0.0), g.number("kd_lin", 40.0, lo=0.0),
                               g.number("kp_ang", 30.0, lo=0.0), g.number("kd_ang", 3.0, lo=0.0))
    except ContractError as exc:
        bad = next((g.raw(k) for k in ("kd_lin", "kd_ang", "kp_lin", "kp_ang") if g.raw(k) is not None
                    and isinstance(g.raw(k).value, (int, float)) and g.raw(k).value <= 0), g.node)
        ctx.fail(bad, f"gains: {exc}")
    g.finish()

    r = root.section("repulsion")
    margin = r.number("margin", 0.1, lo=0.0, lo_open=True)
    k_rep = r.number("gain", 50.0, lo=0.0)
    r.finish()

    f = root.section("filter")
    cutoff = f.number("cutoff_hz", 15.0, lo=0.0, lo_open=True)
    if cutoff >= rates["sensor_rate"] / 2:
        ctx.fail(f.raw("cutoff_hz"), "filter.cutoff_hz must be below half the sensor rate")
    f.finish()

    o = root.section("operator")
    mass = o.number("mass", 1.0, lo=0.0, lo_open=True)
    stiff = o.number("stiffness", 200.0, lo=0.0, lo_open=True)
    operator = OperatorHandModel(mass, stiff, o.number("damping", 2.0 * math.sqrt(stiff * mass), lo=0.0))
    o.finish()

    a = root.section("avatar")
    plant = AvatarPlant(a.number("mass", 1.0, lo=0.0, lo_open=True),
                        a.number("inertia", 0.075, lo=0.0, lo_open=True),
                        a.number("joint_damping", 0.5, lo=0.0),
                        a.number("nullspace_inertia", 0.01, lo=0.0, lo_open=True))
    hp = a.section("hand")
    hand_plant = HandPlant(hp.number("tracking_rate", 20.0, lo=0.0, lo_open=True),
                           hp.number("current_per_rad", 0.6, lo=0.0),
                           hp.number("closure", 0.9, lo=0.0),
                           hp.number("contact_gain", 4.0, lo=0.0))
    hp.finish()
    a.finish()

    e = root.section("environment")
    env_defaults = Environment()
    kind = e.string("kind", env_defaults.kind, set(ENV_KINDS))
    n = e.vector("normal", np.array(env_defaults.normal), 3)
    if np.linalg.norm(n) == 0:
        ctx.fail(e.raw("normal"), "environment.normal: must be nonzero")
    environment = Environment(
        kind, tuple(float(c) for c in n / np.linalg.norm(n)),
        e.number("offset", env_defaults.offset),
        tuple(float(c) for c in e.vector("anchor_offset", np.array(env_defaults.anchor_offset), 3)),
        e.number("stiffness", env_defaults.stiffness, lo=0.0),
        e.number("damping", env_defaults.damping, lo=0.0))
    e.finish()

    h = root.section("head")
    head_v = h.number("v_max", 1.0, lo=0.0, lo_open=True)
    head_w = h.number("w_max", math.pi, lo=0.0, lo_open=True)
    head_init = _pose(h.section("initial"), translate(0.0, 0.0, 0.6))
    h.finish()

    c = root.section("camera")
    camera = SphereCamera(
        radius=c.number("radius", 1.0, lo=0.0, lo_open=True),
        fov_h=math.radians(c.number("fov_deg", 190.0, lo=0.0, hi=360.0, lo_open=True)),
        focal=c.number("focal", 600.0, lo=0.0, lo_open=True),
        cx=c.number("cx", 1920.0), cy=c.number("cy", 1080.0),
        width=c.number("width", 3840, integer=True, lo=1),
        height=c.number("height", 2160, integer=True, lo=1))
    eval_depth = c.number("eval_depth", 2.0, lo=0.0, lo_open=True)
    c.finish()

    b = root.section("base")
    base = MecanumBase(b.number("wheel_radius", 0.05, lo=0.0, lo_open=True),
                       b.number("half_length", 0.25, lo=0.0, lo_open=True),
                       b.number("half_width", 0.25, lo=0.0, lo_open=True),
                       b.number("wheel_speed_limit", 60.0, lo=0.0, lo_open=True))
    v_cap = b.number("v_cap", 1.5, lo=0.0, lo_open=True)
    v_capability = b.number("v_capability", 2.5, lo=0.0, lo_open=True)
    if v_cap > v_capability:
        ctx.fail(b.raw("v_cap"), "base.v_cap must not exceed base.v_capability")
    limits = TwistLimits(v_cap, v_capability, b.number("w_cap", 1.0, lo=0.0, lo_open=True))
    b.finish()

    rd = root.section("rudder")
    k_lin = rd.number("k_lin", 5.0, lo=0.0)
    k_ang = rd.number("k_ang", 2.0, lo=0.0)
    deadzone = rd.number("deadzone", 0.05, lo=0.0, hi=math.pi / 2)
    rd.finish()
    root.finish()

    return SessionConfig(
        **rates, duration=duration, seed=seed, uplink=uplink, downlink=downlink, arms=arms,
        gains=gains, repulsion_margin=margin, repulsion_gain=k_rep, filter_cutoff=cutoff,
        operator=operator, plant=plant, hand_plant=hand_plant, environment=environment, head_v_max=head_v,
        head_w_max=head_w, head_init=head_init, camera=camera, eval_depth=eval_depth, base=base,
        twist_limits=limits, rudder_k_lin=k_lin, rudder_k_ang=k_ang, rudder_deadzone=deadzone,
        trace=trace, **timing)


def parse_config(text: str, source: str = "<config>") -> SessionConfig:
    ctx = _Ctx(source)
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = None if mark is None else mark.line + 1
        col = None if mark is None else mark.column + 1
        raise ConfigError(f"YAML syntax: {exc.problem or exc}", source, line, col) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML syntax: {exc}", source) from None
    if node is None:
        return SessionConfig()
    constructor = yaml.SafeLoader("")
    tree = _convert(node, ctx, constructor)
    if tree.kind != "map":
        ctx.fail(tree, "top level must be a mapping")
    try:
        return _build(_Section(tree, "", ctx), ctx)
    except (ContractError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        ctx.fail(tree, str(exc))


def load_config(path: str | Path) -> SessionConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path))


def bundled_configs() -> list[Path]:
    root = resources.files("telelink") / "data" / "configs"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".yaml"))


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("telelink") / "data" / name))


__all__ = [
    "ArmConfig", "AvatarPlant", "ConfigError", "Environment", "HandPlant", "OperatorHandModel",
    "SessionConfig", "bundled_configs", "bundled_path", "default_arms", "default_config", "derive_seed",
    "load_config", "panda_like_chain", "parse_config",
]
