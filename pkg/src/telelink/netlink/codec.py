"""Typed control messages and their framed wire encoding.

Frame layout (little-endian)::

    0   magic        2 bytes   0xAE 0x01
    2   msg_type     u8
    3   seq          u32
    7   timestamp_ns u64       sender monotonic clock
    15  payload_len  u32
    19  payload      payload_len bytes
    ..  crc32        u32       IEEE CRC-32 over bytes [0, 19 + payload_len)

Message type table:

    ====  ===================  =============================================
    type  message              payload
    ====  ===================  =============================================
    1     EefPoseCmd           side u8, pose 7d, twist 6d
    2     HandJointCmd         side u8, n u8 (5 or 9), n d
    3     HeadPoseCmd          pose 7d
    4     BaseVelocityCmd      twist 6d
    5     WrenchFeedback       side u8, wrench 6d
    6     HandCurrentFeedback  side u8, n u8 (5), n d
    7     ArmStateFeedback     side u8, n u8 (1..16), q n d, qd n d
    8     VideoFrame           stream u8, capture_ts u64, pose 7d,
                               len u32, bytes
    9     FaceKeypoints        opaque bytes (whole payload)
    10    ErrorState           side u8, code u16
    ====  ===================  =============================================

Poses are ``(tx, ty, tz, qw, qx, qy, qz)``; ``d`` is an IEEE double.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from ..geometry import Pose6D, Twist, Wrench
from ..kinematics import JointState

MAGIC = b"\xae\x01"
HEADER = struct.Struct("<2sBIQI")
HEADER_SIZE = HEADER.size  # 19
CRC_SIZE = 4
OVERHEAD = HEADER_SIZE + CRC_SIZE  # 23
MAX_PAYLOAD = 2**32 - 1

LEFT, RIGHT = "left", "right"
_SIDES = {LEFT: 0, RIGHT: 1}
_SIDE_NAMES = (LEFT, RIGHT)
HAND_DOFS = (5, 9)
FINGER_COUNT = 5


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------

class CodecError(Exception):
    """Base class for every encode/decode failure."""


class EncodeError(CodecError):
    pass


class DecodeError(CodecError):
    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class TruncatedFrame(DecodeError):
    pass


class BadMagic(DecodeError):
    pass


class CrcMismatch(DecodeError):
    pass


class UnknownMessageType(DecodeError):
    def __init__(self, msg_type: int, offset: int = 2):
        super().__init__(f"unknown message type {msg_type}", offset)
        self.msg_type = msg_type


class TrailingBytes(DecodeError):
    pass


class MalformedPayload(DecodeError):
    pass


# ---------------------------------------------------------------------------
# messages
# ---------------------------------------------------------------------------

def _check_side(side: str):
    if side not in _SIDES:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def _floats(values, name: str, lengths) -> tuple[float, ...]:
    vals = tuple(float(v) for v in np.asarray(values, dtype=float).reshape(-1))
    if len(vals) not in lengths:
        raise ValueError(f"{name} must have one of {sorted(lengths)} entries, got {len(vals)}")
    return vals


@dataclass(frozen=True)
class EefPoseCmd:
    side: str
    pose: Pose6D
    twist: Twist

    def __post_init__(self):
        _check_side(self.side)


@dataclass(frozen=True)
class HandJointCmd:
    side: str
    joints: tuple[float, ...]

    def __post_init__(self):
        _check_side(self.side)
        object.__setattr__(self, "joints", _floats(self.joints, "joints", HAND_DOFS))


@dataclass(frozen=True)
class HeadPoseCmd:
    pose: Pose6D


@dataclass(frozen=True)
class BaseVelocityCmd:
    twist: Twist


@dataclass(frozen=True)
class WrenchFeedback:
    side: str
    wrench: Wrench

    def __post_init__(self):
        _check_side(self.side)


@dataclass(frozen=True)
class HandCurrentFeedback:
    side: str
    currents: tuple[float, ...]

    def __post_init__(self):
        _check_side(self.side)
        object.__setattr__(self, "currents", _floats(self.currents, "currents", (FINGER_COUNT,)))


@dataclass(frozen=True)
class ArmStateFeedback:
    side: str
    state: JointState

    def __post_init__(self):
        _check_side(self.side)
        if not 1 <= self.state.q.shape[0] <= 16:
            raise ValueError("arm state must have 1..16 joints")


@dataclass(frozen=True)
class VideoFrame:
    stream: int
    capture_ts_ns: int
    capture_pose: Pose6D
    payload: bytes

    def __post_init__(self):
        if not 0 <= self.stream <= 255:
            raise ValueError("stream id must fit in one byte")
        if not 0 <= self.capture_ts_ns < 2**64:
            raise ValueError("capture timestamp must fit in u64")
        object.__setattr__(self, "payload", bytes(self.payload))

    @property
    def payload_len(self) -> int:
        return len(self.payload)


@dataclass(frozen=True)
class FaceKeypoints:
    payload: bytes

    def __post_init__(self):
        object.__setattr__(self, "payload", bytes(self.payload))


@dataclass(frozen=True)
class ErrorState:
    side: str
    code: int

    def __post_init__(self):
        _check_side(self.side)
        if not 0 <= self.code < 2**16:
            raise ValueError("error code must fit in u16")


Message = Union[EefPoseCmd, HandJointCmd, HeadPoseCmd, BaseVelocityCmd, WrenchFeedback,
                HandCurrentFeedback, ArmStateFeedback, VideoFrame, FaceKeypoints, ErrorState]

MSG_TYPES: dict[type, int] = {
    EefPoseCmd: 1, HandJointCmd: 2, HeadPoseCmd: 3, BaseVelocityCmd: 4, WrenchFeedback: 5,
    HandCurrentFeedback: 6, ArmStateFeedback: 7, VideoFrame: 8, FaceKeypoints: 9, ErrorState: 10,
}


# ---------------------------------------------------------------------------
# payload packing
# ---------------------------------------------------------------------------

_POSE = struct.Struct("<7d")
_VEC6 = struct.Struct("<6d")
_SIDE = struct.Struct("<B")
_SIDE_N = struct.Struct("<BB")
_VIDEO_HEAD = struct.Struct("<BQ7dI")
_ERROR = struct.Struct("<BH")


def _pose_values(p: Pose6D):
    return p.t + p.q


def _pack_payload(m) -> bytes:
    kind = type(m)
    if kind is EefPoseCmd:
        return (_SIDE.pack(_SIDES[m.side]) + _POSE.pack(*_pose_values(m.pose))
                + _VEC6.pack(*m.twist.as_tuple()))
    if kind is HandJointCmd:
        n = len(m.joints)
        return _SIDE_N.pack(_SIDES[m.side], n) + struct.pack(f"<{n}d", *m.joints)
    if kind is HeadPoseCmd:
        return _POSE.pack(*_pose_values(m.pose))
    if kind is BaseVelocityCmd:
        return _VEC6.pack(*m.twist.as_tuple())
    if kind is WrenchFeedback:
        return _SIDE.pack(_SIDES[m.side]) + _VEC6.pack(*m.wrench.as_tuple())
    if kind is HandCurrentFeedback:
        n = len(m.currents)
        return _SIDE_N.pack(_SIDES[m.side], n) + struct.pack(f"<{n}d", *m.currents)
    if kind is ArmStateFeedback:
        n = m.state.q.shape[0]
        return (_SIDE_N.pack(_SIDES[m.side], n) + m.state.q.astype("<f8").tobytes()
                + m.state.qd.astype("<f8").tobytes())
    if kind is VideoFrame:
        if len(m.payload) > MAX_PAYLOAD - _VIDEO_HEAD.size:
            raise EncodeError("video payload too large")
        return _VIDEO_HEAD.pack(m.stream, m.capture_ts_ns, *_pose_values(m.capture_pose),
                                len(m.payload)) + m.payload
    if kind is FaceKeypoints:
        return m.payload
    if kind is ErrorState:
        return _ERROR.pack(_SIDES[m.side], m.code)
    raise EncodeError(f"not a message: {kind.__name__}")


def _side(b: int, offset: int) -> str:
    if b > 1:
        raise MalformedPayload(f"invalid side byte {b}", offset)
    return _SIDE_NAMES[b]


def _expect_len(payload: bytes, n: int, what: str):
    if len(payload) != n:
        raise MalformedPayload(f"{what} payload must be {n} bytes, got {len(payload)}", HEADER_SIZE)


def _pose(vals) -> Pose6D:
    try:
        return Pose6D(vals[:3], vals[3:7])
    except ValueError as exc:
        raise MalformedPayload(f"invalid pose: {exc}", HEADER_SIZE) from None


def _finite(vals, what: str):
    if not math.isfinite(sum(vals)):
        raise MalformedPayload(f"non-finite {what}", HEADER_SIZE)
    return vals


def _unpack_payload(msg_type: int, p: bytes):
    o = HEADER_SIZE
    if msg_type == 1:
        _expect_len(p, 1 + 56 + 48, "EefPoseCmd")
        pose = _POSE.unpack_from(p, 1)
        tw = _finite(_VEC6.unpack_from(p, 57), "twist")
        return EefPoseCmd(_side(p[0], o), _pose(pose), Twist(tw[:3], tw[3:]))
    if msg_type in (2, 6):
        if len(p) < 2:
            raise MalformedPayload("vector payload too short", o)
        side, n = _SIDE_N.unpack_from(p, 0)
        allowed = HAND_DOFS if msg_type == 2 else (FINGER_COUNT,)
        if n not in allowed:
            raise MalformedPayload(f"invalid vector length {n}", o + 1)
        _expect_len(p, 2 + 8 * n, "vector")
        vals = _finite(struct.unpack_from(f"<{n}d", p, 2), "vector")
        cls = HandJointCmd if msg_type == 2 else HandCurrentFeedback
        return cls(_side(side, o), vals)
    if msg_type == 3:
        _expect_len(p, 56, "HeadPoseCmd")
        return HeadPoseCmd(_pose(_POSE.unpack(p)))
    if msg_type == 4:
        _expect_len(p, 48, "BaseVelocityCmd")
        tw = _finite(_VEC6.unpack(p), "twist")
        return BaseVelocityCmd(Twist(tw[:3], tw[3:]))
    if msg_type == 5:
        _expect_len(p, 49, "WrenchFeedback")
        w = _finite(_VEC6.unpack_from(p, 1), "wrench")
        return WrenchFeedback(_side(p[0], o), Wrench(w[:3], w[3:]))
    if msg_type == 7:
        if len(p) < 2:
            raise MalformedPayload("arm state payload too short", o)
        side, n = _SIDE_N.unpack_from(p, 0)
        if not 1 <= n <= 16:
            raise MalformedPayload(f"invalid joint count {n}", o + 1)
        _expect_len(p, 2 + 16 * n, "ArmStateFeedback")
        arr = np.frombuffer(p, dtype="<f8", count=2 * n, offset=2)
        _finite(arr.tolist(), "joint state")
        return ArmStateFeedback(_side(side, o), JointState(arr[:n], arr[n:]))
    if msg_type == 8:
        if len(p) < _VIDEO_HEAD.size:
            raise MalformedPayload("video header truncated", o)
        stream, ts, *rest = _VIDEO_HEAD.unpack_from(p, 0)
        pose, n = rest[:7], rest[7]
        _expect_len(p, _VIDEO_HEAD.size + n, "VideoFrame")
        return VideoFrame(stream, ts, _pose(pose), p[_VIDEO_HEAD.size:])
    if msg_type == 9:
        return FaceKeypoints(p)
    if msg_type == 10:
        _expect_len(p, _ERROR.size, "ErrorState")
        side, code = _ERROR.unpack(p)
        return ErrorState(_side(side, o), code)
    raise UnknownMessageType(msg_type)


# ---------------------------------------------------------------------------
# framing
# ---------------------------------------------------------------------------

class Decoded(NamedTuple):
    message: Message
    seq: int
    timestamp_ns: int


def encode(m: Message, seq: int, timestamp_ns: int) -> bytes:
    """Frame ``m``; the result is ``23 + payload_len`` bytes long."""
    msg_type = MSG_TYPES.get(type(m))
    if msg_type is None:
        raise EncodeError(f"not a message: {type(m).__name__}")
    if not 0 <= seq < 2**32 or not 0 <= timestamp_ns < 2**64:
        raise EncodeError("seq must fit in u32 and timestamp in u64")
    payload = _pack_payload(m)
    if len(payload) > MAX_PAYLOAD:
        raise EncodeError(f"payload of {len(payload)} bytes exceeds the u32 length field")
    body = HEADER.pack(MAGIC, msg_type, seq, timestamp_ns, len(payload)) + payload
    return body + struct.pack("<I", zlib.crc32(body))


def _frame_length(data, start: int) -> int:
    """Validate the header at ``start``; return the full frame length."""
    avail = len(data) - start
    if avail < HEADER_SIZE:
        raise TruncatedFrame(f"need {HEADER_SIZE} header bytes, have {avail}", start + max(avail, 0))
    if data[start:start + 2] != MAGIC:
        raise BadMagic(f"bad magic {bytes(data[start:start + 2]).hex()}", start)
    (payload_len,) = struct.unpack_from("<I", data, start + 15)
    total = OVERHEAD + payload_len
    if avail < total:
        raise TruncatedFrame(f"frame needs {total} bytes, have {avail}", start + avail)
    return total


def _decode_at(data, start: int, total: int) -> Decoded:
    end = start + total - CRC_SIZE
    (crc,) = struct.unpack_from("<I", data, end)
    if zlib.crc32(data[start:end]) != crc:
        raise CrcMismatch("CRC-32 does not match", end)
    _, msg_type, seq, ts, _ = HEADER.unpack_from(data, start)
    try:
        message = _unpack_payload(msg_type, bytes(data[start + HEADER_SIZE:end]))
    except UnknownMessageType as exc:
        raise UnknownMessageType(exc.msg_type, start + 2) from None
    except ValueError as exc:
        raise MalformedPayload(str(exc), start + HEADER_SIZE) from None
    return Decoded(message, seq, ts)


def decode(data: bytes) -> Decoded:
    """Decode exactly one frame, raising a :class:`DecodeError` subclass on failure."""
    data = memoryview(bytes(data)) if not isinstance(data, (bytes, bytearray, memoryview)) else data
    total = _frame_length(data, 0)
    if len(data) > total:
        raise TrailingBytes(f"{len(data) - total} bytes after the frame", total)
    return _decode_at(data, 0, total)


def iter_frames(buffer: bytes):
    """Yield ``Decoded`` values (or the ``DecodeError`` that stopped parsing)
    for a concatenation of frames. Parsing stops at the first error."""
    pos = 0
    while pos < len(buffer):
        try:
            total = _frame_length(buffer, pos)
            yield _decode_at(buffer, pos, total)
        except DecodeError as exc:
            yield exc
            return
        pos += total


def message_name(m) -> str:
    return type(m).__name__
