"""Operator trace files: time-stamped palm, finger, head and foot-paddle input.

File layout (text, one record per line)::

    # telelink-trace v1
    # period=0.01
    t,lp_x,lp_y,lp_z,lp_qw,lp_qx,lp_qy,lp_qz,rp_x,...,lf_0..lf_19,rf_0..rf_19,h_x,...,h_qz,rud_pitch,rud_roll,rud_yaw
    0,...

Palm and head poses are in the avatar torso frame (translation in m,
rotation as a w-first unit quaternion); finger joints in rad; paddle axes in
rad.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..geometry import Pose6D, compose, translate
from ..haptics import GLOVE_DOF

TRACE_MAGIC = "# telelink-trace v1"
PERIOD_TOL = 1e-9


def _pose_cols(prefix):
    return [f"{prefix}_{c}" for c in ("x", "y", "z", "qw", "qx", "qy", "qz")]


COLUMNS = (["t"] + _pose_cols("lp") + _pose_cols("rp")
           + [f"lf_{i}" for i in range(GLOVE_DOF)] + [f"rf_{i}" for i in range(GLOVE_DOF)]
           + _pose_cols("h") + ["rud_pitch", "rud_roll", "rud_yaw"])
_LP, _RP = slice(1, 8), slice(8, 15)
_LF, _RF = slice(15, 35), slice(35, 55)
_HEAD, _RUD = slice(55, 62), slice(62, 65)
_QUATS = ((4, 8), (11, 15), (58, 62))


class TraceError(ValueError):
    def __init__(self, message: str, source: str = "<trace>", line: int | None = None):
        self.line = line
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True, eq=False)
class TraceSample:
    left_palm: Pose6D
    right_palm: Pose6D
    left_fingers: np.ndarray
    right_fingers: np.ndarray
    head: Pose6D
    rudder: np.ndarray

    def palm(self, side: str) -> Pose6D:
        return self.left_palm if side == "left" else self.right_palm

    def fingers(self, side: str) -> np.ndarray:
        return self.left_fingers if side == "left" else self.right_fingers


class OperatorTrace:
    """Uniformly sampled operator input; ``sample(t)`` interpolates linearly.

    Quaternions are sign-aligned with their predecessor on load, so the
    normalized linear blend between neighbours never takes the long way round.
    """

    def __init__(self, data, period: float):
        data = np.array(data, dtype=float)
        if data.ndim != 2 or data.shape[1] != len(COLUMNS):
            raise TraceError(f"expected {len(COLUMNS)} columns")
        if data.shape[0] == 0:
            raise TraceError("trace is empty")
        if not period > 0:
            raise TraceError("period must be positive")
        if not np.all(np.isfinite(data)):
            raise TraceError("trace values must be finite")
        t = data[:, 0]
        if np.any(np.diff(t) <= 0):
            raise TraceError("timestamps must be strictly increasing")
        if data.shape[0] > 1 and np.max(np.abs(np.diff(t) - period)) > PERIOD_TOL:
            raise TraceError(f"sample spacing deviates from period {period}")
        for a, b in _QUATS:
            q = data[:, a:b]
            n = np.linalg.norm(q, axis=1)
            if np.any(np.abs(n - 1.0) > 1e-6):
                raise TraceError("quaternions must have unit norm")
            q /= n[:, None]
            for i in range(1, len(q)):
                if q[i] @ q[i - 1] < 0:
                    q[i] = -q[i]
        self.data = data
        self.data.flags.writeable = False
        self.period = float(period)

    def __len__(self):
        return self.data.shape[0]

    @property
    def t0(self) -> float:
        return float(self.data[0, 0])

    @property
    def duration(self) -> float:
        return float(self.data[-1, 0] - self.data[0, 0])

    def row(self, t: float) -> np.ndarray:
        d = self.data
        u = (t - d[0, 0]) / self.period
        if u <= 0.0 or len(d) == 1:
            return d[0].copy()
        i = int(u)
        if i >= len(d) - 1:
            return d[-1].copy()
        s = u - i
        r = d[i] + s * (d[i + 1] - d[i])
        for a, b in _QUATS:
            r[a:b] /= math.sqrt(r[a] ** 2 + r[a + 1] ** 2 + r[a + 2] ** 2 + r[a + 3] ** 2)
        return r

    def sample(self, t: float) -> TraceSample:
        r = self.row(t)
        return TraceSample(
            Pose6D(r[1:4], r[4:8]), Pose6D(r[8:11], r[11:15]), r[_LF], r[_RF],
            Pose6D(r[55:58], r[58:62]), r[_RUD])


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def write_trace(trace: OperatorTrace, path_or_buf):
    lines = [TRACE_MAGIC, f"# period={trace.period!r}", ",".join(COLUMNS)]
    lines += [",".join(repr(float(v)) for v in row) for row in trace.data]
    text = "\n".join(lines) + "\n"
    if isinstance(path_or_buf, io.TextIOBase):
        path_or_buf.write(text)
    else:
        Path(path_or_buf).write_text(text)


def parse_trace(text: str, source: str = "<trace>") -> OperatorTrace:
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_MAGIC:
        raise TraceError(f"missing '{TRACE_MAGIC}' header", source, 1)
    period = None
    header_seen = False
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key.strip() == "period":
                try:
                    period = float(val)
                except ValueError:
                    raise TraceError(f"bad period {val!r}", source, lineno) from None
            continue
        if not header_seen:
            if line.split(",") != COLUMNS:
                raise TraceError("column header does not match the v1 schema", source, lineno)
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != len(COLUMNS):
            raise TraceError(f"expected {len(COLUMNS)} fields, got {len(parts)}", source, lineno)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise TraceError("non-numeric field", source, lineno) from None
        if not all(map(math.isfinite, rows[-1])):
            raise TraceError("non-finite field", source, lineno)
        if len(rows) > 1 and rows[-1][0] <= rows[-2][0]:
            raise TraceError("timestamps must be strictly increasing", source, lineno)
    if period is None:
        raise TraceError("missing '# period=' line", source)
    if not rows:
        raise TraceError("trace has no records", source)
    try:
        return OperatorTrace(np.array(rows), period)
    except TraceError as exc:
        raise TraceError(str(exc).split(": ", 1)[-1], source) from None


def load_trace(path) -> OperatorTrace:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TraceError(f"cannot read trace: {exc.strerror}", str(path)) from None
    return parse_trace(text, str(path))


# ---------------------------------------------------------------------------
# synthetic archetypes
# ---------------------------------------------------------------------------

TRACE_KINDS = ("hold", "reach", "circle", "locomote")
REACH_DISTANCE = 0.3
REACH_TIME = 2.0
CIRCLE_RADIUS = 0.1
CIRCLE_HZ = 0.2


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def generate_trace(kind: str, duration: float, cfg=None, period: float = 0.01) -> OperatorTrace:
    """Build one of the archetypal operator traces around ``cfg``'s start posture.

    ``hold`` keeps every input constant; ``reach`` moves both palms 0.3 m
    forward with a smoothstep over 2 s; ``circle`` traces a 0.1 m circle at
    0.2 Hz in the frontal plane; ``locomote`` holds the arms and pitches the
    foot paddles to drive the base forward while yawing gently.
    """
    from ..config import default_config

    if kind not in TRACE_KINDS:
        raise ValueError(f"unknown trace kind {kind!r}; expected one of {TRACE_KINDS}")
    if not duration > 0:
        raise ValueError("duration must be positive")
    cfg = default_config() if cfg is None else cfg
    n = int(round(duration / period)) + 1
    t = np.arange(n) * period
    data = np.zeros((n, len(COLUMNS)))
    data[:, 0] = t
    head = cfg.head_init
    data[:, _HEAD] = np.concatenate([head.t, head.q])
    for side, cols in (("left", _LP), ("right", _RP)):
        p0 = cfg.arm(side).initial_palm()
        data[:, cols] = np.concatenate([p0.t, p0.q])
        x = data[:, cols.start:cols.start + 3]
        if kind == "reach":
            x[:, 0] += REACH_DISTANCE * _smoothstep(t / REACH_TIME)
        elif kind == "circle":
            ph = 2.0 * np.pi * CIRCLE_HZ * t
            x[:, 1] += CIRCLE_RADIUS * np.sin(ph)
            x[:, 2] += CIRCLE_RADIUS * (np.cos(ph) - 1.0)
    fingers = 0.3 * (1.0 - np.cos(2.0 * np.pi * 0.25 * t))[:, None]
    if kind != "hold":
        data[:, _LF] = fingers
        data[:, _RF] = fingers
    if kind == "locomote":
        data[:, 62] = 0.35 * _smoothstep(t / 1.0)
        data[:, 64] = 0.15 * np.sin(2.0 * np.pi * 0.1 * t)
    return OperatorTrace(data, period)


def head_step_trace(duration: float, step: float, at: float, cfg=None, period: float = 0.01):
    """Hold trace whose head pose jumps ``step`` m sideways at time ``at``."""
    tr = generate_trace("hold", duration, cfg, period)
    data = np.array(tr.data)
    h0 = Pose6D(data[0, 55:58], data[0, 58:62])
    moved = compose(translate(0.0, step, 0.0), h0)
    data[data[:, 0] >= at, 55:58] = moved.t
    return OperatorTrace(data, period)


__all__ = [
    "COLUMNS", "OperatorTrace", "TRACE_KINDS", "TRACE_MAGIC", "TraceError", "TraceSample",
    "generate_trace", "head_step_trace", "load_trace", "parse_trace", "write_trace",
]
