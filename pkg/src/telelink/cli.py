"""``telelink`` command line: sessions, delay sweeps, codec inspection and error maps.

Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error,
3 trace error. Verbosity comes from ``TELELINK_LOG`` (error, info, debug).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, SessionConfig, default_config, load_config
from .geometry import Pose6D, Twist, Wrench, compose, translate
from .kinematics import JointState
from .netlink import codec
from .session import (MetricsLog, OperatorTrace, TraceError, generate_trace, latency_budget,
                      load_trace, parse_delays, run_session, stability_sweep, write_trace)
from .session.trace import TRACE_KINDS
from .televis import error_map

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_TRACE = 0, 1, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
SWEEP_MAGIC = "# telelink-sweep v1"
MAP_MAGIC = "# telelink-televis-map v1"

log = logging.getLogger("telelink")


class UsageError(Exception):
    """Bad flag values that argparse cannot catch on its own."""


def _setup_logging():
    name = os.environ.get("TELELINK_LOG", "error").strip().lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(level=level or logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    if level is None:
        log.error("TELELINK_LOG=%r not one of %s; using error", name, sorted(LOG_LEVELS))


def _config(args) -> tuple[SessionConfig, Path | None]:
    if args.config is None:
        return default_config(), None
    path = Path(args.config)
    return load_config(path), path


def _trace(args, cfg: SessionConfig, cfg_path: Path | None) -> OperatorTrace:
    if args.trace is not None:
        return load_trace(args.trace)
    if cfg.trace is not None:
        p = Path(cfg.trace)
        if not p.is_absolute() and cfg_path is not None:
            p = cfg_path.parent / p
        return load_trace(p)
    raise TraceError("no trace given; pass --trace or set session.trace in the config", "<args>")


def _seed(args, cfg: SessionConfig) -> int:
    return cfg.seed if args.seed is None else args.seed


def _duration(args):
    if args.duration is not None and not args.duration > 0:
        raise UsageError("--duration must be positive")
    return args.duration


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg, path = _config(args)
    trace = _trace(args, cfg, path)
    seed = _seed(args, cfg)
    m = run_session(cfg, trace, seed=seed, duration=_duration(args))
    m.to_csv(args.out)
    if args.video_out:
        m.video_csv(args.video_out)
    _summary(m)
    return EXIT_OK


def _summary(m: MetricsLog):
    sides = [c[len("pos_err_"):] for c in m.columns if c.startswith("pos_err_")]
    settle = max(float(m[f"pos_err_{s}"][-1]) for s in sides) if len(m) else math.nan
    print(f"ticks: {len(m)}  seed: {m.seed}")
    print(f"settle error (final, worst arm): {settle:.6g} m")
    if m.video:
        b = latency_budget(m)
        print(f"latency budget over {b.frames} frames: exposure {b.exposure * 1e3:.2f} ms + "
              f"encode {b.encode * 1e3:.2f} ms + transmit {b.transmit * 1e3:.2f} ms + "
              f"decode {b.decode * 1e3:.2f} ms = {b.total * 1e3:.2f} ms")
    else:
        print("latency budget: no video frames delivered")
    bw = m["bandwidth"]
    peak = float(np.nanmax(bw)) if len(bw) and np.any(np.isfinite(bw)) else 0.0
    print(f"peak bandwidth: {peak / 1e6:.2f} Mbit/s")
    print(f"max energy: {m.max_energy:.6g} J  modes: {', '.join(sorted(set(m.modes)))}")


def _num(x) -> str:
    return format(float(x), ".17g")


def cmd_sweep(args) -> int:
    cfg, path = _config(args)
    trace = _trace(args, cfg, path)
    try:
        delays = parse_delays(args.delays)
    except ValueError as exc:
        raise UsageError(f"--delays: {exc}") from None
    if not delays:
        raise UsageError(f"--delays {args.delays!r} is an empty range")
    if any(d < 0 for d in delays):
        raise UsageError("--delays must be non-negative")
    if _duration(args) is not None:
        cfg = _with_duration(cfg, args.duration)
    seed = _seed(args, cfg)
    res = stability_sweep(cfg, trace, delays, seed=seed)
    lines = [SWEEP_MAGIC, f"# seed={seed}", f"# reference_peak={_num(res.reference_peak)}",
             f"# factor={_num(res.factor)}", "delay,max_energy,diverged"]
    lines += [f"{_num(p.delay)},{_num(p.max_energy)},{str(p.diverged).lower()}" for p in res.points]
    Path(args.out).write_text("\n".join(lines) + "\n")
    for p in res.points:
        print(f"delay {p.delay * 1e3:7.1f} ms  max energy {p.max_energy:12.6g} J  "
              f"{'diverged' if p.diverged else 'stable'}")
    thr = res.threshold()
    if thr is not None:
        print(f"threshold between {thr[0] * 1e3:.1f} ms and {thr[1] * 1e3:.1f} ms")
    elif res.transitions == 0:
        state = "diverged" if res.points[0].diverged else "stable"
        print(f"no threshold in range: every delay {state}")
    else:
        print(f"non-monotone sweep: {res.transitions} transitions")
    return EXIT_OK


def _with_duration(cfg: SessionConfig, duration: float) -> SessionConfig:
    from dataclasses import replace
    return replace(cfg, duration=duration)


def sample_messages(seed: int = 0) -> list:
    """One instance of every message type with seeded contents."""
    rng = np.random.default_rng(seed)
    q = rng.normal(size=4)
    pose = Pose6D(rng.normal(size=3), q / np.linalg.norm(q))
    r = lambda n: tuple(float(x) for x in rng.normal(size=n))  # noqa: E731
    return [
        codec.EefPoseCmd(codec.LEFT, pose, Twist(r(3), r(3))),
        codec.HandJointCmd(codec.RIGHT, r(9)),
        codec.HeadPoseCmd(pose),
        codec.BaseVelocityCmd(Twist.planar(*r(3))),
        codec.WrenchFeedback(codec.LEFT, Wrench(r(3), r(3))),
        codec.HandCurrentFeedback(codec.LEFT, r(5)),
        codec.ArmStateFeedback(codec.RIGHT, JointState(r(7), r(7))),
        codec.VideoFrame(0, 123456789, pose, rng.integers(0, 256, 64, dtype=np.uint8).tobytes()),
        codec.FaceKeypoints(rng.integers(0, 256, 16, dtype=np.uint8).tobytes()),
        codec.ErrorState(codec.LEFT, 1),
    ]


def cmd_codec(args) -> int:
    if args.sample:
        if args.out is None:
            raise UsageError("--sample needs --out")
        seed = 0 if args.seed is None else args.seed
        blob = b"".join(codec.encode(m, i, 1_000_000 * i) for i, m in enumerate(sample_messages(seed)))
        Path(args.out).write_bytes(blob)
        print(f"wrote {len(blob)} bytes ({len(codec.MSG_TYPES)} frames) to {args.out}")
        return EXIT_OK
    if args.input is None:
        raise UsageError("codec needs an input file or --sample")
    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        raise UsageError(f"{args.input}: cannot read: {exc.strerror}") from None
    if args.hex:
        try:
            data = bytes.fromhex(data.decode("ascii"))
        except ValueError:
            raise UsageError(f"{args.input}: not a hex dump") from None
    count = 0
    for item in codec.iter_frames(data):
        if isinstance(item, codec.DecodeError):
            print(f"error at byte {item.offset}: {type(item).__name__}: {item}", file=sys.stderr)
            return EXIT_RUNTIME
        print(f"seq={item.seq} t_ns={item.timestamp_ns} {_describe_message(item.message)}")
        count += 1
    print(f"{count} frames, {len(data)} bytes")
    return EXIT_OK


def _describe_message(m) -> str:
    name = codec.message_name(m)
    if isinstance(m, codec.VideoFrame):
        return f"{name}(stream={m.stream}, capture_ts_ns={m.capture_ts_ns}, {len(m.payload)} bytes)"
    return repr(m) if len(repr(m)) < 240 else f"{name}(...)"


def cmd_televis_map(args) -> int:
    cfg, _ = _config(args)
    if args.step <= 0:
        raise UsageError("--step must be positive")
    depth = cfg.eval_depth if args.depth is None else args.depth
    if not depth > 0:
        raise UsageError("--depth must be positive")
    try:
        offset = [float(v) for v in args.eye_offset.split(",")]
    except ValueError:
        offset = []
    if len(offset) != 3:
        raise UsageError("--eye-offset needs three comma-separated numbers")
    cam = cfg.camera
    eye = compose(cam.capture_pose, translate(*offset))
    rows = error_map(cam, eye, depth, args.step)
    lines = [MAP_MAGIC, f"# radius={_num(cam.radius)} depth={_num(depth)} eye_offset={args.eye_offset}",
             "u,v,error_rad"]
    lines += [f"{_num(u)},{_num(v)},{_num(e)}" for u, v, e in rows]
    Path(args.out).write_text("\n".join(lines) + "\n")
    errs = np.array([e for _, _, e in rows])
    print(f"{len(rows)} pixels, max error {math.degrees(errs.max()):.4f} deg, "
          f"mean {math.degrees(errs.mean()):.4f} deg")
    return EXIT_OK


def cmd_validate_config(args) -> int:
    from .config import bundled_configs
    paths = list(args.paths) + ([args.config] if args.config else [])
    if not paths:
        paths = bundled_configs()
    status = EXIT_OK
    for p in paths:
        try:
            load_config(p)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            status = EXIT_CONFIG
        else:
            print(f"ok {p}")
    return status


def cmd_gen_trace(args) -> int:
    duration = 10.0 if args.duration is None else args.duration
    if not duration > 0:
        raise UsageError("--duration must be positive")
    cfg, _ = _config(args)
    tr = generate_trace(args.kind, duration, cfg, period=args.period)
    write_trace(tr, args.out)
    print(f"wrote {args.kind} trace, {len(tr)} records over {tr.duration:g} s, to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="telelink", description="Desk-scale telepresence link simulator.")
    p.add_argument("--version", action="version", version=f"telelink {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, trace=True, seed=True, duration=True):
        sp.add_argument("--config", help="session config (YAML); built-in defaults if omitted")
        if trace:
            sp.add_argument("--trace", help="operator trace CSV; falls back to session.trace")
        if seed:
            sp.add_argument("--seed", type=int, help="overrides the config seed")
        if duration:
            sp.add_argument("--duration", type=float, help="simulated seconds (default: trace length)")

    sp = sub.add_parser("run", help="replay a trace and write the metrics CSV")
    common(sp)
    sp.add_argument("--out", required=True, help="metrics CSV path")
    sp.add_argument("--video-out", help="optional per-frame video CSV path")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="find the delay where force feedback goes unstable")
    common(sp)
    sp.add_argument("--delays", required=True, help="one-way delays in s, 'a:b:step' or a single value")
    sp.add_argument("--out", required=True, help="sweep CSV path")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("codec", help="decode a file of frames, or write sample frames")
    sp.add_argument("input", nargs="?", help="binary frame file")
    sp.add_argument("--hex", action="store_true", help="input is a hex dump")
    sp.add_argument("--sample", action="store_true", help="write one frame of every type to --out")
    sp.add_argument("--out", help="output path for --sample")
    sp.add_argument("--seed", type=int, help="seed for --sample contents")
    sp.set_defaults(func=cmd_codec)

    sp = sub.add_parser("televis-map", help="angular error of spherical rendering over the image")
    common(sp, trace=False, seed=False, duration=False)
    sp.add_argument("--out", required=True, help="CSV of u, v, error_rad")
    sp.add_argument("--eye-offset", default="0,0.1,0", help="eye position relative to the capture pose (m)")
    sp.add_argument("--depth", type=float, help="true scene depth (m); config eval_depth by default")
    sp.add_argument("--step", type=float, default=64.0, help="pixel grid spacing")
    sp.set_defaults(func=cmd_televis_map)

    sp = sub.add_parser("validate-config", help="check config files; bundled configs if none given")
    sp.add_argument("paths", nargs="*", help="config files")
    sp.add_argument("--config", help="one more config file")
    sp.set_defaults(func=cmd_validate_config)

    sp = sub.add_parser("gen-trace", help="write a synthetic operator trace")
    sp.add_argument("--kind", required=True, choices=TRACE_KINDS)
    sp.add_argument("--duration", type=float, help="seconds (default 10)")
    sp.add_argument("--out", required=True, help="trace CSV path")
    sp.add_argument("--config", help="config whose start posture anchors the trace")
    sp.add_argument("--period", type=float, default=0.01, help="sample period (s)")
    sp.set_defaults(func=cmd_gen_trace)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except Exception as exc:  # anything else is a runtime failure, not a crash dump
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
