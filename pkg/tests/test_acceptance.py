"""End-to-end acceptance checks, one test per criterion.

Each test records a single ``C<n> PASS|FAIL`` line with the measured figures;
the lines are printed in the terminal summary.
"""

import math
import time
from dataclasses import replace

import numpy as np
from telelink.config import bundled_path, default_config
from telelink.geometry import Pose6D, Twist, compose, translate
from telelink.haptics import LowPassFilter, lowpass_step
from telelink.kinematics import forward_kinematics, jacobian, planar_chain
from telelink.locomotion import (MecanumBase, TwistLimits, clamp_twist, integrate_odometry,
                                 twist_to_wheels, wheels_to_twist)
from telelink.netlink import DecodeError, VideoFrame, decode, encode
from telelink.session import (AvatarArm, Mode, Session, coupled_energy, generate_trace,
                              latency_budget, load_trace, run_session, stability_sweep)
from telelink.televis import (HeadFollower, SphereCamera, angular_error, compensated_direction,
                              head_follow_step)

from conftest import ACCEPTANCE, random_chain, random_message, random_pose
from test_kinematics import numeric_jacobian


def report(n: int, ok: bool, detail: str):
    line = f"C{n} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


def _unit(rng):
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    v[2] = abs(v[2])     # keep inside the 180 degree field of view
    return v


def test_c1_codec():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    bad_rt = 0
    for k in range(1_000_000):
        m = random_message(rng)
        b = encode(m, k & 0xFFFFFFFF, k)
        d = decode(b)
        if d.message != m or encode(d.message, d.seq, d.timestamp_ns) != b:
            bad_rt += 1
    aborts = 0
    blob = rng.integers(0, 256, 64 * 1_000_000 + 64, dtype=np.uint8).tobytes()
    lens = rng.integers(0, 64, 1_000_000)
    for k in range(1_000_000):
        try:
            decode(blob[64 * k:64 * k + lens[k]])
        except DecodeError:
            pass
        except Exception:
            aborts += 1
    frame = encode(VideoFrame(0, 1, Pose6D(), rng.integers(0, 256, 1024, dtype=np.uint8).tobytes()), 1, 2)
    missed = 0
    for i in range(len(frame) * 8):
        b = bytearray(frame)
        b[i // 8] ^= 1 << (i % 8)
        try:
            decode(bytes(b))
            missed += 1
        except DecodeError:
            pass
    elapsed = time.perf_counter() - start
    report(1, bad_rt == 0 and aborts == 0 and missed == 0 and elapsed < 60,
           f"1e6 round trips ({bad_rt} mismatches), 1e6 fuzz ({aborts} aborts), "
           f"{len(frame) * 8} bit flips ({missed} undetected) in {elapsed:.1f} s")


def test_c2_kinematics():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        ch = random_chain(rng)
        q = rng.uniform(-2.5, 2.5, ch.n)
        worst = max(worst, float(np.max(np.abs(jacobian(ch, q) - numeric_jacobian(ch, q)))))
    ch = planar_chain([1.0, 1.0])
    table = [((0, 0), (2, 0, 0)), ((math.pi / 2, 0), (0, 2, 0)), ((math.pi / 2, -math.pi / 2), (1, 1, 0))]
    fk_err = max(float(np.max(np.abs(forward_kinematics(ch, q).translation - np.array(t)))) for q, t in table)
    fk_err = max(fk_err, float(np.max(np.abs(forward_kinematics(ch, (0, 0)).rotation_matrix() - np.eye(3)))))
    report(2, worst <= 1e-5 and fk_err <= 1e-12,
           f"Jacobian vs FD max err {worst:.2e} (<= 1e-5); FK table max err {fk_err:.1e} (<= 1e-12)")


def test_c3_filter():
    fs, fc = 500.0, 15.0
    f = LowPassFilter(fc, fs)
    t = np.arange(10_000) / fs
    y = np.array([lowpass_step(f, [math.sin(2 * math.pi * fc * ti)])[0] for ti in t])
    steady = y[5000:]
    db = 20 * math.log10((steady.max() - steady.min()) / 2)
    report(3, abs(db + 3.0) <= 0.5, f"15 Hz sine through 15 Hz / 500 Hz filter: {db:.3f} dB (-3 +- 0.5)")


def test_c4_televis():
    rng = np.random.default_rng(4)
    cam = SphereCamera(capture_pose=random_pose(rng))
    ident = max(float(np.max(np.abs(compensated_direction(cam, r, cam.capture_pose) - r)))
                for r in (_unit(rng) for _ in range(1000)))
    coin = 0.0
    for _ in range(1000):
        d = rng.normal(size=3)
        d *= rng.uniform(0, 0.9) / np.linalg.norm(d)
        eye = compose(cam.capture_pose, Pose6D(d, random_pose(rng).q))
        coin = max(coin, angular_error(cam, _unit(rng), eye, cam.radius))
    worked = math.degrees(angular_error(SphereCamera(), np.array([0, 0, 1.0]), translate(0.1, 0, 0), 2.0))
    dt = 1e-3
    start = translate(0, 0, 0.6)
    target = compose(translate(0, 0.5, 0), start)
    h = HeadFollower(start, 1.0, math.pi)
    steps = 0
    while not h.at_target(target) and steps < 10_000:
        head_follow_step(h, target, dt)
        steps += 1
    final = angular_error(SphereCamera().at(h.current_pose), np.array([0, 0, 1.0]), target, 2.0)
    arrival = steps * dt
    ok = ident <= 1e-12 and coin <= 1e-9 and abs(worked - 2.849) <= 0.01 and final < 1e-6 and arrival <= 0.5 + dt
    report(4, ok, f"identity {ident:.1e} rad; depth coincidence {coin:.1e} rad; worked case {worked:.4f} deg; "
                  f"0.5 m head step arrives at {arrival:.3f} s with residual {final:.1e} rad")


def test_c5_locomotion():
    rng = np.random.default_rng(5)
    big = MecanumBase(0.05, 0.25, 0.25, 1e9)
    rt = 0.0
    for _ in range(10_000):
        v = rng.uniform(-3, 3, 3)
        back = wheels_to_twist(big, twist_to_wheels(big, Twist.planar(*v)))
        rt = max(rt, float(np.max(np.abs(np.array([back.linear[0], back.linear[1], back.angular[2]]) - v))))
    lim = TwistLimits()
    cap_ok = True
    for _ in range(10_000):
        vx, vy = rng.uniform(-5, 5, 2)
        c = clamp_twist(Twist.planar(vx, vy, 0.0), lim)
        cx, cy = c.linear[0], c.linear[1]
        speed = math.hypot(cx, cy)
        cap_ok &= speed <= lim.v_cap
        if math.hypot(vx, vy) > lim.v_cap:
            cap_ok &= abs(speed - lim.v_cap) <= 1e-15 * 4
            cap_ok &= abs(vx * cy - vy * cx) <= 1e-12 and vx * cx + vy * cy > 0
    odo = 0.0
    for _ in range(200):
        t = Twist.planar(*rng.uniform(-2, 2, 3))
        n, dt = int(rng.integers(1, 200)), float(rng.uniform(1e-4, 0.05))
        p = tuple(rng.uniform(-1, 1, 3))
        many = p
        for _ in range(n):
            many = integrate_odometry(many, t, dt)
        odo = max(odo, float(np.max(np.abs(np.subtract(integrate_odometry(p, t, n * dt), many)))))
    report(5, rt <= 1e-10 and cap_ok and odo <= 1e-9,
           f"IK/FK round trip {rt:.1e} over 1e4 twists; 1.5 m/s cap exact and direction kept: {bool(cap_ok)}; "
           f"odometry composition {odo:.1e}")


def test_c6_stability():
    cfg = default_config()
    energy = coupled_energy(cfg, duration=10.0)
    drift = float(np.max(np.diff(energy)))
    trace = load_trace(bundled_path("traces/circle_10s.csv"))
    delays = [k / 100 for k in range(21)]
    res = stability_sweep(cfg, trace, delays, seed=0)
    thr = res.threshold()
    interval = "none" if thr is None else f"{thr[0] * 1e3:.0f}-{thr[1] * 1e3:.0f} ms"
    report(6, drift <= 1e-6 and res.transitions == 1 and res.monotone and thr is not None,
           f"zero-delay energy drift {drift:.1e} J/step over 10 s; sweep 0-200 ms has "
           f"{res.transitions} transition(s), threshold interval {interval}")


def test_c7_bandwidth_and_latency():
    cfg = default_config()
    log = run_session(cfg, generate_trace("hold", 2.0, cfg), seed=0)
    t = log["t"]
    rate = float(np.mean(log["bandwidth"][t >= 1.5])) / 1e6
    b = latency_budget(log)
    total = b.total * 1e3
    report(7, abs(rate - 194.4) <= 4 and 30 <= total <= 40,
           f"downlink bandwidth {rate:.2f} Mbit/s, video plus feedback (194.4 +- 4); latency budget {total:.2f} ms = "
           f"{b.exposure * 1e3:.2f} exposure + {b.encode * 1e3:.2f} encode + {b.transmit * 1e3:.2f} transmit + "
           f"{b.decode * 1e3:.2f} decode")


def test_c8_determinism_and_safety():
    cfg = default_config()
    lossy = replace(cfg, uplink=replace(cfg.uplink, jitter_std=0.002, loss_prob=0.05),
                    downlink=replace(cfg.downlink, jitter_std=0.002, loss_prob=0.05))
    tr = generate_trace("circle", 1.0, cfg)
    same = run_session(lossy, tr, seed=9).to_csv() == run_session(lossy, tr, seed=9).to_csv()

    s = Session(cfg, generate_trace("circle", 3.5, cfg), seed=0)
    s.add_blackout(1.0, 1.2)
    log = s.run()
    cycle = [m for _, m in s.safety.history] == [Mode.HOLDING, Mode.FADING, Mode.RUNNING]
    holding = np.array(log.modes) == "holding"
    palms = log.columns_like("palm_")[holding]
    drift = float(np.max(np.abs(palms - palms[0]))) if holding.any() else math.inf

    e = Session(cfg, generate_trace("locomote", 2.5, cfg), seed=0)
    e.schedule_estop(1.5)
    elog = e.run()
    after = elog["t"] >= 1.5
    act = np.hstack([elog.columns_like("tau_")[after], elog.columns_like("wheel_")[after]])
    stopped = bool(np.all(act == 0.0)) and set(np.array(elog.modes)[after]) == {"estopped"}
    report(8, same and cycle and drift == 0.0 and stopped,
           f"equal-seed CSVs identical: {same}; blackout cycle Running-Holding-Fading-Running: {cycle} "
           f"with holding drift {drift:.1e} m; estop zeroes actuation: {stopped}")


def test_c9_tick_rate():
    cfg = default_config()
    arm = AvatarArm(cfg.arm("left"), cfg)
    arm.tick(True, False)    # compile kernels outside the timed loop
    n = 1_000_000
    start = time.perf_counter()
    for _ in range(n):
        arm.tick(True, False)
    elapsed = time.perf_counter() - start
    report(9, elapsed <= 60, f"{n} avatar ticks in {elapsed:.1f} s ({elapsed / n * 1e6:.1f} us per tick)")
