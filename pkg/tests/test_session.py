import io
import math

import numpy as np
import pytest

from telelink.config import default_config
from telelink.netlink.channel import MIN_DELAY
from telelink.session import (IllegalTransition, Mode, SafetyState, Session, TraceError,
                              generate_trace, latency_budget, load_trace, parse_delays,
                              parse_trace, read_metrics_csv, run_session, stability_sweep,
                              with_delay, write_trace)
from telelink.session.metrics import LatencyBudget, MetricsLog, VideoRecord


@pytest.fixture(scope="module")
def cfg():
    return default_config()


@pytest.fixture(scope="module")
def hold_log(cfg):
    return run_session(with_delay(cfg, 0.0), generate_trace("hold", 2.0, cfg), seed=0)


# -- closed loop -----------------------------------------------------------------

def test_hold_settles_with_small_feedback(hold_log):
    for side in ("left", "right"):
        assert hold_log[f"pos_err_{side}"][-1] < 1e-4
        assert np.max(hold_log[f"fb_force_{side}"]) < 0.1
    assert set(hold_log.modes) == {"running"}


def test_tick_count_matches_rate(hold_log, cfg):
    assert abs(len(hold_log) - 2.0 * cfg.operator_rate) <= 1
    assert np.allclose(np.diff(hold_log["t"]), 1 / cfg.operator_rate, atol=1e-12)


def test_same_seed_gives_identical_csv(cfg):
    tr = generate_trace("circle", 0.5, cfg)
    lossy = with_delay(cfg, 0.005)
    a = run_session(lossy, tr, seed=4)
    b = run_session(lossy, tr, seed=4)
    assert a.to_csv() == b.to_csv()
    assert a.video_csv() == b.video_csv()


def test_metrics_csv_round_trip(hold_log, tmp_path):
    p = tmp_path / "m.csv"
    hold_log.to_csv(p)
    assert p.read_text().startswith("# telelink-metrics v1\n# seed=0\n")
    cols, data, modes = read_metrics_csv(p)
    assert cols == hold_log.columns and modes == hold_log.modes
    assert np.array_equal(data[:, 2:], hold_log.data[:, 2:], equal_nan=True)


def test_blackout_walks_the_safety_cycle(cfg):
    start, end = 1.0, 1.2
    s = Session(cfg, generate_trace("circle", 3.5, cfg), seed=0)
    s.add_blackout(start, end)
    log = s.run()
    hist = s.safety.history
    assert [m for _, m in hist] == [Mode.HOLDING, Mode.FADING, Mode.RUNNING]
    tick = 1 / cfg.operator_rate
    t_hold, t_fade, t_run = (t for t, _ in hist)
    assert start < t_hold <= start + cfg.uplink.base_latency + 4 * tick
    assert end <= t_fade
    # liveness: back to normal within blackout + link delay + fade + two ticks
    assert t_run <= end + cfg.uplink.base_latency + cfg.fade_duration + 2 * tick + 1e-9
    # the arm does not move while holding
    holding = np.array(log.modes) == "holding"
    palms = log.columns_like("palm_")[holding]
    assert holding.sum() > 100
    assert np.max(np.abs(palms - palms[0])) == 0.0


def test_estop_is_terminal_and_stops_motion(cfg):
    s = Session(cfg, generate_trace("locomote", 2.5, cfg), seed=0)
    s.schedule_estop(1.5)
    log = s.run()
    t = log["t"]
    after = t >= 1.5
    assert set(np.array(log.modes)[after]) == {"estopped"}
    assert np.all(log.columns_like("tau_")[after] == 0.0)
    assert np.all(log.columns_like("wheel_")[after] == 0.0)
    assert np.any(log.columns_like("wheel_")[~after] != 0.0)
    base = log.data[after][:, [log.index[c] for c in ("base_x", "base_y", "base_theta")]]
    assert np.all(base == base[0]) and base[0, 0] > 0
    assert s.safety.history[-1][1] == Mode.ESTOPPED


def test_safety_state_rejects_illegal_moves():
    st = SafetyState()
    with pytest.raises(IllegalTransition):
        st.to(Mode.FADING, 0.0)
    st.to(Mode.HOLDING, 0.1)
    with pytest.raises(IllegalTransition):
        st.to(Mode.RUNNING, 0.2)
    st.to(Mode.ESTOPPED, 0.3)
    for m in (Mode.RUNNING, Mode.HOLDING, Mode.FADING):
        with pytest.raises(IllegalTransition):
            st.to(m, 0.4)


def test_abort_energy_stops_early(cfg):
    log = run_session(cfg, generate_trace("hold", 1.0, cfg), seed=0, abort_energy=0.0)
    assert len(log) == 1 and log.stats["aborted"] == 1


# -- latency budget --------------------------------------------------------------

def _record(exposure, enc, tx, dec, size=100):
    cap = 1.0
    sent = cap + exposure + enc
    return VideoRecord(0, cap, sent, sent + tx, sent + tx + dec, size, exposure)


def test_budget_components_sum():
    log = MetricsLog(["t", "mode", "energy"])
    log.video = [_record(0.008, 0.01, 0.004, 0.012), _record(0.008, 0.01, 0.006, 0.012)]
    b = latency_budget(log)
    assert (b.exposure, b.encode, b.decode, b.frames) == (0.008, pytest.approx(0.01), pytest.approx(0.012), 2)
    assert b.transmit == pytest.approx(0.005)
    assert b.total == pytest.approx(0.035)
    with pytest.raises(ValueError):
        latency_budget(MetricsLog(["t"]))


def test_budget_zero_size_zero_constants_is_exposure_only(cfg):
    from dataclasses import replace
    from telelink.netlink import ChannelModel
    c = replace(cfg, encode_latency=0.0, decode_latency=0.0, frame_bytes=0,
                downlink=ChannelModel(base_latency=0.0, bandwidth_limit=math.inf))
    b = latency_budget(run_session(c, generate_trace("hold", 0.5, c), seed=0))
    assert b.encode == pytest.approx(0, abs=1e-12) and b.decode == pytest.approx(0, abs=1e-12)
    # an ideal link still delivers strictly after the send instant
    assert b.transmit == pytest.approx(MIN_DELAY, abs=1e-12)
    assert b.total == pytest.approx(cfg.exposure, abs=2e-9)


def test_bigger_frames_only_add_transmit_time(cfg):
    from dataclasses import replace
    tr = generate_trace("hold", 0.5, cfg)
    a = latency_budget(run_session(cfg, tr, seed=0))
    b = latency_budget(run_session(replace(cfg, frame_bytes=2 * cfg.frame_bytes), tr, seed=0))
    assert (a.exposure, a.encode, a.decode) == pytest.approx((b.exposure, b.encode, b.decode), abs=1e-12)
    assert b.transmit > a.transmit


def test_default_budget_is_in_the_expected_band(cfg):
    b = latency_budget(run_session(cfg, generate_trace("hold", 1.0, cfg), seed=0))
    assert isinstance(b, LatencyBudget)
    assert 0.030 <= b.total <= 0.040


# -- traces ----------------------------------------------------------------------

def test_trace_round_trip(tmp_path, cfg):
    tr = generate_trace("reach", 0.5, cfg)
    p = tmp_path / "t.csv"
    write_trace(tr, p)
    back = load_trace(p)
    assert back.period == tr.period and np.array_equal(back.data, tr.data)


def test_generated_trace_shapes(cfg):
    circ = generate_trace("circle", 5.0, cfg, period=0.01)
    y = circ.data[:, 9]          # right palm y
    z = circ.data[:, 10]
    y0, z0 = y[0], z[0]
    r = np.hypot(y - y0, z - z0 + 0.1)
    assert np.allclose(r, 0.1, atol=1e-12)
    k = int(round(1.25 / 0.01))   # quarter period at 0.2 Hz
    assert y[k] - y0 == pytest.approx(0.1, abs=1e-12)
    reach = generate_trace("reach", 3.0, cfg)
    dx = reach.data[:, 1] - reach.data[0, 1]
    k = int(round(1.0 / 0.01))
    assert dx[k] == pytest.approx(0.15, abs=1e-12)   # smoothstep(0.5) * 0.3
    assert dx[-1] == pytest.approx(0.3, abs=1e-12)
    with pytest.raises(ValueError):
        generate_trace("dance", 1.0, cfg)


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("# telelink-trace v1\n# period=0.01\nt,a,b\n", 3),
    ("# telelink-trace v1\n# period=abc\n", 2),
])
def test_trace_errors_carry_line(text, line):
    with pytest.raises(TraceError) as exc:
        parse_trace(text)
    assert exc.value.line == line


def test_trace_rows_must_be_increasing(cfg):
    buf = io.StringIO()
    write_trace(generate_trace("hold", 0.05, cfg), buf)
    lines = buf.getvalue().splitlines()
    lines[4], lines[5] = lines[5], lines[4]
    with pytest.raises(TraceError, match="strictly increasing"):
        parse_trace("\n".join(lines))
    with pytest.raises(TraceError, match="cannot read"):
        load_trace("/nonexistent/trace.csv")


# -- sweep helpers ---------------------------------------------------------------

def test_parse_delays():
    assert parse_delays("0:0.03:0.01") == pytest.approx([0, 0.01, 0.02, 0.03])
    assert parse_delays("0.05:0.01:0.01") == []
    assert parse_delays("0.02:0.02:0.01") == pytest.approx([0.02])
    for bad in ("0:1", "a:b:c", "0:1:0", "0:1:-1"):
        with pytest.raises(ValueError):
            parse_delays(bad)


def test_sweep_validation(cfg):
    tr = generate_trace("hold", 0.1, cfg)
    for delays in ([], [0.02, 0.01], [-0.01]):
        with pytest.raises(ValueError):
            stability_sweep(cfg, tr, delays)


def test_short_sweep_without_delay_is_stable(cfg):
    res = stability_sweep(cfg, generate_trace("hold", 0.3, cfg), [0.0], seed=0)
    assert len(res.points) == 1 and not res.points[0].diverged
    assert res.threshold() is None and res.monotone


def test_with_delay_sets_both_links(cfg):
    c = with_delay(cfg, 0.033)
    assert c.uplink.base_latency == c.downlink.base_latency == 0.033
