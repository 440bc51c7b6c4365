import math
import struct
import zlib

import numpy as np
import pytest

from telelink.geometry import Pose6D, Twist
from telelink.netlink import (OVERHEAD, BadMagic, BandwidthMeter, BaseVelocityCmd, Channel,
                              ChannelModel, CrcMismatch, DecodeError, EncodeError, ErrorState,
                              TrailingBytes, TruncatedFrame, UnknownMessageType, VideoFrame,
                              bandwidth_meter, channel_poll, channel_send, decode, encode,
                              iter_frames)
from telelink.netlink.codec import HEADER, MAGIC

from conftest import random_message


# -- codec ---------------------------------------------------------------------

def test_base_velocity_frame_is_71_bytes():
    b = encode(BaseVelocityCmd(Twist()), 0, 0)
    assert len(b) == 71 == OVERHEAD + 48


def test_layout_is_bit_exact():
    m = ErrorState("right", 0x1234)
    b = encode(m, 7, 99)
    payload = bytes([1]) + struct.pack("<H", 0x1234)
    body = b"\xae\x01" + bytes([10]) + struct.pack("<IQI", 7, 99, len(payload)) + payload
    assert b == body + struct.pack("<I", zlib.crc32(body))


def test_round_trip_every_variant(rng):
    seen = set()
    for i in range(3000):
        m = random_message(rng)
        seen.add(type(m))
        seq, ts = int(rng.integers(0, 2**32)), int(rng.integers(0, 2**63))
        d = decode(encode(m, seq, ts))
        assert d.message == m and d.seq == seq and d.timestamp_ns == ts
    assert len(seen) == 10


def test_decode_error_categories():
    with pytest.raises(TruncatedFrame):
        decode(b"")
    good = encode(BaseVelocityCmd(Twist()), 1, 2)
    with pytest.raises(TruncatedFrame):
        decode(good[:-1])
    with pytest.raises(BadMagic):
        decode(b"\x00\x00" + good[2:])
    with pytest.raises(TrailingBytes):
        decode(good + b"\x00")
    bad = bytearray(good)
    bad[30] ^= 1
    with pytest.raises(CrcMismatch):
        decode(bytes(bad))


def test_unknown_type_with_offset():
    payload = b"\x00" * 4
    body = HEADER.pack(MAGIC, 255, 0, 0, len(payload)) + payload
    frame = body + struct.pack("<I", zlib.crc32(body))
    with pytest.raises(UnknownMessageType) as exc:
        decode(frame)
    assert exc.value.offset == 2 and exc.value.msg_type == 255


def test_every_single_bit_flip_detected():
    m = VideoFrame(1, 5, Pose6D(), bytes(range(256)) * 4)
    frame = encode(m, 3, 4)
    for i in range(len(frame) * 8):
        b = bytearray(frame)
        b[i // 8] ^= 1 << (i % 8)
        with pytest.raises(DecodeError):
            decode(bytes(b))


def test_two_bit_flips_detected(rng):
    frame = encode(BaseVelocityCmd(Twist((1, 2, 0), (0, 0, 3))), 9, 9)
    nbits = len(frame) * 8
    for _ in range(5000):
        i, j = rng.choice(nbits, 2, replace=False)
        b = bytearray(frame)
        b[i // 8] ^= 1 << (i % 8)
        b[j // 8] ^= 1 << (j % 8)
        with pytest.raises(DecodeError):
            decode(bytes(b))


def test_fuzz_never_crashes(rng):
    for _ in range(20000):
        n = int(rng.integers(0, 80))
        data = rng.integers(0, 256, n, dtype=np.uint8).tobytes()
        if rng.random() < 0.5 and n >= 2:
            data = MAGIC + data[2:]
        try:
            decode(data)
        except DecodeError:
            pass


def test_encode_rejects_out_of_range():
    with pytest.raises(EncodeError):
        encode(BaseVelocityCmd(Twist()), 2**32, 0)
    with pytest.raises(EncodeError):
        encode("not a message", 0, 0)
    with pytest.raises(ValueError):
        ErrorState("middle", 1)


def test_iter_frames_stops_at_first_error():
    a = encode(BaseVelocityCmd(Twist()), 1, 1)
    b = encode(ErrorState("left", 3), 2, 2)
    out = list(iter_frames(a + b + b"\xae"))
    assert [o.seq for o in out[:2]] == [1, 2]
    assert isinstance(out[2], TruncatedFrame)


# -- channel -------------------------------------------------------------------

def test_fixed_latency_delivery():
    ch = Channel(ChannelModel(base_latency=0.05, bandwidth_limit=math.inf))
    t = ch.send(b"x", 0.010)
    assert t == pytest.approx(0.060, abs=1e-15)
    assert channel_poll(ch, 0.059) == []
    assert channel_poll(ch, t) == [b"x"]
    assert channel_poll(ch, 1.0) == []


def test_serialization_delay_and_queueing():
    ch = Channel(ChannelModel(base_latency=0.0, bandwidth_limit=1e9))
    mbit = bytes(125_000)
    assert ch.send(mbit, 0.0) == pytest.approx(1e-3, rel=1e-12)
    assert ch.send(mbit, 0.0) == pytest.approx(2e-3, rel=1e-12)   # waits behind the first


def test_total_loss():
    ch = Channel(ChannelModel(loss_prob=1.0))
    for k in range(100):
        channel_send(ch, b"a", k * 0.001)
    assert channel_poll(ch, 10.0) == [] and ch.dropped == 100


def test_delivery_order_by_time():
    fast = Channel(ChannelModel(base_latency=0.03, bandwidth_limit=math.inf))
    fast.send(b"first", 0.0)
    fast.send(b"second", 0.0)
    assert fast.poll(0.1) == [b"first", b"second"]
    ch = Channel(ChannelModel(base_latency=0.0, jitter_std=0.01, bandwidth_limit=math.inf, rng_seed=3))
    times = {}
    for k in range(50):
        times[bytes([k])] = ch.send(bytes([k]), 0.0)
    got = ch.poll(1.0)
    assert [times[g] for g in got] == sorted(times.values())


def test_bookkeeping_conservation_and_causality(rng):
    ch = Channel(ChannelModel(base_latency=0.002, jitter_std=0.003, loss_prob=0.2, rng_seed=11))
    now, sent, delivered = 0.0, {}, []
    for k in range(1000):
        now += float(rng.exponential(0.001))
        data = k.to_bytes(4, "little")
        t = ch.send(data, now)
        if t is not None:
            assert t > now
            sent[data] = t
        delivered += ch.poll(now)
        assert ch.delivered + ch.dropped + ch.in_flight == ch.sent
    delivered += ch.poll(now + 1.0)
    assert len(delivered) == len(set(delivered)) == len(sent)
    assert set(delivered) == set(sent)
    assert ch.sent == 1000 and ch.dropped == 1000 - len(sent)


def test_channel_determinism():
    def schedule(seed):
        ch = Channel(ChannelModel(jitter_std=0.001, loss_prob=0.1, rng_seed=seed))
        return [ch.send(bytes(10), k * 1e-3) for k in range(500)]
    assert schedule(5) == schedule(5)
    assert schedule(5) != schedule(6)


def test_monotonic_time_required():
    ch = Channel(ChannelModel())
    ch.send(b"a", 1.0)
    with pytest.raises(ValueError):
        ch.send(b"b", 0.5)


def test_model_validation():
    for kw in ({"base_latency": -1}, {"jitter_std": -1}, {"loss_prob": 1.5}, {"bandwidth_limit": 0}):
        with pytest.raises(ValueError):
            ChannelModel(**kw)


def _video_rate(fps, seconds=2.0, frame=270_000, streams=2):
    ch = Channel(ChannelModel(base_latency=0.0005))
    n = int(seconds * fps)
    for k in range(n):
        for _ in range(streams):
            ch.send(bytes(frame), k / fps)
        ch.poll(k / fps)
    ch.poll(seconds)
    return bandwidth_meter(ch, 1.0)


def test_bandwidth_meter():
    assert bandwidth_meter(Channel(ChannelModel()), 1.0) == 0.0
    full = _video_rate(45)
    assert abs(full - 194.4e6) / 194.4e6 < 0.02
    half = _video_rate(22.5)
    assert abs(half / full - 0.5) < 0.02


def test_running_meter_matches_window_sum():
    m = BandwidthMeter(1.0)
    for k in range(100):
        m.add(k * 0.05, 1000)
    assert m.rate(4.95) == pytest.approx(20 * 1000)
