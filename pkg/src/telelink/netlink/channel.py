"""Deterministic simulated link: latency, jitter, loss and a serialization queue.

Time is always an explicit argument in seconds; nothing reads the wall clock.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

MIN_DELAY = 1e-9
JITTER_TRUNCATION = 3.0


@dataclass(frozen=True)
class ChannelModel:
    base_latency: float = 0.0005
    jitter_std: float = 0.0
    loss_prob: float = 0.0
    bandwidth_limit: float = 1e9
    rng_seed: int = 0

    def __post_init__(self):
        if not self.base_latency >= 0:
            raise ValueError("base_latency must be >= 0")
        if not self.jitter_std >= 0:
            raise ValueError("jitter_std must be >= 0")
        if not 0 <= self.loss_prob <= 1:
            raise ValueError("loss_prob must lie in [0, 1]")
        if not self.bandwidth_limit > 0:
            raise ValueError("bandwidth_limit must be positive (math.inf for unlimited)")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must fit in 64 bits")


class Channel:
    """One direction of the operator/avatar link.

    Accepted packets leave a single-server serialization queue at
    ``bits / bandwidth_limit`` per packet, then take ``base_latency`` plus a
    truncated Gaussian jitter. Packets are delivered in delivery-time order;
    ties go to the earlier send.
    """

    def __init__(self, model: ChannelModel):
        self.model = model
        self._rng = np.random.Generator(np.random.PCG64(model.rng_seed))
        self._queue: list[tuple[float, int, bytes]] = []
        self._order = 0
        self._link_free_at = 0.0
        self._last_send = -math.inf
        self._last_poll = -math.inf
        self._blackouts: list[tuple[float, float]] = []
        self._delivered_log: deque[tuple[float, int]] = deque()
        self.sent = 0
        self.dropped = 0
        self.delivered = 0
        self.delivered_bits = 0

    @property
    def in_flight(self) -> int:
        return len(self._queue)

    def add_blackout(self, start: float, end: float):
        """Drop every packet sent in ``[start, end)``."""
        if end < start:
            raise ValueError("blackout must end after it starts")
        self._blackouts.append((float(start), float(end)))

    def _blacked_out(self, now: float) -> bool:
        return any(a <= now < b for a, b in self._blackouts)

    def send(self, data: bytes, now: float) -> float | None:
        """Submit ``data`` at ``now``; returns its delivery time or None if dropped."""
        if now < self._last_send:
            raise ValueError("send times must be non-decreasing")
        self._last_send = now
        self.sent += 1
        m = self.model
        if m.loss_prob > 0.0 and self._rng.random() < m.loss_prob:
            self.dropped += 1
            return None
        if self._blackouts and self._blacked_out(now):
            self.dropped += 1
            return None
        bits = 8 * len(data)
        start = max(now, self._link_free_at)
        finish = start + bits / m.bandwidth_limit
        self._link_free_at = finish
        delay = finish - now + m.base_latency
        if m.jitter_std > 0.0:
            j = float(self._rng.standard_normal()) * m.jitter_std
            lim = JITTER_TRUNCATION * m.jitter_std
            delay += min(lim, max(-lim, j))
        deliver_at = now + max(delay, MIN_DELAY)
        if deliver_at <= now:
            deliver_at = math.nextafter(now, math.inf)
        heapq.heappush(self._queue, (deliver_at, self._order, bytes(data)))
        self._order += 1
        return deliver_at

    def poll(self, now: float) -> list[bytes]:
        """Every packet due by ``now``, each exactly once, in delivery order."""
        return [data for _, data in self.poll_timed(now)]

    def poll_timed(self, now: float) -> list[tuple[float, bytes]]:
        if now < self._last_poll:
            raise ValueError("poll times must be non-decreasing")
        self._last_poll = now
        out = []
        q = self._queue
        while q and q[0][0] <= now:
            t, _, data = heapq.heappop(q)
            out.append((t, data))
            bits = 8 * len(data)
            self._delivered_log.append((t, bits))
            self.delivered += 1
            self.delivered_bits += bits
        return out

    def bandwidth(self, window: float, now: float | None = None) -> float:
        """Delivered bits over the trailing ``window`` seconds, per second."""
        if window <= 0:
            raise ValueError("window must be positive")
        if now is None:
            now = self._last_poll
        if not math.isfinite(now):
            return 0.0
        lo = now - window
        return sum(b for t, b in self._delivered_log if lo < t <= now) / window


class BandwidthMeter:
    """Running trailing-window rate of a channel's deliveries (O(1) per update)."""

    def __init__(self, window: float):
        if window <= 0:
            raise ValueError("window must be positive")
        self.window = window
        self._events: deque[tuple[float, int]] = deque()
        self._bits = 0

    def add(self, t: float, bits: int):
        self._events.append((t, bits))
        self._bits += bits

    def rate(self, now: float) -> float:
        lo = now - self.window
        ev = self._events
        while ev and ev[0][0] <= lo:
            self._bits -= ev.popleft()[1]
        return self._bits / self.window


def channel_send(ch: Channel, data: bytes, now: float):
    ch.send(data, now)


def channel_poll(ch: Channel, now: float) -> list[bytes]:
    return ch.poll(now)


def bandwidth_meter(ch: Channel, window: float) -> float:
    return ch.bandwidth(window)
