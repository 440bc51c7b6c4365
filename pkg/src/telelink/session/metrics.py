"""Per-tick metrics log, its CSV form, and the video latency breakdown."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

METRICS_MAGIC = "# telelink-metrics v1"
VIDEO_MAGIC = "# telelink-video v1"
MODE_NAMES = ("running", "holding", "fading", "estopped")


def metric_columns(cfg) -> list[str]:
    """Stable column order for a config's arms."""
    sides = [a.side for a in cfg.arms]
    cols = ["t", "mode"]
    for s in sides:
        cols += [f"pos_err_{s}", f"rot_err_{s}"]
    cols += ["wrench_rtt", "televis_err", "bandwidth", "energy"]
    cols += [f"fb_force_{s}" for s in sides]
    for s in sides:
        cols += [f"palm_{s}_{c}" for c in "xyz"]
    for a in cfg.arms:
        cols += [f"tau_{a.side}_{i}" for i in range(a.chain.n)]
    cols += [f"wheel_{i}" for i in range(4)]
    cols += ["base_x", "base_y", "base_theta", "head_x", "head_y", "head_z"]
    cols += [f"brakes_{s}" for s in sides]
    return cols


class VideoRecord(NamedTuple):
    stream: int
    capture: float      # exposure start (s)
    sent: float         # handed to the link after encoding (s)
    received: float     # delivered by the link (s)
    displayed: float    # decode finished (s)
    size: int
    exposure: float

    @property
    def glass_to_glass(self) -> float:
        return self.displayed - self.capture


@dataclass(frozen=True)
class LatencyBudget:
    exposure: float
    encode: float
    transmit: float
    decode: float
    frames: int

    @property
    def total(self) -> float:
        return self.exposure + self.encode + self.transmit + self.decode


class MetricsLog:
    """Column store with one row per avatar control tick."""

    def __init__(self, columns: list[str], seed: int = 0, capacity: int = 1024):
        self.columns = list(columns)
        self.index = {c: i for i, c in enumerate(self.columns)}
        self.seed = seed
        self._data = np.empty((max(1, capacity), len(columns)))
        self._n = 0
        self.video: list[VideoRecord] = []
        self.stats: dict[str, float] = {}

    def append(self, row):
        if self._n == self._data.shape[0]:
            self._data = np.concatenate([self._data, np.empty_like(self._data)])
        self._data[self._n] = row
        self._n += 1

    def finish(self, uplink, downlink, decode_errors: int, aborted: bool):
        self.stats = {
            "uplink_sent": uplink.sent, "uplink_dropped": uplink.dropped,
            "downlink_sent": downlink.sent, "downlink_dropped": downlink.dropped,
            "decode_errors": decode_errors, "aborted": int(aborted),
        }

    def __len__(self):
        return self._n

    @property
    def data(self) -> np.ndarray:
        return self._data[:self._n]

    def __getitem__(self, name: str) -> np.ndarray:
        return self._data[:self._n, self.index[name]]

    @property
    def modes(self) -> list[str]:
        return [MODE_NAMES[int(m)] for m in self["mode"]]

    @property
    def max_energy(self) -> float:
        e = self["energy"]
        if len(e) == 0:
            return 0.0
        return float(np.max(e)) if np.all(np.isfinite(e)) else float("inf")

    def columns_like(self, prefix: str) -> np.ndarray:
        idx = [i for c, i in self.index.items() if c.startswith(prefix)]
        return self._data[:self._n, idx]

    # -- CSV ---------------------------------------------------------------------

    def to_csv(self, path_or_buf=None) -> str:
        mode_col = self.index["mode"]
        out = [METRICS_MAGIC, f"# seed={self.seed}", ",".join(self.columns)]
        for row in self.data:
            cells = [format(v, ".17g") for v in row]
            cells[mode_col] = MODE_NAMES[int(row[mode_col])]
            out.append(",".join(cells))
        return _emit("\n".join(out) + "\n", path_or_buf)

    def video_csv(self, path_or_buf=None) -> str:
        out = [VIDEO_MAGIC, f"# seed={self.seed}",
               "stream,capture,sent,received,displayed,bytes,glass_to_glass"]
        for r in self.video:
            out.append(",".join([str(r.stream)] + [format(v, ".17g") for v in
                                                   (r.capture, r.sent, r.received, r.displayed)]
                                + [str(r.size), format(r.glass_to_glass, ".17g")]))
        return _emit("\n".join(out) + "\n", path_or_buf)


def _emit(text: str, path_or_buf):
    if path_or_buf is None:
        return text
    if isinstance(path_or_buf, io.TextIOBase):
        path_or_buf.write(text)
    else:
        Path(path_or_buf).write_text(text)
    return text


def read_metrics_csv(path) -> tuple[list[str], np.ndarray, list[str]]:
    """Columns, numeric data (mode as code) and mode names from a metrics CSV."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    cols = lines[0].split(",")
    mi = cols.index("mode")
    rows, modes = [], []
    for ln in lines[1:]:
        cells = ln.split(",")
        modes.append(cells[mi])
        cells[mi] = str(MODE_NAMES.index(cells[mi]))
        rows.append([float(c) for c in cells])
    return cols, np.array(rows).reshape(-1, len(cols)), modes


def latency_budget(log: MetricsLog) -> LatencyBudget:
    """Mean per-frame split of glass-to-glass latency.

    Exposure is the fixed capture offset, encode and decode are the configured
    model constants as realised in the event times, and transmit is whatever
    the link added (queueing, serialization, propagation).
    """
    frames = log.video
    if not frames:
        raise ValueError("log contains no delivered video frames")
    exp = np.mean([r.exposure for r in frames])
    enc = np.mean([r.sent - r.capture - r.exposure for r in frames])
    tx = np.mean([r.received - r.sent for r in frames])
    dec = np.mean([r.displayed - r.received for r in frames])
    return LatencyBudget(float(exp), float(enc), float(tx), float(dec), len(frames))
