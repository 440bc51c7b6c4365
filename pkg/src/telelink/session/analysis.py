"""Experiments built on sessions: delay sweeps and the zero-delay energy check."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .. import _kernels
from ..config import SessionConfig
from ..kinematics import jacobian
from .core import run_session
from .trace import OperatorTrace

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 100.0


@dataclass(frozen=True)
class SweepPoint:
    delay: float
    max_energy: float
    diverged: bool


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    reference_peak: float
    factor: float

    @property
    def monotone(self) -> bool:
        flags = [p.diverged for p in self.points]
        return flags == sorted(flags)

    @property
    def transitions(self) -> int:
        flags = [p.diverged for p in self.points]
        return sum(1 for a, b in zip(flags, flags[1:]) if a != b)

    def threshold(self) -> tuple[float, float] | None:
        """Last stable and first diverged delay, when the flags switch exactly once."""
        if self.transitions != 1 or not self.monotone:
            return None
        for a, b in zip(self.points, self.points[1:]):
            if not a.diverged and b.diverged:
                return a.delay, b.delay
        return None


def with_delay(cfg: SessionConfig, delay: float) -> SessionConfig:
    """Config whose uplink and downlink both carry ``delay`` seconds of base latency."""
    return replace(cfg, uplink=replace(cfg.uplink, base_latency=delay),
                   downlink=replace(cfg.downlink, base_latency=delay))


def stability_sweep(cfg: SessionConfig, trace: OperatorTrace, delays, seed: int | None = None,
                    factor: float = DIVERGENCE_FACTOR) -> SweepResult:
    """Replay ``trace`` at each one-way delay and flag runs whose energy ledger
    exceeds ``factor`` times its zero-delay peak.

    A run stops as soon as it crosses the bound; its reported maximum is then
    the first energy above it.
    """
    delays = [float(d) for d in delays]
    if not delays:
        raise ValueError("need at least one delay")
    if any(b < a for a, b in zip(delays, delays[1:])):
        raise ValueError("delays must be sorted ascending")
    if any(d < 0 for d in delays):
        raise ValueError("delays must be non-negative")
    ref = run_session(with_delay(cfg, 0.0), trace, seed=seed)
    peak = ref.max_energy
    bound = factor * peak
    points = []
    for d in delays:
        if d == 0.0:
            run = ref
        else:
            run = run_session(with_delay(cfg, d), trace, seed=seed, abort_energy=bound)
        e = run.max_energy
        diverged = not (e <= bound)
        log.info("delay %.4f s: max energy %.6g J, diverged=%s", d, e, diverged)
        points.append(SweepPoint(d, e, diverged))
    return SweepResult(tuple(points), peak, factor)


def parse_delays(spec: str) -> list[float]:
    """``"a:b:step"`` (inclusive of ``b`` within rounding), or a single number."""
    parts = spec.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise ValueError(f"delay range must look like a:b:step, got {spec!r}")
    a, b, step = (float(p) for p in parts)
    if not step > 0:
        raise ValueError("delay step must be positive")
    if b < a:
        return []
    n = int(math.floor((b - a) / step + 1e-9))
    return [round(a + i * step, 12) for i in range(n + 1)]


def coupled_energy(cfg: SessionConfig, side: str = "left", duration: float = 10.0,
                   offset=(0.02, 0.0, 0.0)) -> np.ndarray:
    """Energy of an operator hand rigidly coupled to the impedance arm at zero delay.

    The operator mass sits on its spring, displaced by ``offset`` from the
    spring anchor at the arm's start palm. The arm's impedance target is the
    hand pose and the impedance force reacts on the hand, so the pair forms
    one mechanical system with no external work; the returned per-tick total
    (kinetic plus spring energy) should therefore never rise.
    """
    arm = cfg.arm(side)
    dt = 1.0 / cfg.operator_rate
    n_steps = int(round(duration / dt))
    op = cfg.operator
    args = arm.chain.kernel_args()
    R0, anchor = _kernels.fk(*args, arm.q_init)
    p = cfg.plant
    J0 = jacobian(arm.chain, arm.q_init)
    M = J0.T @ np.diag([p.mass] * 3 + [p.inertia] * 3) @ J0 + p.nullspace_inertia * np.eye(arm.chain.n)
    Minv = np.linalg.inv(M)
    gains = cfg.gains.as_array()
    env = np.zeros(10)
    q = np.array(arm.q_init, dtype=float)
    qd = np.zeros_like(q)
    x = anchor + np.asarray(offset, dtype=float)
    v = np.zeros(3)
    twist = np.zeros(6)
    out = np.empty(n_steps + 1)
    for k in range(n_steps + 1):
        twist[:3] = v
        q_new, qd_new, _, _, _, _, F, parts = _kernels.avatar_step(
            *args, q, qd, x, R0, twist, gains, arm.chain.tau_max, arm.chain.q_min,
            arm.chain.q_max, cfg.repulsion_margin, 0.0, M, Minv, p.joint_damping, env, dt,
            True, False)
        d = x - anchor
        out[k] = 0.5 * op.mass * (v @ v) + 0.5 * op.stiffness * (d @ d) + parts.sum()
        f = -op.stiffness * d - op.damping * v - F[:3]
        v = v + (dt / op.mass) * f
        x = x + dt * v
        q, qd = q_new, qd_new
    return out


def settled_energy_rise(energy: np.ndarray, settle_steps: int = 0) -> float:
    """Largest single-step increase of an energy series after ``settle_steps``."""
    e = np.asarray(energy)[settle_steps:]
    if len(e) < 2:
        return 0.0
    return float(np.max(np.diff(e)))
