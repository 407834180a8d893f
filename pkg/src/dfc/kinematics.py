"""Synthetic longitudinal kinematics for a platoon, with speed-sensor faults.

Ground truth follows piecewise-constant jerk and is evaluated in closed form
on the sample grid, so u = dp/dt and a = du/dt hold exactly for the truth.
Measured channels add seeded Gaussian noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

CHANNELS = ("position", "speed", "acceleration")
_ALIASES = {"p": "position", "u": "speed", "a": "acceleration"}

DEFAULT_DT = 0.01
DEFAULT_NOISE = {"p": 0.05, "u": 0.05, "a": 0.05}


@dataclass(frozen=True)
class JerkSegment:
    start: float
    jerk: float


@dataclass(frozen=True)
class MotionProfile:
    """Initial state plus jerk switching times for one vehicle."""

    p0: float = 0.0
    u0: float = 20.0
    a0: float = 0.0
    segments: tuple[JerkSegment, ...] = ()

    def evaluate(self, t: np.ndarray):
        """Closed-form (p, u, a) at times t >= 0."""
        t = np.asarray(t, dtype=float)
        segs = sorted(self.segments, key=lambda s: s.start)
        if not segs or segs[0].start > 0:
            segs = [JerkSegment(0.0, 0.0)] + segs
        p = np.empty_like(t)
        u = np.empty_like(t)
        a = np.empty_like(t)
        p_s, u_s, a_s = self.p0, self.u0, self.a0
        for idx, seg in enumerate(segs):
            end = segs[idx + 1].start if idx + 1 < len(segs) else np.inf
            sel = (t >= seg.start) & (t < end)
            tau = t[sel] - seg.start
            j = seg.jerk
            a[sel] = a_s + j * tau
            u[sel] = u_s + a_s * tau + j * tau**2 / 2
            p[sel] = p_s + u_s * tau + a_s * tau**2 / 2 + j * tau**3 / 6
            if np.isfinite(end):
                d = end - seg.start
                p_s, u_s, a_s = (
                    p_s + u_s * d + a_s * d**2 / 2 + j * d**3 / 6,
                    u_s + a_s * d + j * d**2 / 2,
                    a_s + j * d,
                )
        return p, u, a


@dataclass(frozen=True)
class SpeedFault:
    vehicle: int
    onset: float = 0.0
    kind: str = "bias"  # bias [m/s] | ramp [m/s^2] | scale [factor]
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("bias", "ramp", "scale"):
            raise ValueError(f"unknown speed fault kind {self.kind!r}")

    def apply(self, t: np.ndarray, u: np.ndarray) -> np.ndarray:
        on = t >= self.onset - 1e-12
        out = u.copy()
        if self.kind == "bias":
            out[on] = u[on] + self.value
        elif self.kind == "ramp":
            out[on] = u[on] + self.value * (t[on] - self.onset)
        else:
            out[on] = u[on] * self.value
        return out


@dataclass(frozen=True, eq=False)
class NetworkData:
    """p, u, a for every vehicle on a shared grid; arrays have shape (n, T)."""

    t: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    def channel(self, name: str) -> np.ndarray:
        name = _ALIASES.get(name, name)
        if name not in CHANNELS:
            raise ValueError(f"unknown channel {name!r}; expected one of {CHANNELS}")
        return {"position": self.p, "speed": self.u, "acceleration": self.a}[name]

    def vehicle(self, i: int) -> "VehicleSeries":
        if not 1 <= i <= self.n:
            raise IndexError(f"vehicle {i} outside 1..{self.n}")
        return VehicleSeries(self.t, self.p[i - 1], self.u[i - 1], self.a[i - 1])


@dataclass(frozen=True, eq=False)
class VehicleSeries:
    t: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class KinematicTrace:
    measured: NetworkData
    truth: NetworkData
    noise: dict
    faults: tuple[SpeedFault, ...] = ()

    @property
    def t(self) -> np.ndarray:
        return self.measured.t

    @property
    def dt(self) -> float:
        return self.measured.dt

    @property
    def n(self) -> int:
        return self.measured.n


def time_grid(dt: float, T: float) -> np.ndarray:
    steps = int(round(T / dt))
    return np.arange(steps + 1) * dt


def platoon_profiles(
    n: int, spacing: float = 10.0, u0: float = 20.0, a0: float = 0.0,
    segments: Sequence[JerkSegment] = (), overrides: dict[int, dict] | None = None,
) -> list[MotionProfile]:
    """Vehicle 1 leads; vehicle i starts (i - 1) * spacing behind it.

    ``overrides`` maps a vehicle to MotionProfile fields replacing the shared ones.
    """
    overrides = overrides or {}
    profiles = []
    for i in range(1, n + 1):
        prof = MotionProfile(p0=-(i - 1) * spacing, u0=u0, a0=a0, segments=tuple(segments))
        if i in overrides:
            prof = replace(prof, **overrides[i])
        profiles.append(prof)
    return profiles


def simulate_traces(
    profiles: Sequence[MotionProfile], dt: float = DEFAULT_DT, T: float = 10.0,
    noise: dict | None = None, seed: int | None = 0, rng: np.random.Generator | None = None,
) -> KinematicTrace:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not T >= dt:
        raise ValueError(f"T must be at least dt, got T={T}, dt={dt}")
    if not profiles:
        raise ValueError("need at least one vehicle profile")
    noise = dict(DEFAULT_NOISE if noise is None else noise)
    for key in ("p", "u", "a"):
        noise.setdefault(key, 0.0)
        if noise[key] < 0:
            raise ValueError(f"noise std for {key} must be >= 0")
    t = time_grid(dt, T)
    truth = np.array([prof.evaluate(t) for prof in profiles])  # (n, 3, T)
    p, u, a = (truth[:, c].copy() for c in range(3))
    if rng is None:
        rng = np.random.default_rng(seed)
    shape = p.shape
    meas = NetworkData(
        t,
        p + noise["p"] * rng.standard_normal(shape),
        u + noise["u"] * rng.standard_normal(shape),
        a + noise["a"] * rng.standard_normal(shape),
    )
    return KinematicTrace(meas, NetworkData(t, p, u, a), noise)


def inject_speed_fault(trace: KinematicTrace, fault: SpeedFault) -> KinematicTrace:
    """Corrupt the measured speed of one vehicle; p and a are left alone."""
    if not 1 <= fault.vehicle <= trace.n:
        raise IndexError(f"fault vehicle {fault.vehicle} outside 1..{trace.n}")
    if not trace.t[0] - 1e-12 <= fault.onset <= trace.t[-1] + 1e-12:
        raise ValueError(f"fault onset {fault.onset} outside trace span")
    m = trace.measured
    u = m.u.copy()
    u[fault.vehicle - 1] = fault.apply(m.t, u[fault.vehicle - 1])
    measured = NetworkData(m.t, m.p, u, m.a)
    return KinematicTrace(measured, trace.truth, trace.noise, trace.faults + (fault,))


def time_index(t_grid: np.ndarray, t: float) -> int:
    dt = t_grid[1] - t_grid[0] if t_grid.size > 1 else 1.0
    k = int(round((t - t_grid[0]) / dt))
    if not 0 <= k < t_grid.size or abs(t_grid[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not on the sample grid")
    return k


def snapshot(trace: KinematicTrace, t: float, channel: str) -> np.ndarray:
    """Measured channel across all vehicles at grid time t (no interpolation)."""
    return trace.measured.channel(channel)[:, time_index(trace.t, t)].copy()


def write_trace_csv(data: NetworkData, path: Path, header: str | None = None):
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["t", "vehicle", "p", "u", "a"])
        for k, tk in enumerate(data.t):
            for i in range(data.n):
                out.writerow([repr(float(tk)), i + 1, repr(float(data.p[i, k])),
                              repr(float(data.u[i, k])), repr(float(data.a[i, k]))])
