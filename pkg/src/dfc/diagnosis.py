"""Residual-based speed fault localisation and opinion-averaging correction."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .kinematics import NetworkData, VehicleSeries

SELF_FAULTY = "self-faulty"
OTHER_FAULTY = "other-faulty"
NO_FAULT = "no-fault"
INCONCLUSIVE = "inconclusive"

DEFAULT_KAPPA = 0.5
DEFAULT_QUORUM = 0.8
DEFAULT_WINDOW = 1.0
DEFAULT_THRESHOLD_FACTOR = 5.0


def derivative(x: np.ndarray, dt: float, halfwidth: int = 1) -> np.ndarray:
    """Central difference over +-halfwidth samples, second-order one-sided at the ends."""
    x = np.asarray(x, dtype=float)
    h = int(halfwidth)
    T = x.shape[-1]
    if h < 1:
        raise ValueError("halfwidth must be >= 1")
    if T < 2 * h + 1:
        raise ValueError(f"need at least {2 * h + 1} samples for halfwidth {h}, got {T}")
    span = h * dt
    d = np.empty_like(x)
    d[..., h:T - h] = (x[..., 2 * h:] - x[..., : T - 2 * h]) / (2 * span)
    head = np.arange(h)
    d[..., head] = (-3 * x[..., head] + 4 * x[..., head + h] - x[..., head + 2 * h]) / (2 * span)
    tail = np.arange(T - h, T)
    d[..., tail] = (3 * x[..., tail] - 4 * x[..., tail - h] + x[..., tail - 2 * h]) / (2 * span)
    return d


def integral(x: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative trapezoidal integral starting at 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[..., 1:] = np.cumsum((x[..., 1:] + x[..., :-1]) * (dt / 2), axis=-1)
    return out


def windowed_rms(x: np.ndarray, width: int) -> np.ndarray:
    """RMS over every full window of ``width`` consecutive samples."""
    x = np.asarray(x, dtype=float)
    width = max(1, min(int(width), x.size))
    c = np.concatenate([[0.0], np.cumsum(x * x)])
    return np.sqrt(np.maximum(c[width:] - c[:-width], 0.0) / width)


@dataclass(frozen=True, eq=False)
class ResidualSeries:
    owner: int
    target: int
    t: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    kappa1: float = DEFAULT_KAPPA
    kappa2: float = DEFAULT_KAPPA
    window: int = 100  # samples

    def __post_init__(self):
        if not (self.kappa1 > 0 and self.kappa2 > 0):
            raise ValueError("gains kappa1, kappa2 must be > 0")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError(f"non-finite residual samples for target {self.target}")

    @property
    def summary(self) -> float:
        """Peak RMS over sliding windows."""
        return float(windowed_rms(self.samples, self.window).max())

    def rms_between(self, t_start: float, t_end: float) -> float:
        sel = (self.t >= t_start - 1e-12) & (self.t <= t_end + 1e-12)
        if not np.any(sel):
            raise ValueError(f"no samples in [{t_start}, {t_end}]")
        return float(np.sqrt(np.mean(self.samples[sel] ** 2)))


def residual(
    data_i: VehicleSeries, data_j: VehicleSeries, kappa1: float = DEFAULT_KAPPA,
    kappa2: float = DEFAULT_KAPPA, owner: int = 0, target: int = 0,
    window: float = DEFAULT_WINDOW, halfwidth: int = 1,
) -> ResidualSeries:
    """e = k1 (u_ij - int a_ij) + k2 (u_ij - d p_ij / dt) with relative signals i - j.

    The integral is anchored at u_ij of the first sample.
    """
    if data_i.t.shape != data_j.t.shape or not np.allclose(data_i.t, data_j.t, rtol=0, atol=1e-9):
        raise ValueError("residual inputs must share the same time grid")
    if not (kappa1 > 0 and kappa2 > 0):
        raise ValueError("gains kappa1, kappa2 must be > 0")
    t = data_i.t
    dt = float(t[1] - t[0])
    p_ij = data_i.p - data_j.p
    u_ij = data_i.u - data_j.u
    a_ij = data_i.a - data_j.a
    from_accel = u_ij[0] + integral(a_ij, dt)
    from_position = derivative(p_ij, dt, halfwidth)
    e = kappa1 * (u_ij - from_accel) + kappa2 * (u_ij - from_position)
    width = max(1, int(round(window / dt)))
    return ResidualSeries(owner, target, t, e, kappa1, kappa2, width)


def network_residuals(
    data: NetworkData, owner: int, kappa1: float = DEFAULT_KAPPA, kappa2: float = DEFAULT_KAPPA,
    window: float = DEFAULT_WINDOW, halfwidth: int = 1,
) -> list[ResidualSeries]:
    mine = data.vehicle(owner)
    return [
        residual(mine, data.vehicle(j), kappa1, kappa2, owner, j, window, halfwidth)
        for j in range(1, data.n + 1) if j != owner
    ]


def adaptive_threshold(
    residuals: Sequence[ResidualSeries], calibration: float = DEFAULT_WINDOW,
    factor: float = DEFAULT_THRESHOLD_FACTOR,
) -> float:
    """factor x median (over targets) of the residual RMS in [t0, t0 + calibration].

    The calibration span must be fault free for the threshold to mean anything.
    """
    if not residuals:
        raise ValueError("no residuals to calibrate on")
    t0 = residuals[0].t[0]
    return float(factor * np.median([r.rms_between(t0, t0 + calibration) for r in residuals]))


@dataclass(frozen=True, eq=False)
class FaultVerdict:
    vehicle: int
    verdict: str
    threshold: float
    evidence: dict = field(default_factory=dict)  # target -> summary statistic
    faulty_vehicle: int | None = None
    corrected_speed: np.ndarray | None = field(default=None, repr=False)
    cause: str = ""

    @property
    def label(self) -> str:
        if self.verdict == OTHER_FAULTY:
            return f"{OTHER_FAULTY}({self.faulty_vehicle})"
        return self.verdict


def decide(
    residuals: Sequence[ResidualSeries], e_th: float, quorum: float = DEFAULT_QUORUM,
) -> FaultVerdict:
    """Apply the localisation rule to the per-target summaries of one owner.

    None above e_th: no fault. At least quorum of all targets above: the
    owner's own speed is faulty. Exactly one above: that target's speed is
    faulty. Anything else is inconclusive.
    """
    if not residuals:
        raise ValueError("decide() needs at least one residual series")
    if not 0.5 < quorum <= 1.0:
        raise ValueError(f"quorum must lie in (0.5, 1], got {quorum}")
    owner = residuals[0].owner
    evidence = {r.target: r.summary for r in residuals}
    above = [j for j, s in evidence.items() if s > e_th]
    total = len(evidence)
    if not above:
        return FaultVerdict(owner, NO_FAULT, e_th, evidence)
    # with a single target "only j" and "all" coincide; that case stays inconclusive
    if total >= 2 and len(above) >= quorum * total:
        return FaultVerdict(owner, SELF_FAULTY, e_th, evidence)
    if len(above) == 1 and total >= 2:
        return FaultVerdict(owner, OTHER_FAULTY, e_th, evidence, faulty_vehicle=above[0])
    return FaultVerdict(
        owner, INCONCLUSIVE, e_th, evidence,
        cause=f"{len(above)} of {total} targets above threshold",
    )


def opinions(
    data: NetworkData, i: int, method: str = "derivative", halfwidth: int = 1,
) -> dict[int, np.ndarray]:
    """Each other vehicle's implied speed of vehicle i.

    derivative: u_j + d(p_i - p_j)/dt (never reads u_i).
    integral:   u_j + (u_i - u_j)(t0) + int (a_i - a_j) dt, anchored at the
                first sample.
    """
    if method not in ("derivative", "integral"):
        raise ValueError(f"unknown opinion method {method!r}")
    if not 1 <= i <= data.n:
        raise IndexError(f"vehicle {i} outside 1..{data.n}")
    dt = data.dt
    out = {}
    for j in range(1, data.n + 1):
        if j == i:
            continue
        src = (data.p[j - 1], data.u[j - 1], data.a[j - 1])
        if not all(np.all(np.isfinite(c)) for c in src):
            raise ValueError(f"missing kinematic data for source vehicle {j}")
        if method == "derivative":
            out[j] = data.u[j - 1] + derivative(data.p[i - 1] - data.p[j - 1], dt, halfwidth)
        else:
            anchor = data.u[i - 1, 0] - data.u[j - 1, 0]
            out[j] = data.u[j - 1] + anchor + integral(data.a[i - 1] - data.a[j - 1], dt)
    return out


def correct(opinion_series: Mapping[int, np.ndarray] | Sequence[np.ndarray]) -> np.ndarray:
    """Pointwise mean of the available opinions (divides by their count)."""
    series = list(opinion_series.values()) if isinstance(opinion_series, Mapping) else list(opinion_series)
    if not series:
        raise ValueError("cannot correct speed from an empty set of opinions")
    return np.mean(np.vstack(series), axis=0)


def write_residuals_csv(residuals: Sequence[ResidualSeries], path: Path, header: str | None = None):
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["t", "owner", "target", "residual"])
        for r in residuals:
            for tk, e in zip(r.t, r.samples):
                out.writerow([repr(float(tk)), r.owner, r.target, repr(float(e))])
