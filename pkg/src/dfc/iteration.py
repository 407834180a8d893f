"""Linear iteration x[k+1] = W x[k] + sum_j e_j zeta_j[k] with fault injection.

Horizon convention: a run with horizon L records states x[0..L] and the
observations y_i[0..L], i.e. L + 1 time steps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .weights import WeightMatrix

ADDITIVE = "additive"
PACKET_DROP = "packet-drop"


@dataclass(frozen=True)
class Fault:
    """One misbehaving vehicle.

    ``values`` is the additive schedule zeta[0], zeta[1], ...; steps beyond
    its end inject zero. Packet-drop faults carry no values: their zeta
    cancels every neighbour contribution at run time.
    """

    vehicle: int
    mode: str = ADDITIVE
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.mode not in (ADDITIVE, PACKET_DROP):
            raise ValueError(f"unknown fault mode {self.mode!r}")
        if self.mode == PACKET_DROP and self.values:
            raise ValueError("packet-drop faults take no explicit values")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def value(self, k: int) -> float:
        return self.values[k] if k < len(self.values) else 0.0


@dataclass(frozen=True)
class FaultModel:
    faults: tuple[Fault, ...] = ()

    def __post_init__(self):
        faults = tuple(self.faults)
        vehicles = [f.vehicle for f in faults]
        if len(set(vehicles)) != len(vehicles):
            raise ValueError(f"fault vehicles must be distinct, got {vehicles}")
        object.__setattr__(self, "faults", faults)

    @property
    def vehicles(self) -> list[int]:
        return [f.vehicle for f in self.faults]

    def __len__(self):
        return len(self.faults)


NO_FAULTS = FaultModel()


@dataclass(frozen=True, eq=False)
class IterationTrace:
    weights: WeightMatrix
    states: np.ndarray = field(repr=False)  # (L + 1, n)
    zeta: np.ndarray = field(repr=False)  # (L + 1, n); row k is what was added going into x[k + 1]
    faults: FaultModel = NO_FAULTS

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def x0(self) -> np.ndarray:
        return self.states[0]

    def observation(self, i: int, k: int) -> np.ndarray:
        """y_i[k] = C_i x[k]: own value first, then neighbours in index order."""
        rows = [v - 1 for v in self.weights.graph.observed(i)]
        return self.states[k, rows]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def _check_faults(faults: FaultModel, n: int):
    if len(faults) > n:
        raise ValueError(f"{len(faults)} faulty vehicles in a network of {n}")
    for f in faults.faults:
        if not 1 <= f.vehicle <= n:
            raise IndexError(f"fault vehicle {f.vehicle} outside 1..{n}")


def propagate(W: WeightMatrix, x0: np.ndarray, faults: FaultModel, L: int):
    """Core recursion; x0 may be (n,) or a batch (n, m) of initial states.

    Returns (states, zeta) with a leading time axis of length L + 1.
    """
    w = W.entries
    x = np.array(x0, dtype=float)
    _check_faults(faults, W.n)
    if x.shape[0] != W.n:
        raise ValueError(f"x0 has {x.shape[0]} entries, network has {W.n} vehicles")
    if L < 0:
        raise ValueError("horizon must be >= 0")
    states = np.empty((L + 1,) + x.shape)
    zeta = np.zeros((L + 1,) + x.shape)
    states[0] = x
    for k in range(L + 1):
        for f in faults.faults:
            r = f.vehicle - 1
            if f.mode == PACKET_DROP:
                off = w[r].copy()
                off[r] = 0.0
                zeta[k, r] = -(off @ states[k])
            else:
                zeta[k, r] = f.value(k)
        if k < L:
            states[k + 1] = w @ states[k] + zeta[k]
    return states, zeta


def run(W: WeightMatrix, x0, faults: FaultModel = NO_FAULTS, L: int = 0) -> IterationTrace:
    states, zeta = propagate(W, np.asarray(x0, dtype=float).reshape(-1), faults, L)
    states.setflags(write=False)
    zeta.setflags(write=False)
    return IterationTrace(W, states, zeta, faults)


def replay(W: WeightMatrix, x0, zeta: np.ndarray) -> np.ndarray:
    """Recompute states from x0 and a recorded additive zeta history."""
    w = W.entries
    states = np.empty((zeta.shape[0], W.n))
    states[0] = x0
    for k in range(zeta.shape[0] - 1):
        states[k + 1] = w @ states[k] + zeta[k]
    return states


def observe(trace: IterationTrace, i: int, L: int) -> np.ndarray:
    """Stacked y_i[0], ..., y_i[L]; length (L + 1)(d_i + 1)."""
    if L > trace.horizon:
        raise ValueError(f"horizon {L} exceeds trace horizon {trace.horizon}")
    if L < 0:
        raise ValueError("horizon must be >= 0")
    rows = [v - 1 for v in trace.weights.graph.observed(i)]
    return trace.states[: L + 1, rows].reshape(-1)


def stack_observations(states: np.ndarray, observed: Sequence[int], L: int) -> np.ndarray:
    """Batch version of observe() for states of shape (L' + 1, n, m)."""
    rows = [v - 1 for v in observed]
    block = states[: L + 1, rows]
    return block.reshape((L + 1) * len(rows), *states.shape[2:])


def steady_state_fault_flag(trace: IterationTrace, tol: float = 1e-6, window: int = 10) -> bool:
    """True iff max ||x[k]|| over the last ``window`` states exceeds ``tol``.

    Only meaningful for stable W: without faults the states then decay to 0.
    """
    if not trace.weights.stable:
        raise ValueError("steady-state fault flag needs a weight matrix flagged stable")
    if window < 1 or window > trace.horizon + 1:
        raise ValueError(f"window {window} not within 1..{trace.horizon + 1}")
    return bool(trace.norms()[-window:].max() > tol)


def write_trace_csv(trace: IterationTrace, path: Path, header: str | None = None):
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["step", "vehicle", "state"])
        for k, row in enumerate(trace.states):
            for v, x in enumerate(row, start=1):
                out.writerow([k, v, repr(float(x))])


def write_norms_csv(norms: np.ndarray, path: Path, header: str | None = None):
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["step", "norm"])
        for k, v in enumerate(norms):
            out.writerow([k, repr(float(v))])
