"""Reconstruction of x[0] from one vehicle's observations.

Fault-free decoding inverts the observability matrix O_{i,L} directly.
Robust decoding handles up to f misbehaving vehicles whose identity is
unknown: every candidate fault support S of size f is tried, the left null
space of the matching invertibility matrix M^S cancels whatever S injected,
and the candidate is kept when the projected observations are consistent.
Under the 2f rank condition every consistent candidate yields the same x[0].
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import linalg
from .iteration import IterationTrace, observe, propagate, NO_FAULTS
from .topology import Graph
from .weights import WeightMatrix

DEFAULT_MAX_SUPPORTS = 200_000
DEFAULT_DECODER_TOL = 1e-7
DEFAULT_AGREE_TOL = 1e-4


class EnumerationLimitError(RuntimeError):
    """Support-set enumeration would exceed the configured cap."""


@dataclass(frozen=True, eq=False)
class ObservabilityMatrix:
    matrix: np.ndarray = field(repr=False)
    owner: int
    horizon: int
    observed: tuple[int, ...]

    @property
    def block_rows(self) -> int:
        return len(self.observed)

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    def block(self, k: int) -> np.ndarray:
        m = self.block_rows
        return self.matrix[k * m : (k + 1) * m]

    def truncate(self, L: int) -> "ObservabilityMatrix":
        if L > self.horizon:
            raise ValueError(f"cannot extend horizon {self.horizon} to {L} by truncation")
        return ObservabilityMatrix(
            self.matrix[: (L + 1) * self.block_rows], self.owner, L, self.observed
        )


@dataclass(frozen=True, eq=False)
class InvertibilityMatrix:
    matrix: np.ndarray = field(repr=False)
    owner: int
    horizon: int
    support: tuple[int, ...]


@dataclass(frozen=True)
class RecoveryResult:
    x0_estimate: np.ndarray = field(repr=False)
    success: bool
    fault_support_estimate: frozenset = frozenset()
    residual_norm: float = 0.0
    cause: str = ""


def observability_matrix(W: WeightMatrix, i: int, L: int) -> ObservabilityMatrix:
    """Row blocks C_i W^k for k = 0..L."""
    if L < 0:
        raise ValueError("horizon must be >= 0")
    g = W.graph
    c = g.selection(i)
    blocks = [c]
    for _ in range(L):
        blocks.append(blocks[-1] @ W.entries)
    return ObservabilityMatrix(np.vstack(blocks), i, L, tuple(g.observed(i)))


def distributed_observability_all(
    g: Graph, W: WeightMatrix, horizons: dict[int, int] | None = None
) -> dict[int, ObservabilityMatrix]:
    """n lockstep runs from the unit initial states, read off by every vehicle.

    Vehicle i keeps k_i = n - d_i - 1 steps unless ``horizons`` asks otherwise;
    the runs last as long as the largest requested horizon (n - d_min - 1 by
    default).
    """
    if W.graph != g:
        raise ValueError("weight matrix does not conform to the given graph")
    if horizons is None:
        horizons = {i: g.n - g.degree(i) - 1 for i in range(1, g.n + 1)}
    steps = max(horizons.values())
    # column j of the batch is the run started from e_j
    states, _ = propagate(W, np.eye(g.n), NO_FAULTS, steps)
    out = {}
    for i, k_i in horizons.items():
        observed = g.observed(i)
        rows = [v - 1 for v in observed]
        psi = states[: k_i + 1, rows, :].reshape((k_i + 1) * len(rows), g.n)
        out[i] = ObservabilityMatrix(psi, i, k_i, tuple(observed))
    return out


def distributed_observability(
    g: Graph, W: WeightMatrix, i: int, horizon: int | None = None
) -> ObservabilityMatrix:
    if horizon is None:
        horizon = g.n - g.degree(i) - 1
    return distributed_observability_all(g, W, {i: horizon})[i]


def left_inverse(O: ObservabilityMatrix) -> np.ndarray:
    """Gamma with Gamma O = I whenever O has full column rank."""
    return linalg.pinv(O.matrix)


def recover_fault_free(O: ObservabilityMatrix, y) -> RecoveryResult:
    y = np.asarray(y, dtype=float)
    if y.shape[0] != O.matrix.shape[0]:
        raise ValueError(
            f"observation length {y.shape[0]} does not match observability rows {O.matrix.shape[0]}"
        )
    x = left_inverse(O) @ y
    residual = float(np.linalg.norm(O.matrix @ x - y))
    full = linalg.numerical_rank(O.matrix) == O.n
    return RecoveryResult(x, full, frozenset(), residual, "" if full else "observability matrix rank deficient")


def invertibility_matrix(O: ObservabilityMatrix, support: Sequence[int]) -> InvertibilityMatrix:
    """Block lower-triangular map from injected values on ``support`` to y_i[0..L].

    Block (r, c) is C_i W^(r-c-1) B for r > c. Since C_i W^k e_j is column j
    of the k-th block of O, the owner needs nothing beyond O itself.
    """
    L, m = O.horizon, O.block_rows
    cols = [v - 1 for v in support]
    s = len(cols)
    M = np.zeros(((L + 1) * m, (L + 1) * s))
    if s:
        for r in range(1, L + 1):
            for c in range(r):
                M[r * m : (r + 1) * m, c * s : (c + 1) * s] = O.block(r - c - 1)[:, cols]
    return InvertibilityMatrix(M, O.owner, L, tuple(support))


def candidate_supports(n: int, size: int) -> list[tuple[int, ...]]:
    # the owner is a candidate too: a misbehaving vehicle decodes its own view
    return list(itertools.combinations(range(1, n + 1), size))


def _check_budget(n: int, size: int, cap: int):
    count = math.comb(n, size)
    if count > cap:
        raise EnumerationLimitError(
            f"{count} candidate fault sets of size {size} exceed the cap of {cap}; "
            "raise max_supports or lower the fault budget f"
        )


def rank_condition(
    W: WeightMatrix, i: int, f: int, L: int, max_supports: int = DEFAULT_MAX_SUPPORTS,
    O: ObservabilityMatrix | None = None,
) -> bool:
    """rank([O M^I]) == n + rank(M^I) for every set I of 2f vehicles."""
    n = W.n
    if 2 * f > n:
        raise ValueError(f"2f = {2 * f} exceeds network size {n}")
    if L < 0:
        raise ValueError("horizon must be >= 0")
    _check_budget(n, 2 * f, max_supports)
    if O is None:
        O = observability_matrix(W, i, L)
    for support in candidate_supports(n, 2 * f):
        M = invertibility_matrix(O, support).matrix
        if linalg.numerical_rank(np.hstack([O.matrix, M])) != n + linalg.numerical_rank(M):
            return False
    return True


@dataclass(frozen=True, eq=False)
class RobustDecoder:
    """Precomputed projections for every candidate support of one vehicle.

    For support S: N spans the left null space of M^S, P = (N O)^+ N and
    x0 = P y; consistency is measured by ||N y - N O x0||. A consistent
    support whose projected observability N O is rank deficient leaves x0
    undetermined, so it makes the decode ambiguous.
    """

    O: ObservabilityMatrix
    supports: tuple[tuple[int, ...], ...]
    P: tuple[np.ndarray, ...] = field(repr=False)
    R: tuple[np.ndarray, ...] = field(repr=False)
    unique: tuple[bool, ...] = ()
    tol: float = DEFAULT_DECODER_TOL
    agree_tol: float = DEFAULT_AGREE_TOL

    @classmethod
    def build(
        cls, O: ObservabilityMatrix, f: int, tol: float = DEFAULT_DECODER_TOL,
        agree_tol: float = DEFAULT_AGREE_TOL, max_supports: int = DEFAULT_MAX_SUPPORTS,
    ) -> "RobustDecoder":
        _check_budget(O.n, f, max_supports)
        supports, Ps, Rs, unique = [], [], [], []
        for support in candidate_supports(O.n, f):
            N = linalg.left_null_space(invertibility_matrix(O, support).matrix)
            NO = N @ O.matrix
            P = linalg.pinv(NO) @ N
            supports.append(support)
            Ps.append(P)
            Rs.append(N - NO @ P)
            unique.append(linalg.numerical_rank(NO) == O.n)
        return cls(O, tuple(supports), tuple(Ps), tuple(Rs), tuple(unique), tol, agree_tol)

    def decode(self, y) -> RecoveryResult:
        y = np.asarray(y, dtype=float)
        x, ok, idx, res, cause = self.decode_batch(y[:, None])
        support = frozenset(self.supports[idx[0]]) if idx[0] >= 0 else frozenset()
        return RecoveryResult(x[:, 0], bool(ok[0]), support, float(res[0]), cause[0])

    def decode_batch(self, Y: np.ndarray):
        """Decode columns of Y independently.

        Returns (X, success, support_index, residual, cause); support_index is
        -1 where nothing was accepted. The lowest-index consistent support wins.
        """
        Y = np.asarray(Y, dtype=float)
        if Y.shape[0] != self.O.matrix.shape[0]:
            raise ValueError(
                f"observation length {Y.shape[0]} does not match observability rows "
                f"{self.O.matrix.shape[0]}"
            )
        m = Y.shape[1]
        n = self.O.n
        scale = np.maximum(np.linalg.norm(Y, axis=0), 1.0)
        X = np.zeros((n, m))
        chosen = np.full(m, -1)
        best_res = np.full(m, np.inf)
        best_x = np.zeros((n, m))
        ambiguous = np.zeros(m, dtype=bool)
        loose = np.zeros(m, dtype=bool)
        for s, (P, R, uniq) in enumerate(zip(self.P, self.R, self.unique)):
            xs = P @ Y
            res = np.linalg.norm(R @ Y, axis=0) / scale
            consistent = res <= self.tol
            if not uniq:
                loose |= consistent
                continue
            new = consistent & (chosen < 0)
            X[:, new] = xs[:, new]
            chosen[new] = s
            old = consistent & ~new
            if np.any(old):
                gap = np.linalg.norm(xs[:, old] - X[:, old], axis=0)
                ref = np.maximum(np.linalg.norm(X[:, old], axis=0), 1.0)
                ambiguous[np.flatnonzero(old)[gap > self.agree_tol * ref]] = True
            better = res < best_res
            best_res[better] = res[better]
            best_x[:, better] = xs[:, better]
        success = (chosen >= 0) & ~ambiguous & ~loose
        residual = np.where(chosen >= 0, 0.0, best_res)
        for col in np.flatnonzero(chosen >= 0):
            s = chosen[col]
            residual[col] = np.linalg.norm(self.R[s] @ Y[:, col]) / scale[col]
        none = chosen < 0
        if not any(self.unique):
            X[:] = linalg.pinv(self.O.matrix) @ Y
        else:
            X[:, none] = best_x[:, none]
        cause = [
            "" if ok else (
                "consistent fault supports disagree on x[0]" if amb else
                "a consistent fault support leaves x[0] undetermined" if lo else
                "no consistent fault support (more than f faults or rank condition unmet)"
            )
            for ok, amb, lo in zip(success, ambiguous, loose)
        ]
        return X, success, chosen, residual, cause


def recover_robust(
    y, W: WeightMatrix, i: int, f: int, L: int,
    tol: float = DEFAULT_DECODER_TOL, max_supports: int = DEFAULT_MAX_SUPPORTS,
    O: ObservabilityMatrix | None = None,
) -> RecoveryResult:
    if O is None:
        O = observability_matrix(W, i, L)
    if f == 0:
        return recover_fault_free(O, y)
    return RobustDecoder.build(O, f, tol=tol, max_supports=max_supports).decode(y)


def recovery_error_curve(
    trace: IterationTrace, W: WeightMatrix, i: int, f: int, L_max: int,
    tol: float = DEFAULT_DECODER_TOL, max_supports: int = DEFAULT_MAX_SUPPORTS,
) -> np.ndarray:
    """||x0_hat(L) - x0|| for L = 0..L_max using vehicle i's observations.

    Where the decoder cannot succeed the estimate it falls back to (minimum
    norm least squares, or the best candidate) is still scored.
    """
    if L_max > trace.horizon:
        raise ValueError(f"L_max {L_max} exceeds trace horizon {trace.horizon}")
    full = observability_matrix(W, i, L_max)
    errors = np.empty(L_max + 1)
    for L in range(L_max + 1):
        O = full.truncate(L)
        y = observe(trace, i, L)
        if f == 0:
            result = recover_fault_free(O, y)
        else:
            result = recover_robust(y, W, i, f, L, tol=tol, max_supports=max_supports, O=O)
        errors[L] = np.linalg.norm(result.x0_estimate - trace.x0)
    return errors


def first_exact_horizon(errors: np.ndarray, tol: float = 1e-8) -> int | None:
    """Smallest L from which the error stays <= tol; None if it never settles."""
    ok = np.asarray(errors) <= tol
    for L in range(len(ok)):
        if ok[L:].all():
            return L
    return None


def write_error_curves_csv(curves: dict[int, np.ndarray], path: Path, header: str | None = None):
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["L", "steps", "vehicle", "error_norm"])
        for vehicle in sorted(curves):
            for L, e in enumerate(curves[vehicle]):
                out.writerow([L, L + 1, vehicle, repr(float(e))])
