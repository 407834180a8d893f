"""Iteration weight matrices conforming to a communication graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .topology import Graph

WEIGHT_LOW = 0.5
WEIGHT_HIGH = 1.5
DEFAULT_RHO_MAX = 0.9


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    entries: np.ndarray = field(repr=False)
    graph: Graph
    stable: bool = False

    def __post_init__(self):
        w = np.array(self.entries, dtype=float)
        if w.shape != (self.graph.n, self.graph.n):
            raise ValueError(f"weight matrix must be {self.graph.n}x{self.graph.n}, got {w.shape}")
        if not validate_sparsity(w, self.graph):
            raise ValueError("weight matrix has nonzeros outside adjacency + diagonal")
        if self.stable and spectral_radius(w) >= 1.0:
            raise ValueError("matrix flagged stable but spectral radius >= 1")
        w.setflags(write=False)
        object.__setattr__(self, "entries", w)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def spectral_radius(self) -> float:
        return spectral_radius(self.entries)


def spectral_radius(w: np.ndarray) -> float:
    w = np.atleast_2d(w)
    if w.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(w))))


def pattern(g: Graph) -> np.ndarray:
    return g.adjacency | np.eye(g.n, dtype=bool)


def validate_sparsity(w, g: Graph) -> bool:
    """True iff every nonzero of w lies on an edge or the diagonal of g."""
    w = np.asarray(w.entries if isinstance(w, WeightMatrix) else w, dtype=float)
    if w.shape != (g.n, g.n):
        raise ValueError(f"dimension mismatch: matrix {w.shape}, graph has n={g.n}")
    return not np.any((w != 0) & ~pattern(g))


def random_weights(
    g: Graph, seed: int, stable: bool = True, rho_max: float = DEFAULT_RHO_MAX
) -> WeightMatrix:
    """Uniform[0.5, 1.5] weights on the sparsity pattern of g.

    With ``stable`` the whole matrix is rescaled so its spectral radius is
    exactly ``rho_max``; the pattern and positivity are unchanged.
    """
    if not 0.0 < rho_max < 1.0:
        raise ValueError(f"rho_max must lie in (0, 1), got {rho_max}")
    rng = np.random.default_rng(seed)
    mask = pattern(g)
    w = np.zeros((g.n, g.n))
    w[mask] = rng.uniform(WEIGHT_LOW, WEIGHT_HIGH, size=int(mask.sum()))
    if stable:
        w *= rho_max / spectral_radius(w)
    return WeightMatrix(w, g, stable=stable)


def from_rows(rows, g: Graph, stable: bool | None = None) -> WeightMatrix:
    """Explicit matrix (row-major nested lists); stability inferred unless given."""
    w = np.asarray(rows, dtype=float)
    if stable is None:
        stable = w.shape == (g.n, g.n) and spectral_radius(w) < 1.0
    return WeightMatrix(w, g, stable=stable)
