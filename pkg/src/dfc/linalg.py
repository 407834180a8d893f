"""SVD-based numerical rank, null spaces and truncated pseudo-inverses.

All routines share one tolerance rule, ``max(m, n) * eps * sigma_max``, so
that rank decisions made in different places agree with each other.
"""

from __future__ import annotations

import numpy as np

EPS = np.finfo(float).eps


def rank_tol(shape: tuple[int, int], sigma_max: float) -> float:
    return max(shape) * EPS * sigma_max


def numerical_rank(a: np.ndarray) -> int:
    a = np.atleast_2d(a)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rank_tol(a.shape, s[0])))


def left_null_space(a: np.ndarray) -> np.ndarray:
    """Orthonormal rows spanning {z : z @ a = 0}.

    Returns an array of shape (m - rank, m). A matrix without columns has the
    whole space as its left null space.
    """
    a = np.atleast_2d(a)
    m = a.shape[0]
    if a.shape[1] == 0 or not np.any(a):
        return np.eye(m)
    u, s, _ = np.linalg.svd(a, full_matrices=True)
    r = int(np.count_nonzero(s > rank_tol(a.shape, s[0])))
    return u[:, r:].T.copy()


def pinv(a: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(a)
    if a.size == 0 or not np.any(a):
        return np.zeros((a.shape[1], a.shape[0]))
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > rank_tol(a.shape, s[0])
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (vt.T * inv_s) @ u.T
