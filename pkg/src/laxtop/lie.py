"""Small-dimension Lie algebra arithmetic on so(3) and so(n).

Elements of so(n) are plain ``(n, n)`` numpy arrays. Coordinates are taken
as the hat preimage for ``n == 3`` and as the strictly upper triangular
entries in lexicographic order ``(1,2), (1,3), ..., (n-1,n)`` otherwise.
With the trace pairing ``-Tr(AB)/2`` both charts are orthonormal, so the
pairing of two elements is the dot product of their coordinates.
"""
from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np

__all__ = [
    "GradientPair",
    "as_skew",
    "commutator",
    "coord_labels",
    "coords_to_skew",
    "hat",
    "index_pairs",
    "lie_poisson_bracket",
    "pairing",
    "skew_to_coords",
    "unhat",
]

SKEW_ATOL = 1e-12


class GradientPair(NamedTuple):
    """Partial derivatives of a function on so(n) x so(n).

    ``d1`` is the derivative in the momentum slot, ``d2`` in the
    direction-cosine slot; both are elements of so(n).
    """

    d1: np.ndarray
    d2: np.ndarray


def as_skew(A, atol: float = SKEW_ATOL) -> np.ndarray:
    """Validate ``A`` as an element of so(n) and return a float copy."""
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if np.any(np.diag(A) != 0.0):
        raise ValueError("diagonal of a skew matrix must be exactly zero")
    if not np.allclose(A, -A.T, rtol=0.0, atol=atol):
        raise ValueError("matrix is not skew-symmetric")
    return A


def hat(v) -> np.ndarray:
    """Map a 3-vector to so(3) such that ``hat(v) @ w == cross(v, w)``."""
    v1, v2, v3 = np.asarray(v, dtype=float)
    return np.array([[0.0, -v3, v2], [v3, 0.0, -v1], [-v2, v1, 0.0]])


def unhat(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (3, 3):
        raise ValueError(f"unhat needs a 3x3 matrix, got shape {A.shape}")
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


def _check_same(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")


def commutator(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    _check_same(A, B)
    return A @ B - B @ A


def pairing(A, B) -> float:
    """Trace form ``-Tr(AB)/2``; equals the dot product of unhat images on so(3)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    _check_same(A, B)
    # -Tr(AB)/2 == sum(A * B)/2 for skew A, B; avoids forming the product
    return 0.5 * float(np.sum(A * B))


@lru_cache(maxsize=None)
def index_pairs(n: int) -> tuple[tuple[int, int], ...]:
    """Zero-based ``(i, j)``, ``i < j``, in lexicographic order."""
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


def coord_labels(n: int) -> list[str]:
    """One-based labels, e.g. ``["12", "13", ...]``; ``["1", "2", "3"]`` for n=3."""
    if n == 3:
        return ["1", "2", "3"]
    return [f"{i + 1}{j + 1}" for i, j in index_pairs(n)]


def _dim_from_ncoords(m: int) -> int:
    n = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    if n * (n - 1) // 2 != m:
        raise ValueError(f"{m} coordinates do not describe any so(n)")
    return n


def coords_to_skew(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    n = _dim_from_ncoords(c.shape[0])
    if n == 3:
        return hat(c)
    A = np.zeros((n, n))
    ii, jj = zip(*index_pairs(n))
    A[ii, jj] = c
    A[jj, ii] = -c
    return A


def skew_to_coords(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 3:
        return unhat(A)
    ii, jj = zip(*index_pairs(n))
    return A[ii, jj].copy()


def lie_poisson_bracket(f: GradientPair, g: GradientPair, point) -> float:
    """Semidirect-product Lie-Poisson bracket of two functions at ``point``.

    ``point`` is the pair ``(mu, nu)``; ``f`` and ``g`` are the gradients of
    the two functions evaluated there::

        {f, g} = -<mu, [d1f, d1g]> - <nu, [d1f, d2g]> - <nu, [d2f, d1g]>
    """
    mu, nu = (np.asarray(p, dtype=float) for p in point)
    for A in (f.d1, f.d2, g.d1, g.d2, nu):
        _check_same(mu, np.asarray(A))
    return (
        -pairing(mu, commutator(f.d1, g.d1))
        - pairing(nu, commutator(f.d1, g.d2))
        - pairing(nu, commutator(f.d2, g.d1))
    )
