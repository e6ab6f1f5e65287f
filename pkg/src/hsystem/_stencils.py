"""Legendre-Gauss-Lobatto (GLL) nodes, weights and differentiation matrix.

With ``n`` nodes the quadrature is exact for polynomials of degree ``2n - 3`` and
``W @ D + (W @ D).T == diag(-1, 0, ..., 0, 1)`` holds to round-off (summation by
parts), so discrete Green's identities are exact on the polynomial space.
"""

from __future__ import annotations

import numpy as np
from scipy.special import eval_legendre, roots_jacobi


def gll_nodes_weights(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (ascending, on [-1, 1]) and weights of the ``n``-point GLL rule."""
    if n < 3:
        raise ValueError("GLL rule needs at least 3 nodes")
    N = n - 1
    # interior GLL nodes are the zeros of P'_N, i.e. of Jacobi P^{(1,1)}_{N-1}
    inner, _ = roots_jacobi(N - 1, 1.0, 1.0)
    x = np.concatenate([[-1.0], np.sort(inner), [1.0]])
    w = 2.0 / (N * (N + 1) * eval_legendre(N, x) ** 2)
    return x, w


def gll_diff_matrix(x: np.ndarray) -> np.ndarray:
    """Collocation derivative matrix on GLL nodes ``x`` (reference interval)."""
    n = len(x)
    N = n - 1
    PN = eval_legendre(N, x)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (PN[:, None] / PN[None, :]) / dx
    np.fill_diagonal(D, 0.0)
    # negative-sum trick: rows annihilate constants exactly
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def gll_operator(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes, weights and derivative matrix mapped to ``[a, b]``."""
    x, w = gll_nodes_weights(n)
    half = 0.5 * (b - a)
    nodes = a + half * (x + 1.0)
    nodes[0], nodes[-1] = a, b
    return nodes, w * half, gll_diff_matrix(x) / half
