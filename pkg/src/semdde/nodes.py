"""Interpolation node families on the reference interval [0, 1].

Each family bundles the nodes with their barycentric weights and the
spectral differentiation matrix, which is everything barycentric Lagrange
interpolation needs (Berrut & Trefethen, SIAM Review 46(3), 2004).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidArgumentError


class NodeKind(enum.Enum):
    GAUSS_LEGENDRE = "gauss_legendre"
    CHEBYSHEV_GAUSS = "chebyshev_gauss"
    CHEBYSHEV_LOBATTO = "chebyshev_lobatto"
    EQUIDISTANT = "equidistant"

    @classmethod
    def from_name(cls, name: str) -> "NodeKind":
        try:
            return cls(name)
        except ValueError:
            raise InvalidArgumentError(
                f"unknown node kind {name!r}; expected one of "
                f"{[k.value for k in cls]}"
            ) from None


@dataclass(frozen=True)
class NodeFamily:
    """Nodes on [0, 1] with barycentric weights and differentiation matrix.

    ``m`` is the actual node count (``len(nodes)``).  ``diff_matrix`` maps
    values at the nodes to values of the interpolant's derivative at the
    same nodes.
    """

    kind: NodeKind
    m: int
    nodes: np.ndarray
    bary_weights: np.ndarray
    diff_matrix: np.ndarray

    def __post_init__(self):
        for arr in (self.nodes, self.bary_weights, self.diff_matrix):
            arr.flags.writeable = False


def _legendre_value_and_derivative(n: int, x: np.ndarray):
    """Evaluate the Legendre polynomial P_n and P_n' at x in (-1, 1)."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    # P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1), valid away from +-1
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def _gauss_legendre_reference(m: int):
    """Nodes of P_m on [-1, 1] by Newton iteration, plus P_m' there.

    Chebyshev-angle initial guesses converge in a handful of iterations;
    the final sweep symmetrizes so that nodes come in exact +-x pairs.
    """
    if m == 1:
        return np.zeros(1), np.full(1, 1.0)
    j = np.arange(1, m + 1)
    x = np.cos(np.pi * (j - 0.25) / (m + 0.5))
    for _ in range(100):
        p, dp = _legendre_value_and_derivative(m, x)
        step = p / dp
        x -= step
        if np.max(np.abs(step)) < 1e-15:
            break
    x = 0.5 * (x - x[::-1])  # exact antisymmetry about 0
    _, dp = _legendre_value_and_derivative(m, x)
    return x[::-1], dp[::-1]


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Barycentric weights w_j = 1 / prod_{k!=j}(x_j - x_k), max-rescaled.

    The rescaling by the largest magnitude keeps the weights representable
    for large node counts (they only ever appear in ratios).
    """
    diff = np.subtract.outer(nodes, nodes)
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    return w / np.max(np.abs(w))


def differentiation_matrix(nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Spectral differentiation matrix from barycentric data.

    Off-diagonal entries follow Berrut & Trefethen (9.4); the diagonal is
    the negative row sum, which makes the matrix annihilate constants
    exactly.
    """
    diff = np.subtract.outer(nodes, nodes)
    np.fill_diagonal(diff, 1.0)
    d = (weights[None, :] / weights[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -np.sum(d, axis=1))
    return d


@lru_cache(maxsize=None)
def make_nodes(kind: NodeKind, m: int) -> NodeFamily:
    """Build a node family on [0, 1].  Families are immutable, so repeated
    requests share one cached instance.

    Parameters
    ----------
    kind : NodeKind
        Node placement rule.
    m : int
        Node count for the open families (Gauss-Legendre, Chebyshev-Gauss,
        equidistant).  For Chebyshev-Lobatto, ``m`` is the polynomial
        degree and the family contains ``m + 1`` nodes including both
        endpoints.

    Returns
    -------
    NodeFamily
        Strictly increasing nodes, symmetric about 1/2, with barycentric
        weights and differentiation matrix.
    """
    if m < 1:
        raise InvalidArgumentError(f"node count must be >= 1, got {m}")
    if kind == NodeKind.GAUSS_LEGENDRE:
        x, _ = _gauss_legendre_reference(m)
        nodes = (1.0 + x) / 2.0
    elif kind == NodeKind.CHEBYSHEV_GAUSS:
        j = np.arange(1, m + 1)
        nodes = (1.0 - np.cos((2 * j - 1) * np.pi / (2 * m))) / 2.0
    elif kind == NodeKind.CHEBYSHEV_LOBATTO:
        j = np.arange(m + 1)
        nodes = (1.0 - np.cos(j * np.pi / m)) / 2.0
    elif kind == NodeKind.EQUIDISTANT:
        nodes = np.array([0.5]) if m == 1 else np.linspace(0.0, 1.0, m)
    else:  # pragma: no cover
        raise InvalidArgumentError(f"unhandled node kind {kind}")
    w = barycentric_weights(nodes)
    d = differentiation_matrix(nodes, w)
    return NodeFamily(kind=kind, m=len(nodes), nodes=nodes, bary_weights=w,
                      diff_matrix=d)


def gauss_weights(family: NodeFamily) -> np.ndarray:
    """Gauss-Legendre quadrature weights on [0, 1] for the family's nodes.

    Exact for polynomials up to degree ``2 m - 1``; the weights sum to 1
    (the measure of the interval).
    """
    if family.kind != NodeKind.GAUSS_LEGENDRE:
        raise InvalidArgumentError(
            f"quadrature weights require Gauss-Legendre nodes, got {family.kind}"
        )
    m = family.m
    if m == 1:
        return np.ones(1)
    x = 2.0 * family.nodes - 1.0
    _, dp = _legendre_value_and_derivative(m, x)
    # weight on [-1,1] is 2 / ((1-x^2) P_m'(x)^2); halve for [0,1]
    return 1.0 / ((1.0 - x * x) * dp * dp)


def interpolation_matrix(family: NodeFamily, points: np.ndarray) -> np.ndarray:
    """Matrix mapping values at the family's nodes to values at ``points``.

    Row ``i`` holds the Lagrange basis evaluated at ``points[i]`` via the
    second barycentric formula; rows for points that coincide with a node
    reduce to a unit row.
    """
    points = np.asarray(points, dtype=float)
    diff = np.subtract.outer(points, family.nodes)
    hit_rows, hit_cols = np.nonzero(diff == 0.0)
    diff[hit_rows, hit_cols] = 1.0
    ratio = family.bary_weights[None, :] / diff
    denom = np.sum(ratio, axis=1)
    denom[hit_rows] = 1.0  # row is replaced below; avoid 0/0 on the way
    mat = ratio / denom[:, None]
    mat[hit_rows, :] = 0.0
    mat[hit_rows, hit_cols] = 1.0
    return mat


def lebesgue_constant(family: NodeFamily, samples: int = 10001) -> float:
    """Estimate the Lebesgue constant by dense sampling.

    Maximizes the sum of absolute Lagrange basis values over a uniform
    grid of ``samples`` points in [0, 1]; the estimate is nondecreasing
    under grid refinement with nested grids.

    ``samples`` must be at least ``10 * m`` so the grid resolves the
    oscillation of the basis sum.
    """
    if samples < 10 * family.m:
        raise InvalidArgumentError(
            f"samples must be >= 10*m = {10 * family.m}, got {samples}"
        )
    grid = np.linspace(0.0, 1.0, samples)
    basis = interpolation_matrix(family, grid)
    return float(np.max(np.sum(np.abs(basis), axis=1)))
