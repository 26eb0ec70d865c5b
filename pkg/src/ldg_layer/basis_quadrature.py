# src/ldg_layer/basis_quadrature.py
"""
Legendre basis and Gauss-Legendre quadrature on the reference interval [-1, 1].

The local space Q^k(K) is spanned by tensor products P_a(xi) * P_b(eta),
0 <= a, b <= k, mapped affinely from K to [-1, 1]^2. The local index of
P_a(xi) P_b(eta) is a + (k+1) * b.

Usage:
    rule = gauss_legendre(5)
    basis = BasisSet(2)
    values, derivs = basis.tabulate(rule.nodes)
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np

MAX_GAUSS_POINTS = 32
NEWTON_TOL = 1e-15
NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class QuadRule:
    """n-point Gauss-Legendre rule on [-1, 1]"""

    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def integrate(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        """Apply the rule along `axis` of values sampled at the nodes."""
        return np.tensordot(np.moveaxis(values, axis, -1), self.weights, axes=([-1], [0]))

    def mapped(self, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes and weights on [a, b]."""
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights


def _legendre_with_derivative(n: int, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """P_n(t) and P_n'(t) by the three-term recurrence."""
    p_prev = np.ones_like(t)
    if n == 0:
        return p_prev, np.zeros_like(t)
    p = t.copy()
    for m in range(1, n):
        p_prev, p = p, ((2 * m + 1) * t * p - m * p_prev) / (m + 1)
    dp = n * (t * p - p_prev) / (t * t - 1.0)
    return p, dp


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadRule:
    """
    Gauss-Legendre rule with n points.

    Nodes are the roots of P_n, found by Newton iteration from the Chebyshev
    guesses cos(pi (i - 1/4) / (n + 1/2)); weights are 2 / ((1 - t^2) P_n'(t)^2).

    Args:
        n: Number of points, 1 <= n <= 32

    Returns:
        QuadRule with ascending nodes and symmetric positive weights

    Raises:
        ValueError: If n is outside [1, 32]
    """
    if int(n) != n or not 1 <= n <= MAX_GAUSS_POINTS:
        raise ValueError(
            f"[ERROR] Gauss-Legendre order must be an integer in [1, {MAX_GAUSS_POINTS}], got {n}"
        )
    n = int(n)
    if n == 1:
        nodes, weights = np.array([0.0]), np.array([2.0])
    else:
        i = np.arange(1, n + 1)
        t = np.cos(math.pi * (i - 0.25) / (n + 0.5))
        for _ in range(NEWTON_MAX_ITER):
            p, dp = _legendre_with_derivative(n, t)
            step = p / dp
            t = t - step
            if np.max(np.abs(step)) < NEWTON_TOL:
                break
        _, dp = _legendre_with_derivative(n, t)
        weights = 2.0 / ((1.0 - t * t) * dp * dp)
        order = np.argsort(t)
        t, weights = t[order], weights[order]
        # enforce exact symmetry about 0
        nodes = 0.5 * (t - t[::-1])
        weights = 0.5 * (weights + weights[::-1])
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadRule(order=n, nodes=nodes, weights=weights)


def legendre_eval(k: int, t) -> Tuple[np.ndarray, np.ndarray]:
    """
    Values and derivatives of P_0..P_k at t.

    Args:
        k: Highest degree (>= 0)
        t: Scalar or array of reference coordinates in [-1, 1]

    Returns:
        (values, derivatives), each of shape (k+1,) + shape(t)
    """
    t = np.asarray(t, dtype=float)
    values = np.empty((k + 1,) + t.shape)
    derivs = np.empty_like(values)
    values[0] = 1.0
    derivs[0] = 0.0
    if k >= 1:
        values[1] = t
        derivs[1] = 1.0
    for n in range(1, k):
        values[n + 1] = ((2 * n + 1) * t * values[n] - n * values[n - 1]) / (n + 1)
        # P'_{n+1} = P'_{n-1} + (2n+1) P_n, exact at t = +-1
        derivs[n + 1] = derivs[n - 1] + (2 * n + 1) * values[n]
    return values, derivs


@dataclass(frozen=True)
class BasisSet:
    """Tensor Legendre basis of Q^k on the reference square."""

    degree: int

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError(f"[ERROR] Polynomial degree k must be an integer >= 1, got {self.degree}")

    @property
    def n1d(self) -> int:
        return self.degree + 1

    @property
    def nloc(self) -> int:
        return self.n1d ** 2

    def tabulate(self, t) -> Tuple[np.ndarray, np.ndarray]:
        """Point-major tables: values[p, a] = P_a(t_p), derivs[p, a] = P_a'(t_p)."""
        values, derivs = legendre_eval(self.degree, np.atleast_1d(t))
        return values.T.copy(), derivs.T.copy()

    @property
    def plus(self) -> np.ndarray:
        """P_a(+1)"""
        return np.ones(self.n1d)

    @property
    def minus(self) -> np.ndarray:
        """P_a(-1) = (-1)^a"""
        return (-1.0) ** np.arange(self.n1d)

    def mass_1d(self) -> np.ndarray:
        """Diagonal of the 1D reference mass matrix, 2 / (2a + 1)."""
        return 2.0 / (2.0 * np.arange(self.n1d) + 1.0)

    def reference_mass(self) -> np.ndarray:
        """(k+1)^2 x (k+1)^2 reference mass matrix in local ordering a + (k+1) b."""
        m = self.mass_1d()
        return np.diag(np.outer(m, m).ravel())

    def local_index(self, a: int, b: int) -> int:
        return a + self.n1d * b


def error_quadrature_points(k: int) -> int:
    """Points per direction for integrals involving the exact solution."""
    return max(5, k + 3)


def locate(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Interval index of x; a point on x_i (i >= 1) belongs to interval i-1 (the left one)."""
    idx = np.searchsorted(points, x, side="left") - 1
    return np.clip(idx, 0, len(points) - 2)


def eval_field(field, x, y):
    """
    Evaluate a DiscreteField at physical points.

    Points lying on an element edge are assigned to the element on the
    left/below, so the result equals the one-sided trace v^-.

    Args:
        field: DiscreteField (anything with .space.mesh, .space.degree and .coeffs)
        x, y: Scalars or broadcastable arrays in [0, 1]

    Returns:
        Float for scalar input, otherwise an array of the broadcast shape

    Raises:
        ValueError: If any point lies outside the closed unit square
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    scalar = x.ndim == 0
    shape = x.shape
    x, y = x.ravel(), y.ravel()
    if np.any((x < 0.0) | (x > 1.0) | (y < 0.0) | (y > 1.0)) or np.any(np.isnan(x) | np.isnan(y)):
        raise ValueError("[ERROR] eval_field: point outside [0, 1]^2")

    mesh = field.space.mesh
    xp, yp = mesh.x_mesh.points, mesh.y_mesh.points
    ix, iy = locate(xp, x), locate(yp, y)
    xi = 2.0 * (x - xp[ix]) / (xp[ix + 1] - xp[ix]) - 1.0
    eta = 2.0 * (y - yp[iy]) / (yp[iy + 1] - yp[iy]) - 1.0

    k = field.space.degree
    px, _ = legendre_eval(k, xi)
    py, _ = legendre_eval(k, eta)
    coeffs = field.coeffs.reshape(-1, k + 1, k + 1)[ix + mesh.Nx * iy]  # [pt, b, a]
    result = np.einsum("nba,an,bn->n", coeffs, px, py)
    return float(result[0]) if scalar else result.reshape(shape)
