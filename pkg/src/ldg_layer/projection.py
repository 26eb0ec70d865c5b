# src/ldg_layer/projection.py
"""
Local Gauss-Radau projections into Q^k.

On each element K (reference coordinates xi, eta in [-1, 1]) the projection
of z is the polynomial matching these conditions:

    MINUS   moments against P_m(xi) P_n(eta), m, n < k
            right-edge moments at xi = +1 against P_n(eta), n < k
            top-edge moments at eta = +1 against P_m(xi), m < k
            the corner value at (+1, +1)
    XPLUS   moments against P_m(xi) P_n(eta), m < k, n <= k
            left-edge moments at xi = -1 against P_n(eta), n <= k
    YPLUS   moments against P_m(xi) P_n(eta), m <= k, n < k
            bottom-edge moments at eta = -1 against P_m(xi), m <= k

The conditions are affine invariant, so one (k+1)^2 x (k+1)^2 reference
matrix per (kind, k) is factorized once and reused for every element.
"""

import logging
from enum import Enum
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .basis_quadrature import error_quadrature_points, gauss_legendre, legendre_eval, QuadRule
from .errors import NumericalFailure
from .fem_space import DiscreteField, DiscreteTriple, FemSpace

logger = logging.getLogger(__name__)

Target = Union[Callable, DiscreteField]


class ProjectionKind(Enum):
    MINUS = "minus"
    XPLUS = "xplus"
    YPLUS = "yplus"

    @classmethod
    def from_name(cls, name) -> "ProjectionKind":
        if isinstance(name, ProjectionKind):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(f"[ERROR] Unknown projection kind '{name}'. Expected minus, xplus or yplus")


def _apply_conditions(kind: ProjectionKind, k: int, sample: Callable, rule: QuadRule) -> np.ndarray:
    """
    Evaluate the defining functionals of `kind` on a batch of functions.

    Args:
        sample: sample(xi, eta) -> values with a leading batch axis, for
            broadcastable reference coordinates
        rule: Quadrature rule for the moments

    Returns:
        Array [batch, (k+1)^2] of functional values
    """
    t, w = rule.nodes, rule.weights
    P, _ = legendre_eval(k, t)  # [n, point]
    volume = sample(t[:, None], t[None, :])  # [batch, p(xi), q(eta)]
    batch = volume.shape[0]
    rows = []

    if kind is ProjectionKind.MINUS:
        rows.append(np.einsum("epq,p,q,mp,nq->enm", volume, w, w, P[:k], P[:k]).reshape(batch, -1))
        rows.append(np.einsum("eq,q,nq->en", sample(1.0, t), w, P[:k]))
        rows.append(np.einsum("ep,p,mp->em", sample(t, 1.0), w, P[:k]))
        rows.append(np.asarray(sample(1.0, 1.0)).reshape(batch, 1))
    elif kind is ProjectionKind.XPLUS:
        rows.append(np.einsum("epq,p,q,mp,nq->enm", volume, w, w, P[:k], P).reshape(batch, -1))
        rows.append(np.einsum("eq,q,nq->en", sample(-1.0, t), w, P))
    else:
        rows.append(np.einsum("epq,p,q,mp,nq->enm", volume, w, w, P, P[:k]).reshape(batch, -1))
        rows.append(np.einsum("ep,p,mp->em", sample(t, -1.0), w, P))

    return np.concatenate(rows, axis=1)


@lru_cache(maxsize=None)
def _reference_system(kind: ProjectionKind, k: int, n_points: int):
    """LU factors of the reference condition matrix (rows: conditions, columns: basis)."""
    nb = k + 1

    def basis_sample(xi, eta):
        xi, eta = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(eta, dtype=float))
        px, _ = legendre_eval(k, xi)
        py, _ = legendre_eval(k, eta)
        # batch index j = a + nb * b
        return np.einsum("a...,b...->ba...", px, py).reshape((nb * nb,) + xi.shape)

    matrix = _apply_conditions(kind, k, basis_sample, gauss_legendre(n_points)).T
    lu, piv = lu_factor(matrix)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < 1e-12 * pivots.max():
        raise NumericalFailure(
            f"Singular {kind.value} projection system for k={k} (min pivot {pivots.min():.3e})"
        )
    return lu, piv


def _element_sampler(z: Target, space: FemSpace) -> Callable:
    """sample(xi, eta) -> [element, ...] for a function or a DiscreteField."""
    if isinstance(z, DiscreteField):
        if not z.space.compatible(space):
            raise ValueError("[ERROR] Projected field lives on a different space")
        coeffs = z.tensor

        def sample(xi, eta):
            xi, eta = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(eta, dtype=float))
            px, _ = legendre_eval(space.degree, xi)
            py, _ = legendre_eval(space.degree, eta)
            return np.einsum("eba,a...,b...->e...", coeffs, px, py)

        return sample

    x0, hx, y0, hy = space.geometry()

    def sample(xi, eta):
        xi, eta = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(eta, dtype=float))
        expand = (slice(None),) + (None,) * xi.ndim
        X = x0[expand] + 0.5 * hx[expand] * (1.0 + xi)
        Y = y0[expand] + 0.5 * hy[expand] * (1.0 + eta)
        values = np.asarray(z(X, Y), dtype=float)
        return np.array(np.broadcast_to(values, X.shape))

    return sample


def project(kind: Union[ProjectionKind, str], z: Target, space: FemSpace,
            n_points: int = None) -> DiscreteField:
    """
    Project z elementwise with the local Gauss-Radau projection `kind`.

    Args:
        kind: MINUS, XPLUS or YPLUS
        z: Continuous function z(x, y) on the closed square, or a DiscreteField
            (projected element by element using its own polynomial)
        space: Target space
        n_points: Moment quadrature points per direction (default max(5, k+3))

    Returns:
        DiscreteField on space
    """
    kind = ProjectionKind.from_name(kind)
    k = space.degree
    n_points = n_points or error_quadrature_points(k)
    lu, piv = _reference_system(kind, k, n_points)
    rhs = _apply_conditions(kind, k, _element_sampler(z, space), gauss_legendre(n_points))
    coeffs = lu_solve((lu, piv), rhs.T).T
    if not np.all(np.isfinite(coeffs)):
        raise NumericalFailure(f"Non-finite {kind.value} projection coefficients")
    return DiscreteField(space, coeffs)


def project_triple(problem, space: FemSpace) -> DiscreteTriple:
    """Pi w = (Pi^- u, Pi_x^+ (eps u_x), Pi_y^+ (eps u_y))."""
    exact = problem.require_exact()
    eps = problem.epsilon
    return DiscreteTriple(
        project(ProjectionKind.MINUS, exact.u, space),
        project(ProjectionKind.XPLUS, lambda x, y: eps * exact.u_x(x, y), space),
        project(ProjectionKind.YPLUS, lambda x, y: eps * exact.u_y(x, y), space),
    )


def _element_sup(sample: Callable, n_points: int) -> np.ndarray:
    """Sampled max |.| per element on the quadrature nodes plus the element boundary."""
    t = np.concatenate(([-1.0], gauss_legendre(n_points).nodes, [1.0]))
    values = sample(t[:, None], t[None, :])
    return np.abs(values).reshape(values.shape[0], -1).max(axis=1)


def projection_residuals(kind: Union[ProjectionKind, str], z: Target, field: DiscreteField,
                         n_points: int = None) -> np.ndarray:
    """
    Per-element defining-condition residuals of field as a projection of z.

    Returns:
        max_c |cond_c(z) - cond_c(field)| / max|z| per element (absolute where z vanishes)
    """
    kind = ProjectionKind.from_name(kind)
    space = field.space
    n_points = n_points or error_quadrature_points(space.degree)
    rule = gauss_legendre(n_points)
    z_sample = _element_sampler(z, space)
    target = _apply_conditions(kind, space.degree, z_sample, rule)
    achieved = _apply_conditions(kind, space.degree, _element_sampler(field, space), rule)
    scale = _element_sup(z_sample, n_points)
    scale = np.where(scale > 0, scale, 1.0)
    return np.abs(target - achieved).max(axis=1) / scale


def projection_max_error(kind: Union[ProjectionKind, str], z: Callable, space: FemSpace,
                         region: str = "all", n_samples: int = 7) -> float:
    """Sampled max |z - Pi z| over the elements of a subregion ('omega11', 'omega_x', 'omega_y', 'all')."""
    field = project(kind, z, space)
    mask = space.mesh.region_mask(region)
    t = np.linspace(-1.0, 1.0, n_samples)
    diff = _element_sampler(z, space)(t[:, None], t[None, :]) \
        - _element_sampler(field, space)(t[:, None], t[None, :])
    return float(np.abs(diff[mask]).max())
