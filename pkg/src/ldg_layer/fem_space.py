# src/ldg_layer/fem_space.py
"""
Discontinuous tensor-product space V_N and discrete fields on it.

Degree-of-freedom layout (element-major):

    global = (e * 3 + component) * (k+1)^2 + local
    e      = ix + Nx * iy
    local  = a + (k+1) * b       (P_a(xi) P_b(eta))

Components are U = 0, P = 1, Q = 2.
"""

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional, Tuple

import numpy as np

from .basis_quadrature import BasisSet, eval_field, gauss_legendre, error_quadrature_points
from .meshgen import TensorMesh


class Component(IntEnum):
    U = 0
    P = 1
    Q = 2


N_COMPONENTS = 3


@dataclass(frozen=True, eq=False)
class FemSpace:
    """V_N on a tensor mesh with polynomial degree k."""

    mesh: TensorMesh
    degree: int
    basis: BasisSet = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "basis", BasisSet(self.degree))

    @property
    def nb(self) -> int:
        return self.degree + 1

    @property
    def nloc(self) -> int:
        return self.nb ** 2

    @property
    def n_elements(self) -> int:
        return self.mesh.n_elements

    @property
    def n_dofs(self) -> int:
        return N_COMPONENTS * self.nloc * self.n_elements

    def element_index(self, ix, iy):
        return np.asarray(ix) + self.mesh.Nx * np.asarray(iy)

    def dof_index(self, element, component, local):
        """Global index of (element, component, local)."""
        return (np.asarray(element) * N_COMPONENTS + np.asarray(component)) * self.nloc + np.asarray(local)

    def dof_triple(self, index) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Inverse of dof_index."""
        index = np.asarray(index)
        if np.any((index < 0) | (index >= self.n_dofs)):
            raise ValueError(f"[ERROR] dof index out of range [0, {self.n_dofs})")
        block, local = np.divmod(index, self.nloc)
        element, component = np.divmod(block, N_COMPONENTS)
        return element, component, local

    def component_dofs(self, component: int) -> np.ndarray:
        """(n_elements, nloc) array of global indices for one component."""
        e = np.arange(self.n_elements)[:, None]
        return self.dof_index(e, int(component), np.arange(self.nloc)[None, :])

    def geometry(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Per-element (x0, hx, y0, hy) in element order."""
        xp, yp = self.mesh.x_mesh.points, self.mesh.y_mesh.points
        Nx, Ny = self.mesh.Nx, self.mesh.Ny
        x0 = np.tile(xp[:-1], Ny)
        hx = np.tile(np.diff(xp), Ny)
        y0 = np.repeat(yp[:-1], Nx)
        hy = np.repeat(np.diff(yp), Nx)
        return x0, hx, y0, hy

    def quadrature_points(self, n_points: int):
        """
        Physical tensor quadrature points and weights.

        Returns:
            (X, Y, W), each of shape (n_elements, n_points, n_points) indexed
            [e, p, q] with p along x and q along y; W includes the Jacobian.
        """
        rule = gauss_legendre(n_points)
        x0, hx, y0, hy = self.geometry()
        X = x0[:, None] + 0.5 * hx[:, None] * (rule.nodes[None, :] + 1.0)
        Y = y0[:, None] + 0.5 * hy[:, None] * (rule.nodes[None, :] + 1.0)
        X3 = np.broadcast_to(X[:, :, None], (self.n_elements, n_points, n_points))
        Y3 = np.broadcast_to(Y[:, None, :], (self.n_elements, n_points, n_points))
        W = (0.25 * hx * hy)[:, None, None] * np.outer(rule.weights, rule.weights)[None]
        return X3, Y3, W

    def compatible(self, other: "FemSpace") -> bool:
        if self is other:
            return True
        return (
            self.degree == other.degree
            and np.array_equal(self.mesh.x_mesh.points, other.mesh.x_mesh.points)
            and np.array_equal(self.mesh.y_mesh.points, other.mesh.y_mesh.points)
        )


@dataclass(eq=False)
class DiscreteField:
    """A function in V_N: coeffs[e, local]."""

    space: FemSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        expected = (self.space.n_elements, self.space.nloc)
        if self.coeffs.shape != expected:
            raise ValueError(f"[ERROR] Field coefficients must have shape {expected}, got {self.coeffs.shape}")

    @classmethod
    def zeros(cls, space: FemSpace) -> "DiscreteField":
        return cls(space, np.zeros((space.n_elements, space.nloc)))

    @classmethod
    def constant(cls, space: FemSpace, value: float) -> "DiscreteField":
        coeffs = np.zeros((space.n_elements, space.nloc))
        coeffs[:, 0] = value
        return cls(space, coeffs)

    @classmethod
    def l2_projection(cls, space: FemSpace, func: Callable, n_points: Optional[int] = None) -> "DiscreteField":
        """Elementwise L2 projection of func(x, y); exact for func in Q^k."""
        n_points = n_points or error_quadrature_points(space.degree)
        rule = gauss_legendre(n_points)
        X, Y, _ = space.quadrature_points(n_points)
        values = np.broadcast_to(np.asarray(func(X, Y), dtype=float), X.shape)
        B, _ = space.basis.tabulate(rule.nodes)
        w = rule.weights
        moments = np.einsum("epq,p,q,pa,qb->eba", values, w, w, B, B)
        m = space.basis.mass_1d()
        coeffs = moments / np.outer(m, m)[None]
        return cls(space, coeffs.reshape(space.n_elements, space.nloc))

    @property
    def tensor(self) -> np.ndarray:
        """Coefficients viewed as [e, b, a]."""
        nb = self.space.nb
        return self.coeffs.reshape(-1, nb, nb)

    def __call__(self, x, y):
        return eval_field(self, x, y)

    def values_at(self, Bx: np.ndarray, By: np.ndarray) -> np.ndarray:
        """Values at tensor reference points: tables Bx[p, a], By[q, b] -> [e, p, q]."""
        return np.einsum("eba,pa,qb->epq", self.tensor, Bx, By)

    def gradient_at(self, Bx, dBx, By, dBy):
        """Physical (d/dx, d/dy) at tensor reference points, each [e, p, q]."""
        _, hx, _, hy = self.space.geometry()
        dx = np.einsum("eba,pa,qb->epq", self.tensor, dBx, By) * (2.0 / hx)[:, None, None]
        dy = np.einsum("eba,pa,qb->epq", self.tensor, Bx, dBy) * (2.0 / hy)[:, None, None]
        return dx, dy

    def trace_x(self, end: np.ndarray, By: np.ndarray) -> np.ndarray:
        """Values on the vertical edge xi = +-1 of every element (end = basis.plus/minus) -> [e, q]."""
        return np.einsum("eba,a,qb->eq", self.tensor, end, By)

    def trace_y(self, end: np.ndarray, Bx: np.ndarray) -> np.ndarray:
        """Values on the horizontal edge eta = +-1 of every element -> [e, p]."""
        return np.einsum("eba,pa,b->ep", self.tensor, Bx, end)

    def _check(self, other: "DiscreteField"):
        if not self.space.compatible(other.space):
            raise ValueError("[ERROR] Discrete fields live on different spaces")

    def __add__(self, other: "DiscreteField") -> "DiscreteField":
        self._check(other)
        return DiscreteField(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "DiscreteField") -> "DiscreteField":
        self._check(other)
        return DiscreteField(self.space, self.coeffs - other.coeffs)

    def __neg__(self) -> "DiscreteField":
        return DiscreteField(self.space, -self.coeffs)

    def __mul__(self, scalar: float) -> "DiscreteField":
        return DiscreteField(self.space, float(scalar) * self.coeffs)

    __rmul__ = __mul__


@dataclass(eq=False)
class DiscreteTriple:
    """W = (U, P, Q) in V_N^3."""

    u_field: DiscreteField
    p_field: DiscreteField
    q_field: DiscreteField

    def __post_init__(self):
        space = self.u_field.space
        for f in (self.p_field, self.q_field):
            if not space.compatible(f.space):
                raise ValueError("[ERROR] DiscreteTriple components must share one FemSpace")

    @property
    def space(self) -> FemSpace:
        return self.u_field.space

    @property
    def fields(self) -> Tuple[DiscreteField, DiscreteField, DiscreteField]:
        return self.u_field, self.p_field, self.q_field

    @classmethod
    def zeros(cls, space: FemSpace) -> "DiscreteTriple":
        return cls(DiscreteField.zeros(space), DiscreteField.zeros(space), DiscreteField.zeros(space))

    @classmethod
    def from_vector(cls, space: FemSpace, vec: np.ndarray) -> "DiscreteTriple":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (space.n_dofs,):
            raise ValueError(f"[ERROR] Vector length {vec.shape} does not match {space.n_dofs} dofs")
        blocks = vec.reshape(space.n_elements, N_COMPONENTS, space.nloc)
        return cls(*(DiscreteField(space, blocks[:, c, :].copy()) for c in Component))

    @classmethod
    def random(cls, space: FemSpace, rng: np.random.Generator) -> "DiscreteTriple":
        return cls.from_vector(space, rng.standard_normal(space.n_dofs))

    def to_vector(self) -> np.ndarray:
        return np.stack([f.coeffs for f in self.fields], axis=1).ravel()

    def __add__(self, other: "DiscreteTriple") -> "DiscreteTriple":
        return DiscreteTriple(*(a + b for a, b in zip(self.fields, other.fields)))

    def __sub__(self, other: "DiscreteTriple") -> "DiscreteTriple":
        return DiscreteTriple(*(a - b for a, b in zip(self.fields, other.fields)))

    def __neg__(self) -> "DiscreteTriple":
        return DiscreteTriple(*(-a for a in self.fields))

    def __mul__(self, scalar: float) -> "DiscreteTriple":
        return DiscreteTriple(*(a * scalar for a in self.fields))

    __rmul__ = __mul__
