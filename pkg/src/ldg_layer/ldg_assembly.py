# src/ldg_layer/ldg_assembly.py
"""
LDG System Assembly

Assembles B(W; z) = (f, v) for W = (U, P, Q) and test triples z = (v, s, r)
in V_N^3, with the upwind convection trace U^- and the alternating diffusion
traces U^- (interior, zero on the boundary) / P^+, Q^+ (interior and inflow,
P^-, Q^- on the outflow edges x = 1, y = 1).

Element contributions (reference tables B = P_a(t_q), dB = P_a'(t_q)):

    (s, P)  eps^-1 (P, s)            (r, Q)  eps^-1 (Q, r)
    (s, U)  (U, s_x)                 (r, U)  (U, r_y)
    (v, P)  (P, v_x)                 (v, Q)  (Q, v_y)
    (v, U)  ((b - div a) U, v) - (a1 U, v_x) - (a2 U, v_y)

Edge contributions on the vertical edge x_i between L (left) and R (right),
with traces "+" at xi = +1 and "-" at xi = -1 of each element:

    s_R <- U_L   +<U_L(+), s_R(-)>       s_L <- U_L   -<U_L(+), s_L(+)>
    v_R <- P_R   +<P_R(-), v_R(-)>       v_L <- P_R   -<P_R(-), v_L(+)>
    v_R <- U_L   -<a1 U_L(+), v_R(-)>    v_L <- U_L   +<a1 U_L(+), v_L(+)>

plus on x = 0: +<P(-), v(-)>, and on x = 1: -<P(+), v(+)> + <(a1 + lambda1) U(+), v(+)>.
Horizontal edges are the same with (Q, a2, lambda2, r).

Usage:
    system = assemble(space, problem, AssemblyOptions())
    x = solve(factorize(system), system.rhs)
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import scipy.io
import scipy.sparse as sp

from .basis_quadrature import gauss_legendre, MAX_GAUSS_POINTS
from .fem_space import Component, FemSpace, N_COMPONENTS

logger = logging.getLogger(__name__)

MAX_PENALTY = 1e6
PRUNE_TOL = 1e-14

U, P, Q = Component.U, Component.P, Component.Q


@dataclass(frozen=True)
class AssemblyOptions:
    """Penalty weights on the outflow edges and the assembly quadrature."""

    lambda1: float = 0.0
    lambda2: float = 0.0
    quad_points: int = 5
    condense: bool = False

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            value = getattr(self, name)
            if not 0.0 <= value <= MAX_PENALTY:
                raise ValueError(f"[ERROR] {name} must lie in [0, {MAX_PENALTY:g}], got {value}")
        if int(self.quad_points) != self.quad_points or not 1 <= self.quad_points <= MAX_GAUSS_POINTS:
            raise ValueError(
                f"[ERROR] quad_points must be an integer in [1, {MAX_GAUSS_POINTS}], got {self.quad_points}"
            )


@dataclass
class SparseSystem:
    """Assembled LDG matrix (CSR) and right-hand side."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    space: FemSpace = field(repr=False)
    options: AssemblyOptions = field(default_factory=AssemblyOptions)

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz


class _Triplets:
    """COO accumulator for element-block contributions."""

    def __init__(self, space: FemSpace):
        self.space = space
        self.rows: List[np.ndarray] = []
        self.cols: List[np.ndarray] = []
        self.vals: List[np.ndarray] = []

    def add(self, row_elements, row_component, col_elements, col_component, blocks: np.ndarray):
        if blocks.shape[0] == 0:
            return
        nloc = self.space.nloc
        local = np.arange(nloc)
        rows = self.space.dof_index(np.asarray(row_elements)[:, None, None], row_component, local[None, :, None])
        cols = self.space.dof_index(np.asarray(col_elements)[:, None, None], col_component, local[None, None, :])
        rows, cols = np.broadcast_arrays(rows, cols)
        # drop quadrature roundoff relative to each element block
        scale = np.abs(blocks).max(axis=(1, 2), keepdims=True)
        keep = np.abs(blocks) > PRUNE_TOL * scale
        self.rows.append(rows[keep])
        self.cols.append(cols[keep])
        self.vals.append(blocks[keep])

    def to_csr(self) -> sp.csr_matrix:
        n = self.space.n_dofs
        if not self.vals:
            return sp.csr_matrix((n, n))
        matrix = sp.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(n, n),
        ).tocsr()
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        return matrix


def _volume_block(cw, Tx, Ty, Sx, Sy) -> np.ndarray:
    """sum_pq cw[e,p,q] T_a(p) T_b(q) S_c(p) S_d(q) as [e, a + nb*b, c + nb*d]."""
    nloc = Tx.shape[1] * Ty.shape[1]
    out = np.einsum("epq,pa,qb,pc,qd->ebadc", cw, Tx, Ty, Sx, Sy, optimize=True)
    return out.reshape(cw.shape[0], nloc, nloc)


def _x_edge_block(cw, B, end_test, end_trial) -> np.ndarray:
    """Vertical-edge block: test x-end value end_test, trial x-end value end_trial."""
    nloc = B.shape[1] ** 2
    out = np.einsum("eq,qb,qd,a,c->ebadc", cw, B, B, end_test, end_trial, optimize=True)
    return out.reshape(cw.shape[0], nloc, nloc)


def _y_edge_block(cw, B, end_test, end_trial) -> np.ndarray:
    """Horizontal-edge block: test y-end value end_test, trial y-end value end_trial."""
    nloc = B.shape[1] ** 2
    out = np.einsum("ep,pa,pc,b,d->ebadc", cw, B, B, end_test, end_trial, optimize=True)
    return out.reshape(cw.shape[0], nloc, nloc)


def _check_finite(name: str, values: np.ndarray):
    if not np.all(np.isfinite(values)):
        raise ValueError(f"[ERROR] Coefficient {name} evaluated to NaN/inf during assembly")


def assemble(space: FemSpace, problem, opts: Optional[AssemblyOptions] = None) -> SparseSystem:
    """
    Assemble the monolithic 3-field LDG system.

    Args:
        space: FemSpace on a TensorMesh
        problem: Problem (exact solution not required)
        opts: AssemblyOptions (default: lambda1 = lambda2 = 0, 5-point rule)

    Returns:
        SparseSystem of dimension 3 (k+1)^2 N^2

    Raises:
        ValueError: On NaN/inf coefficient values
    """
    opts = opts or AssemblyOptions()
    mesh_eps = space.mesh.x_mesh.epsilon
    if abs(mesh_eps - problem.epsilon) > 1e-12 * problem.epsilon:
        logger.warning("Mesh built for eps=%g but problem has eps=%g", mesh_eps, problem.epsilon)

    rule = gauss_legendre(opts.quad_points)
    t, w = rule.nodes, rule.weights
    B, dB = space.basis.tabulate(t)
    plus, minus = space.basis.plus, space.basis.minus
    nE, nloc = space.n_elements, space.nloc
    Nx, Ny = space.mesh.Nx, space.mesh.Ny
    x0, hx, y0, hy = space.geometry()
    xp, yp = space.mesh.x_mesh.points, space.mesh.y_mesh.points
    eps = problem.epsilon
    trip = _Triplets(space)
    elements = np.arange(nE)

    # ----- volume terms -----
    X, Y, W = space.quadrature_points(opts.quad_points)
    a1, a2 = problem.convection(X, Y)
    vol_weight = problem.volume_weight(X, Y)
    f = problem.forcing(X, Y)
    for name, values in (("a1", a1), ("a2", a2), ("b - div(a)", vol_weight)):
        _check_finite(name, values)
    ww = np.outer(w, w)[None]
    wx = ww * (0.5 * hy)[:, None, None]   # d/dx on the test function
    wy = ww * (0.5 * hx)[:, None, None]   # d/dy on the test function

    mass = _volume_block(W / eps, B, B, B, B)
    trip.add(elements, P, elements, P, mass)
    trip.add(elements, Q, elements, Q, mass)

    dx_block = _volume_block(np.broadcast_to(wx, (nE,) + ww.shape[1:]), dB, B, B, B)
    dy_block = _volume_block(np.broadcast_to(wy, (nE,) + ww.shape[1:]), B, dB, B, B)
    trip.add(elements, P, elements, U, dx_block)
    trip.add(elements, U, elements, P, dx_block)
    trip.add(elements, Q, elements, U, dy_block)
    trip.add(elements, U, elements, Q, dy_block)

    uu = (_volume_block(vol_weight * W, B, B, B, B)
          - _volume_block(a1 * wx, dB, B, B, B)
          - _volume_block(a2 * wy, B, dB, B, B))
    trip.add(elements, U, elements, U, uu)

    # ----- vertical edges -----
    ix_grid, iy_grid = np.meshgrid(np.arange(1, Nx), np.arange(Ny), indexing="xy")
    right = (ix_grid + Nx * iy_grid).ravel()
    left = right - 1
    edge_w = w[None, :] * (0.5 * hy[right])[:, None]
    Yq = y0[right][:, None] + 0.5 * hy[right][:, None] * (t[None, :] + 1.0)
    a1_edge = problem.convection(np.broadcast_to(xp[ix_grid.ravel()][:, None], Yq.shape), Yq)[0]
    _check_finite("a1", a1_edge)

    trip.add(right, P, left, U, _x_edge_block(edge_w, B, minus, plus))
    trip.add(left, P, left, U, -_x_edge_block(edge_w, B, plus, plus))
    trip.add(right, U, right, P, _x_edge_block(edge_w, B, minus, minus))
    trip.add(left, U, right, P, -_x_edge_block(edge_w, B, plus, minus))
    trip.add(right, U, left, U, -_x_edge_block(a1_edge * edge_w, B, minus, plus))
    trip.add(left, U, left, U, _x_edge_block(a1_edge * edge_w, B, plus, plus))

    inflow = Nx * np.arange(Ny)
    outflow = inflow + Nx - 1
    bw = w[None, :] * (0.5 * hy[inflow])[:, None]
    trip.add(inflow, U, inflow, P, _x_edge_block(bw, B, minus, minus))
    Yb = y0[outflow][:, None] + 0.5 * hy[outflow][:, None] * (t[None, :] + 1.0)
    a1_out = problem.convection(np.ones_like(Yb), Yb)[0]
    _check_finite("a1", a1_out)
    trip.add(outflow, U, outflow, P, -_x_edge_block(bw, B, plus, plus))
    trip.add(outflow, U, outflow, U, _x_edge_block((a1_out + opts.lambda1) * bw, B, plus, plus))

    # ----- horizontal edges -----
    ix_grid, iy_grid = np.meshgrid(np.arange(Nx), np.arange(1, Ny), indexing="xy")
    top = (ix_grid + Nx * iy_grid).ravel()
    below = top - Nx
    edge_w = w[None, :] * (0.5 * hx[top])[:, None]
    Xq = x0[top][:, None] + 0.5 * hx[top][:, None] * (t[None, :] + 1.0)
    a2_edge = problem.convection(Xq, np.broadcast_to(yp[iy_grid.ravel()][:, None], Xq.shape))[1]
    _check_finite("a2", a2_edge)

    trip.add(top, Q, below, U, _y_edge_block(edge_w, B, minus, plus))
    trip.add(below, Q, below, U, -_y_edge_block(edge_w, B, plus, plus))
    trip.add(top, U, top, Q, _y_edge_block(edge_w, B, minus, minus))
    trip.add(below, U, top, Q, -_y_edge_block(edge_w, B, plus, minus))
    trip.add(top, U, below, U, -_y_edge_block(a2_edge * edge_w, B, minus, plus))
    trip.add(below, U, below, U, _y_edge_block(a2_edge * edge_w, B, plus, plus))

    bottom_row = np.arange(Nx)
    top_row = bottom_row + Nx * (Ny - 1)
    bw = w[None, :] * (0.5 * hx[bottom_row])[:, None]
    trip.add(bottom_row, U, bottom_row, Q, _y_edge_block(bw, B, minus, minus))
    Xb = x0[top_row][:, None] + 0.5 * hx[top_row][:, None] * (t[None, :] + 1.0)
    a2_out = problem.convection(Xb, np.ones_like(Xb))[1]
    _check_finite("a2", a2_out)
    trip.add(top_row, U, top_row, Q, -_y_edge_block(bw, B, plus, plus))
    trip.add(top_row, U, top_row, U, _y_edge_block((a2_out + opts.lambda2) * bw, B, plus, plus))

    matrix = trip.to_csr()

    # ----- right-hand side (f, v) -----
    rhs = np.zeros(space.n_dofs)
    load = np.einsum("epq,pa,qb->eba", f * W, B, B).reshape(nE, nloc)
    rhs[space.component_dofs(U)] = load

    logger.info("Assembled LDG system: %d dofs, %d nonzeros (k=%d, N=%d)",
                space.n_dofs, matrix.nnz, space.degree, Nx)
    return SparseSystem(matrix=matrix, rhs=rhs, space=space, options=opts)


def apply_operator(system: SparseSystem, vec: np.ndarray) -> np.ndarray:
    """A @ vec with a dimension check."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (system.n_dofs,):
        raise ValueError(f"[ERROR] Vector shape {vec.shape} does not match system size {system.n_dofs}")
    return system.matrix @ vec


# ----- static condensation of P and Q -----

@dataclass
class CondensedSystem:
    """Schur complement in U with the data needed to recover P and Q."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    u_dofs: np.ndarray
    p_dofs: np.ndarray
    q_dofs: np.ndarray
    p_recovery: sp.csr_matrix  # P = -A_pp^-1 A_pu U
    q_recovery: sp.csr_matrix
    n_dofs: int

    @property
    def n_condensed(self) -> int:
        return self.matrix.shape[0]


def _block_diagonal_inverse(matrix: sp.csr_matrix, nloc: int) -> sp.bsr_matrix:
    bsr = matrix.tobsr(blocksize=(nloc, nloc))
    n_blocks = matrix.shape[0] // nloc
    if not (np.array_equal(bsr.indices, np.arange(n_blocks)) and np.array_equal(bsr.indptr, np.arange(n_blocks + 1))):
        raise ValueError("[ERROR] Flux mass blocks are not block diagonal; cannot condense")
    inverse = np.linalg.inv(bsr.data)
    return sp.bsr_matrix((inverse, np.arange(n_blocks), np.arange(n_blocks + 1)), shape=matrix.shape)


def condense_system(system: SparseSystem) -> CondensedSystem:
    """
    Eliminate P and Q through their block-diagonal eps^-1 mass blocks.

    The P and Q rows have zero load, so P = -A_pp^-1 A_pu U and
    (A_uu - A_up A_pp^-1 A_pu - A_uq A_qq^-1 A_qu) U = F_u.
    """
    space = system.space
    A = system.matrix
    u_dofs = space.component_dofs(U).ravel()
    p_dofs = space.component_dofs(P).ravel()
    q_dofs = space.component_dofs(Q).ravel()

    A_uu = A[u_dofs][:, u_dofs]
    schur = A_uu.tocsr()
    recoveries = []
    for dofs in (p_dofs, q_dofs):
        A_ff = A[dofs][:, dofs].tocsr()
        A_fu = A[dofs][:, u_dofs].tocsr()
        A_uf = A[u_dofs][:, dofs].tocsr()
        recovery = -(_block_diagonal_inverse(A_ff, space.nloc) @ A_fu).tocsr()
        schur = schur + A_uf @ recovery
        recoveries.append(recovery)

    schur = sp.csr_matrix(schur)
    schur.sum_duplicates()
    schur.eliminate_zeros()
    logger.info("Condensed %d dofs to %d (U only)", system.n_dofs, schur.shape[0])
    return CondensedSystem(
        matrix=schur, rhs=system.rhs[u_dofs].copy(),
        u_dofs=u_dofs, p_dofs=p_dofs, q_dofs=q_dofs,
        p_recovery=recoveries[0], q_recovery=recoveries[1],
        n_dofs=system.n_dofs,
    )


def recover_solution(condensed: CondensedSystem, u_values: np.ndarray) -> np.ndarray:
    """Full (U, P, Q) vector from the condensed U solution."""
    full = np.zeros(condensed.n_dofs)
    full[condensed.u_dofs] = u_values
    full[condensed.p_dofs] = condensed.p_recovery @ u_values
    full[condensed.q_dofs] = condensed.q_recovery @ u_values
    return full


def write_matrix_market(system: SparseSystem, path: Union[str, Path]) -> Path:
    """Dump the matrix (coordinate format) and the rhs as <stem>_rhs.mtx next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    k, N = system.space.degree, system.space.mesh.Nx
    scipy.io.mmwrite(str(path), system.matrix.tocoo(),
                     comment=f"LDG system k={k} N={N} components={N_COMPONENTS}", precision=17)
    rhs_path = path.with_name(f"{path.stem}_rhs.mtx")
    scipy.io.mmwrite(str(rhs_path), system.rhs.reshape(-1, 1), precision=17)
    logger.info("Wrote Matrix Market dump %s (%d nonzeros)", path, system.nnz)
    return path
