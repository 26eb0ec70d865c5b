# src/ldg_layer/norms_errors.py
"""
Weighted L2 triple norm, energy norm and the error quantities of a computed solution.

    ||V||^2    = eps^-1 ||V_p||^2 + eps^-1 ||V_q||^2 + ||(b - div(a)/2)^(1/2) V_u||^2
    |||V|||^2  = ||V||^2
                 + sum_j [ sum_{i=0}^{N-1} 1/2 <a1, [V_u]^2>_{x_i}  + <a1/2 + lambda1, [V_u]^2>_{x_N} ]
                 + the same over horizontal edges with a2, lambda2

Jumps: [v] = v^+ - v^- on interior edges, v^+ on x = 0 / y = 0, -v^- on x = 1 / y = 1.

A component of a triple passed to these functions may be
    - a DiscreteField,
    - a callable g(x, y), or
    - a pair (g, F): the mixed difference g - F, e.g. exact minus discrete.
For the u component only the discrete part has jumps: exact solutions are
continuous and vanish on the boundary, so [u - U] = -[U].
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .basis_quadrature import error_quadrature_points, gauss_legendre
from .fem_space import DiscreteField, DiscreteTriple, FemSpace

logger = logging.getLogger(__name__)

VOLUME_KEYS = ("p", "q", "u")
JUMP_KEYS = ("jump_x_inner", "jump_x_outflow", "jump_y_inner", "jump_y_outflow")


def _components(V):
    if isinstance(V, DiscreteTriple):
        return V.fields
    if len(V) != 3:
        raise ValueError("[ERROR] A triple needs exactly three components (u, p, q)")
    return tuple(V)


def _values(component, X, Y, B) -> np.ndarray:
    """Component values at the tensor quadrature points [e, p, q]."""
    if isinstance(component, DiscreteField):
        return component.values_at(B, B)
    if isinstance(component, tuple):
        func, discrete = component
        return np.broadcast_to(np.asarray(func(X, Y), dtype=float), X.shape) - discrete.values_at(B, B)
    if callable(component):
        return np.broadcast_to(np.asarray(component(X, Y), dtype=float), X.shape)
    if component is None or np.isscalar(component):
        return np.full(X.shape, float(component or 0.0))
    raise TypeError(f"[ERROR] Unsupported triple component type {type(component).__name__}")


def _discrete_jump_part(component) -> Optional[DiscreteField]:
    if isinstance(component, DiscreteField):
        return component
    if isinstance(component, tuple):
        return -component[1]
    return None


def exact_minus(problem, W: DiscreteTriple):
    """The mixed triple w - W with w = (u, eps u_x, eps u_y)."""
    exact = problem.require_exact()
    eps = problem.epsilon
    return (
        (exact.u, W.u_field),
        (lambda x, y: eps * exact.u_x(x, y), W.p_field),
        (lambda x, y: eps * exact.u_y(x, y), W.q_field),
    )


def _volume_terms(space: FemSpace, problem, V, n_points: int) -> Dict[str, float]:
    u, p, q = _components(V)
    rule = gauss_legendre(n_points)
    B, _ = space.basis.tabulate(rule.nodes)
    X, Y, W = space.quadrature_points(n_points)
    weight = problem.norm_weight(X, Y)
    if weight.min() < 0:
        idx = np.unravel_index(np.argmin(weight), weight.shape)
        raise ValueError(
            f"[ERROR] b - div(a)/2 = {weight[idx]:.3e} < 0 at ({X[idx]:.4f}, {Y[idx]:.4f}): "
            f"coercivity violated for problem '{problem.name}'"
        )
    eps = problem.epsilon
    return {
        "p": float(np.sum(W * _values(p, X, Y, B) ** 2) / eps),
        "q": float(np.sum(W * _values(q, X, Y, B) ** 2) / eps),
        "u": float(np.sum(W * weight * _values(u, X, Y, B) ** 2)),
    }


def _jump_terms(space: FemSpace, problem, u_discrete: Optional[DiscreteField],
                lambda1: float, lambda2: float, n_points: int) -> Dict[str, float]:
    if u_discrete is None:
        return {key: 0.0 for key in JUMP_KEYS}
    rule = gauss_legendre(n_points)
    t, w = rule.nodes, rule.weights
    B, _ = space.basis.tabulate(t)
    plus, minus = space.basis.plus, space.basis.minus
    Nx, Ny = space.mesh.Nx, space.mesh.Ny
    x0, hx, y0, hy = space.geometry()
    xp, yp = space.mesh.x_mesh.points, space.mesh.y_mesh.points

    # vertical edges: [row iy, edge i = 0..Nx]
    right_trace = u_discrete.trace_x(plus, B).reshape(Ny, Nx, -1)   # v^- at x_{ix+1}
    left_trace = u_discrete.trace_x(minus, B).reshape(Ny, Nx, -1)   # v^+ at x_ix
    jumps = np.zeros((Ny, Nx + 1, len(t)))
    jumps[:, :Nx] += left_trace
    jumps[:, 1:] -= right_trace
    row_hy = hy.reshape(Ny, Nx)[:, 0]
    row_y0 = y0.reshape(Ny, Nx)[:, 0]
    Yq = row_y0[:, None] + 0.5 * row_hy[:, None] * (t[None, :] + 1.0)       # [iy, q]
    Xe = np.broadcast_to(xp[None, :, None], (Ny, Nx + 1, len(t)))
    a1 = problem.convection(Xe, np.broadcast_to(Yq[:, None, :], Xe.shape))[0]
    ew = w[None, None, :] * 0.5 * row_hy[:, None, None]
    jx_inner = float(np.sum(0.5 * a1[:, :Nx] * jumps[:, :Nx] ** 2 * ew))
    jx_out = float(np.sum((0.5 * a1[:, Nx] + lambda1) * jumps[:, Nx] ** 2 * ew[:, 0]))

    # horizontal edges: [edge j = 0..Ny, column ix]
    top_trace = u_discrete.trace_y(plus, B).reshape(Ny, Nx, -1)
    bottom_trace = u_discrete.trace_y(minus, B).reshape(Ny, Nx, -1)
    jumps = np.zeros((Ny + 1, Nx, len(t)))
    jumps[:Ny] += bottom_trace
    jumps[1:] -= top_trace
    col_hx = hx[:Nx]
    col_x0 = x0[:Nx]
    Xq = col_x0[:, None] + 0.5 * col_hx[:, None] * (t[None, :] + 1.0)       # [ix, p]
    Ye = np.broadcast_to(yp[:, None, None], (Ny + 1, Nx, len(t)))
    a2 = problem.convection(np.broadcast_to(Xq[None], Ye.shape), Ye)[1]
    ew = w[None, None, :] * 0.5 * col_hx[None, :, None]
    jy_inner = float(np.sum(0.5 * a2[:Ny] * jumps[:Ny] ** 2 * ew))
    jy_out = float(np.sum((0.5 * a2[Ny] + lambda2) * jumps[Ny] ** 2 * ew[0]))

    return {
        "jump_x_inner": jx_inner,
        "jump_x_outflow": jx_out,
        "jump_y_inner": jy_inner,
        "jump_y_outflow": jy_out,
    }


def lnorm_triple(space: FemSpace, problem, V, n_points: Optional[int] = None) -> float:
    """
    Weighted L2 triple norm ||V||.

    Args:
        space: FemSpace the discrete parts live on
        problem: Problem providing eps and b - div(a)/2
        V: DiscreteTriple or mixed triple (see module docstring)
        n_points: Gauss points per direction (default max(5, k+3))

    Raises:
        ValueError: If b - div(a)/2 is negative at a quadrature point
    """
    n_points = n_points or error_quadrature_points(space.degree)
    return float(np.sqrt(sum(_volume_terms(space, problem, V, n_points).values())))


def energy_components(space: FemSpace, problem, opts, V,
                      n_points: Optional[int] = None) -> Dict[str, float]:
    """
    Squared contributions to |||V|||^2.

    Keys: p, q, u (volume terms) and jump_x_inner, jump_x_outflow,
    jump_y_inner, jump_y_outflow (edge sums). Edge terms use opts.quad_points.
    """
    n_points = n_points or error_quadrature_points(space.degree)
    u = _components(V)[0]
    terms = _volume_terms(space, problem, V, n_points)
    terms.update(_jump_terms(space, problem, _discrete_jump_part(u),
                             opts.lambda1, opts.lambda2, opts.quad_points))
    return terms


def energy_norm(space: FemSpace, problem, opts, V, n_points: Optional[int] = None) -> float:
    """|||V||| including all jump terms."""
    return float(np.sqrt(sum(energy_components(space, problem, opts, V, n_points).values())))


def edge_trace_error(solution: DiscreteTriple, problem, n_points: Optional[int] = None) -> float:
    """
    Outflow-region trace error of U^-:

        max_{i = N/2..N-1} (sum_j ||(u - U^-)(x_i, .)||^2_{J_j})^{1/2}
                         + (sum_i ||(u - U^-)(., y_i)||^2_{I_i})^{1/2}
    """
    exact = problem.require_exact()
    space = solution.space
    n_points = n_points or error_quadrature_points(space.degree)
    rule = gauss_legendre(n_points)
    t, w = rule.nodes, rule.weights
    B, _ = space.basis.tabulate(t)
    plus = space.basis.plus
    Nx, Ny = space.mesh.Nx, space.mesh.Ny
    x0, hx, y0, hy = space.geometry()
    xp, yp = space.mesh.x_mesh.points, space.mesh.y_mesh.points
    U = solution.u_field

    # U^- on the vertical line x_i is the right trace of column i-1
    right_trace = U.trace_x(plus, B).reshape(Ny, Nx, -1)
    row_hy = hy.reshape(Ny, Nx)[:, 0]
    Yq = y0.reshape(Ny, Nx)[:, 0][:, None] + 0.5 * row_hy[:, None] * (t[None, :] + 1.0)
    top_trace = U.trace_y(plus, B).reshape(Ny, Nx, -1)
    col_hx = hx[:Nx]
    Xq = x0[:Nx][:, None] + 0.5 * col_hx[:, None] * (t[None, :] + 1.0)

    n = min(Nx, Ny)
    best = 0.0
    for i in range(n // 2, n):
        err_v = np.asarray(exact.u(np.full_like(Yq, xp[i]), Yq)) - right_trace[:, i - 1, :]
        line_v = np.sum(err_v ** 2 * w[None, :] * 0.5 * row_hy[:, None])
        err_h = np.asarray(exact.u(Xq, np.full_like(Xq, yp[i]))) - top_trace[i - 1, :, :]
        line_h = np.sum(err_h ** 2 * w[None, :] * 0.5 * col_hx[:, None])
        best = max(best, float(np.sqrt(line_v) + np.sqrt(line_h)))
    return best


@dataclass
class ErrorReport:
    """The three error norms of one run plus their breakdowns."""

    l2_triple: float
    energy: float
    supercloseness: float
    components: Dict[str, float] = field(default_factory=dict)
    superclose_components: Dict[str, float] = field(default_factory=dict)
    projection_energy: Optional[float] = None
    edge_trace: Optional[float] = None

    def as_dict(self) -> Dict[str, float]:
        return {
            "l2_err": self.l2_triple,
            "energy_err": self.energy,
            "superclose_err": self.supercloseness,
            "projection_energy": self.projection_energy,
            "edge_trace": self.edge_trace,
        }


def error_report(solution: DiscreteTriple, projected: DiscreteTriple, problem,
                 space: FemSpace, opts, with_edge_trace: bool = True) -> ErrorReport:
    """
    Errors of a computed W against w and Pi w.

    l2_triple       ||w - W||          (exact minus discrete at quadrature points)
    energy          |||w - W|||        (jumps of -W)
    supercloseness  |||Pi w - W|||     (purely discrete)
    projection_energy  |||w - Pi w|||, for the consistency bound
                       | energy - supercloseness | <= projection_energy
    """
    problem.require_exact()
    error = exact_minus(problem, solution)
    components = energy_components(space, problem, opts, error)
    l2 = float(np.sqrt(sum(components[k] for k in VOLUME_KEYS)))
    energy = float(np.sqrt(sum(components.values())))

    discrete = projected - solution
    superclose_components = energy_components(space, problem, opts, discrete)
    superclose = float(np.sqrt(sum(superclose_components.values())))

    projection_energy = energy_norm(space, problem, opts, exact_minus(problem, projected))
    edge_trace = edge_trace_error(solution, problem) if with_edge_trace else None

    logger.info("Errors: l2=%.4e superclose=%.4e energy=%.4e", l2, superclose, energy)
    return ErrorReport(
        l2_triple=l2,
        energy=energy,
        supercloseness=superclose,
        components=components,
        superclose_components=superclose_components,
        projection_energy=projection_energy,
        edge_trace=edge_trace,
    )
