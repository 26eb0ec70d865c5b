# src/ldg_layer/linear_solver.py
"""
Direct sparse LU solver for the assembled LDG systems.

Rows are equilibrated to unit max-norm before SuperLU factorization with a
fill-reducing column ordering (COLAMD by default). solve() applies a fixed
number of iterative-refinement steps with the same factors.

Usage:
    fact = factorize(system)
    x = solve(fact, system.rhs)
    print(relative_residual(system.matrix, x, system.rhs))
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, onenormest, splu

from .errors import MemoryBudgetError, SingularSystemError
from .ldg_assembly import SparseSystem, CondensedSystem, condense_system, recover_solution

logger = logging.getLogger(__name__)

ORDERINGS = ("COLAMD", "MMD_AT_PLUS_A", "MMD_ATA", "NATURAL")
DEFAULT_MAX_MONOLITHIC_DOFS = 3 * 9 * 512 ** 2
DEFAULT_MAX_FACTOR_MB = 4096.0
FACTOR_BYTES_PER_ENTRY = 12


@dataclass
class Factorization:
    """SuperLU factors of diag(row_scale) @ A."""

    lu: Any = field(repr=False)
    matrix: sp.csc_matrix = field(repr=False)
    row_scale: np.ndarray = field(repr=False)
    ordering: str = "COLAMD"
    refine_steps: int = 1

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def condition_estimate(self) -> float:
        """1-norm condition number estimate ||A||_1 ||A^-1||_1 (Hager/Higham)."""
        r = self.row_scale
        inverse = LinearOperator(
            shape=self.matrix.shape,
            matvec=lambda b: self.lu.solve(r * np.ravel(b)),
            rmatvec=lambda y: r * self.lu.solve(np.ravel(y), trans="T"),
            dtype=float,
        )
        return float(onenormest(self.matrix) * onenormest(inverse))

    def pivot_growth(self) -> float:
        """max|U| / max|diag(r) A|."""
        scaled_max = abs(sp.diags(self.row_scale) @ self.matrix).max()
        return float(np.abs(self.lu.U.data).max() / scaled_max)


def _as_matrix(system) -> sp.spmatrix:
    if isinstance(system, (SparseSystem, CondensedSystem)):
        return system.matrix
    if sp.issparse(system):
        return system
    return sp.csr_matrix(np.asarray(system, dtype=float))


def factorize(system: Union[SparseSystem, CondensedSystem, sp.spmatrix, np.ndarray],
              ordering: str = "COLAMD", pivot_threshold: float = 1e-14,
              refine_steps: int = 1) -> Factorization:
    """
    Sparse LU factorization with row equilibration.

    Args:
        system: SparseSystem, CondensedSystem, sparse or dense square matrix
        ordering: SuperLU column permutation (COLAMD, MMD_AT_PLUS_A, MMD_ATA, NATURAL)
        pivot_threshold: Relative threshold on |diag(U)| of the scaled matrix
        refine_steps: Iterative-refinement steps applied by solve()

    Returns:
        Factorization, reusable for many right-hand sides

    Raises:
        ValueError: Non-square matrix or unknown ordering
        SingularSystemError: Zero row or pivot below threshold * max|A|
    """
    if ordering not in ORDERINGS:
        raise ValueError(f"[ERROR] Unknown ordering '{ordering}'. Expected one of: {', '.join(ORDERINGS)}")
    if refine_steps < 0:
        raise ValueError(f"[ERROR] refine_steps must be >= 0, got {refine_steps}")
    matrix = sp.csr_matrix(_as_matrix(system), dtype=float)
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"[ERROR] Matrix must be square, got shape {matrix.shape}")

    row_max = np.asarray(abs(matrix).max(axis=1).todense()).ravel()
    if np.any(row_max == 0):
        raise SingularSystemError(f"Matrix has {int(np.sum(row_max == 0))} zero row(s)")
    row_scale = 1.0 / row_max
    scaled = (sp.diags(row_scale) @ matrix).tocsc()

    try:
        lu = splu(scaled, permc_spec=ordering)
    except RuntimeError as e:
        raise SingularSystemError(f"SuperLU factorization failed: {e}") from e

    pivots = np.abs(lu.U.diagonal())
    # scaled matrix has max|entry| = 1
    if pivots.min() < pivot_threshold:
        raise SingularSystemError(
            f"Pivot {pivots.min():.3e} below threshold {pivot_threshold:g} (n={matrix.shape[0]})"
        )

    logger.debug("Factorized n=%d, nnz(L+U)=%d, ordering=%s",
                 matrix.shape[0], lu.L.nnz + lu.U.nnz, ordering)
    return Factorization(lu=lu, matrix=matrix.tocsc(), row_scale=row_scale,
                         ordering=ordering, refine_steps=int(refine_steps))


def solve(fact: Factorization, rhs: np.ndarray) -> np.ndarray:
    """Solve A x = rhs with the stored factors plus refinement steps."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (fact.n,):
        raise ValueError(f"[ERROR] rhs shape {rhs.shape} does not match system size {fact.n}")
    x = fact.lu.solve(fact.row_scale * rhs)
    for _ in range(fact.refine_steps):
        residual = rhs - fact.matrix @ x
        x = x + fact.lu.solve(fact.row_scale * residual)
    return x


def relative_residual(matrix, x: np.ndarray, rhs: np.ndarray) -> float:
    """||A x - b||_2 / ||b||_2 (absolute when b = 0)."""
    residual = np.linalg.norm(matrix @ x - rhs)
    norm_b = np.linalg.norm(rhs)
    return float(residual / norm_b) if norm_b > 0 else float(residual)


def estimate_factor_mb(n_elements: int, block_size: int) -> float:
    """
    Rough size of the LU factors of a DG system in MB.

    Fill of a 2D block-sparse matrix under COLAMD grows like
    block_size^2 * n_elements^1.5 entries, 12 bytes each (value plus index).
    """
    entries = float(block_size) ** 2 * float(n_elements) ** 1.5
    return entries * FACTOR_BYTES_PER_ENTRY / 2 ** 20


def check_memory_budget(n_dofs: int, condense: bool = False,
                        max_dofs: int = DEFAULT_MAX_MONOLITHIC_DOFS,
                        n_elements: Optional[int] = None,
                        max_factor_mb: Optional[float] = DEFAULT_MAX_FACTOR_MB) -> None:
    """
    Refuse monolithic systems above max_dofs (k=2, N=512 by default) or whose
    estimated LU factors exceed max_factor_mb (from N=128 on at k=2 by default).

    Raises:
        MemoryBudgetError: With a hint to enable static condensation
    """
    if condense:
        return
    hint = "Enable static condensation (--condense / solver.condense) or reduce N."
    if n_dofs > max_dofs:
        raise MemoryBudgetError(
            f"[ERROR] Monolithic system with {n_dofs} unknowns exceeds the limit of {max_dofs}. {hint}"
        )
    if n_elements and max_factor_mb is not None:
        estimate = estimate_factor_mb(n_elements, n_dofs // n_elements)
        if estimate > max_factor_mb:
            raise MemoryBudgetError(
                f"[ERROR] LU factors of the monolithic system ({n_dofs} unknowns) need about "
                f"{estimate:.0f} MB, above solver.max_factor_memory_mb = {max_factor_mb:g}. {hint}"
            )


@dataclass
class SolveResult:
    x: np.ndarray
    residual: float
    n_factorized: int
    condition: Optional[float] = None


def solve_system(system: SparseSystem, condense: bool = False,
                 max_dofs: int = DEFAULT_MAX_MONOLITHIC_DOFS,
                 max_factor_mb: Optional[float] = DEFAULT_MAX_FACTOR_MB,
                 estimate_condition: bool = False, **solver_options: Dict[str, Any]) -> SolveResult:
    """
    Factorize and solve a SparseSystem, optionally through the U Schur complement.

    The reported residual is always that of the monolithic system.
    """
    check_memory_budget(system.n_dofs, condense, max_dofs, system.space.n_elements, max_factor_mb)
    if condense:
        condensed = condense_system(system)
        fact = factorize(condensed, **solver_options)
        x = recover_solution(condensed, solve(fact, condensed.rhs))
    else:
        fact = factorize(system, **solver_options)
        x = solve(fact, system.rhs)
    residual = relative_residual(system.matrix, x, system.rhs)
    condition = fact.condition_estimate() if estimate_condition else None
    logger.info("Solved n=%d (factorized %d), relative residual %.3e", system.n_dofs, fact.n, residual)
    return SolveResult(x=x, residual=residual, n_factorized=fact.n, condition=condition)
