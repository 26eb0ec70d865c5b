# src/ldg_layer/experiments.py
"""
Convergence Studies for LDG on Layer-Adapted Meshes

Runs the pipeline mesh -> space -> assemble -> solve -> project -> errors
for a list of N (run_study) or a list of eps (run_robustness) and collects
the results in a ConvergenceTable with r2 / rS rates.

    r2 = log(e_N / e_2N) / log 2
    rS = log(e_N / e_2N) / log(2 ln N / ln 2N)

Usage:
    config = StudyConfig(mesh='shishkin', degree=2, epsilon=1e-8, N_list=(16, 32))
    table = run_study(config)
    table.write('output/s_k2.csv')
"""

import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import MemoryBudgetError, NumericalFailure, ParameterOverrideWarning
from .fem_space import DiscreteTriple, FemSpace
from .ldg_assembly import AssemblyOptions, assemble, write_matrix_market
from .linear_solver import DEFAULT_MAX_FACTOR_MB, DEFAULT_MAX_MONOLITHIC_DOFS, check_memory_budget, solve_system
from .meshgen import MeshKind, build_tensor_mesh, write_mesh
from .norms_errors import ErrorReport, error_report
from .problem import get_problem
from .projection import project_triple

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "mesh", "k", "epsilon", "sigma", "N",
    "l2_err", "l2_rate", "superclose_err", "superclose_rate", "energy_err", "energy_rate",
]
ERROR_COLUMNS = ("l2_err", "superclose_err", "energy_err")
RATE_CHOICES = ("auto", "r2", "rS")
FORMATS = ("csv", "md", "xlsx")
ROBUST_EPSILON_MIN = 1e-8


def rate_r2(e_N: float, e_2N: float) -> float:
    """Observed order against N^-1."""
    if not (e_N > 0 and e_2N > 0):
        raise ValueError(f"[ERROR] Errors must be positive for a rate, got {e_N}, {e_2N}")
    return math.log(e_N / e_2N) / math.log(2.0)


def rate_rS(e_N: float, e_2N: float, N: int) -> float:
    """Observed order against N^-1 ln N."""
    if not (e_N > 0 and e_2N > 0):
        raise ValueError(f"[ERROR] Errors must be positive for a rate, got {e_N}, {e_2N}")
    if N < 4:
        raise ValueError(f"[ERROR] rS needs N >= 4, got {N}")
    return math.log(e_N / e_2N) / math.log(2.0 * math.log(N) / math.log(2 * N))


def resolve_rate(mesh: MeshKind, rates: str) -> str:
    """'auto' means rS on the S-mesh and r2 on BS/B."""
    if rates not in RATE_CHOICES:
        raise ValueError(f"[ERROR] Unknown rate formula '{rates}'. Expected one of: {', '.join(RATE_CHOICES)}")
    if rates != "auto":
        return rates
    return "rS" if MeshKind.from_name(mesh) is MeshKind.SHISHKIN else "r2"


def fmt6(value: Optional[float]) -> str:
    """6 significant digits, locale independent; empty for missing values."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return "{:#.6g}".format(value)


@dataclass(frozen=True)
class StudyConfig:
    """Parameters of a convergence study or a single solve."""

    mesh: Union[MeshKind, str]
    degree: int
    epsilon: float
    N_list: Tuple[int, ...] = (16, 32, 64, 128)
    sigma: Optional[float] = None
    sigma_offset: float = 2.0
    lambda1: float = 0.0
    lambda2: float = 0.0
    quad_points: int = 5
    rates: str = "auto"
    problem: str = "example1"
    condense: bool = False
    jobs: int = 1
    solver_options: Dict[str, Any] = field(default_factory=dict)
    max_dofs: int = DEFAULT_MAX_MONOLITHIC_DOFS
    max_factor_mb: float = DEFAULT_MAX_FACTOR_MB
    residual_tolerance: float = 1e-9
    epsilon_floor: float = 1e-10
    allow_tiny_epsilon: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mesh", MeshKind.from_name(self.mesh))
        object.__setattr__(self, "N_list", tuple(int(n) for n in self.N_list))
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError(f"[ERROR] degree must be an integer >= 1, got {self.degree}")
        if not self.epsilon > 0:
            raise ValueError(f"[ERROR] epsilon must be positive, got {self.epsilon}")
        if self.epsilon < self.epsilon_floor and not self.allow_tiny_epsilon:
            raise ValueError(
                f"[ERROR] epsilon={self.epsilon:g} is below the floor {self.epsilon_floor:g}; "
                f"pass --allow-tiny-epsilon to override"
            )
        if self.mesh is MeshKind.BAKHVALOV and self.epsilon >= 1.0:
            raise ValueError(f"[ERROR] B-mesh requires epsilon < 1, got {self.epsilon}")
        if not self.N_list:
            raise ValueError("[ERROR] N list is empty")
        for n in self.N_list:
            if n < 4 or n % 2:
                raise ValueError(f"[ERROR] N must be even and >= 4, got {n}")
        for a, b in zip(self.N_list, self.N_list[1:]):
            if b != 2 * a:
                raise ValueError(f"[ERROR] N list must double between entries, got {a} -> {b}")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError(f"[ERROR] sigma must be positive, got {self.sigma}")
        if self.sigma is not None and self.sigma < self.degree + 2:
            warnings.warn(
                f"sigma={self.sigma:g} < k+2={self.degree + 2}: no convergence-rate guarantee",
                ParameterOverrideWarning,
                stacklevel=3,
            )
        if self.jobs < 1:
            raise ValueError(f"[ERROR] jobs must be >= 1, got {self.jobs}")
        resolve_rate(self.mesh, self.rates)
        AssemblyOptions(self.lambda1, self.lambda2, self.quad_points)

    @property
    def effective_sigma(self) -> float:
        return float(self.sigma) if self.sigma is not None else self.degree + self.sigma_offset

    @property
    def rate_formula(self) -> str:
        return resolve_rate(self.mesh, self.rates)

    @property
    def assembly_options(self) -> AssemblyOptions:
        return AssemblyOptions(self.lambda1, self.lambda2, self.quad_points, self.condense)

    @classmethod
    def from_config(cls, config, **overrides) -> "StudyConfig":
        """Defaults from a ConfigManager; explicit overrides (not None) win."""
        lambda1, lambda2 = config.get_lambdas()
        values = dict(
            sigma_offset=config.get_sigma_offset(),
            lambda1=lambda1,
            lambda2=lambda2,
            quad_points=config.get_quad_points(),
            condense=config.get_condense(),
            jobs=config.get_max_workers(),
            solver_options=config.get_solver_options(),
            max_dofs=config.get_max_monolithic_dofs(),
            max_factor_mb=config.get_max_factor_memory_mb(),
            residual_tolerance=config.get_residual_tolerance(),
            epsilon_floor=config.get_epsilon_floor(),
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class CaseResult:
    """One row: a full pipeline run at fixed (mesh, k, eps, N)."""

    mesh: MeshKind
    k: int
    epsilon: float
    sigma: float
    N: int
    status: str = "ok"
    error: str = ""
    report: Optional[ErrorReport] = None
    residual: Optional[float] = None
    n_dofs: int = 0
    elapsed: float = 0.0
    reference: Dict[str, float] = field(default_factory=dict)
    rates: Dict[str, Optional[float]] = field(default_factory=dict)
    solution: Optional[DiscreteTriple] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def error_value(self, column: str) -> Optional[float]:
        if not self.ok or self.report is None:
            return None
        return self.report.as_dict()[column]


def _reference_quantities(mesh: MeshKind, N: int, epsilon: float, k: int) -> Dict[str, float]:
    return {
        "mu": mesh.mu(N, epsilon),
        "max_abs_dpsi": mesh.max_abs_dpsi(N, epsilon),
        "rate_factor": (mesh.max_abs_dpsi(N, epsilon) / N) ** (k + 1),
        "m_star": mesh.m_star(N, epsilon, k),
    }


def solve_case(config: StudyConfig, N: int, epsilon: Optional[float] = None,
               keep_solution: bool = False, dump_mesh: Optional[Path] = None,
               dump_matrix: Optional[Path] = None) -> CaseResult:
    """
    Run one pipeline; failures propagate (see run_study for row-level handling).

    Raises:
        ValueError: Invalid parameters
        MemoryBudgetError: Monolithic system over the size or factor-memory budget
        NumericalFailure: Residual above tolerance or singular system
    """
    eps = config.epsilon if epsilon is None else float(epsilon)
    k, sigma = config.degree, config.effective_sigma
    start = time.perf_counter()
    problem = get_problem(config.problem, eps)
    tensor = build_tensor_mesh(config.mesh, N, eps, sigma, problem.alpha1, problem.alpha2)
    if dump_mesh is not None:
        write_mesh(tensor, dump_mesh)
    space = FemSpace(tensor, k)
    check_memory_budget(space.n_dofs, config.condense, config.max_dofs, space.n_elements, config.max_factor_mb)
    opts = config.assembly_options
    system = assemble(space, problem, opts)
    if dump_matrix is not None:
        write_matrix_market(system, dump_matrix)

    result = solve_system(system, condense=config.condense, max_dofs=config.max_dofs,
                          max_factor_mb=config.max_factor_mb,
                          **config.solver_options)
    if not result.residual <= config.residual_tolerance:
        raise NumericalFailure(
            f"Relative residual {result.residual:.3e} above tolerance {config.residual_tolerance:g}"
        )
    solution = DiscreteTriple.from_vector(space, result.x)
    projected = project_triple(problem, space)
    report = error_report(solution, projected, problem, space, opts)
    elapsed = time.perf_counter() - start
    logger.info("%s k=%d eps=%g N=%d done in %.2fs", config.mesh.label, k, eps, N, elapsed)
    return CaseResult(
        mesh=config.mesh, k=k, epsilon=eps, sigma=sigma, N=N,
        report=report, residual=result.residual, n_dofs=system.n_dofs, elapsed=elapsed,
        reference=_reference_quantities(config.mesh, N, eps, k),
        solution=solution if keep_solution else None,
    )


def _run_row(args) -> CaseResult:
    """Worker: one row with failure capture; picklable for process pools."""
    config, N, eps = args
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ParameterOverrideWarning)
            return solve_case(config, N, eps)
    except (NumericalFailure, MemoryBudgetError, ArithmeticError, MemoryError, np.linalg.LinAlgError) as e:
        logger.error("Row N=%d eps=%g failed: %s", N, eps, e)
        return CaseResult(mesh=config.mesh, k=config.degree, epsilon=eps,
                          sigma=config.effective_sigma, N=N, status="failed", error=str(e),
                          reference=_reference_quantities(config.mesh, N, eps, config.degree))


def _run_rows(config: StudyConfig, jobs: List[Tuple[StudyConfig, int, float]]) -> List[CaseResult]:
    if config.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(config.jobs, len(jobs))) as pool:
            return list(pool.map(_run_row, jobs))
    return [_run_row(job) for job in jobs]


@dataclass
class ConvergenceTable:
    """Rows of a study with rates and metadata."""

    rows: List[CaseResult]
    metadata: Dict[str, Any] = field(default_factory=dict)
    kind: str = "study"

    @property
    def failed(self) -> List[CaseResult]:
        return [row for row in self.rows if not row.ok]

    def compute_rates(self, formula: str) -> None:
        """Fill rates from consecutive successful rows with N doubling; first row stays empty."""
        for prev, row in zip(self.rows, self.rows[1:]):
            if not (prev.ok and row.ok and row.N == 2 * prev.N):
                continue
            for column in ERROR_COLUMNS:
                e_N, e_2N = prev.error_value(column), row.error_value(column)
                if not (e_N and e_2N and e_N > 0 and e_2N > 0):
                    continue
                rate = rate_rS(e_N, e_2N, prev.N) if formula == "rS" else rate_r2(e_N, e_2N)
                row.rates[column.replace("_err", "_rate")] = rate

    def uniformity(self, epsilon_min: float = ROBUST_EPSILON_MIN) -> Dict[str, float]:
        """max/min of each error column over rows with eps >= epsilon_min."""
        ratios = {}
        for column in ERROR_COLUMNS:
            values = [row.error_value(column) for row in self.rows
                      if row.ok and row.epsilon >= epsilon_min * (1 - 1e-12)]
            values = [v for v in values if v]
            ratios[column] = max(values) / min(values) if values else float("nan")
        return ratios

    def to_dataframe(self) -> pd.DataFrame:
        """Numeric table (NaN for missing rates/errors) with reference columns."""
        records = []
        for row in self.rows:
            record = {"mesh": row.mesh.value, "k": row.k, "epsilon": row.epsilon,
                      "sigma": row.sigma, "N": row.N}
            for column in ERROR_COLUMNS:
                rate_key = column.replace("_err", "_rate")
                value = row.error_value(column)
                record[column] = np.nan if value is None else value
                record[rate_key] = row.rates.get(rate_key, np.nan)
            record.update({
                "status": row.status,
                "residual": row.residual,
                "edge_trace": row.report.edge_trace if row.report else np.nan,
                **row.reference,
            })
            records.append(record)
        return pd.DataFrame.from_records(records)

    def csv_frame(self) -> pd.DataFrame:
        """The normative CSV columns as formatted strings."""
        records = []
        for row in self.rows:
            record = {
                "mesh": row.mesh.value,
                "k": str(row.k),
                "epsilon": fmt6(row.epsilon),
                "sigma": fmt6(row.sigma),
                "N": str(row.N),
            }
            for column in ERROR_COLUMNS:
                rate_key = column.replace("_err", "_rate")
                record[column] = fmt6(row.error_value(column))
                record[rate_key] = fmt6(row.rates.get(rate_key))
            records.append(record)
        return pd.DataFrame.from_records(records, columns=CSV_COLUMNS)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.csv_frame().to_csv(path, index=False, lineterminator="\n")
        return path

    def to_markdown(self) -> str:
        """Errors and rates interleaved, one block per table."""
        meta = self.metadata
        title = (f"{MeshKind.from_name(meta.get('mesh', 'shishkin')).label}, k={meta.get('k')}, "
                 f"sigma={fmt6(meta.get('sigma'))}, rates={meta.get('rates', '')}")
        first = "eps" if self.kind == "robustness" else "N"
        lines = [
            f"### {title}",
            "",
            f"| {first} | ||w-W|| | rate | |||Pi w-W||| | rate | |||w-W||| | rate |",
            "|---|---|---|---|---|---|---|",
        ]
        for row in self.rows:
            cells = [fmt6(row.epsilon) if self.kind == "robustness" else str(row.N)]
            for column in ERROR_COLUMNS:
                rate_key = column.replace("_err", "_rate")
                value = row.error_value(column)
                cells.append("{:.4e}".format(value) if value is not None else "failed")
                rate = row.rates.get(rate_key)
                cells.append("{:.4f}".format(rate) if rate is not None else "-")
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"

    def to_excel(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = pd.DataFrame(sorted((str(k), str(v)) for k, v in self.metadata.items()),
                            columns=["key", "value"])
        with pd.ExcelWriter(path, engine="openpyxl") as writer:
            self.to_dataframe().to_excel(writer, sheet_name="table", index=False)
            meta.to_excel(writer, sheet_name="metadata", index=False)
        return path

    def write(self, path: Union[str, Path], fmt: str = "csv") -> Path:
        if fmt not in FORMATS:
            raise ValueError(f"[ERROR] Unknown format '{fmt}'. Expected one of: {', '.join(FORMATS)}")
        if fmt == "csv":
            return self.to_csv(path)
        if fmt == "xlsx":
            return self.to_excel(path)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_markdown(), encoding="utf-8")
        return path


def _metadata(config: StudyConfig) -> Dict[str, Any]:
    return {
        "mesh": config.mesh.value,
        "k": config.degree,
        "epsilon": config.epsilon,
        "sigma": config.effective_sigma,
        "lambda1": config.lambda1,
        "lambda2": config.lambda2,
        "quad_points": config.quad_points,
        "error_quad_points": max(5, config.degree + 3),
        "rates": config.rate_formula,
        "problem": config.problem,
        "condense": config.condense,
    }


def run_study(config: StudyConfig) -> ConvergenceTable:
    """
    One row per N (ordered by N), rates by config.rate_formula.

    Rows that fail numerically or are refused by the memory guard stay in the
    table as failed rows; the other rows still run.
    """
    rows = _run_rows(config, [(config, N, config.epsilon) for N in config.N_list])
    rows.sort(key=lambda r: r.N)
    table = ConvergenceTable(rows=rows, metadata=_metadata(config), kind="study")
    table.compute_rates(config.rate_formula)
    return table


def run_robustness(config: StudyConfig, epsilons: Sequence[float], N: Optional[int] = None) -> ConvergenceTable:
    """One row per eps at fixed N (default: the first entry of config.N_list); no rates."""
    N = int(N or config.N_list[0])
    checked = [replace(config, epsilon=float(eps), N_list=(N,)) for eps in epsilons]
    rows = _run_rows(config, [(c, N, c.epsilon) for c in checked])
    metadata = _metadata(config)
    metadata.update({"N": N, "epsilons": ",".join(fmt6(e) for e in epsilons)})
    return ConvergenceTable(rows=rows, metadata=metadata, kind="robustness")


def sample_solution(solution: DiscreteTriple, n: int = 101):
    """U, P and Q on a uniform n x n grid: (xs, ys, {'u': ..., 'p': ..., 'q': ...})."""
    xs = np.linspace(0.0, 1.0, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    values = {name: f(X, Y) for name, f in zip(("u", "p", "q"), solution.fields)}
    return xs, xs.copy(), values


def save_solution_samples(solution: DiscreteTriple, path: Union[str, Path], n: int = 101) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    xs, ys, values = sample_solution(solution, n)
    np.savez(path, x=xs, y=ys, **values)
    return path
