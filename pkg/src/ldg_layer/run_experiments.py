#!/usr/bin/env python3
"""
LDG layer-adapted mesh experiments: command-line interface

Commands:
    solve   one run at fixed N; writes a one-row CSV, plus U/P/Q samples (.npz)
    study   convergence table over doubling N with r2/rS rates
    robust  errors against a list of eps at fixed N

Usage:
    python -m ldg_layer solve --mesh shishkin --N 16 --degree 2 --epsilon 1e-8 --out output/s16.csv
    python -m ldg_layer study --mesh bs --degree 1 --epsilon 1e-8 --N 16,32,64,128 --out output/bs_k1.csv
    python -m ldg_layer robust --mesh bakhvalov --degree 2 --N 128 --epsilon 1e-3,1e-4,1e-5 --condense

Without --out the result goes to <output.dir>/<command>_<mesh>_k<degree>.<format>,
here output/robust_bakhvalov_k2.csv.

Exit codes:
    0  success
    2  invalid configuration (bad arguments, config file, parameter ranges)
    3  numerical failure in any row
"""

import argparse
import logging
import sys
import warnings
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config_manager import ConfigManager
from .errors import NumericalFailure
from .experiments import (
    FORMATS,
    RATE_CHOICES,
    ConvergenceTable,
    StudyConfig,
    fmt6,
    run_robustness,
    run_study,
    save_solution_samples,
    solve_case,
)
from .meshgen import MeshKind
from .problem import available_problems

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got '{text}'")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mesh", required=True, choices=["shishkin", "bs", "bakhvalov"],
                        help="Layer-adapted mesh family")
    parser.add_argument("--degree", type=int, required=True, help="Polynomial degree k >= 1")
    parser.add_argument("--sigma", type=float, default=None, help="Mesh parameter (default k+2)")
    parser.add_argument("--lambda1", type=float, default=None, help="Outflow penalty on x = 1")
    parser.add_argument("--lambda2", type=float, default=None, help="Outflow penalty on y = 1")
    parser.add_argument("--quad", type=int, default=None, help="Assembly Gauss points per direction")
    parser.add_argument("--problem", default="example1", choices=available_problems(),
                        help="Registered test problem")
    parser.add_argument("--condense", action="store_true", default=None,
                        help="Eliminate P and Q before the LU solve")
    parser.add_argument("--allow-tiny-epsilon", action="store_true",
                        help="Accept eps below the configured floor (1e-10)")
    parser.add_argument("--config", default=None, help="Path to a YAML config file")
    parser.add_argument("--out", default=None,
                        help="Output path (default: <output.dir>/<command>_<mesh>_k<degree>.<format>)")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging and a configuration summary")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldg_layer",
        description="LDG on Shishkin / Bakhvalov-Shishkin / Bakhvalov meshes: solves and convergence tables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="Single solve at fixed N")
    _add_common(solve)
    solve.add_argument("--N", type=int, required=True, help="Intervals per direction (even, >= 4)")
    solve.add_argument("--epsilon", type=float, required=True, help="Perturbation parameter")
    solve.add_argument("--dump-mesh", default=None, help="Write mesh abscissae to this file")
    solve.add_argument("--dump-matrix", default=None, help="Write the system in Matrix Market format")
    solve.add_argument("--samples", type=int, default=101, help="Grid size of the .npz solution samples")

    study = sub.add_parser("study", help="Convergence table over doubling N")
    _add_common(study)
    study.add_argument("--N", type=_int_list, default=[16, 32, 64, 128], help="Comma-separated N list")
    study.add_argument("--epsilon", type=float, required=True, help="Perturbation parameter")
    study.add_argument("--rates", choices=RATE_CHOICES, default="auto",
                       help="Rate formula (auto: rS on S-mesh, r2 on BS/B)")
    study.add_argument("--format", choices=FORMATS, default=None, help="Table format")
    study.add_argument("--jobs", type=int, default=None, help="Rows run concurrently")

    robust = sub.add_parser("robust", help="Errors against eps at fixed N")
    _add_common(robust)
    robust.add_argument("--N", type=int, required=True, help="Intervals per direction")
    robust.add_argument("--epsilon", type=_float_list, required=True, help="Comma-separated eps list")
    robust.add_argument("--format", choices=FORMATS, default=None, help="Table format")
    robust.add_argument("--jobs", type=int, default=None, help="Rows run concurrently")
    return parser


def _study_config(args, config: ConfigManager, epsilon: float, N_list) -> StudyConfig:
    return StudyConfig.from_config(
        config,
        mesh=args.mesh,
        degree=args.degree,
        epsilon=epsilon,
        N_list=tuple(N_list),
        sigma=args.sigma,
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        quad_points=args.quad,
        rates=getattr(args, "rates", None),
        problem=args.problem,
        condense=args.condense,
        jobs=getattr(args, "jobs", None),
        allow_tiny_epsilon=args.allow_tiny_epsilon,
    )


def _output_path(args, config: ConfigManager, fmt: str) -> Path:
    """--out as given, else a file named after the run in output.dir."""
    if args.out:
        return Path(args.out)
    config.ensure_directories()
    mesh = MeshKind.from_name(args.mesh).value
    return config.get_output_dir() / f"{args.command}_{mesh}_k{args.degree}.{fmt}"


def _print_table(table: ConvergenceTable) -> None:
    print("-" * 70)
    print(table.to_markdown())
    for row in table.failed:
        print(f"[FAILED] N={row.N} eps={fmt6(row.epsilon)}: {row.error}")


def cmd_solve(args, config: ConfigManager) -> int:
    study = _study_config(args, config, args.epsilon, [args.N])
    print(f"[INFO] Solving {study.mesh.label}, k={study.degree}, eps={args.epsilon:g}, N={args.N}, "
          f"sigma={study.effective_sigma:g}")
    result = solve_case(
        study, args.N, keep_solution=True,
        dump_mesh=Path(args.dump_mesh) if args.dump_mesh else None,
        dump_matrix=Path(args.dump_matrix) if args.dump_matrix else None,
    )
    table = ConvergenceTable(rows=[result], metadata={"mesh": study.mesh.value, "k": study.degree,
                                                      "sigma": study.effective_sigma,
                                                      "rates": study.rate_formula})
    out = table.to_csv(_output_path(args, config, "csv"))
    samples = save_solution_samples(result.solution, out.with_suffix(".npz"), args.samples)
    report = result.report
    print(f"[OK] ||w-W||      = {report.l2_triple:.4e}")
    print(f"[OK] |||Pi w-W||| = {report.supercloseness:.4e}")
    print(f"[OK] |||w-W|||    = {report.energy:.4e}")
    print(f"[OK] Relative residual {result.residual:.2e}, {result.n_dofs} unknowns, {result.elapsed:.2f}s")
    print(f"[OK] Wrote {out} and {samples}")
    return EXIT_OK


def cmd_study(args, config: ConfigManager) -> int:
    study = _study_config(args, config, args.epsilon, args.N)
    fmt = args.format or config.get("output.format", "csv")
    print(f"[INFO] Study {study.mesh.label}, k={study.degree}, eps={args.epsilon:g}, "
          f"N={','.join(map(str, study.N_list))}, rates={study.rate_formula}, jobs={study.jobs}")
    table = run_study(study)
    _print_table(table)
    out = table.write(_output_path(args, config, fmt), fmt)
    print(f"[OK] Wrote {out}")
    return EXIT_NUMERICAL if table.failed else EXIT_OK


def cmd_robust(args, config: ConfigManager) -> int:
    epsilons = args.epsilon
    if not epsilons:
        raise ValueError("[ERROR] --epsilon list is empty")
    study = _study_config(args, config, min(epsilons), [args.N])
    fmt = args.format or config.get("output.format", "csv")
    print(f"[INFO] Robustness {study.mesh.label}, k={study.degree}, N={args.N}, "
          f"eps={','.join(fmt6(e) for e in epsilons)}")
    table = run_robustness(study, epsilons, args.N)
    _print_table(table)
    ratios = table.uniformity()
    tolerance = config.get_robust_tolerance()
    for column, ratio in ratios.items():
        tag = "[OK]" if ratio <= tolerance else "[WARN]"
        print(f"{tag} {column}: max/min over eps >= 1e-8 = {ratio:.4f} (tolerance {tolerance})")
    out = table.write(_output_path(args, config, fmt), fmt)
    print(f"[OK] Wrote {out}")
    return EXIT_NUMERICAL if table.failed else EXIT_OK


COMMANDS = {"solve": cmd_solve, "study": cmd_study, "robust": cmd_robust}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = ConfigManager(args.config)
        config.configure_logging(args.verbose)
        if args.verbose:
            config.print_summary()
        warnings.simplefilter("default")
        print("=" * 70)
        print(f"ldg_layer {args.command}")
        print("=" * 70)
        return COMMANDS[args.command](args, config)
    except (NumericalFailure, np.linalg.LinAlgError, ArithmeticError, MemoryError) as e:
        print("\n" + "=" * 70)
        print("[FAILED] Numerical failure")
        print("=" * 70)
        print(f"{type(e).__name__}: {e}")
        return EXIT_NUMERICAL
    except (FileNotFoundError, ValueError) as e:
        print("\n" + "=" * 70)
        print("[ERROR] Invalid configuration")
        print("=" * 70)
        print(f"{e}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
