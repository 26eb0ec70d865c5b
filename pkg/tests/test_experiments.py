#!/usr/bin/env python3
"""
Experiment Driver Test

Rate formulas, StudyConfig validation, table output (CSV / Markdown / Excel)
and failure capture of single rows
"""

import math
import sys
import tempfile
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from ldg_layer.config_manager import ConfigManager
from ldg_layer.errors import MemoryBudgetError, NumericalFailure, ParameterOverrideWarning
from ldg_layer.experiments import (
    CSV_COLUMNS,
    CaseResult,
    ConvergenceTable,
    StudyConfig,
    fmt6,
    rate_r2,
    rate_rS,
    resolve_rate,
    run_robustness,
    run_study,
    sample_solution,
    solve_case,
)
from ldg_layer.meshgen import MeshKind
from ldg_layer.norms_errors import ErrorReport


def test_rate_formulas():
    test_cases = [
        (rate_r2(5.3808e-4, 1.3802e-4), 1.9630),
        (rate_r2(1.0, 0.25), 2.0),
        (rate_rS(1.5824e-3, 3.6396e-4, 32), 2.8771),
        (rate_rS((math.log(16) / 16) ** 2, (math.log(32) / 32) ** 2, 16), 2.0),
    ]
    for value, expected in test_cases:
        assert value == pytest.approx(expected, abs=1e-4)
        print(f"[OK] rate {value:.4f} ~ {expected}")

    for bad in [(0.0, 1.0), (1.0, -1.0)]:
        with pytest.raises(ValueError):
            rate_r2(*bad)
    with pytest.raises(ValueError):
        rate_rS(1.0, 0.5, 2)
    print("[OK] Invalid rate inputs rejected")


def test_resolve_rate_and_fmt():
    assert resolve_rate(MeshKind.SHISHKIN, "auto") == "rS"
    assert resolve_rate("bs", "auto") == "r2"
    assert resolve_rate("bakhvalov", "rS") == "rS"
    with pytest.raises(ValueError):
        resolve_rate("shishkin", "r3")

    test_cases = [
        (1e-8, "1.00000e-08"),
        (4.0, "4.00000"),
        (5.7757e-3, "0.00577570"),
        (2.7546, "2.75460"),
        (None, ""),
        (float("nan"), ""),
    ]
    for value, expected in test_cases:
        assert fmt6(value) == expected, f"{value} -> {fmt6(value)}"
        print(f"[OK] fmt6({value}) = '{expected}'")


def test_study_config_validation():
    config = StudyConfig(mesh="s", degree=2, epsilon=1e-8)
    assert config.mesh is MeshKind.SHISHKIN
    assert config.effective_sigma == 4.0 and config.rate_formula == "rS"

    bad = [
        dict(degree=0),
        dict(epsilon=0.0),
        dict(epsilon=1e-12),
        dict(N_list=(16, 48)),
        dict(N_list=(15, 30)),
        dict(N_list=()),
        dict(jobs=0),
        dict(rates="r5"),
        dict(lambda1=-1.0),
        dict(sigma=-1.0),
    ]
    for kwargs in bad:
        values = dict(mesh="bs", degree=1, epsilon=1e-6)
        values.update(kwargs)
        with pytest.raises(ValueError):
            StudyConfig(**values)
        print(f"[OK] rejected {kwargs}")

    assert StudyConfig(mesh="bs", degree=1, epsilon=1e-12, allow_tiny_epsilon=True).epsilon == 1e-12
    with pytest.raises(ValueError):
        StudyConfig(mesh="bakhvalov", degree=1, epsilon=1.0)
    with pytest.warns(ParameterOverrideWarning):
        StudyConfig(mesh="shishkin", degree=2, epsilon=1e-6, sigma=2.5)
    print("[OK] Tiny eps override and sigma < k+2 warning")


def test_from_config():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "study.yaml"
        path.write_text("study:\n  sigma_offset: 3.0\n  lambda2: 0.5\nsolver:\n  refine_steps: 2\n",
                        encoding="utf-8")
        config = ConfigManager(str(path))
    study = StudyConfig.from_config(config, mesh="bs", degree=1, epsilon=1e-6, lambda1=None)
    assert study.effective_sigma == 4.0
    assert (study.lambda1, study.lambda2) == (0.0, 0.5)
    assert study.solver_options["refine_steps"] == 2
    overridden = StudyConfig.from_config(config, mesh="bs", degree=1, epsilon=1e-6, sigma=5.0)
    assert overridden.effective_sigma == 5.0
    print("[OK] Config defaults with command-line overrides")


def test_single_row_study():
    """S-mesh, k=2, eps=1e-8, N=16: errors near the published values"""
    config = StudyConfig(mesh="shishkin", degree=2, epsilon=1e-8, N_list=(16,))
    table = run_study(config)
    assert not table.failed
    row = table.rows[0]
    assert row.error_value("l2_err") == pytest.approx(5.7757e-3, rel=0.02)
    assert row.error_value("superclose_err") == pytest.approx(1.7540e-2, rel=0.02)
    assert row.error_value("energy_err") == pytest.approx(1.3364e-2, rel=0.02)
    assert row.rates == {}
    assert row.reference["max_abs_dpsi"] == pytest.approx(2 * math.log(16))
    print(f"[OK] N=16 row: {row.report.as_dict()}")

    frame = table.csv_frame()
    assert list(frame.columns) == CSV_COLUMNS
    assert frame.loc[0, "l2_rate"] == "" and frame.loc[0, "mesh"] == "shishkin"
    assert frame.loc[0, "epsilon"] == "1.00000e-08" and frame.loc[0, "sigma"] == "4.00000"

    with tempfile.TemporaryDirectory() as tmp:
        csv_path = table.write(Path(tmp) / "table.csv", "csv")
        text = csv_path.read_text(encoding="utf-8")
        assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
        assert "\r" not in text
        reread = pd.read_csv(csv_path, dtype=str, keep_default_na=False)
        assert reread.loc[0, "energy_rate"] == ""

        md_path = table.write(Path(tmp) / "table.md", "md")
        assert md_path.read_text(encoding="utf-8").startswith("### S-mesh, k=2")

        xlsx_path = table.write(Path(tmp) / "table.xlsx", "xlsx")
        sheets = pd.read_excel(xlsx_path, sheet_name=None)
        assert set(sheets) == {"table", "metadata"}
        assert sheets["table"].loc[0, "N"] == 16

        with pytest.raises(ValueError):
            table.write(Path(tmp) / "table.txt", "txt")
    print("[OK] CSV, Markdown and Excel output")


def _fake_row(N, errors, status="ok"):
    report = None
    if errors is not None:
        report = ErrorReport(l2_triple=errors[0], energy=errors[2], supercloseness=errors[1])
    return CaseResult(mesh=MeshKind.BAKHVALOV_SHISHKIN, k=1, epsilon=1e-8, sigma=3.0, N=N,
                      status=status, report=report)


def test_compute_rates_and_failures():
    """Rates skip rows next to a failed one; the first row stays empty"""
    rows = [
        _fake_row(16, (7.4770e-3, 1.5422e-2, 2.4479e-2)),
        _fake_row(32, (2.0492e-3, 4.2764e-3, 8.9815e-3)),
        _fake_row(64, None, status="failed"),
        _fake_row(128, (1.3802e-4, 2.9e-4, 1.2e-3)),
    ]
    table = ConvergenceTable(rows=rows, metadata={"mesh": "bs", "k": 1, "sigma": 3.0, "rates": "r2"})
    table.compute_rates("r2")
    assert rows[0].rates == {} and rows[2].rates == {} and rows[3].rates == {}
    assert rows[1].rates["l2_rate"] == pytest.approx(1.8674, abs=5e-4)
    assert rows[1].rates["superclose_rate"] == pytest.approx(1.8506, abs=5e-4)
    assert rows[1].rates["energy_rate"] == pytest.approx(1.4465, abs=5e-4)
    assert [r.N for r in table.failed] == [64]

    frame = table.csv_frame()
    assert frame.loc[2, "l2_err"] == "" and frame.loc[2, "N"] == "64"
    assert "failed" in table.to_markdown()
    data = table.to_dataframe()
    assert np.isnan(data.loc[2, "l2_err"]) and data.loc[2, "status"] == "failed"
    print("[OK] Rates from consecutive successful rows only")


def test_uniformity():
    rows = []
    for eps, value in [(1e-3, 1.0), (1e-5, 1.02), (1e-8, 1.01), (1e-10, 5.0)]:
        row = _fake_row(128, (value, value, value))
        row.epsilon = eps
        rows.append(row)
    table = ConvergenceTable(rows=rows, kind="robustness")
    ratios = table.uniformity()
    for column, ratio in ratios.items():
        assert ratio == pytest.approx(1.02)
    print(f"[OK] Uniformity over eps >= 1e-8: {ratios}")


def test_failure_is_captured():
    """A residual above tolerance marks the row failed instead of aborting"""
    config = StudyConfig(mesh="bs", degree=1, epsilon=1e-4, N_list=(4, 8), residual_tolerance=1e-300)
    with pytest.raises(NumericalFailure):
        solve_case(config, 4)
    table = run_study(config)
    assert [row.status for row in table.rows] == ["failed", "failed"]
    assert "residual" in table.rows[0].error.lower()
    print("[OK] Failed rows recorded")


def test_memory_guard_marks_row_failed():
    """An oversized monolithic row fails alone; condensation lifts the guard"""
    config = StudyConfig(mesh="shishkin", degree=1, epsilon=1e-4, N_list=(4, 8), max_factor_mb=0.5)
    with pytest.raises(MemoryBudgetError, match="condensation"):
        solve_case(config, 8)
    table = run_study(config)
    assert [row.status for row in table.rows] == ["ok", "failed"]
    assert "--condense" in table.rows[1].error
    assert table.rows[1].rates == {}

    condensed = run_study(replace(config, condense=True))
    assert not condensed.failed and "l2_rate" in condensed.rows[1].rates
    print("[OK] Memory guard fails one row, the study continues")


def test_robustness_and_samples():
    config = StudyConfig(mesh="bakhvalov", degree=1, epsilon=1e-6, N_list=(8,))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table = run_robustness(config, [1e-2, 1e-4, 1e-6])
    assert table.kind == "robustness" and len(table.rows) == 3
    assert [row.epsilon for row in table.rows] == [1e-2, 1e-4, 1e-6]
    assert all(row.ok and row.rates == {} for row in table.rows)
    assert table.metadata["N"] == 8

    result = solve_case(config, 8, keep_solution=True)
    xs, ys, values = sample_solution(result.solution, n=11)
    assert xs.shape == (11,) and values["u"].shape == (11, 11)
    assert all(np.all(np.isfinite(v)) for v in values.values())
    print("[OK] Robustness table and solution samples")


def main():
    from suite import run_suite
    return run_suite("EXPERIMENT DRIVER TEST SUITE", [
        test_rate_formulas,
        test_resolve_rate_and_fmt,
        test_study_config_validation,
        test_from_config,
        test_single_row_study,
        test_compute_rates_and_failures,
        test_uniformity,
        test_failure_is_captured,
        test_memory_guard_marks_row_failed,
        test_robustness_and_samples,
    ])


if __name__ == "__main__":
    sys.exit(main())
