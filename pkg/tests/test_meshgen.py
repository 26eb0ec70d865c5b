#!/usr/bin/env python3
"""
Mesh Generator Test

Verifies transition parameters, mesh points and mesh-function identities
for the Shishkin, Bakhvalov-Shishkin and Bakhvalov-type meshes
"""

import math
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from ldg_layer.errors import SingularPerturbationWarning
from ldg_layer.meshgen import (
    MeshKind,
    build_mesh_1d,
    build_tensor_mesh,
    mesh_report,
    read_mesh_points,
    transition_parameter,
    write_mesh,
)

KINDS = list(MeshKind)


def _quiet_mesh(*args):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularPerturbationWarning)
        return build_mesh_1d(*args)


def test_transition_parameter():
    """tau = min(1/2, sigma*eps/alpha*phi(1/2))"""
    test_cases = [
        (MeshKind.SHISHKIN, 0.01, 4.0, 1.0, 8, 0.04 * math.log(8)),
        (MeshKind.BAKHVALOV_SHISHKIN, 1e-8, 4.0, 1.0, 16, 4e-8 * math.log(16)),
        (MeshKind.BAKHVALOV, 1e-8, 3.0, 2.0, None, 1.5e-8 * math.log(1e8)),
        (MeshKind.SHISHKIN, 0.5, 4.0, 1.0, 16, 0.5),
        (MeshKind.BAKHVALOV, 0.3, 4.0, 1.0, None, 0.5),
    ]
    for kind, eps, sigma, alpha, N, expected in test_cases:
        tau = transition_parameter(kind, eps, sigma, alpha, N)
        assert tau == pytest.approx(expected, rel=1e-12), f"{kind} eps={eps}: {tau} != {expected}"
        print(f"[OK] {kind.label} eps={eps:g} N={N} -> tau={tau:.7g}")

    print(f"[OK] S-mesh example tau = {transition_parameter('shishkin', 0.01, 4, 1, 8):.7f} (~0.0831777)")
    assert transition_parameter("shishkin", 0.01, 4, 1, 8) == pytest.approx(0.0831777, abs=1e-7)


def test_transition_parameter_rejects():
    """Invalid parameters raise ValueError"""
    bad = [
        (MeshKind.BAKHVALOV, 1.0, 4.0, 1.0, None),
        (MeshKind.BAKHVALOV, 2.0, 4.0, 1.0, None),
        (MeshKind.SHISHKIN, -1e-3, 4.0, 1.0, 16),
        (MeshKind.SHISHKIN, 1e-3, 0.0, 1.0, 16),
        (MeshKind.SHISHKIN, 1e-3, 4.0, 0.0, 16),
        (MeshKind.SHISHKIN, 1e-3, 4.0, 1.0, None),
    ]
    for args in bad:
        with pytest.raises(ValueError):
            transition_parameter(*args)
        print(f"[OK] rejected {args}")


def test_mesh_points_examples():
    """Hand-evaluated mesh points"""
    s_mesh = _quiet_mesh(MeshKind.SHISHKIN, 8, 0.01, 4.0, 1.0)
    assert s_mesh.points[6] == pytest.approx(1 - 0.04 * math.log(8) / 2, abs=1e-14)
    assert s_mesh.points[6] == pytest.approx(0.958411, abs=1e-6)
    print(f"[OK] S-mesh x_6 = {s_mesh.points[6]:.6f}")

    b_mesh = _quiet_mesh(MeshKind.BAKHVALOV, 8, 0.01, 4.0, 1.0)
    expected = 1 + 0.04 * math.log(1 - 2 * (1 - 0.01) / 8)
    assert b_mesh.points[7] == pytest.approx(expected, abs=1e-14)
    print(f"[OK] B-mesh x_7 = {b_mesh.points[7]:.6f}")

    for kind in KINDS:
        mesh = _quiet_mesh(kind, 16, 1e-4, 4.0, 1.0)
        assert mesh.points[0] == 0.0 and mesh.points[-1] == 1.0
        i = np.arange(9)
        np.testing.assert_array_equal(mesh.points[:9], 2.0 * (1.0 - mesh.tau) * i / 16)
        print(f"[OK] {kind.label}: endpoints and coarse formula")


def test_mesh_invariants_grid():
    """All kinds, N = 4..256, eps = 1e-2..1e-10: increasing, x_{N/2} = 1 - tau"""
    count = 0
    for kind in KINDS:
        for N in [4, 8, 16, 32, 64, 128, 256]:
            for exponent in range(2, 11):
                eps = 10.0 ** (-exponent)
                mesh = _quiet_mesh(kind, N, eps, 4.0, 1.0)
                assert np.all(np.diff(mesh.points) > 0), f"{kind} N={N} eps={eps}"
                assert abs(mesh.points[N // 2] - (1 - mesh.tau)) <= 1e-14
                if not mesh.clamped:
                    h = mesh.coarse_h
                    assert np.all(h >= 1.0 / N * (1 - 1e-12)) and np.all(h <= 2.0 / N * (1 + 1e-12))
                count += 1
    print(f"[OK] {count} meshes satisfy monotonicity and transition-point invariants")


def test_fine_spacing_bounds():
    """Fine-region mesh sizes from the max(phi') bounds"""
    sigma, alpha = 4.0, 1.0
    for N in [16, 64, 256]:
        for eps in [1e-4, 1e-8]:
            s_mesh = build_mesh_1d(MeshKind.SHISHKIN, N, eps, sigma, alpha)
            bound = 2 * sigma / alpha * eps / N * math.log(N)
            assert np.all(s_mesh.fine_h <= bound * (1 + 1e-9))

            b_mesh = build_mesh_1d(MeshKind.BAKHVALOV, N, eps, sigma, alpha)
            assert np.all(b_mesh.fine_h <= 2 * sigma / alpha / N)
            print(f"[OK] N={N} eps={eps:g}: S fine h <= {bound:.3e}, B fine h <= {2 * sigma / N:.3e}")


def test_mesh_functions():
    """phi(0) = 0, phi increasing and convex, psi = exp(-phi), psi' = -psi*phi'"""
    t = np.linspace(0.0, 0.5, 201)
    for kind in KINDS:
        for N, eps in [(16, 1e-8), (128, 1e-3), (64, 1e-10)]:
            phi = kind.phi(t, N, eps)
            assert phi[0] == 0.0
            assert np.all(np.diff(phi) > 0)
            assert np.all(np.diff(phi, 2) >= -1e-12)
            np.testing.assert_allclose(kind.psi(t, N, eps), np.exp(-phi), rtol=0, atol=1e-14)
            np.testing.assert_allclose(kind.dpsi(t, N, eps), -kind.psi(t, N, eps) * kind.dphi(t, N, eps), rtol=1e-12)
            assert kind.phi_half(N, eps) == pytest.approx(float(kind.phi(0.5, N, eps)), rel=1e-12)
        print(f"[OK] {kind.label}: phi/psi identities")

    assert MeshKind.SHISHKIN.max_abs_dpsi(16, 1e-8) == pytest.approx(2 * math.log(16))
    assert MeshKind.BAKHVALOV_SHISHKIN.max_abs_dpsi(1024, 1e-8) == 2.0
    assert MeshKind.BAKHVALOV.max_abs_dpsi(16, 1e-3) == 2.0
    for N, eps in [(16, 1e-8), (256, 1e-10)]:
        assert float(MeshKind.SHISHKIN.psi(0.5, N, eps)) == pytest.approx(1.0 / N, rel=1e-14)
        assert float(MeshKind.BAKHVALOV_SHISHKIN.psi(0.5, N, eps)) == pytest.approx(1.0 / N, rel=1e-14)
        assert float(MeshKind.BAKHVALOV.psi(0.5, N, eps)) == pytest.approx(eps, rel=1e-14)
    print("[OK] max|psi'| and psi(1/2) values")


def test_build_rejects_and_warns():
    """Odd or small N rejected; clamped tau and eps > 1/N warn"""
    for N in [3, 2, 7, 0]:
        with pytest.raises(ValueError):
            build_mesh_1d(MeshKind.SHISHKIN, N, 1e-6, 4.0, 1.0)
    print("[OK] odd / small N rejected")

    with pytest.warns(SingularPerturbationWarning):
        mesh = build_mesh_1d(MeshKind.SHISHKIN, 16, 0.5, 4.0, 1.0)
    assert mesh.clamped and mesh.tau == 0.5
    np.testing.assert_allclose(mesh.points, np.arange(17) / 16)
    print("[OK] clamped tau gives a uniform mesh with a warning")

    with pytest.warns(SingularPerturbationWarning):
        build_mesh_1d(MeshKind.BAKHVALOV_SHISHKIN, 8, 0.2, 0.1, 1.0)
    print("[OK] eps > 1/N warns")


def test_tensor_mesh_and_report():
    """Areas sum to 1, per-direction tau, report fields"""
    mesh = build_tensor_mesh(MeshKind.SHISHKIN, 16, 1e-8, 4.0, 1.0, 2.0)
    assert abs(mesh.element_areas().sum() - 1.0) <= 1e-12
    assert mesh.x_mesh.tau == pytest.approx(2 * mesh.y_mesh.tau, rel=1e-12)
    assert mesh.region_mask("omega11").sum() == 64
    assert mesh.region_mask("omega_x").sum() == 128
    assert mesh.region_mask("all").sum() == 256

    report = mesh_report(mesh, k=2)
    assert report["x"]["max_abs_dpsi"] == pytest.approx(2 * math.log(16))
    assert report["x"]["rate_factor"] == pytest.approx((2 * math.log(16) / 16) ** 3)
    assert report["x"]["mu"] == 1e-8
    assert report["x"]["m_star"] == pytest.approx((2 * math.log(16)) ** 3)
    assert report["area_sum"] == pytest.approx(1.0, abs=1e-12)
    print(f"[OK] S-mesh report: tau_x={report['x']['tau']:.3e}, tau_y={report['y']['tau']:.3e}")

    bs = mesh_report(build_tensor_mesh(MeshKind.BAKHVALOV_SHISHKIN, 32, 1e-8, 3.0, 1.0, 2.0), k=1)
    assert bs["x"]["max_abs_dpsi"] == 2.0 and bs["x"]["mu"] == pytest.approx(1e-8 * math.log(32))
    assert bs["x"]["fine_upper_ratio"] <= bs["sigma"] / bs["x"]["alpha"] * (1 + 1e-12)
    b = mesh_report(build_tensor_mesh(MeshKind.BAKHVALOV, 32, 1e-6, 3.0, 1.0, 2.0), k=1)
    assert b["x"]["max_abs_dpsi"] == 2.0 and b["x"]["psi_half"] == 1e-6
    print("[OK] BS/B report values")


def test_write_mesh_roundtrip():
    """Dump has 17 significant digits and a blank separator line"""
    mesh = build_tensor_mesh(MeshKind.BAKHVALOV, 8, 1e-3, 3.0, 1.0, 2.0)
    with tempfile.TemporaryDirectory() as tmp:
        path = write_mesh(mesh, Path(tmp) / "mesh.txt")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2 * 9 + 1 and lines[9] == ""
        x, y = read_mesh_points(path)
    np.testing.assert_array_equal(x, mesh.x_mesh.points)
    np.testing.assert_array_equal(y, mesh.y_mesh.points)
    print("[OK] mesh dump reproduces points bit-for-bit")


def test_mesh_immutable():
    mesh = build_mesh_1d(MeshKind.SHISHKIN, 8, 1e-6, 4.0, 1.0)
    with pytest.raises(ValueError):
        mesh.points[0] = 0.5
    print("[OK] mesh points are read-only")


def main():
    from suite import run_suite
    return run_suite("MESH GENERATOR TEST SUITE", [
        test_transition_parameter,
        test_transition_parameter_rejects,
        test_mesh_points_examples,
        test_mesh_invariants_grid,
        test_fine_spacing_bounds,
        test_mesh_functions,
        test_build_rejects_and_warns,
        test_tensor_mesh_and_report,
        test_write_mesh_roundtrip,
        test_mesh_immutable,
    ])


if __name__ == "__main__":
    sys.exit(main())
