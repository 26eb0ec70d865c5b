#!/usr/bin/env python3
"""
Basis and Quadrature Test

Gauss-Legendre exactness, Legendre recurrences, reference mass matrix and
point location / field evaluation
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from ldg_layer.basis_quadrature import (
    MAX_GAUSS_POINTS,
    BasisSet,
    error_quadrature_points,
    eval_field,
    gauss_legendre,
    legendre_eval,
    locate,
)
from ldg_layer.fem_space import DiscreteField, FemSpace
from ldg_layer.meshgen import MeshKind, build_tensor_mesh


def test_gauss_legendre_exactness():
    """n-point rule integrates monomials up to degree 2n-1 exactly"""
    for n in [*range(1, 11), 16, MAX_GAUSS_POINTS]:
        rule = gauss_legendre(n)
        assert rule.nodes.shape == (n,)
        assert np.all(np.diff(rule.nodes) > 0)
        assert np.all(rule.weights > 0)
        np.testing.assert_allclose(rule.nodes, -rule.nodes[::-1], atol=0)
        for degree in range(2 * n):
            exact = 0.0 if degree % 2 else 2.0 / (degree + 1)
            assert rule.integrate(rule.nodes ** degree) == pytest.approx(exact, abs=1e-14)
        print(f"[OK] {n}-point rule exact to degree {2 * n - 1}")

    # known 2-point nodes
    np.testing.assert_allclose(gauss_legendre(2).nodes, [-1 / np.sqrt(3), 1 / np.sqrt(3)], rtol=1e-14)


def test_gauss_legendre_rejects():
    for n in [0, -1, MAX_GAUSS_POINTS + 1, 2.5]:
        with pytest.raises(ValueError):
            gauss_legendre(n)
        print(f"[OK] order {n} rejected")


def test_mapped_rule():
    rule = gauss_legendre(4)
    x, w = rule.mapped(0.25, 0.75)
    assert np.sum(w) == pytest.approx(0.5, rel=1e-14)
    assert np.sum(w * x ** 3) == pytest.approx((0.75 ** 4 - 0.25 ** 4) / 4, rel=1e-14)
    print("[OK] Rule mapped to [0.25, 0.75]")


def test_legendre_values():
    """P_n(1) = 1, P_n(-1) = (-1)^n, P_n'(1) = n(n+1)/2, orthogonality"""
    k = 6
    values, derivs = legendre_eval(k, np.array([-1.0, 1.0]))
    n = np.arange(k + 1)
    np.testing.assert_allclose(values[:, 1], 1.0)
    np.testing.assert_allclose(values[:, 0], (-1.0) ** n)
    np.testing.assert_allclose(derivs[:, 1], n * (n + 1) / 2)

    rule = gauss_legendre(k + 1)
    vals, _ = legendre_eval(k, rule.nodes)
    gram = (vals * rule.weights) @ vals.T
    np.testing.assert_allclose(gram, np.diag(2.0 / (2 * n + 1)), atol=1e-14)
    print(f"[OK] Legendre P_0..P_{k} end values and orthogonality")

    # P_2 and its derivative against the closed form
    t = np.linspace(-1, 1, 11)
    values, derivs = legendre_eval(2, t)
    np.testing.assert_allclose(values[2], 1.5 * t ** 2 - 0.5, atol=1e-15)
    np.testing.assert_allclose(derivs[2], 3.0 * t, atol=1e-15)
    print("[OK] P_2 closed form")


def test_legendre_derivatives():
    """Derivatives agree with central differences of the values"""
    step = 1e-6
    t = np.linspace(-1.0 + step, 1.0 - step, 41)
    for k in [1, 2, 3, 6, 10]:
        _, derivs = legendre_eval(k, t)
        forward, _ = legendre_eval(k, t + step)
        backward, _ = legendre_eval(k, t - step)
        np.testing.assert_allclose(derivs, (forward - backward) / (2 * step), atol=1e-6 * k ** 2)
        print(f"[OK] P_0..P_{k}: derivatives match central differences")


def test_basis_set():
    for k in [1, 2, 3]:
        basis = BasisSet(k)
        assert basis.nloc == (k + 1) ** 2
        B, dB = basis.tabulate(gauss_legendre(3).nodes)
        assert B.shape == (3, k + 1) and dB.shape == (3, k + 1)
        np.testing.assert_array_equal(basis.minus, (-1.0) ** np.arange(k + 1))
        assert basis.local_index(k, k) == basis.nloc - 1
        mass = basis.reference_mass()
        assert mass.shape == (basis.nloc, basis.nloc)
        assert np.trace(mass) == pytest.approx(np.sum(np.outer(basis.mass_1d(), basis.mass_1d())))
        print(f"[OK] Q^{k} basis: {basis.nloc} local functions")

    for bad in [0, -1, 1.5]:
        with pytest.raises(ValueError):
            BasisSet(bad)
    assert error_quadrature_points(1) == 5 and error_quadrature_points(4) == 7
    print("[OK] Invalid degrees rejected")


def test_locate():
    """Points on a node go to the left interval; ends are clipped"""
    points = np.array([0.0, 0.25, 0.5, 1.0])
    test_cases = [
        (0.0, 0), (0.1, 0), (0.25, 0), (0.2500001, 1), (0.5, 1), (0.75, 2), (1.0, 2),
    ]
    for x, expected in test_cases:
        assert int(locate(points, np.array([x]))[0]) == expected
        print(f"[OK] locate({x}) = {expected}")


def test_eval_field():
    """A projected Q^k polynomial is reproduced at arbitrary points"""
    mesh = build_tensor_mesh(MeshKind.SHISHKIN, 8, 1e-3, 4.0, 1.0, 2.0)
    space = FemSpace(mesh, 2)
    func = lambda x, y: 1.0 + x - 2.0 * y + x * x * y + 3.0 * x * y * y  # noqa: E731
    field = DiscreteField.l2_projection(space, func, 4)

    rng = np.random.default_rng(0)
    x, y = rng.random(200), rng.random(200)
    np.testing.assert_allclose(eval_field(field, x, y), func(x, y), atol=1e-12)
    assert isinstance(eval_field(field, 0.3, 0.7), float)
    assert eval_field(field, 1.0, 1.0) == pytest.approx(func(1.0, 1.0), abs=1e-12)
    print("[OK] Q^2 polynomial reproduced on a Shishkin mesh")

    for x, y in [(-0.1, 0.5), (0.5, 1.01), (np.nan, 0.2)]:
        with pytest.raises(ValueError):
            eval_field(field, x, y)
    print("[OK] Points outside the unit square rejected")


def test_eval_field_left_trace():
    """On an element edge the value comes from the left/below element"""
    mesh = build_tensor_mesh(MeshKind.BAKHVALOV_SHISHKIN, 4, 1e-2, 2.0, 1.0, 1.0)
    space = FemSpace(mesh, 1)
    field = DiscreteField.zeros(space)
    # element 0 is constant 1, element 1 (to its right) constant 5
    field.coeffs[0, 0] = 1.0
    field.coeffs[1, 0] = 5.0
    x_edge = mesh.x_mesh.points[1]
    y_mid = 0.5 * mesh.y_mesh.points[1]
    assert eval_field(field, x_edge, y_mid) == pytest.approx(1.0)
    assert eval_field(field, x_edge + 1e-12, y_mid) == pytest.approx(5.0)
    print("[OK] Edge points take the left trace")


def main():
    from suite import run_suite
    return run_suite("BASIS AND QUADRATURE TEST SUITE", [
        test_gauss_legendre_exactness,
        test_gauss_legendre_rejects,
        test_mapped_rule,
        test_legendre_values,
        test_legendre_derivatives,
        test_basis_set,
        test_locate,
        test_eval_field,
        test_eval_field_left_trace,
    ])


if __name__ == "__main__":
    sys.exit(main())
