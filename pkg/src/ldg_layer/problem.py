# src/ldg_layer/problem.py
"""
PDE Data for -eps*Lap(u) + a.grad(u) + b*u = f on (0,1)^2, u = 0 on the boundary

A Problem bundles the coefficient callables a1, a2, b, f with the lower
bounds alpha1 <= a1, alpha2 <= a2, beta <= b - div(a)/2 and an optional
exact solution. Callables take broadcastable arrays (x, y) and may return
scalars; results are broadcast to the shape of the inputs.

Built-in problems (see get_problem):
    example1    a = (2 - x, 3 - y^3), b = 1,
                u = (1 - e^{-(1-x)/eps}) y^3 (1 - e^{-2(1-y)/eps}) sin x
    polynomial  a = (1, 1), b = 2, u = x(1-x) y(1-y)

Usage:
    problem = get_problem('example1', 1e-8)
    report = verify_coercivity(problem)
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from .errors import CoercivityWarning

logger = logging.getLogger(__name__)

ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]

FD_STEP = 1e-6


def _evaluate(func: ScalarField, x, y) -> np.ndarray:
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    value = np.asarray(func(x, y), dtype=float)
    return np.array(np.broadcast_to(value, x.shape))


@dataclass(frozen=True)
class ExactSolution:
    """u with first (and optionally second) derivatives."""

    u: ScalarField
    u_x: ScalarField
    u_y: ScalarField
    u_xx: Optional[ScalarField] = None
    u_yy: Optional[ScalarField] = None

    def laplacian(self, x, y, step: float = 1e-4) -> np.ndarray:
        """Analytic when second derivatives are supplied, else central differences."""
        if self.u_xx is not None and self.u_yy is not None:
            return _evaluate(self.u_xx, x, y) + _evaluate(self.u_yy, x, y)
        ux_p = _evaluate(self.u_x, np.asarray(x) + step, y)
        ux_m = _evaluate(self.u_x, np.asarray(x) - step, y)
        uy_p = _evaluate(self.u_y, x, np.asarray(y) + step)
        uy_m = _evaluate(self.u_y, x, np.asarray(y) - step)
        return (ux_p - ux_m + uy_p - uy_m) / (2.0 * step)


@dataclass(frozen=True)
class Problem:
    """Convection-diffusion data; see module docstring."""

    epsilon: float
    a1: ScalarField
    a2: ScalarField
    b: ScalarField
    f: ScalarField
    alpha1: float
    alpha2: float
    beta: float
    exact: Optional[ExactSolution] = None
    da1_dx: Optional[ScalarField] = None
    da2_dy: Optional[ScalarField] = None
    name: str = "custom"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"[ERROR] epsilon must be positive, got {self.epsilon}")
        for label in ("alpha1", "alpha2", "beta"):
            value = getattr(self, label)
            if not value > 0:
                raise ValueError(f"[ERROR] {label} must be positive, got {value}")

    def convection(self, x, y):
        return _evaluate(self.a1, x, y), _evaluate(self.a2, x, y)

    def reaction(self, x, y) -> np.ndarray:
        return _evaluate(self.b, x, y)

    def forcing(self, x, y) -> np.ndarray:
        values = _evaluate(self.f, x, y)
        if np.any(np.isnan(values)):
            raise ValueError(f"[ERROR] Forcing of problem '{self.name}' evaluated to NaN")
        return values

    def div_a(self, x, y) -> np.ndarray:
        """d(a1)/dx + d(a2)/dy; central differences (step 1e-6) without analytic derivatives."""
        if self.da1_dx is not None:
            d1 = _evaluate(self.da1_dx, x, y)
        else:
            x = np.asarray(x, dtype=float)
            d1 = (_evaluate(self.a1, x + FD_STEP, y) - _evaluate(self.a1, x - FD_STEP, y)) / (2 * FD_STEP)
        if self.da2_dy is not None:
            d2 = _evaluate(self.da2_dy, x, y)
        else:
            y = np.asarray(y, dtype=float)
            d2 = (_evaluate(self.a2, x, y + FD_STEP) - _evaluate(self.a2, x, y - FD_STEP)) / (2 * FD_STEP)
        return d1 + d2

    def norm_weight(self, x, y) -> np.ndarray:
        """b - div(a)/2, the weight of u in the energy norm."""
        return self.reaction(x, y) - 0.5 * self.div_a(x, y)

    def volume_weight(self, x, y) -> np.ndarray:
        """b - div(a), the (U, v) mass weight of the bilinear form."""
        return self.reaction(x, y) - self.div_a(x, y)

    def require_exact(self) -> ExactSolution:
        if self.exact is None:
            raise ValueError(f"[ERROR] Problem '{self.name}' has no exact solution")
        return self.exact

    def exact_triple(self, x, y):
        """(u, eps*u_x, eps*u_y) at the given points."""
        exact = self.require_exact()
        return (
            _evaluate(exact.u, x, y),
            self.epsilon * _evaluate(exact.u_x, x, y),
            self.epsilon * _evaluate(exact.u_y, x, y),
        )

    def pde_residual(self, x, y) -> np.ndarray:
        """-eps*Lap(u) + a.grad(u) + b*u - f for the exact solution."""
        exact = self.require_exact()
        a1, a2 = self.convection(x, y)
        return (
            -self.epsilon * exact.laplacian(x, y)
            + a1 * _evaluate(exact.u_x, x, y)
            + a2 * _evaluate(exact.u_y, x, y)
            + self.reaction(x, y) * _evaluate(exact.u, x, y)
            - self.forcing(x, y)
        )


@dataclass(frozen=True)
class CoercivityReport:
    min_weight: float
    argmin: tuple
    beta: float
    min_a1: float
    min_a2: float
    satisfied: bool
    convection_ok: bool


def verify_coercivity(problem: Problem, n_samples: int = 101, warn: bool = True) -> CoercivityReport:
    """
    Sample b - div(a)/2 and a1, a2 on an n x n grid of [0, 1]^2.

    Violations are flagged in the report (and warned about), never raised.
    """
    t = np.linspace(0.0, 1.0, n_samples)
    X, Y = np.meshgrid(t, t, indexing="ij")
    weight = problem.norm_weight(X, Y)
    a1, a2 = problem.convection(X, Y)
    idx = np.unravel_index(np.argmin(weight), weight.shape)
    min_weight = float(weight[idx])
    satisfied = min_weight > 0 and min_weight >= problem.beta * (1.0 - 1e-12)
    convection_ok = bool(a1.min() >= problem.alpha1 * (1.0 - 1e-12) and a2.min() >= problem.alpha2 * (1.0 - 1e-12))

    report = CoercivityReport(
        min_weight=min_weight,
        argmin=(float(X[idx]), float(Y[idx])),
        beta=problem.beta,
        min_a1=float(a1.min()),
        min_a2=float(a2.min()),
        satisfied=bool(satisfied),
        convection_ok=convection_ok,
    )
    if warn and not (report.satisfied and report.convection_ok):
        warnings.warn(
            f"Problem '{problem.name}': min(b - div(a)/2) = {min_weight:g} (beta = {problem.beta:g}), "
            f"min a1 = {report.min_a1:g} (alpha1 = {problem.alpha1:g}), "
            f"min a2 = {report.min_a2:g} (alpha2 = {problem.alpha2:g})",
            CoercivityWarning,
            stacklevel=2,
        )
    return report


# ----- example1 -----

class _Example1:
    """Closed forms for example1; an instance is picklable, unlike lambdas."""

    def __init__(self, epsilon: float):
        self.eps = float(epsilon)

    def _x_parts(self, x):
        eps = self.eps
        E1 = np.exp(-(1.0 - x) / eps)
        C1 = -np.expm1(-(1.0 - x) / eps)
        X = C1 * np.sin(x)
        dX = -(E1 / eps) * np.sin(x) + C1 * np.cos(x)
        d2X = -(E1 / eps ** 2) * np.sin(x) - 2.0 * (E1 / eps) * np.cos(x) - C1 * np.sin(x)
        # -eps X'' + (2 - x) X', grouped so the 1/eps terms combine before rounding
        gX = (x - 1.0) * (E1 / eps) * np.sin(x) + 2.0 * E1 * np.cos(x) + eps * C1 * np.sin(x) \
            + (2.0 - x) * C1 * np.cos(x)
        return X, dX, d2X, gX

    def _y_parts(self, y):
        eps = self.eps
        E2 = np.exp(-2.0 * (1.0 - y) / eps)
        C2 = -np.expm1(-2.0 * (1.0 - y) / eps)
        Y = y ** 3 * C2
        dY = 3.0 * y ** 2 * C2 - 2.0 * y ** 3 * E2 / eps
        d2Y = 6.0 * y * C2 - 12.0 * y ** 2 * E2 / eps - 4.0 * y ** 3 * E2 / eps ** 2
        # -eps Y'' + (3 - y^3) Y'
        gY = -6.0 * eps * y * C2 + 12.0 * y ** 2 * E2 + 2.0 * y ** 3 * (y ** 3 - 1.0) * E2 / eps \
            + 3.0 * (3.0 - y ** 3) * y ** 2 * C2
        return Y, dY, d2Y, gY

    def a1(self, x, y):
        return 2.0 - x + 0.0 * y

    def a2(self, x, y):
        return 3.0 - y ** 3 + 0.0 * x

    def da1_dx(self, x, y):
        return -1.0 + 0.0 * (x + y)

    def da2_dy(self, x, y):
        return -3.0 * y ** 2 + 0.0 * x

    def b(self, x, y):
        return 1.0 + 0.0 * (x + y)

    def u(self, x, y):
        return self._x_parts(x)[0] * self._y_parts(y)[0]

    def u_x(self, x, y):
        return self._x_parts(x)[1] * self._y_parts(y)[0]

    def u_y(self, x, y):
        return self._x_parts(x)[0] * self._y_parts(y)[1]

    def u_xx(self, x, y):
        return self._x_parts(x)[2] * self._y_parts(y)[0]

    def u_yy(self, x, y):
        return self._x_parts(x)[0] * self._y_parts(y)[2]

    def f(self, x, y):
        X, _, _, gX = self._x_parts(x)
        Y, _, _, gY = self._y_parts(y)
        return X * gY + Y * gX + X * Y


def example1(epsilon: float) -> Problem:
    """
    Manufactured test problem with exponential layers at x = 1 and y = 1.

    a1 = 2 - x, a2 = 3 - y^3, b = 1, alpha1 = 1, alpha2 = 2 and
    b - div(a)/2 = 3/2 + 3y^2/2 >= 3/2 = beta.

    Args:
        epsilon: Perturbation parameter, 0 < epsilon < 1

    Returns:
        Problem with analytic f and exact solution
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"[ERROR] example1 requires 0 < epsilon < 1, got {epsilon}")
    ex = _Example1(epsilon)
    return Problem(
        epsilon=float(epsilon),
        a1=ex.a1, a2=ex.a2, b=ex.b, f=ex.f,
        alpha1=1.0, alpha2=2.0, beta=1.5,
        exact=ExactSolution(u=ex.u, u_x=ex.u_x, u_y=ex.u_y, u_xx=ex.u_xx, u_yy=ex.u_yy),
        da1_dx=ex.da1_dx, da2_dy=ex.da2_dy,
        name="example1",
    )


class _Polynomial:
    """u = x(1-x) y(1-y) with a = (1, 1), b = 2."""

    def __init__(self, epsilon: float):
        self.eps = float(epsilon)

    def one(self, x, y):
        return 1.0 + 0.0 * (x + y)

    def two(self, x, y):
        return 2.0 + 0.0 * (x + y)

    def zero(self, x, y):
        return 0.0 * (x + y)

    def u(self, x, y):
        return x * (1 - x) * y * (1 - y)

    def u_x(self, x, y):
        return (1 - 2 * x) * y * (1 - y)

    def u_y(self, x, y):
        return x * (1 - x) * (1 - 2 * y)

    def u_xx(self, x, y):
        return -2.0 * y * (1 - y) + 0.0 * x

    def u_yy(self, x, y):
        return -2.0 * x * (1 - x) + 0.0 * y

    def f(self, x, y):
        lap = self.u_xx(x, y) + self.u_yy(x, y)
        return -self.eps * lap + self.u_x(x, y) + self.u_y(x, y) + 2.0 * self.u(x, y)


def polynomial(epsilon: float) -> Problem:
    """Constant-coefficient problem whose solution lies in Q^2 with zero trace."""
    ex = _Polynomial(epsilon)
    return Problem(
        epsilon=float(epsilon),
        a1=ex.one, a2=ex.one, b=ex.two, f=ex.f,
        alpha1=1.0, alpha2=1.0, beta=2.0,
        exact=ExactSolution(u=ex.u, u_x=ex.u_x, u_y=ex.u_y, u_xx=ex.u_xx, u_yy=ex.u_yy),
        da1_dx=ex.zero, da2_dy=ex.zero,
        name="polynomial",
    )


def constant_coefficients(epsilon: float, a1: float = 1.0, a2: float = 1.0, b: float = 1.0,
                          f: float = 0.0, beta: Optional[float] = None) -> Problem:
    """Problem with constant data (div(a) = 0), mainly for checks."""
    return Problem(
        epsilon=epsilon,
        a1=lambda x, y: a1, a2=lambda x, y: a2,
        b=lambda x, y: b, f=lambda x, y: f,
        alpha1=a1, alpha2=a2, beta=b if beta is None else beta,
        da1_dx=lambda x, y: 0.0, da2_dy=lambda x, y: 0.0,
        name="constant",
    )


# ----- registry -----

_REGISTRY: Dict[str, Callable[[float], Problem]] = {
    "example1": example1,
    "polynomial": polynomial,
}


def register_problem(name: str, factory: Callable[[float], Problem], overwrite: bool = False) -> None:
    """Register factory(epsilon) -> Problem under a name usable by studies and the CLI."""
    if name in _REGISTRY and not overwrite:
        raise ValueError(f"[ERROR] Problem '{name}' is already registered")
    _REGISTRY[name] = factory
    logger.debug("Registered problem '%s'", name)


def get_problem(name: str, epsilon: float) -> Problem:
    if name not in _REGISTRY:
        raise ValueError(f"[ERROR] Unknown problem '{name}'. Available: {', '.join(sorted(_REGISTRY))}")
    return _REGISTRY[name](epsilon)


def available_problems():
    return sorted(_REGISTRY)
