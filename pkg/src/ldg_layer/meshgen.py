# src/ldg_layer/meshgen.py
"""
Layer-Adapted Mesh Generator

Builds the one-dimensional Shishkin (S), Bakhvalov-Shishkin (BS) and
Bakhvalov-type (B) meshes and their tensor products on the unit square.
Each mesh is uniform on [0, 1-tau] with N/2 intervals and refined towards
x = 1 with N/2 intervals through a mesh-generating function phi.

Mesh functions (t in [0, 1/2]):

    kind   phi(t)                    phi(1/2)    psi(1/2)   max|psi'|
    S      2 t ln N                  ln N        1/N        2 ln N
    BS     -ln(1 - 2(1 - 1/N) t)     ln N        1/N        2
    B      -ln(1 - 2(1 - eps) t)     ln(1/eps)   eps        2

with psi = exp(-phi) and transition parameter
tau = min(1/2, sigma * eps / alpha * phi(1/2)).

Usage:
    mesh = build_tensor_mesh(MeshKind.SHISHKIN, N=16, epsilon=1e-8,
                             sigma=4.0, alpha1=1.0, alpha2=2.0)
    report = mesh_report(mesh, k=2)
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Any, Optional, Union

import numpy as np

from .errors import SingularPerturbationWarning

logger = logging.getLogger(__name__)


class MeshKind(Enum):
    """The three layer-adapted mesh families."""

    SHISHKIN = "shishkin"
    BAKHVALOV_SHISHKIN = "bs"
    BAKHVALOV = "bakhvalov"

    @classmethod
    def from_name(cls, name: Union[str, "MeshKind"]) -> "MeshKind":
        """Parse a CLI/config name ('shishkin', 'bs', 'bakhvalov', or S/BS/B)."""
        if isinstance(name, MeshKind):
            return name
        aliases = {
            "shishkin": cls.SHISHKIN, "s": cls.SHISHKIN, "s-mesh": cls.SHISHKIN,
            "bs": cls.BAKHVALOV_SHISHKIN, "bakhvalov-shishkin": cls.BAKHVALOV_SHISHKIN,
            "bs-mesh": cls.BAKHVALOV_SHISHKIN,
            "bakhvalov": cls.BAKHVALOV, "b": cls.BAKHVALOV, "b-mesh": cls.BAKHVALOV,
        }
        key = str(name).strip().lower()
        if key not in aliases:
            raise ValueError(
                f"[ERROR] Unknown mesh kind '{name}'. Expected one of: shishkin, bs, bakhvalov"
            )
        return aliases[key]

    @property
    def label(self) -> str:
        return {"shishkin": "S-mesh", "bs": "BS-mesh", "bakhvalov": "B-mesh"}[self.value]

    def _check(self, N: int, epsilon: float) -> None:
        if self is MeshKind.BAKHVALOV and not (0.0 < epsilon < 1.0):
            raise ValueError(
                f"[ERROR] B-mesh requires 0 < epsilon < 1 (ln(1/eps) must be positive), got {epsilon}"
            )
        if self is not MeshKind.BAKHVALOV and N < 2:
            raise ValueError(f"[ERROR] N must be at least 2 for {self.label}, got {N}")

    def _delta(self, N: int, epsilon: float) -> float:
        # psi(t) = 1 - 2(1 - delta) t for BS and B
        return 1.0 / N if self is MeshKind.BAKHVALOV_SHISHKIN else epsilon

    def _slope(self, N: int, epsilon: float) -> float:
        return 2.0 * (1.0 - self._delta(N, epsilon))

    def _linear_psi(self, t: np.ndarray, N: int, epsilon: float) -> np.ndarray:
        # (1 - 2t) + 2t*delta keeps psi(1/2) = delta exact
        return (1.0 - 2.0 * t) + 2.0 * t * self._delta(N, epsilon)

    def phi(self, t, N: int, epsilon: float):
        """Mesh-generating function phi(t), t in [0, 1/2]."""
        self._check(N, epsilon)
        t = np.asarray(t, dtype=float)
        if self is MeshKind.SHISHKIN:
            return 2.0 * t * math.log(N)
        return -np.log(self._linear_psi(t, N, epsilon))

    def dphi(self, t, N: int, epsilon: float):
        self._check(N, epsilon)
        t = np.asarray(t, dtype=float)
        if self is MeshKind.SHISHKIN:
            return np.full_like(t, 2.0 * math.log(N))
        return self._slope(N, epsilon) / self._linear_psi(t, N, epsilon)

    def psi(self, t, N: int, epsilon: float):
        """Mesh-characterizing function psi = exp(-phi), closed form."""
        self._check(N, epsilon)
        t = np.asarray(t, dtype=float)
        if self is MeshKind.SHISHKIN:
            return np.power(float(N), -2.0 * t)
        return self._linear_psi(t, N, epsilon)

    def dpsi(self, t, N: int, epsilon: float):
        self._check(N, epsilon)
        t = np.asarray(t, dtype=float)
        if self is MeshKind.SHISHKIN:
            return -2.0 * math.log(N) * np.power(float(N), -2.0 * t)
        return np.full_like(t, -self._slope(N, epsilon))

    def phi_half(self, N: int, epsilon: float) -> float:
        self._check(N, epsilon)
        if self is MeshKind.BAKHVALOV:
            return math.log(1.0 / epsilon)
        return math.log(N)

    def psi_half(self, N: int, epsilon: float) -> float:
        self._check(N, epsilon)
        return epsilon if self is MeshKind.BAKHVALOV else 1.0 / N

    def min_dphi(self, N: int, epsilon: float) -> float:
        self._check(N, epsilon)
        return 2.0 * math.log(N) if self is MeshKind.SHISHKIN else 2.0

    def max_dphi(self, N: int, epsilon: float) -> float:
        self._check(N, epsilon)
        if self is MeshKind.SHISHKIN:
            return 2.0 * math.log(N)
        if self is MeshKind.BAKHVALOV_SHISHKIN:
            return 2.0 * N
        return 2.0 / epsilon

    def max_abs_dpsi(self, N: int, epsilon: float) -> float:
        self._check(N, epsilon)
        return 2.0 * math.log(N) if self is MeshKind.SHISHKIN else 2.0

    def mu(self, N: int, epsilon: float) -> float:
        """Scale mu entering the supercloseness bound: eps, eps ln N, eps ln(1/eps)."""
        self._check(N, epsilon)
        if self is MeshKind.SHISHKIN:
            return epsilon
        if self is MeshKind.BAKHVALOV_SHISHKIN:
            return epsilon * math.log(N)
        return epsilon * math.log(1.0 / epsilon)

    def m_star(self, N: int, epsilon: float, k: int) -> float:
        """M* = sqrt(mu/eps) * (max|psi'|)^(k+1)."""
        return math.sqrt(self.mu(N, epsilon) / epsilon) * self.max_abs_dpsi(N, epsilon) ** (k + 1)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Mesh1D:
    """One-dimensional layer-adapted mesh x_0 < ... < x_N on [0, 1]."""

    kind: MeshKind
    N: int
    epsilon: float
    sigma: float
    alpha: float
    tau: float
    points: np.ndarray = field(repr=False)
    clamped: bool = False

    @property
    def h(self) -> np.ndarray:
        """Interval lengths h_1..h_N."""
        return np.diff(self.points)

    @property
    def transition(self) -> float:
        return float(self.points[self.N // 2])

    @property
    def coarse_h(self) -> np.ndarray:
        return self.h[: self.N // 2]

    @property
    def fine_h(self) -> np.ndarray:
        return self.h[self.N // 2:]


@dataclass(frozen=True)
class TensorMesh:
    """Tensor product of two Mesh1D; element K_ij = (x_{i-1}, x_i) x (y_{j-1}, y_j)."""

    x_mesh: Mesh1D
    y_mesh: Mesh1D

    @property
    def Nx(self) -> int:
        return self.x_mesh.N

    @property
    def Ny(self) -> int:
        return self.y_mesh.N

    @property
    def n_elements(self) -> int:
        return self.Nx * self.Ny

    def element_areas(self) -> np.ndarray:
        """Areas in element-major order e = ix + Nx * iy."""
        return np.outer(self.y_mesh.h, self.x_mesh.h).ravel()

    def region_mask(self, region: str) -> np.ndarray:
        """Boolean element mask for 'omega11', 'omega_x', 'omega_y' or 'all'."""
        ix = np.tile(np.arange(self.Nx), self.Ny)
        iy = np.repeat(np.arange(self.Ny), self.Nx)
        coarse_x = ix < self.Nx // 2
        coarse_y = iy < self.Ny // 2
        masks = {
            "omega11": coarse_x & coarse_y,
            "omega_x": ~coarse_x,
            "omega_y": ~coarse_y,
            "all": np.ones(self.n_elements, dtype=bool),
        }
        if region not in masks:
            raise ValueError(f"[ERROR] Unknown region '{region}'. Expected one of: {sorted(masks)}")
        return masks[region]


def transition_parameter(kind: MeshKind, epsilon: float, sigma: float, alpha: float,
                         N: Optional[int] = None) -> float:
    """
    Mesh transition parameter tau = min(1/2, sigma*eps/alpha * phi(1/2)).

    Args:
        kind: Mesh family
        epsilon: Perturbation parameter (> 0)
        sigma: Mesh parameter (> 0)
        alpha: Lower bound of the convection coefficient in this direction (> 0)
        N: Number of intervals (needed by S- and BS-mesh, where phi(1/2) = ln N)

    Returns:
        tau in (0, 1/2]

    Raises:
        ValueError: For nonpositive parameters, or epsilon >= 1 on the B-mesh
    """
    kind = MeshKind.from_name(kind)
    for name, value in (("epsilon", epsilon), ("sigma", sigma), ("alpha", alpha)):
        if not value > 0:
            raise ValueError(f"[ERROR] {name} must be positive, got {value}")
    if kind is not MeshKind.BAKHVALOV and N is None:
        raise ValueError(f"[ERROR] {kind.label} transition parameter needs N (phi(1/2) = ln N)")
    phi_half = kind.phi_half(N if N is not None else 4, epsilon)
    return min(0.5, sigma * epsilon / alpha * phi_half)


def build_mesh_1d(kind: MeshKind, N: int, epsilon: float, sigma: float, alpha: float) -> Mesh1D:
    """
    Build the 1D layer-adapted mesh

        x_i = 2(1 - tau) i / N                          i = 0..N/2
        x_i = 1 - sigma*eps/alpha * phi((N - i) / N)    i = N/2+1..N

    If tau is clamped to 1/2 the problem is not singularly perturbed for this N;
    a warning is emitted and the uniform mesh x_i = i/N is returned.

    Raises:
        ValueError: If N is odd or N < 4, or the generated points are not increasing
    """
    kind = MeshKind.from_name(kind)
    if int(N) != N or N < 4 or N % 2:
        raise ValueError(f"[ERROR] N must be an even integer >= 4, got {N}")
    N = int(N)

    tau = transition_parameter(kind, epsilon, sigma, alpha, N)
    i = np.arange(N + 1, dtype=float)
    clamped = sigma * epsilon / alpha * kind.phi_half(N, epsilon) >= 0.5

    if clamped:
        warnings.warn(
            f"tau clamped to 1/2 for {kind.label} (eps={epsilon:g}, N={N}): "
            f"problem not singularly perturbed, using a uniform mesh",
            SingularPerturbationWarning,
            stacklevel=2,
        )
        points = i / N
    else:
        points = np.empty(N + 1)
        half = N // 2
        points[: half + 1] = 2.0 * (1.0 - tau) * i[: half + 1] / N
        t = (N - i[half + 1:]) / N
        points[half + 1:] = 1.0 - sigma * epsilon / alpha * kind.phi(t, N, epsilon)

    if epsilon > 1.0 / N:
        warnings.warn(
            f"eps={epsilon:g} > 1/N={1.0 / N:g}: mesh-size bounds used by the error "
            f"analysis do not hold",
            SingularPerturbationWarning,
            stacklevel=2,
        )

    if not np.all(np.diff(points) > 0):
        raise ValueError(
            f"[ERROR] Mesh points not strictly increasing for {kind.label} "
            f"(N={N}, eps={epsilon:g}, sigma={sigma:g}, alpha={alpha:g}, tau={tau:g})"
        )

    logger.debug("Built %s: N=%d eps=%g tau=%g", kind.label, N, epsilon, tau)
    return Mesh1D(kind=kind, N=N, epsilon=float(epsilon), sigma=float(sigma),
                  alpha=float(alpha), tau=float(tau), points=_readonly(points),
                  clamped=bool(clamped))


def build_tensor_mesh(kind: MeshKind, N: int, epsilon: float, sigma: float,
                      alpha1: float, alpha2: float) -> TensorMesh:
    """Tensor mesh with tau_x from alpha1 and tau_y from alpha2."""
    return TensorMesh(
        x_mesh=build_mesh_1d(kind, N, epsilon, sigma, alpha1),
        y_mesh=build_mesh_1d(kind, N, epsilon, sigma, alpha2),
    )


def _direction_report(mesh: Mesh1D, k: Optional[int]) -> Dict[str, Any]:
    kind, N, eps = mesh.kind, mesh.N, mesh.epsilon
    scale = eps / N
    fine = mesh.fine_h
    entry = {
        "tau": mesh.tau,
        "clamped": mesh.clamped,
        "alpha": mesh.alpha,
        "h_coarse_min": float(mesh.coarse_h.min()),
        "h_coarse_max": float(mesh.coarse_h.max()),
        "h_fine_min": float(fine.min()),
        "h_fine_max": float(fine.max()),
        "min_dphi": kind.min_dphi(N, eps),
        "max_dphi": kind.max_dphi(N, eps),
        "max_abs_dpsi": kind.max_abs_dpsi(N, eps),
        "psi_half": kind.psi_half(N, eps),
        "mu": kind.mu(N, eps),
        # observed constants C in C*eps/N*min(phi') <= h_i <= C*eps/N*max(phi')
        "fine_lower_ratio": float(fine.min() / (scale * kind.min_dphi(N, eps))),
        "fine_upper_ratio": float(fine.max() / (scale * kind.max_dphi(N, eps))),
        "eps_le_inv_N": eps <= 1.0 / N,
    }
    if k is not None:
        entry["rate_factor"] = (kind.max_abs_dpsi(N, eps) / N) ** (k + 1)
        entry["m_star"] = kind.m_star(N, eps, k)
    return entry


def mesh_report(mesh: TensorMesh, k: Optional[int] = None) -> Dict[str, Any]:
    """
    Diagnostic record for a tensor mesh.

    Returns:
        {
            'kind': str, 'N': int, 'epsilon': float,
            'x': {...}, 'y': {...},     # per-direction tau, h ranges, mesh-function data
            'area_sum': float
        }
        With k given, each direction also carries 'rate_factor'
        (N^-1 max|psi'|)^(k+1) and 'm_star'.
    """
    return {
        "kind": mesh.x_mesh.kind.value,
        "N": mesh.Nx,
        "epsilon": mesh.x_mesh.epsilon,
        "sigma": mesh.x_mesh.sigma,
        "x": _direction_report(mesh.x_mesh, k),
        "y": _direction_report(mesh.y_mesh, k),
        "area_sum": float(mesh.element_areas().sum()),
    }


def write_mesh(mesh: TensorMesh, path: Union[str, Path]) -> Path:
    """Dump abscissae: x-direction, blank line, y-direction; 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{v:.17g}" for v in mesh.x_mesh.points]
    lines.append("")
    lines.extend(f"{v:.17g}" for v in mesh.y_mesh.points)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_mesh_points(path: Union[str, Path]):
    """Read a mesh dump back as (x_points, y_points)."""
    text = Path(path).read_text(encoding="utf-8")
    blocks = text.strip("\n").split("\n\n")
    if len(blocks) != 2:
        raise ValueError(f"[ERROR] Mesh dump {path} must contain two blocks separated by a blank line")
    return tuple(np.array([float(s) for s in b.split()]) for b in blocks)
