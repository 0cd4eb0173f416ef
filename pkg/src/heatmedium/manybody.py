"""Discrete many-particle system for the effective field and its coarse-cell reduction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import DivergenceError, GeometryError, NearSingularError, NumericalError
from .kernel import KernelParams, _as_params, green_matrix
from .medium import CubePartition, ParticleCloud, ScalarField

logger = logging.getLogger(__name__)

DENSE_MAX = 5000
COND_LIMIT = 1e12
RESIDUAL_TOL = 1e-10


@dataclass
class DenseSystem:
    """``matrix @ U = rhs`` with ``matrix = I + A`` and ``diag(A) = 0``."""

    matrix: np.ndarray
    rhs: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.rhs)

    @property
    def coupling(self) -> np.ndarray:
        """The off-diagonal part ``A``."""
        return self.matrix - np.eye(self.n)

    @classmethod
    def from_coupling(cls, A: np.ndarray, rhs) -> "DenseSystem":
        A = np.asarray(A, dtype=float)
        M = A.copy()
        np.fill_diagonal(M, 1.0)
        return cls(M, np.asarray(rhs, dtype=float).copy())


def _relative_residual(M, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(M @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def solve(system: DenseSystem, dense_max: int = DENSE_MAX, max_sweeps: int = 20000) -> np.ndarray:
    """Solve the system, recording ``residual``, ``condition`` and ``method`` in diagnostics.

    Dense LU with partial pivoting up to ``dense_max`` unknowns, damped
    fixed-point iteration ``U <- (1 - w) U + w (F - A U)`` above.
    """
    M, b = system.matrix, system.rhs
    n = system.n
    if n == 0:
        system.diagnostics.update(method="empty", residual=0.0, condition=1.0)
        return np.zeros(0)
    if not np.all(np.isfinite(M)) or not np.all(np.isfinite(b)):
        raise NumericalError("system contains non-finite entries")
    if n <= dense_max:
        lu, piv = sla.lu_factor(M, check_finite=False)
        anorm = np.linalg.norm(M, 1)
        rcond, info = lapack.dgecon(lu, anorm, norm="1")
        cond = np.inf if rcond == 0.0 else 1.0 / rcond
        if not cond <= COND_LIMIT:
            raise NearSingularError(f"near-singular system: condition estimate {cond:.3e}", cond)
        x = sla.lu_solve((lu, piv), b, check_finite=False)
        res = _relative_residual(M, x, b)
        if res > RESIDUAL_TOL:
            x = x + sla.lu_solve((lu, piv), b - M @ x, check_finite=False)
            res = _relative_residual(M, x, b)
        if res > RESIDUAL_TOL:
            raise NearSingularError(f"residual {res:.3e} above tolerance after refinement", cond)
        system.diagnostics.update(method="lu", residual=res, condition=float(cond))
        return x
    return _fixed_point(system, max_sweeps)


def _spectral_radius(A: np.ndarray, iters: int = 30) -> float:
    v = np.ones(A.shape[0]) / np.sqrt(A.shape[0])
    rho = 0.0
    for _ in range(iters):
        w = A @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        rho, v = nw, w / nw
    return float(rho)


def _fixed_point(system: DenseSystem, max_sweeps: int) -> np.ndarray:
    A = system.coupling
    b = system.rhs
    rho = _spectral_radius(A)
    omega = 1.0 / (1.0 + rho)
    x = b.copy()
    nb = np.linalg.norm(b) or 1.0
    prev = np.inf
    growth = 0
    for sweep in range(1, max_sweeps + 1):
        r = b - x - A @ x
        res = np.linalg.norm(r) / nb
        if res <= RESIDUAL_TOL:
            system.diagnostics.update(
                method="fixed-point", residual=float(res), sweeps=sweep, damping=omega, condition=float("nan")
            )
            return x
        growth = growth + 1 if res > prev else 0
        if growth >= 10 or not np.isfinite(res):
            raise DivergenceError(f"fixed-point iteration diverging at sweep {sweep} (residual {res:.3e})")
        prev = res
        x = x + omega * r
    raise DivergenceError(f"fixed-point iteration did not converge in {max_sweeps} sweeps (residual {prev:.3e})")


def coupling_matrix(cloud: ParticleCloud, params) -> np.ndarray:
    """``A[m, m'] = a**(2-kappa) g(x_m, x_m') h_m' c_m'`` with zero diagonal."""
    G = green_matrix(cloud.centers, cloud.centers, params, exclude_diagonal=True)
    return cloud.scale * G * (cloud.h_values * cloud.c_values)[None, :]


def assemble_manybody(cloud: ParticleCloud, params, F_values) -> DenseSystem:
    params = _as_params(params)
    if params.lam <= 0.0:
        raise ValueError("many-body system requires lambda > 0")
    F = np.asarray(F_values, dtype=float)
    if F.shape != (cloud.M,):
        raise ValueError(f"expected {cloud.M} source values, got shape {F.shape}")
    return DenseSystem.from_coupling(coupling_matrix(cloud, params), F)


def charges(cloud: ParticleCloud, U) -> np.ndarray:
    """Leading-order particle charges ``Q_m = -a**(2-kappa) h_m c_m U_m``."""
    return -cloud.scale * cloud.h_values * cloud.c_values * np.asarray(U, dtype=float)


def field_at(cloud: ParticleCloud, U, x, params, F_of_x, effective: bool = False) -> np.ndarray:
    """``F(x) - a**(2-kappa) sum_m g(x, x_m) h_m c_m U_m`` at points ``x``.

    Points closer than ``a`` to a center raise :class:`GeometryError` unless
    ``effective`` is set, in which case that particle's own term is dropped
    and the effective field acting on it is returned.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    F = np.broadcast_to(np.asarray(F_of_x, dtype=float), (len(pts),))
    if cloud.M == 0:
        return F.copy()
    diff = pts[:, None, :] - cloud.centers[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    inside = r < cloud.a
    if np.any(inside):
        if not effective:
            raise GeometryError("evaluation point lies inside a particle")
        r = np.where(inside, np.inf, r)
    k = _as_params(params).k
    G = np.exp(-k * r) / (4.0 * np.pi * r)
    weights = cloud.scale * cloud.h_values * cloud.c_values * np.asarray(U, dtype=float)
    return F - G @ weights


def coarse_cell_weights(
    part: CubePartition, N: ScalarField, mode: str, cloud: ParticleCloud | None = None
) -> np.ndarray:
    """Effective particle content per cell: ``N(x_p)|cell|`` or ``a**(2-kappa) * count``."""
    if mode == "analytic-density":
        return N(part.centers) * part.cell_volume
    if mode == "empirical-count":
        if cloud is None:
            raise ValueError("empirical-count mode needs a particle cloud")
        counts = np.bincount(part.cell_index(cloud.centers), minlength=part.P) if cloud.M else np.zeros(part.P)
        return cloud.scale * counts
    raise ValueError(f"unknown coarse mode {mode!r}")


def assemble_coarse(
    part: CubePartition,
    N: ScalarField,
    h: ScalarField,
    c: ScalarField,
    params,
    F_values,
    mode: str = "analytic-density",
    cloud: ParticleCloud | None = None,
) -> DenseSystem:
    """Cell-level system ``U_p = F_p - sum_{p' != p} g_pp' h_p' c_p' n_p' U_p'``."""
    params = _as_params(params)
    if params.lam <= 0.0:
        raise ValueError("coarse system requires lambda > 0")
    content = coarse_cell_weights(part, N, mode, cloud)
    col = h(part.centers) * c(part.centers) * content
    G = green_matrix(part.centers, part.centers, params, exclude_diagonal=True)
    return DenseSystem.from_coupling(G * col[None, :], F_values)


def cell_average(part: CubePartition, points, values) -> tuple[np.ndarray, np.ndarray]:
    """Mean of ``values`` over the points in each cell, and the per-cell counts."""
    idx = part.cell_index(points)
    counts = np.bincount(idx, minlength=part.P)
    sums = np.bincount(idx, weights=np.asarray(values, dtype=float), minlength=part.P)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return mean, counts


def write_solution_csv(path, points, values) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,x,y,z,U\n")
        for i, ((x, y, z), u) in enumerate(zip(np.atleast_2d(points), values)):
            fh.write(f"{i},{x:.17g},{y:.17g},{z:.17g},{u:.17g}\n")


def write_diagnostics(path, diagnostics: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in sorted(diagnostics):
            val = diagnostics[key]
            fh.write(f"{key}={val:.17g}\n" if isinstance(val, float) else f"{key}={val}\n")
