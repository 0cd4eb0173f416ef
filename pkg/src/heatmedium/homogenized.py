"""Collocation solver for the homogenized integral equation and the long-time average.

The primary unknown is ``W = lam * U``, which solves

    W(x) = G(x) - integral_D g(x, y) q(y) W(y) dy,   G(x) = integral_D g(x, y) f(y) dy,

so that ``lam -> 0`` is a regular limit; at ``lam = 0`` the same equation is
``(I + B) psi = phi`` for the average temperature.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernel import QuadratureTable, _as_params, build_table, cell_values, point_weights
from .manybody import DenseSystem, solve
from .medium import CubePartition, ScalarField

MODES = ("laplace-field", "scaled-field", "steady-average")


@dataclass(frozen=True)
class AbsorptionField:
    partition: CubePartition
    values: np.ndarray

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)


def build_q(part: CubePartition, h: ScalarField, c: ScalarField, N: ScalarField) -> AbsorptionField:
    """Absorption ``q = h c N`` at the cell centers."""
    x = part.centers
    return AbsorptionField(part, h(x) * c(x) * N(x))


@dataclass
class GridSolution:
    partition: CubePartition
    values: np.ndarray
    lam: float
    mode: str
    source: np.ndarray = field(repr=False, default=None)
    diagnostics: dict = field(default_factory=dict)

    @property
    def scaled(self) -> np.ndarray:
        """``W = lam * U`` (or ``psi`` for the steady average)."""
        return self.values * self.lam if self.mode == "laplace-field" else self.values

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("x,y,z,value\n")
            for (x, y, z), v in zip(self.partition.centers, self.values):
                fh.write(f"{x:.17g},{y:.17g},{z:.17g},{v:.17g}\n")


def _check_table(table: QuadratureTable | None, part: CubePartition, lam: float) -> QuadratureTable:
    if table is None:
        return build_table(part, lam)
    if table.partition is not part and (
        table.partition.shape != part.shape or table.partition.spacing != part.spacing or table.partition.lo != part.lo
    ):
        raise ValueError("quadrature table was built for a different partition")
    if table.lam != lam:
        raise ValueError(f"quadrature table built for lambda={table.lam}, solve requested lambda={lam}")
    return table


def _solve_scaled(part, q: AbsorptionField, f: ScalarField, table: QuadratureTable):
    T = table.weights
    G = T @ cell_values(f, part)
    if q.is_zero:
        return G.copy(), G, {"method": "identity", "residual": 0.0, "condition": 1.0}
    # unlike the particle system, the self-cell weight stays in the operator
    system = DenseSystem(np.eye(part.P) + T * q.values[None, :], G)
    W = solve(system)
    return W, G, dict(system.diagnostics)


def _sanity(values, q: AbsorptionField, f: ScalarField, part) -> None:
    if np.all(q.values >= 0) and np.all(cell_values(f, part) >= 0):
        scale = np.max(np.abs(values)) if len(values) else 0.0
        if len(values) and values.min() < -1e-10 * scale:
            warnings.warn("negative field values for q >= 0, f >= 0 (maximum principle check)", RuntimeWarning)


def solve_homogenized(
    part: CubePartition,
    q: AbsorptionField,
    f: ScalarField,
    params,
    table: QuadratureTable | None = None,
    mode: str = "scaled-field",
) -> GridSolution:
    """Collocate the homogenized equation at the cell centers.

    ``mode="scaled-field"`` returns ``W = lam U`` (valid for ``lam >= 0``),
    ``mode="laplace-field"`` returns ``U`` itself and needs ``lam > 0``.
    """
    params = _as_params(params)
    if mode not in ("scaled-field", "laplace-field"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "laplace-field" and params.lam <= 0.0:
        raise ValueError("laplace-field mode requires lambda > 0")
    table = _check_table(table, part, params.lam)
    W, G, diag = _solve_scaled(part, q, f, table)
    _sanity(W, q, f, part)
    if mode == "laplace-field":
        return GridSolution(part, W / params.lam, params.lam, mode, G / params.lam, diag)
    return GridSolution(part, W, params.lam, mode, G, diag)


def steady_average(
    part: CubePartition, q: AbsorptionField, f: ScalarField, table: QuadratureTable | None = None
) -> GridSolution:
    """``psi = (I + B)^-1 phi`` with the Newtonian kernel ``1 / (4 pi |x - y|)``."""
    table = _check_table(table, part, 0.0)
    psi, phi, diag = _solve_scaled(part, q, f, table)
    _sanity(psi, q, f, part)
    return GridSolution(part, psi, 0.0, "steady-average", phi, diag)


def interpolate(solution: GridSolution, q: AbsorptionField, f: ScalarField, points) -> np.ndarray:
    """Nystrom extension of a grid solution to arbitrary points (same mode as ``solution``)."""
    part = solution.partition
    w = point_weights(points, part, solution.lam)
    W = w @ (cell_values(f, part) - q.values * solution.scaled)
    if solution.mode == "laplace-field":
        return W / solution.lam
    return W


def pde_residual(
    solution: GridSolution, q: AbsorptionField, f: ScalarField, within=None
) -> float:
    """Max over interior cells of the 7-point residual of ``(-lap + lam) U + q U - f / lam``.

    For ``scaled-field`` and ``steady-average`` solutions the residual is that
    of ``(-lap + lam) W + q W - f``.  ``within`` optionally restricts the
    maximum to cells whose centers lie in a box.
    """
    part = solution.partition
    if min(part.shape) < 4:
        raise ValueError(f"grid too coarse for the residual: {part.shape}, need at least 4 cells per axis")
    hx = part.side
    W = part.as_grid(solution.scaled)
    fq = part.as_grid(cell_values(f, part))
    qq = part.as_grid(q.values)
    c = W[1:-1, 1:-1, 1:-1]
    lap = (
        W[2:, 1:-1, 1:-1] + W[:-2, 1:-1, 1:-1]
        + W[1:-1, 2:, 1:-1] + W[1:-1, :-2, 1:-1]
        + W[1:-1, 1:-1, 2:] + W[1:-1, 1:-1, :-2]
        - 6.0 * c
    ) / hx**2
    res = -lap + solution.lam * c + qq[1:-1, 1:-1, 1:-1] * c - fq[1:-1, 1:-1, 1:-1]
    if solution.mode == "laplace-field":
        res = res / solution.lam
    res = np.abs(res)
    if within is not None:
        inner = part.as_grid(within.contains(part.centers))[1:-1, 1:-1, 1:-1]
        res = res[inner]
    return float(res.max()) if res.size else 0.0
