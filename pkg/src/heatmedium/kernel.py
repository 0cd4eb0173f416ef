"""Screened (Yukawa) Green kernel and cell quadrature on uniform cube grids.

The kernel ``g(x, y) = exp(-sqrt(lam) r) / (4 pi r)`` is integrated over grid
cells in two regimes:

* near field (the cell containing the evaluation point and its 26
  neighbours): split into ``1 / (4 pi r)``, integrated in closed form over
  the box, plus the bounded remainder ``(exp(-sqrt(lam) r) - 1) / (4 pi r)``
  integrated by 4x4x4 Gauss-Legendre;
* far field: 4x4x4 midpoint rule on the full kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import SingularityError
from .medium import CubePartition, ScalarField

FOUR_PI = 4.0 * math.pi

#: ``integral over the unit cube of dy / |y - center|`` = 3 ln(2 + sqrt 3) - pi/2
UNIT_CUBE_SINGULAR = 3.0 * math.log(2.0 + math.sqrt(3.0)) - 0.5 * math.pi

MIDPOINT_ORDER = 4
REMAINDER_ORDER = 4
SELF_ORDER = 8


@dataclass(frozen=True)
class KernelParams:
    lam: float

    def __post_init__(self):
        if not (self.lam >= 0.0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be a finite non-negative number, got {self.lam}")

    @property
    def k(self) -> float:
        return math.sqrt(self.lam)


def _as_params(params) -> KernelParams:
    return params if isinstance(params, KernelParams) else KernelParams(float(params))


def green(x, y, params) -> np.ndarray | float:
    """``exp(-sqrt(lam)|x - y|) / (4 pi |x - y|)``, broadcasting over leading axes."""
    k = _as_params(params).k
    r = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), axis=-1)
    if np.any(r == 0.0):
        raise SingularityError("green kernel evaluated at coinciding points; use cell weights")
    out = np.exp(-k * r) / (FOUR_PI * r)
    return float(out) if np.ndim(out) == 0 else out


def green_matrix(X, Y, params, exclude_diagonal: bool = False) -> np.ndarray:
    """Pairwise kernel ``g(X[i], Y[j])``; with ``exclude_diagonal`` the i == j entries are 0."""
    k = _as_params(params).k
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    diff = X[:, None, :] - Y[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if exclude_diagonal:
        np.fill_diagonal(r, np.inf)
    if np.any(r == 0.0):
        raise SingularityError("coincident points in kernel matrix")
    return np.exp(-k * r) / (FOUR_PI * r)


def _remainder(r: np.ndarray, k: float) -> np.ndarray:
    # (exp(-k r) - 1) / (4 pi r), removable value -k / (4 pi) at r = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.expm1(-k * r) / (FOUR_PI * r)
    return np.where(r > 0.0, out, -k / FOUR_PI)


def _corner_term(x, y, z):
    r = np.sqrt(x * x + y * y + z * z)

    def log_plus(u, v, w):
        # log(u + r) without cancellation when u < 0
        vw = v * v + w * w
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(u >= 0.0, np.log(u + r), np.log(vw / (r - u)))
        return np.where((vw > 0.0) | (u > 0.0), out, 0.0)

    def atan_term(u, v, w):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = u * u * np.arctan(v * w / (u * r))
        return np.where(u != 0.0, out, 0.0)

    with np.errstate(invalid="ignore"):
        val = (
            y * z * log_plus(x, y, z)
            + x * z * log_plus(y, x, z)
            + x * y * log_plus(z, x, y)
            - 0.5 * (atan_term(x, y, z) + atan_term(y, x, z) + atan_term(z, x, y))
        )
    return np.where(r > 0.0, np.nan_to_num(val), 0.0)


def box_newton_integral(points, lo, hi) -> np.ndarray:
    """Closed-form ``integral over [lo, hi] of dy / |x - y|`` for each point ``x``.

    ``points``, ``lo`` and ``hi`` broadcast against each other along the
    leading axes; the last axis has length 3.
    """
    p = np.asarray(points, dtype=float)
    a = np.asarray(lo, dtype=float) - p
    b = np.asarray(hi, dtype=float) - p
    total = 0.0
    for cx in (0, 1):
        X = b[..., 0] if cx else a[..., 0]
        for cy in (0, 1):
            Y = b[..., 1] if cy else a[..., 1]
            for cz in (0, 1):
                Z = b[..., 2] if cz else a[..., 2]
                sign = 1.0 if (cx + cy + cz) % 2 == 1 else -1.0
                total = total + sign * _corner_term(X, Y, Z)
    return total


def _gauss_box_nodes(order: int):
    x, w = leggauss(order)
    x = 0.5 * x
    w = 0.5 * w
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    W = w[:, None, None] * w[None, :, None] * w[None, None, :]
    return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()]), W.ravel()


def _midpoint_nodes(order: int):
    t = (np.arange(order) + 0.5) / order - 0.5
    X, Y, Z = np.meshgrid(t, t, t, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])


def near_cell_weight(points, cell_centers, spacing, params) -> np.ndarray:
    """Near-field weight ``integral over cell of g(x, y) dy`` with the singular split."""
    k = _as_params(params).k
    h = np.asarray(spacing, dtype=float)
    p = np.asarray(points, dtype=float)
    c = np.asarray(cell_centers, dtype=float)
    w = box_newton_integral(p, c - 0.5 * h, c + 0.5 * h) / FOUR_PI
    if k > 0.0:
        nodes, gw = _gauss_box_nodes(REMAINDER_ORDER)
        y = c[..., None, :] + nodes * h
        r = np.linalg.norm(p[..., None, :] - y, axis=-1)
        w = w + np.prod(h) * np.sum(gw * _remainder(r, k), axis=-1)
    return w


def home_cell_weight(points, cell_centers, spacing, params) -> np.ndarray:
    """Weight of the cell containing each point.

    The remainder kernel has a kink at the evaluation point, so the cell is
    split there into eight boxes that each have the point as a corner.
    """
    k = _as_params(params).k
    h = np.asarray(spacing, dtype=float)
    p = np.atleast_2d(np.asarray(points, dtype=float))
    c = np.atleast_2d(np.asarray(cell_centers, dtype=float))
    w = box_newton_integral(p, c - 0.5 * h, c + 0.5 * h) / FOUR_PI
    if k > 0.0:
        nodes, gw = _gauss_box_nodes(SELF_ORDER)
        unit = nodes + 0.5
        for signs in np.array([(i, j, l) for i in (-1, 1) for j in (-1, 1) for l in (-1, 1)], dtype=float):
            ext = c + 0.5 * signs * h - p
            r = np.linalg.norm(unit[None, :, :] * ext[:, None, :], axis=-1)
            w = w + np.abs(np.prod(ext, axis=1)) * (_remainder(r, k) @ gw)
    return w


def far_cell_weight(points, cell_centers, spacing, params) -> np.ndarray:
    """Midpoint-rule weight, ``MIDPOINT_ORDER`` nodes per axis."""
    k = _as_params(params).k
    h = np.asarray(spacing, dtype=float)
    p = np.asarray(points, dtype=float)
    c = np.asarray(cell_centers, dtype=float)
    t = (np.arange(MIDPOINT_ORDER) + 0.5) / MIDPOINT_ORDER - 0.5
    diff = p - c
    # squared separations per axis for each sub-node offset
    sq = [[(diff[..., ax] - ti * h[ax]) ** 2 for ti in t] for ax in range(3)]
    acc = 0.0
    for sx in sq[0]:
        for sy in sq[1]:
            sxy = sx + sy
            for sz in sq[2]:
                r = np.sqrt(sxy + sz)
                acc = acc + (np.exp(-k * r) / r if k > 0.0 else 1.0 / r)
    return acc * np.prod(h) / (FOUR_PI * MIDPOINT_ORDER**3)


def singular_cell_weight(cell_side: float, params) -> float:
    """``integral over a cube of side b of g(center, y) dy``.

    The ``1/(4 pi r)`` part is ``UNIT_CUBE_SINGULAR * b**2 / (4 pi)``; the
    bounded remainder is integrated by tensor Gauss-Legendre.
    """
    b = float(cell_side)
    if not b > 0:
        raise ValueError("cell side must be positive")
    k = _as_params(params).k
    w = UNIT_CUBE_SINGULAR * b * b / FOUR_PI
    if k > 0.0:
        # the remainder has a kink at the center, so integrate octant by octant
        # with the center at a corner of each; by symmetry all octants are equal
        nodes, gw = _gauss_box_nodes(SELF_ORDER)
        r = np.linalg.norm((nodes + 0.5) * (0.5 * b), axis=-1)
        w += b**3 * float(np.sum(gw * _remainder(r, k)))
    return w


@dataclass(frozen=True)
class QuadratureTable:
    """Collocation weights ``weights[q, p] = integral over cell p of g(x_q, y) dy``."""

    partition: CubePartition
    params: KernelParams
    weights: np.ndarray

    @property
    def lam(self) -> float:
        return self.params.lam


def _offset_weights(part: CubePartition, params: KernelParams) -> np.ndarray:
    n = np.asarray(part.shape)
    h = np.asarray(part.spacing)
    axes = [np.arange(-(m - 1), m) for m in n]
    I, J, K = np.meshgrid(*axes, indexing="ij")
    offs = np.column_stack([I.ravel(), J.ravel(), K.ravel()])
    centers = offs * h
    origin = np.zeros(3)
    near = np.max(np.abs(offs), axis=1) <= 1
    w = np.empty(len(offs))
    w[~near] = far_cell_weight(origin, centers[~near], h, params)
    w[near] = near_cell_weight(origin, centers[near], h, params)
    self_idx = np.flatnonzero(np.all(offs == 0, axis=1))[0]
    if part.is_cubic:
        w[self_idx] = singular_cell_weight(part.side, params)
    return w.reshape(tuple(2 * n - 1))


def build_table(part: CubePartition, params) -> QuadratureTable:
    """Weights between all cell centers, exploiting translation invariance of the grid."""
    params = _as_params(params)
    off = _offset_weights(part, params)
    idx = part.indices
    n = np.asarray(part.shape)
    W = np.empty((part.P, part.P))
    # row blocks keep the index temporaries small
    step = max(1, 2_000_000 // max(part.P, 1))
    for start in range(0, part.P, step):
        rows = idx[start : start + step]
        d = idx[None, :, :] - rows[:, None, :] + (n - 1)
        W[start : start + step] = off[d[..., 0], d[..., 1], d[..., 2]]
    return QuadratureTable(part, params, W)


def point_weights(points, part: CubePartition, params) -> np.ndarray:
    """Weights ``integral over cell p of g(x, y) dy`` for arbitrary points, shape ``(n, P)``.

    Consistent with :func:`build_table` when the points are cell centers.
    """
    params = _as_params(params)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    h = np.asarray(part.spacing)
    shape = np.asarray(part.shape)
    out = np.empty((len(pts), part.P))
    chunk = max(1, 1_000_000 // max(part.P, 1))
    for s in range(0, len(pts), chunk):
        out[s : s + chunk] = far_cell_weight(pts[s : s + chunk, None, :], part.centers[None, :, :], h, params)

    # near-field overwrite
    home = np.floor((pts - np.asarray(part.lo)) / h).astype(int)
    home = np.clip(home, 0, shape - 1)
    rel = np.array([(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)])
    nb = home[:, None, :] + rel[None, :, :]
    valid = np.all((nb >= 0) & (nb < shape), axis=2)
    rows, cols = np.nonzero(valid)
    cells = np.ravel_multi_index(nb[rows, cols].T, part.shape)
    out[rows, cells] = near_cell_weight(pts[rows], part.centers[cells], h, params)
    home_flat = np.ravel_multi_index(home.T, part.shape)
    out[np.arange(len(pts)), home_flat] = home_cell_weight(pts, part.centers[home_flat], h, params)
    return out


def cell_values(fld: ScalarField, part: CubePartition) -> np.ndarray:
    return fld(part.centers)


def scaled_source(points, f: ScalarField, grid: CubePartition, params) -> np.ndarray:
    """``G(x) = integral over D of g(x, y) f(y) dy`` (equal to ``lam * F``), by cell quadrature."""
    if f.is_zero:
        return np.zeros(len(np.atleast_2d(points)))
    return point_weights(points, grid, params) @ cell_values(f, grid)


def source_field(points, f: ScalarField, grid: CubePartition, params) -> np.ndarray:
    """``F(x, lam) = G(x) / lam``; undefined at ``lam = 0``."""
    params = _as_params(params)
    if params.lam <= 0.0:
        raise ZeroDivisionError("F(x, lambda) = G / lambda requires lambda > 0")
    return scaled_source(points, f, grid, params) / params.lam
