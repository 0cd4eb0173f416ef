"""Explicit finite-difference integration of ``u_t = lap u + f - q u`` from ``u = 0``.

The collocation grid is embedded in an enlarged box (50% margin per side by
default) with a cell-centred 7-point stencil.  The outer boundary carries
either a homogeneous Dirichlet condition or the monopole radiation condition
``du/dn = -(r . n) / |r|**2 u`` (exact for ``c / |r|`` fields), ``r`` measured
from the center of the collocation box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, spsolve

from ..homogenized import AbsorptionField
from ..medium import BoxDomain, CubePartition, ScalarField


@dataclass(frozen=True)
class EnlargedGrid:
    part: CubePartition
    inner: CubePartition
    pad: int
    q: np.ndarray  # grid-shaped
    f: np.ndarray
    ghost: tuple  # ((lo_x, hi_x), (lo_y, hi_y), (lo_z, hi_z)) ghost factors per face

    @property
    def h(self) -> float:
        return self.part.side

    def inner_slice(self):
        p = self.pad
        return tuple(slice(p, p + n) for n in self.inner.shape)


def enlarge(
    part: CubePartition, q: AbsorptionField, f: ScalarField, margin: float = 0.5, boundary: str = "radiation"
) -> EnlargedGrid:
    if not part.is_cubic:
        raise ValueError("time-domain oracle needs cubic cells")
    n = np.asarray(part.shape)
    pads = margin * n
    if not np.allclose(pads, np.rint(pads)) or len(set(np.rint(pads).astype(int))) != 1:
        raise ValueError(f"margin {margin} does not give a whole number of cells on {tuple(n)}")
    pad = int(round(pads[0]))
    h = part.side
    lo = np.asarray(part.lo) - pad * h
    big = CubePartition.uniform(BoxDomain(tuple(lo), tuple(lo + (n + 2 * pad) * h)), tuple(n + 2 * pad))
    qq = np.zeros(big.shape)
    sl = tuple(slice(pad, pad + m) for m in n)
    qq[sl] = part.as_grid(q.values)
    ff = big.as_grid(f(big.centers))
    ghost = _ghost_factors(big, part.domain.center, boundary)
    return EnlargedGrid(big, part, pad, qq, ff, ghost)


def _ghost_factors(big: CubePartition, origin, boundary: str):
    h = big.side
    shape = big.shape
    dom = big.domain
    faces = []
    for ax in range(3):
        pair = []
        for side, normal in ((0, -1.0), (1, 1.0)):
            if boundary == "dirichlet":
                pair.append(np.full([shape[i] for i in range(3) if i != ax], -1.0))
                continue
            if boundary != "radiation":
                raise ValueError(f"unknown boundary condition {boundary!r}")
            other = [i for i in range(3) if i != ax]
            u = big.lo[other[0]] + (np.arange(shape[other[0]]) + 0.5) * h
            v = big.lo[other[1]] + (np.arange(shape[other[1]]) + 0.5) * h
            U, V = np.meshgrid(u, v, indexing="ij")
            pos = np.empty(U.shape + (3,))
            pos[..., ax] = dom.hi[ax] if side else dom.lo[ax]
            pos[..., other[0]] = U
            pos[..., other[1]] = V
            r = pos - origin
            beta = normal * r[..., ax] / np.sum(r * r, axis=-1)
            pair.append((1.0 - 0.5 * beta * h) / (1.0 + 0.5 * beta * h))
        faces.append(tuple(pair))
    return tuple(faces)


def stability_bound(grid: EnlargedGrid) -> float:
    """Largest forward-Euler step: ``b**2 / 6`` tightened by the reaction term."""
    h = grid.h
    return min(h * h / 6.0, 2.0 / (12.0 / (h * h) + max(float(grid.q.max()), 0.0)))


def operator(grid: EnlargedGrid) -> sp.csr_matrix:
    """Sparse matrix of ``lap_h - q`` including the ghost-cell boundary closure."""
    n = grid.part.shape
    h = grid.h

    def lap1(m):
        return sp.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1])

    I = [sp.identity(m) for m in n]
    L = (
        sp.kron(sp.kron(lap1(n[0]), I[1]), I[2])
        + sp.kron(sp.kron(I[0], lap1(n[1])), I[2])
        + sp.kron(sp.kron(I[0], I[1]), lap1(n[2]))
    ) / (h * h)
    diag = np.zeros(n)
    for ax in range(3):
        lo_face, hi_face = grid.ghost[ax]
        idx_lo = [slice(None)] * 3
        idx_hi = [slice(None)] * 3
        idx_lo[ax] = 0
        idx_hi[ax] = n[ax] - 1
        diag[tuple(idx_lo)] += lo_face / (h * h)
        diag[tuple(idx_hi)] += hi_face / (h * h)
    return (L + sp.diags(diag.ravel() - grid.q.ravel())).tocsr()


def slowest_decay_rate(grid: EnlargedGrid) -> float:
    """Smallest eigenvalue of ``-(lap_h - q)``, the slowest transient decay rate."""
    A = -operator(grid)
    val = eigsh(A.tocsc(), k=1, sigma=0.0, which="LM", return_eigenvectors=False)
    return float(val[0])


def averaging_horizon(grid: EnlargedGrid, tail: float = 0.005) -> float:
    """Horizon ``T`` with ``||avg_T - u_inf|| <= tail * ||u_inf||``, i.e. ``T = 1 / (mu tail)``."""
    return 1.0 / (slowest_decay_rate(grid) * tail)


def steady_state(grid: EnlargedGrid) -> np.ndarray:
    """Direct sparse solve of ``(lap_h - q) u = -f`` on the enlarged grid."""
    return spsolve(operator(grid).tocsc(), -grid.f.ravel()).reshape(grid.part.shape)


def integrate(grid: EnlargedGrid, T: float, dt: float) -> np.ndarray:
    """Return ``(1/T) integral_0^T u dt`` on the enlarged grid (trapezoid in time)."""
    bound = stability_bound(grid)
    if dt > bound:
        raise ValueError(f"time step dt={dt:.6g} exceeds the explicit stability bound {bound:.6g}")
    if not T > 0:
        raise ValueError("averaging horizon T must be positive")
    steps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / steps
    n = grid.part.shape
    h2 = grid.h**2
    u = np.zeros(n)
    buf = np.zeros(tuple(m + 2 for m in n))
    core = buf[1:-1, 1:-1, 1:-1]
    (gx0, gx1), (gy0, gy1), (gz0, gz1) = grid.ghost
    react = 1.0 - dt * grid.q
    src = dt * grid.f
    acc = np.zeros(n)
    lap = np.empty(n)
    c = dt / h2
    for _ in range(steps):
        core[...] = u
        buf[0, 1:-1, 1:-1] = gx0 * u[0]
        buf[-1, 1:-1, 1:-1] = gx1 * u[-1]
        buf[1:-1, 0, 1:-1] = gy0 * u[:, 0]
        buf[1:-1, -1, 1:-1] = gy1 * u[:, -1]
        buf[1:-1, 1:-1, 0] = gz0 * u[:, :, 0]
        buf[1:-1, 1:-1, -1] = gz1 * u[:, :, -1]
        np.add(buf[2:, 1:-1, 1:-1], buf[:-2, 1:-1, 1:-1], out=lap)
        lap += buf[1:-1, 2:, 1:-1]
        lap += buf[1:-1, :-2, 1:-1]
        lap += buf[1:-1, 1:-1, 2:]
        lap += buf[1:-1, 1:-1, :-2]
        lap -= 6.0 * u
        acc += u
        u = react * u + c * lap + src
        acc += u
    return 0.5 * acc / steps


def time_domain_oracle(
    part: CubePartition,
    q: AbsorptionField,
    f: ScalarField,
    T: float,
    dt: float,
    margin: float = 0.5,
    boundary: str = "radiation",
) -> np.ndarray:
    """Time average of ``u`` over ``[0, T]`` at the cells of ``part``."""
    grid = enlarge(part, q, f, margin, boundary)
    avg = integrate(grid, T, dt)
    return avg[grid.inner_slice()].ravel()
