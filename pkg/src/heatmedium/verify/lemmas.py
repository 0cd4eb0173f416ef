"""Surface-quadrature checks of the small-particle estimates on a uniform spherical layer."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..errors import GeometryError
from ..kernel import FOUR_PI, _as_params, green


@dataclass(frozen=True)
class SphericalLayer:
    """Uniform density ``sigma`` on the sphere ``|s - center| = radius``.

    Nodes are Gauss-Legendre in ``cos(theta)`` times a uniform ``phi`` grid
    (``n_phi`` defaults to ``2 * n_theta``).
    """

    center: tuple[float, float, float]
    radius: float
    sigma: float = 1.0
    n_theta: int = 64
    n_phi: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        if self.n_phi is None:
            object.__setattr__(self, "n_phi", 2 * self.n_theta)

    @property
    def charge(self) -> float:
        return self.sigma * FOUR_PI * self.radius**2

    def nodes(self, phase: float = 0.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(points, outward normals, area weights)``; ``phase`` rotates phi by that
        fraction of the phi spacing."""
        ct, wt = leggauss(self.n_theta)
        phi = 2.0 * math.pi * (np.arange(self.n_phi) + phase) / self.n_phi
        CT, PH = np.meshgrid(ct, phi, indexing="ij")
        ST = np.sqrt(1.0 - CT**2)
        normals = np.column_stack([(ST * np.cos(PH)).ravel(), (ST * np.sin(PH)).ravel(), CT.ravel()])
        w = np.repeat(wt, self.n_phi) * (2.0 * math.pi / self.n_phi) * self.radius**2
        return np.asarray(self.center) + self.radius * normals, normals, w

    def quadrature_charge(self) -> float:
        _, _, w = self.nodes()
        return float(self.sigma * w.sum())


@dataclass(frozen=True)
class LemmaReport:
    J1: float
    J2: float
    ratio: float
    analytic_ratio: float
    bound: float

    def to_dict(self) -> dict:
        return asdict(self)


def uniform_layer_ratio(a: float, lam: float) -> float:
    """``sinh(k a) / (k a) - 1`` with ``k = sqrt(lam)``, by series for small ``k a``."""
    t = math.sqrt(lam) * a
    if t < 1e-3:
        return t * t / 6.0 + t**4 / 120.0
    return math.sinh(t) / t - 1.0


def lemma1_check(layer: SphericalLayer, x, params) -> LemmaReport:
    """Compare the dipole-and-higher remainder ``J2`` of the layer potential with its monopole ``J1``."""
    params = _as_params(params)
    x = np.asarray(x, dtype=float)
    c = np.asarray(layer.center)
    dist = float(np.linalg.norm(x - c))
    if dist <= layer.radius:
        raise GeometryError("observation point lies inside or on the sphere")
    if dist < 3.0 * layer.radius:
        raise GeometryError(f"observation distance {dist:.4g} below 3a = {3 * layer.radius:.4g}")
    pts, _, w = layer.nodes()
    g0 = green(x, c, params)
    J1 = g0 * layer.charge
    J2 = float(np.sum(w * layer.sigma * (green(x, pts, params) - g0)))
    return LemmaReport(
        J1=float(J1),
        J2=J2,
        ratio=J2 / J1 if J1 != 0 else 0.0,
        analytic_ratio=uniform_layer_ratio(layer.radius, params.lam),
        bound=layer.radius / dist,
    )


@dataclass(frozen=True)
class Lemma2Report:
    """Double surface integrals on one layer.

    ``direct``: integral of the normal derivative of ``1 / (4 pi |s - s'|)`` in
    ``s`` against ``sigma(s')``, integrated over ``s`` (principal value);
    ``outer``: the same with the outer limiting value of the normal derivative,
    ``direct - Q / 2``; ``correction``: relative size of the screened
    correction, ``|int int (exp(-k r) - 1) / (4 pi r) sigma| / |int int sigma / (4 pi r)|``.
    """

    n_theta: int
    charge: float
    direct: float
    outer: float
    correction: float
    correction_exact: float


def _pair_sum(pts, normals, w, pts2, w2, kernel, chunk: int = 512) -> float:
    total = 0.0
    for s in range(0, len(pts), chunk):
        d = pts[s : s + chunk, None, :] - pts2[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        total += float(w[s : s + chunk] @ kernel(d, r, normals[s : s + chunk]) @ w2)
    return total


def lemma2_check(layer: SphericalLayer, lam: float = 0.0) -> Lemma2Report:
    """Double integrals over the layer; the ``s'`` nodes are rotated by half a phi step
    so that no pair coincides."""
    if layer.n_theta < 8:
        raise ValueError(f"degenerate surface quadrature: n_theta={layer.n_theta} < 8")
    k = math.sqrt(lam)
    a = layer.radius
    pts, nrm, w = layer.nodes(0.0)
    pts2, _, w2 = layer.nodes(0.5)
    sig = layer.sigma
    Q = layer.charge

    def dnormal(d, r, n):
        # d/dN_s of 1/(4 pi |s - s'|) = -(s - s').N_s / (4 pi r^3)
        return -np.einsum("ijk,ik->ij", d, n) / (FOUR_PI * r**3)

    direct = sig * _pair_sum(pts, nrm, w, pts2, w2, dnormal)
    if sig == 0.0:
        return Lemma2Report(layer.n_theta, 0.0, 0.0, 0.0, 0.0, 0.0)
    single = sig * _pair_sum(pts, nrm, w, pts2, w2, lambda d, r, n: 1.0 / (FOUR_PI * r))
    screened = sig * _pair_sum(pts, nrm, w, pts2, w2, lambda d, r, n: np.expm1(-k * r) / (FOUR_PI * r))
    t = 2.0 * k * a
    exact = 1.0 - (-math.expm1(-t) / t) if t > 0 else 0.0
    return Lemma2Report(
        n_theta=layer.n_theta,
        charge=Q,
        direct=direct,
        outer=direct - 0.5 * Q,
        correction=abs(screened) / abs(single),
        correction_exact=exact,
    )


def observed_order(hs, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    return float(np.polyfit(np.log(hs), np.log(np.abs(errors)), 1)[0])
