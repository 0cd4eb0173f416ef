"""Domain, material fields, particle clouds and cube partitions.

Particles are spheres of radius ``a``.  Their number in a subdomain follows
the law ``a**-(2 - kappa) * integral(N)``, realised as a Poisson count whose
points are placed with a hard-core exclusion distance ``d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import PackingInfeasibleError, RegimeError

__all__ = [
    "BoxDomain",
    "UNIT_CUBE",
    "ScalarField",
    "ParticleCloud",
    "CubePartition",
    "sample_particles",
    "partition",
    "count_in",
    "integrate_field",
    "default_separation",
    "expected_count",
]


@dataclass(frozen=True)
class BoxDomain:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("box corners must be 3-vectors")
        if not all(h > l for l, h in zip(lo, hi)):
            raise ValueError(f"box requires hi > lo componentwise, got lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    def contains(self, points) -> np.ndarray:
        """Closed-box membership for an ``(n, 3)`` array (or a single point)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((p >= self.lo) & (p <= self.hi), axis=1)

    def contains_box(self, other: "BoxDomain") -> bool:
        return all(ol >= sl for ol, sl in zip(other.lo, self.lo)) and all(
            oh <= sh for oh, sh in zip(other.hi, self.hi)
        )

    def enlarged(self, fraction: float) -> "BoxDomain":
        pad = fraction * self.lengths
        return BoxDomain(tuple(np.asarray(self.lo) - pad), tuple(np.asarray(self.hi) + pad))

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}


UNIT_CUBE = BoxDomain((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


@dataclass(frozen=True)
class ScalarField:
    """A real field on a box; evaluates to 0 outside ``support`` when one is set.

    ``kind`` is one of ``constant``, ``gaussian`` or ``polynomial``:

    * constant: ``value``
    * gaussian: ``offset + amplitude * exp(-|x - center|**2 / width**2)``
    * polynomial: ``sum(coef * x**px * y**py * z**pz)`` over ``terms``
    """

    kind: str
    value: float = 0.0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    width: float = 1.0
    amplitude: float = 0.0
    offset: float = 0.0
    terms: tuple[tuple[float, int, int, int], ...] = ()
    support: BoxDomain | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "gaussian", "polynomial"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.kind == "gaussian" and not self.width > 0:
            raise ValueError("gaussian width must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(
            self, "terms", tuple((float(t[0]), int(t[1]), int(t[2]), int(t[3])) for t in self.terms)
        )

    @classmethod
    def constant(cls, value: float, support: BoxDomain | None = None) -> "ScalarField":
        return cls("constant", value=float(value), support=support)

    @classmethod
    def gaussian(cls, center, width, amplitude, offset=0.0, support=None) -> "ScalarField":
        return cls(
            "gaussian",
            center=tuple(center),
            width=float(width),
            amplitude=float(amplitude),
            offset=float(offset),
            support=support,
        )

    @classmethod
    def polynomial(cls, terms, support=None) -> "ScalarField":
        return cls("polynomial", terms=tuple(tuple(t) for t in terms), support=support)

    def with_support(self, support: BoxDomain | None) -> "ScalarField":
        return ScalarField(
            self.kind, self.value, self.center, self.width, self.amplitude, self.offset, self.terms, support
        )

    def without_support(self) -> "ScalarField":
        return self.with_support(None)

    @property
    def is_zero(self) -> bool:
        if self.kind == "constant":
            return self.value == 0.0
        if self.kind == "gaussian":
            return self.amplitude == 0.0 and self.offset == 0.0
        return all(t[0] == 0.0 for t in self.terms)

    def __call__(self, x) -> np.ndarray:
        p = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "constant":
            out = np.full(len(p), self.value)
        elif self.kind == "gaussian":
            r2 = np.sum((p - np.asarray(self.center)) ** 2, axis=1)
            out = self.offset + self.amplitude * np.exp(-r2 / self.width**2)
        else:
            out = np.zeros(len(p))
            for coef, px, py, pz in self.terms:
                out += coef * p[:, 0] ** px * p[:, 1] ** py * p[:, 2] ** pz
        if self.support is not None:
            out = np.where(self.support.contains(p), out, 0.0)
        return out

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "gaussian":
            return {
                "kind": "gaussian",
                "center": list(self.center),
                "width": self.width,
                "amplitude": self.amplitude,
                "offset": self.offset,
            }
        return {"kind": "polynomial", "terms": [list(t) for t in self.terms]}

    @classmethod
    def from_dict(cls, entry: dict, support: BoxDomain | None = None) -> "ScalarField":
        kind = entry.get("kind")
        if kind == "constant":
            return cls.constant(entry["value"], support)
        if kind == "gaussian":
            return cls.gaussian(
                entry["center"], entry["width"], entry["amplitude"], entry.get("offset", 0.0), support
            )
        if kind == "polynomial":
            return cls.polynomial(entry["terms"], support)
        raise ValueError(f"unknown field kind {kind!r}")


def integrate_field(fld: ScalarField, domain: BoxDomain, order: int = 32) -> float:
    """Tensor Gauss-Legendre integral of ``fld`` over ``domain``."""
    if fld.kind == "constant" and (fld.support is None or fld.support.contains_box(domain)):
        return fld.value * domain.volume
    x, w = leggauss(order)
    axes = [0.5 * (h - l) * x + 0.5 * (h + l) for l, h in zip(domain.lo, domain.hi)]
    ws = [0.5 * (h - l) * w for l, h in zip(domain.lo, domain.hi)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    W = ws[0][:, None, None] * ws[1][None, :, None] * ws[2][None, None, :]
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    return float(np.sum(W.ravel() * fld(pts)))


def expected_count(N: ScalarField, domain: BoxDomain, a: float, kappa: float) -> float:
    """Mean particle count ``a**-(2 - kappa) * integral_domain(N)``."""
    return a ** (-(2.0 - kappa)) * integrate_field(N, domain)


def default_separation(domain: BoxDomain, N: ScalarField, a: float, kappa: float) -> float:
    """Half the nominal spacing ``(|D| a**(2 - kappa) / integral(N))**(1/3)``."""
    total = integrate_field(N, domain)
    if total <= 0.0:
        return math.inf
    return 0.5 * (domain.volume * a ** (2.0 - kappa) / total) ** (1.0 / 3.0)


@dataclass
class ParticleCloud:
    a: float
    kappa: float
    centers: np.ndarray
    h_values: np.ndarray
    c_values: np.ndarray
    d: float
    domain: BoxDomain | None = None

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, 3)
        self.h_values = np.asarray(self.h_values, dtype=float).reshape(-1)
        self.c_values = np.asarray(self.c_values, dtype=float).reshape(-1)
        if not (len(self.centers) == len(self.h_values) == len(self.c_values)):
            raise ValueError("centers, h_values and c_values must have equal length")
        if not self.a > 0:
            raise ValueError("particle radius a must be positive")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (0,1)")
        if np.any(self.c_values <= 0):
            raise ValueError("surface factors c_m must be positive")

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def M(self) -> int:
        return len(self.centers)

    @property
    def scale(self) -> float:
        """The coupling prefactor ``a**(2 - kappa)``."""
        return self.a ** (2.0 - self.kappa)

    @property
    def zeta(self) -> np.ndarray:
        return self.h_values / self.a**self.kappa

    @property
    def surface_areas(self) -> np.ndarray:
        return self.c_values * self.a**2

    def min_distance(self) -> float:
        if self.M < 2:
            return math.inf
        from scipy.spatial import cKDTree

        dist, _ = cKDTree(self.centers).query(self.centers, k=2)
        return float(dist[:, 1].min())

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("x,y,z,h,c\n")
            for (x, y, z), h, c in zip(self.centers, self.h_values, self.c_values):
                fh.write(f"{x:.17g},{y:.17g},{z:.17g},{h:.17g},{c:.17g}\n")


def _field_max(fld: ScalarField, domain: BoxDomain) -> float:
    if fld.kind == "constant":
        return fld.value
    axes = [np.linspace(l, h, 33) for l, h in zip(domain.lo, domain.hi)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    if fld.kind == "gaussian" and domain.contains(fld.center)[0]:
        pts = np.vstack([pts, fld.center])
    return float(fld.without_support()(pts).max())


def sample_particles(
    domain: BoxDomain,
    N: ScalarField,
    h: ScalarField,
    c: ScalarField,
    a: float,
    kappa: float,
    seed: int,
    d: float | None = None,
    draw_budget: int = 200,
) -> ParticleCloud:
    """Sample particle centers in ``domain`` with density ``a**-(2-kappa) N(x)``.

    The total count is Poisson with mean ``a**-(2-kappa) * integral(N)``.
    Each point is drawn from the density ``N / integral(N)`` by thinning and
    redrawn while it lies closer than ``d`` to an accepted point.  More than
    ``draw_budget * M`` proposals raises :class:`PackingInfeasibleError`.
    """
    if not a > 0:
        raise ValueError("particle radius a must be positive")
    if not 0.0 < kappa < 1.0:
        raise ValueError("kappa must lie in (0,1)")
    rng = np.random.default_rng(seed)
    n_max = _field_max(N, domain)
    if n_max < 0 or _field_min(N, domain) < 0:
        raise ValueError("density field N must be non-negative on the domain")
    if d is None:
        d = default_separation(domain, N, a, kappa)
    mean = expected_count(N, domain, a, kappa) if n_max > 0 else 0.0
    M = int(rng.poisson(mean)) if mean > 0 else 0
    if M > 0 and not d > 2 * a:
        raise RegimeError(f"separation d={d:.6g} must exceed particle diameter 2a={2 * a:.6g}")

    lo = np.asarray(domain.lo)
    span = domain.lengths
    bound = 1.1 * n_max
    accepted = np.empty((M, 3))
    n_acc = 0
    budget = draw_budget * max(M, 1)
    draws = 0
    d2 = d * d
    batch = np.empty((0, 3))
    while n_acc < M:
        if len(batch) == 0:
            cand = lo + span * rng.random((256, 3))
            u = rng.random(256) * bound
            batch = cand[u < N.without_support()(cand)]
            draws += 256
            if draws > budget:
                raise PackingInfeasibleError(
                    f"packing infeasible: {n_acc} of {M} particles placed after {draws} draws "
                    f"(d={d:.6g}); intensity too high for the hard-core constraint"
                )
            continue
        x, batch = batch[0], batch[1:]
        if n_acc and np.min(np.sum((accepted[:n_acc] - x) ** 2, axis=1)) < d2:
            continue
        accepted[n_acc] = x
        n_acc += 1
    centers = accepted
    return ParticleCloud(
        a=a,
        kappa=kappa,
        centers=centers,
        h_values=h(centers) if M else np.zeros(0),
        c_values=c(centers) if M else np.zeros(0),
        d=d,
        domain=domain,
    )


def _field_min(fld: ScalarField, domain: BoxDomain) -> float:
    if fld.kind == "constant":
        return fld.value
    axes = [np.linspace(l, h, 17) for l, h in zip(domain.lo, domain.hi)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    return float(fld.without_support()(np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])).min())


def count_in(cloud: ParticleCloud, sub: BoxDomain) -> int:
    if cloud.M == 0:
        return 0
    return int(np.count_nonzero(sub.contains(cloud.centers)))


@dataclass(frozen=True)
class CubePartition:
    """Uniform tiling of a box into ``shape`` cells; cells are ordered row-major (x slowest)."""

    lo: tuple[float, float, float]
    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    centers: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def uniform(cls, domain: BoxDomain, n: int | Sequence[int]) -> "CubePartition":
        shape = (n, n, n) if np.isscalar(n) else tuple(int(v) for v in n)
        if min(shape) < 1:
            raise ValueError("partition needs at least one cell per axis")
        spacing = tuple(float(L / k) for L, k in zip(domain.lengths, shape))
        axes = [l + (np.arange(k) + 0.5) * s for l, k, s in zip(domain.lo, shape, spacing)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        centers = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
        return cls(tuple(domain.lo), shape, spacing, centers)

    @property
    def P(self) -> int:
        return int(np.prod(self.shape))

    @property
    def domain(self) -> BoxDomain:
        hi = tuple(l + k * s for l, k, s in zip(self.lo, self.shape, self.spacing))
        return BoxDomain(self.lo, hi)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volumes(self) -> np.ndarray:
        return np.full(self.P, self.cell_volume)

    @property
    def is_cubic(self) -> bool:
        s = self.spacing
        return math.isclose(s[0], s[1], rel_tol=1e-12) and math.isclose(s[0], s[2], rel_tol=1e-12)

    @property
    def side(self) -> float:
        if not self.is_cubic:
            raise ValueError(f"cells are not cubes: spacing {self.spacing}")
        return self.spacing[0]

    @property
    def indices(self) -> np.ndarray:
        """Integer ``(P, 3)`` cell indices matching ``centers``."""
        I, J, K = np.meshgrid(*[np.arange(k) for k in self.shape], indexing="ij")
        return np.column_stack([I.ravel(), J.ravel(), K.ravel()])

    def cell_index(self, points) -> np.ndarray:
        """Flat index of the cell containing each point (clipped to the grid)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        ijk = np.floor((p - np.asarray(self.lo)) / np.asarray(self.spacing)).astype(int)
        ijk = np.clip(ijk, 0, np.asarray(self.shape) - 1)
        return np.ravel_multi_index(ijk.T, self.shape)

    def as_grid(self, values) -> np.ndarray:
        return np.asarray(values).reshape(self.shape)


def partition(domain: BoxDomain, b: float, cloud: ParticleCloud | None = None) -> CubePartition:
    """Tile ``domain`` with cubes of side ``b``; ``b`` must exceed the cloud's separation."""
    if not b > 0:
        raise ValueError("cube side b must be positive")
    if cloud is not None and cloud.M > 1 and not b > cloud.d:
        raise RegimeError(f"cube side b={b:.6g} must exceed particle separation d={cloud.d:.6g}")
    # actual spacing is L / round(L / b), so the cells always cover the box exactly
    n = np.maximum(1, np.rint(domain.lengths / b)).astype(int)
    return CubePartition.uniform(domain, tuple(int(k) for k in n))
