"""Small-lambda limit of ``lam * U(lam)`` against the steady average ``psi``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..homogenized import AbsorptionField, solve_homogenized, steady_average
from ..kernel import build_table
from ..medium import CubePartition, ScalarField


def _rel(a, b) -> float:
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return float(np.linalg.norm(a - b))
    return float(np.linalg.norm(a - b) / nb)


def extrapolate_to_zero(lams, values, degree: int | None = None) -> tuple[np.ndarray, str, float]:
    """Polynomial extrapolation of ``values[i]`` (rows) to ``lam = 0``.

    Two models are fitted by least squares, a polynomial in ``lam`` and one in
    ``sqrt(lam)``, each of ``degree`` (default: one less than the number of
    samples minus one, so at least one residual degree of freedom remains
    when possible).  The model with the smaller relative residual wins.
    Returns ``(limit, model_name, residual)``.
    """
    lams = np.asarray(lams, dtype=float)
    V = np.atleast_2d(np.asarray(values, dtype=float))
    if V.shape[0] != len(lams):
        V = V.T
    if len(lams) < 2:
        raise ValueError("need at least two lambda samples to extrapolate")
    if degree is None:
        degree = max(1, len(lams) - 2)
    best = None
    scale = np.linalg.norm(V) or 1.0
    for name, t in (("sqrt-lambda", np.sqrt(lams)), ("lambda", lams)):
        A = np.vander(t, degree + 1, increasing=True)
        coef, *_ = np.linalg.lstsq(A, V, rcond=None)
        resid = float(np.linalg.norm(A @ coef - V) / scale)
        if best is None or resid < best[2]:
            best = (coef[0], name, resid)
    return best


@dataclass
class StudyReport:
    """Rows of a study plus named summary values; CSV-serialisable."""

    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def tauberian_study(
    part: CubePartition, q: AbsorptionField, f: ScalarField, lambdas, degree: int | None = None
) -> StudyReport:
    """Compare ``W(lam) = lam U(lam)`` for decreasing ``lam`` with ``psi``.

    Rows are ``(lambda, error)`` with relative l2 errors against ``psi``;
    the final row at ``lambda = 0`` holds the extrapolated error.
    """
    lams = np.asarray(lambdas, dtype=float)
    if len(lams) < 3:
        raise ValueError("tauberian study needs at least three lambda values")
    if np.any(lams <= 0) or np.any(np.diff(lams) >= 0):
        raise ValueError("lambda values must be positive and strictly decreasing")
    psi = steady_average(part, q, f, build_table(part, 0.0)).values
    Ws = []
    report = StudyReport(("lambda", "error"))
    for lam in lams:
        W = solve_homogenized(part, q, f, lam, build_table(part, lam)).values
        Ws.append(W)
        report.rows.append((float(lam), _rel(W, psi)))
    limit, model, resid = extrapolate_to_zero(lams, np.array(Ws), degree)
    err = _rel(limit, psi)
    report.rows.append((0.0, err))
    report.summary.update(extrapolated_error=err, model=model, fit_residual=resid, psi_norm=float(np.linalg.norm(psi)))
    report.summary["extrapolated"] = limit
    report.summary["psi"] = psi
    return report
