"""Many-particle solutions against the homogenized limit as the particle radius shrinks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..homogenized import build_q, solve_homogenized
from ..kernel import _as_params, build_table, cell_values, point_weights
from ..manybody import assemble_manybody, cell_average, solve
from ..medium import BoxDomain, CubePartition, ScalarField, partition, sample_particles
from .tauberian import StudyReport


@dataclass(frozen=True)
class MediumSetup:
    """Everything that defines the medium apart from the particle radius."""

    domain: BoxDomain
    N: ScalarField
    h: ScalarField
    c: ScalarField
    f: ScalarField
    kappa: float


class HomogenizedReference:
    """Homogenized solution at one ``lam`` with Nystrom evaluation at arbitrary points."""

    def __init__(self, setup: MediumSetup, lam: float, grid: int):
        self.params = _as_params(lam)
        if self.params.lam <= 0.0:
            raise ValueError("comparison requires lambda > 0")
        self.part = CubePartition.uniform(setup.domain, grid)
        self.q = build_q(self.part, setup.h, setup.c, setup.N)
        self.f_cells = cell_values(setup.f, self.part)
        table = build_table(self.part, self.params)
        self.solution = solve_homogenized(self.part, self.q, setup.f, self.params, table)

    def evaluate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """``(F(x), U(x))`` at the points, sharing one set of cell weights."""
        w = point_weights(points, self.part, self.params)
        lam = self.params.lam
        F = w @ self.f_cells / lam
        U = w @ (self.f_cells - self.q.values * self.solution.values) / lam
        return F, U


def relative_l2(a, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a - b))


def compare_once(setup: MediumSetup, ref: HomogenizedReference, a: float, seed: int, b: float) -> dict:
    """Sample one cloud, solve the particle system, and compare cell averages with the limit."""
    cloud = sample_particles(setup.domain, setup.N, setup.h, setup.c, a, setup.kappa, seed)
    if cloud.M == 0:
        return {"a": a, "seed": seed, "M": 0, "discrepancy": 0.0, "cells": 0}
    F, U_lim = ref.evaluate(cloud.centers)
    system = assemble_manybody(cloud, ref.params, F)
    U = solve(system)
    coarse = partition(setup.domain, b, cloud)
    mb, counts = cell_average(coarse, cloud.centers, U)
    lim, _ = cell_average(coarse, cloud.centers, U_lim)
    filled = counts > 0
    return {
        "a": a,
        "seed": seed,
        "M": cloud.M,
        "discrepancy": relative_l2(mb[filled], lim[filled]),
        "cells": int(filled.sum()),
        "U": U,
        "U_limit": U_lim,
        "cloud": cloud,
    }


def theorem1_convergence_study(
    setup: MediumSetup,
    a_schedule,
    seeds,
    lam: float = 1.0,
    grid: int = 8,
    b: float = 0.25,
) -> StudyReport:
    """Rows ``(a, seed, discrepancy)``; summary holds per-``a`` seed means and standard errors."""
    a_schedule = [float(a) for a in a_schedule]
    if any(x <= y for x, y in zip(a_schedule, a_schedule[1:])):
        raise ValueError("a_schedule must be strictly decreasing")
    ref = HomogenizedReference(setup, lam, grid)
    report = StudyReport(("a", "seed", "discrepancy"))
    means, errs = [], []
    for a in a_schedule:
        vals = []
        for seed in seeds:
            res = compare_once(setup, ref, a, int(seed), b)
            vals.append(res["discrepancy"])
            report.rows.append((a, int(seed), res["discrepancy"]))
        vals = np.asarray(vals)
        means.append(float(vals.mean()))
        errs.append(float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0)
    report.summary.update(a=a_schedule, mean=means, stderr=errs)
    report.summary["monotone"] = all(x > y for x, y in zip(means, means[1:]))
    return report
