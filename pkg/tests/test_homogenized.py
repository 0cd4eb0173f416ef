import math

import numpy as np
import pytest

from heatmedium.errors import NearSingularError
from heatmedium.homogenized import (
    AbsorptionField,
    build_q,
    interpolate,
    pde_residual,
    solve_homogenized,
    steady_average,
)
from heatmedium.kernel import build_table, cell_values
from heatmedium.medium import UNIT_CUBE, BoxDomain, CubePartition, ScalarField

FOUR_PI = 4 * math.pi
BUMP = ScalarField.gaussian((0.5, 0.5, 0.5), 0.2, 1.0)


def const(v):
    return ScalarField.constant(v)


def test_build_q_examples():
    part = CubePartition.uniform(UNIT_CUBE, 3)
    q = build_q(part, const(1.0), const(FOUR_PI), const(2.0))
    assert np.allclose(q.values, 8 * math.pi)
    assert q.values[0] == pytest.approx(25.1327, abs=5e-5)
    assert build_q(part, const(0.0), const(FOUR_PI), const(2.0)).is_zero
    h = ScalarField.polynomial([(1.0, 1, 0, 0), (-0.5, 0, 0, 0)])
    q = build_q(part, h, const(FOUR_PI), const(1.0))
    assert np.array_equal(np.sign(q.values), np.sign(h(part.centers)))


def test_zero_absorption_returns_source_exactly():
    part = CubePartition.uniform(UNIT_CUBE, 6)
    table = build_table(part, 1.0)
    q = AbsorptionField(part, np.zeros(part.P))
    sol = solve_homogenized(part, q, BUMP, 1.0, table)
    assert np.array_equal(sol.values, table.weights @ cell_values(BUMP, part))
    psi = steady_average(part, q, BUMP)
    assert np.array_equal(psi.values, psi.source)


def test_zero_source_gives_zero():
    part = CubePartition.uniform(UNIT_CUBE, 5)
    q = build_q(part, const(1.0), const(FOUR_PI), const(1.0))
    assert np.all(solve_homogenized(part, q, const(0.0), 1.0).values == 0)
    assert np.all(steady_average(part, q, const(0.0)).values == 0)


@pytest.mark.parametrize("lam", [0.0, 1.0])
def test_small_absorption_neumann_series(lam):
    part = CubePartition.uniform(UNIT_CUBE, 6)
    table = build_table(part, lam)
    eps = 1e-3
    q = AbsorptionField(part, np.full(part.P, eps))
    G = table.weights @ cell_values(BUMP, part)
    B = table.weights * q.values[None, :]
    two_term = G - B @ G
    W = solve_homogenized(part, q, BUMP, lam, table).values
    gap = np.linalg.norm(W - two_term)
    bound = np.linalg.norm(B, 2) ** 2 * np.linalg.norm(G) / (1 - np.linalg.norm(B, 2))
    assert gap <= bound
    assert gap > 0


def test_laplace_mode_scaling():
    part = CubePartition.uniform(UNIT_CUBE, 5)
    q = build_q(part, const(1.0), const(FOUR_PI), const(1.0))
    W = solve_homogenized(part, q, BUMP, 2.0)
    U = solve_homogenized(part, q, BUMP, 2.0, mode="laplace-field")
    assert np.allclose(U.values * 2.0, W.values, rtol=1e-14)
    with pytest.raises(ValueError):
        solve_homogenized(part, q, BUMP, 0.0, mode="laplace-field")


def test_table_mismatch_rejected():
    part = CubePartition.uniform(UNIT_CUBE, 4)
    q = AbsorptionField(part, np.ones(part.P))
    with pytest.raises(ValueError, match="lambda"):
        solve_homogenized(part, q, BUMP, 1.0, build_table(part, 2.0))


def test_near_singular_operator_reported():
    part = CubePartition.uniform(UNIT_CUBE, 4)
    table = build_table(part, 0.0)
    mu = np.max(np.linalg.eigvals(table.weights).real)
    q = AbsorptionField(part, np.full(part.P, -1.0 / mu))
    with pytest.raises(NearSingularError):
        steady_average(part, q, BUMP, table)


def test_absorption_lowers_the_field():
    part = CubePartition.uniform(UNIT_CUBE, 6)
    q = build_q(part, const(1.0), const(FOUR_PI), const(1.0))
    free = steady_average(part, AbsorptionField(part, np.zeros(part.P)), BUMP).values
    damped = steady_average(part, q, BUMP).values
    assert np.all(damped > 0) and np.all(damped < free)


def test_interpolation_reproduces_grid_values():
    part = CubePartition.uniform(UNIT_CUBE, 5)
    q = build_q(part, const(1.0), const(FOUR_PI), const(1.0))
    sol = solve_homogenized(part, q, BUMP, 1.0, mode="laplace-field")
    assert np.allclose(interpolate(sol, q, BUMP, part.centers), sol.values, rtol=1e-10)


def test_pde_residual_zero_case_and_coarse_error():
    part = CubePartition.uniform(UNIT_CUBE, 4)
    zero = AbsorptionField(part, np.zeros(part.P))
    sol = steady_average(part, zero, const(0.0))
    assert pde_residual(sol, zero, const(0.0)) == 0.0
    small = CubePartition.uniform(UNIT_CUBE, 3)
    with pytest.raises(ValueError, match="coarse"):
        pde_residual(steady_average(small, AbsorptionField(small, np.zeros(27)), BUMP), AbsorptionField(small, np.zeros(27)), BUMP)


def test_pde_residual_decreases_under_refinement():
    h = ScalarField.gaussian((0.5, 0.5, 0.5), 0.25, 1.0)
    res = []
    for n in (8, 12, 16):
        part = CubePartition.uniform(UNIT_CUBE, n)
        q = build_q(part, h, const(FOUR_PI), const(1.0))
        res.append(pde_residual(steady_average(part, q, BUMP), q, BUMP))
    assert res[0] > res[1] > res[2]


def test_pde_residual_invariant_under_exterior_margin():
    h = ScalarField.gaussian((0.5, 0.5, 0.5), 0.25, 1.0, support=UNIT_CUBE)
    f = BUMP.with_support(UNIT_CUBE)
    c, N = const(FOUR_PI), const(1.0)
    small = CubePartition.uniform(UNIT_CUBE, 8)
    big = CubePartition.uniform(BoxDomain((-0.5, -0.5, -0.5), (1.5, 1.5, 1.5)), 16)
    r = []
    for part in (small, big):
        q = build_q(part, h, c, N)
        sol = solve_homogenized(part, q, f, 1.0)
        r.append(pde_residual(sol, q, f, within=BoxDomain((0.1, 0.1, 0.1), (0.9, 0.9, 0.9))))
    assert r[1] == pytest.approx(r[0], rel=1e-9)


def test_grid_solution_csv(tmp_path):
    part = CubePartition.uniform(UNIT_CUBE, 2)
    sol = steady_average(part, AbsorptionField(part, np.zeros(8)), BUMP)
    sol.to_csv(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "x,y,z,value" and len(lines) == 9
