import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatmedium.errors import DivergenceError, GeometryError, NearSingularError, SingularityError
from heatmedium.kernel import KernelParams, green
from heatmedium.manybody import (
    DenseSystem,
    assemble_coarse,
    assemble_manybody,
    cell_average,
    charges,
    field_at,
    solve,
    write_diagnostics,
    write_solution_csv,
)
from heatmedium.medium import UNIT_CUBE, CubePartition, ParticleCloud, ScalarField, partition, sample_particles

FOUR_PI = 4 * math.pi


def cloud_of(centers, a=0.01, kappa=0.5, h=1.0, c=FOUR_PI, d=0.1):
    centers = np.asarray(centers, dtype=float)
    n = len(centers)
    return ParticleCloud(a, kappa, centers, np.full(n, h), np.full(n, c), d, UNIT_CUBE)


def test_single_particle_returns_source():
    cloud = cloud_of([[0.5, 0.5, 0.5]])
    U = solve(assemble_manybody(cloud, 1.0, [0.7]))
    assert U[0] == 0.7


def test_two_particles_closed_form():
    a, kappa, h, c = 0.05, 0.5, 1.0, FOUR_PI
    x = np.array([[0.3, 0.5, 0.5], [0.7, 0.5, 0.5]])
    cloud = cloud_of(x, a=a, h=h, c=c)
    beta = a ** (2 - kappa) * h * c * green(x[0], x[1], 1.0)
    F = np.array([1.3, 0.4])
    U = solve(assemble_manybody(cloud, 1.0, F))
    # inverse of [[1, beta], [beta, 1]]
    exact = np.array([F[0] - beta * F[1], F[1] - beta * F[0]]) / (1 - beta**2)
    assert np.allclose(U, exact, rtol=1e-12, atol=0)


def test_two_particle_symmetric_example():
    # choose the distance so that beta = 0.1 exactly
    M = np.array([[1.0, 0.1], [0.1, 1.0]])
    U = solve(DenseSystem(M, np.ones(2)))
    assert np.allclose(U, 1 / 1.1, rtol=1e-12)
    assert U[0] == pytest.approx(0.90909090909, rel=1e-10)


def test_zero_h_gives_source():
    cloud = sample_particles(UNIT_CUBE, ScalarField.constant(1.0), ScalarField.constant(0.0),
                             ScalarField.constant(FOUR_PI), 0.04, 0.5, seed=2)
    F = np.linspace(0.1, 1.0, cloud.M)
    assert np.array_equal(solve(assemble_manybody(cloud, 1.0, F)), F)


def test_identity_and_random_systems():
    assert np.array_equal(solve(DenseSystem(np.eye(4), np.arange(4.0))), np.arange(4.0))
    rng = np.random.default_rng(0)
    A = rng.normal(size=(50, 50)) / 50
    np.fill_diagonal(A, 0)
    sysm = DenseSystem.from_coupling(A, rng.normal(size=50))
    U = solve(sysm)
    res = np.linalg.norm(sysm.matrix @ U - sysm.rhs) / np.linalg.norm(sysm.rhs)
    assert res <= 1e-10
    assert sysm.diagnostics["residual"] <= 1e-10
    assert sysm.diagnostics["method"] == "lu"


def test_near_singular_reported():
    M = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]])
    with pytest.raises(NearSingularError) as info:
        solve(DenseSystem(M, np.ones(2)))
    assert info.value.condition > 1e12


def test_fixed_point_path_matches_lu():
    rng = np.random.default_rng(1)
    A = np.abs(rng.normal(size=(40, 40))) / 100
    np.fill_diagonal(A, 0)
    F = rng.normal(size=40)
    lu = solve(DenseSystem.from_coupling(A, F))
    sysm = DenseSystem.from_coupling(A, F)
    it = solve(sysm, dense_max=10)
    assert sysm.diagnostics["method"] == "fixed-point"
    assert np.allclose(it, lu, rtol=1e-8, atol=1e-10)


def test_fixed_point_divergence():
    # A has eigenvalues +-3, so I + A is indefinite and no positive damping converges;
    # the source must excite the eigenvalue -3 mode
    A = np.array([[0.0, 3.0], [3.0, 0.0]])
    with pytest.raises(DivergenceError, match="diverging"):
        solve(DenseSystem.from_coupling(A, np.array([1.0, 0.0])), dense_max=1, max_sweeps=500)


def test_coincident_centers_rejected():
    cloud = cloud_of([[0.5, 0.5, 0.5], [0.5, 0.5, 0.5]])
    with pytest.raises(SingularityError):
        assemble_manybody(cloud, 1.0, [1.0, 1.0])


def test_charges_examples():
    cloud = cloud_of([[0.5, 0.5, 0.5]], a=0.01, h=-1.0)
    assert charges(cloud, [1.0])[0] == pytest.approx(4 * math.pi * 1e-3, rel=1e-12)
    assert charges(cloud, [2.0])[0] == 2 * charges(cloud, [1.0])[0]
    assert charges(cloud_of([[0.5, 0.5, 0.5]], h=0.0), [1.0])[0] == 0.0


def test_field_at_reproduces_solution_and_decays():
    cloud = sample_particles(UNIT_CUBE, ScalarField.constant(1.0), ScalarField.constant(1.0),
                             ScalarField.constant(FOUR_PI), 0.04, 0.5, seed=5)
    F = np.ones(cloud.M)
    U = solve(assemble_manybody(cloud, 1.0, F))
    back = field_at(cloud, U, cloud.centers, 1.0, F, effective=True)
    assert np.allclose(back, U, rtol=1e-10)
    with pytest.raises(GeometryError):
        field_at(cloud, U, cloud.centers[:1], 1.0, 1.0)
    # far away: |U - F| is bounded by the sum of |charges| times the kernel at the nearest distance
    x = np.array([[6.0, 0.5, 0.5]])
    dev = abs(field_at(cloud, U, x, 1.0, 1.0)[0] - 1.0)
    dist = np.linalg.norm(cloud.centers - x, axis=1).min()
    bound = cloud.scale * np.sum(np.abs(cloud.h_values * cloud.c_values * U)) * math.exp(-dist) / (FOUR_PI * dist)
    assert 0 < dev <= bound


def test_field_with_no_particles():
    empty = cloud_of(np.zeros((0, 3)))
    assert field_at(empty, [], [[0.2, 0.2, 0.2]], 1.0, 0.4)[0] == 0.4


def test_coarse_trivial_cases():
    one = CubePartition.uniform(UNIT_CUBE, 1)
    N, h, c = ScalarField.constant(1.0), ScalarField.constant(1.0), ScalarField.constant(FOUR_PI)
    assert solve(assemble_coarse(one, N, h, c, 1.0, [0.3]))[0] == 0.3
    part = partition(UNIT_CUBE, 0.25)
    F = np.linspace(0, 1, part.P)
    U = solve(assemble_coarse(part, ScalarField.constant(0.0), h, c, 1.0, F))
    assert np.array_equal(U, F)


def test_coarse_modes_agree_within_sampling_error():
    N, h, c = ScalarField.constant(1.0), ScalarField.constant(1.0), ScalarField.constant(FOUR_PI)
    part = partition(UNIT_CUBE, 0.25)
    F = np.ones(part.P)
    ref = solve(assemble_coarse(part, N, h, c, 1.0, F, "analytic-density"))
    sols = []
    for seed in range(10):
        cloud = sample_particles(UNIT_CUBE, N, h, c, 0.02, 0.5, seed)
        sols.append(solve(assemble_coarse(part, N, h, c, 1.0, F, "empirical-count", cloud)))
    sols = np.array(sols)
    mean, se = sols.mean(axis=0), sols.std(axis=0, ddof=1) / math.sqrt(len(sols))
    assert np.all(np.abs(mean - ref) <= 4 * se + 1e-12)


def test_cell_average_and_csv(tmp_path):
    part = CubePartition.uniform(UNIT_CUBE, 2)
    pts = np.array([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2], [0.9, 0.9, 0.9]])
    mean, counts = cell_average(part, pts, [1.0, 3.0, 5.0])
    assert counts.sum() == 3 and mean[0] == 2.0 and mean[-1] == 5.0
    assert np.isnan(mean[1])
    write_solution_csv(tmp_path / "u.csv", pts, [1.0, 2.0, 3.0])
    assert (tmp_path / "u.csv").read_text().splitlines()[0] == "index,x,y,z,U"
    write_diagnostics(tmp_path / "d.txt", {"residual": 0.5, "method": "lu"})
    assert (tmp_path / "d.txt").read_text() == "method=lu\nresidual=0.5\n"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_manybody_linear_in_source(seed, scale):
    cloud = sample_particles(UNIT_CUBE, ScalarField.constant(1.0), ScalarField.constant(1.0),
                             ScalarField.constant(FOUR_PI), 0.04, 0.5, seed)
    if cloud.M == 0:
        return
    F = np.random.default_rng(seed).random(cloud.M)
    U1 = solve(assemble_manybody(cloud, KernelParams(1.0), F))
    U2 = solve(assemble_manybody(cloud, KernelParams(1.0), scale * F))
    assert np.allclose(U2, scale * U1, rtol=1e-10, atol=1e-14)
