"""Temperature fields in media with many small embedded particles.

Discrete many-particle solves, the homogenized integral-equation limit,
and numerical checks tying the two together.
"""

from .config import ConfigError, RunConfig, parse_config
from .errors import (
    DivergenceError,
    GeometryError,
    NearSingularError,
    NumericalError,
    PackingInfeasibleError,
    RegimeError,
    SingularityError,
)
from .homogenized import (
    AbsorptionField,
    GridSolution,
    build_q,
    interpolate,
    pde_residual,
    solve_homogenized,
    steady_average,
)
from .kernel import KernelParams, QuadratureTable, build_table, green, point_weights, source_field
from .manybody import DenseSystem, assemble_coarse, assemble_manybody, charges, field_at, solve
from .medium import (
    UNIT_CUBE,
    BoxDomain,
    CubePartition,
    ParticleCloud,
    ScalarField,
    partition,
    sample_particles,
)

__all__ = [
    "AbsorptionField",
    "BoxDomain",
    "ConfigError",
    "CubePartition",
    "DenseSystem",
    "DivergenceError",
    "GeometryError",
    "GridSolution",
    "KernelParams",
    "NearSingularError",
    "NumericalError",
    "PackingInfeasibleError",
    "ParticleCloud",
    "QuadratureTable",
    "RegimeError",
    "RunConfig",
    "ScalarField",
    "SingularityError",
    "UNIT_CUBE",
    "assemble_coarse",
    "assemble_manybody",
    "build_q",
    "build_table",
    "charges",
    "field_at",
    "green",
    "interpolate",
    "parse_config",
    "partition",
    "pde_residual",
    "point_weights",
    "sample_particles",
    "solve",
    "solve_homogenized",
    "source_field",
    "steady_average",
]
