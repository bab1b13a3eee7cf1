"""Penalized space-time Galerkin solver for parabolic problems on moving
1-D domains with mixed Dirichlet/Robin/Neumann boundary conditions."""

from .assembly import SparseSystem, assemble, quadratic_form_parts
from .config import Config, ConfigError, load_config, parse_config
from .exprlang import ExprError, diff_t_numeric, evaluate, parse, to_source
from .geometry import (
    BoundaryPartition,
    GeometryError,
    LateralPoint,
    MovingDomain,
    Segment,
    is_sigma0_cylindrical,
    lateral_point,
    validate_partition,
)
from .mesh import MeshError, SpaceTimeMesh, build_mesh, dump_mesh, quadrature_points
from .solver import (
    PenaltySchedule,
    PicardFailure,
    SolveReport,
    SolverFailure,
    coupled_penalty,
    lu_solve,
    run_schedule,
    solve_linear,
    solve_semilinear,
)
from .transform import (
    AuxiliaryFunction,
    ProblemSpec,
    TransformedProblem,
    TransformError,
    build_phi,
    inverse_transform,
    select_k1,
    select_k2,
    transform_problem,
)
from .verify import (
    ErrorReport,
    ManufacturedCase,
    VerifyError,
    derive_data,
    diagnostics,
    error_norms,
    fd_oracle,
)

__version__ = "0.1.0"
