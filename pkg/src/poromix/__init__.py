"""Mixed finite elements for poroelastic consolidation on triangular meshes.

Five coupled fields (stress, displacement, rotation, flux, pressure) are
discretized with H(div)-conforming stress/flux elements and discontinuous
or nodal scalar spaces, and marched with backward Euler on a symmetric
saddle-point system factorized once per run.
"""

from .assembly import (
    BlockSystem,
    MaterialParams,
    apply_compliance,
    assemble_block,
    assemble_boundary_terms,
    assemble_loads,
    assemble_system,
)
from .cases import ManufacturedCase, fixed_load_case, standard_case
from .elements import ReferenceElement, eval_basis, piola_map
from .linsys import (
    MonolithicSystem,
    SingularSystemError,
    compose_monolithic,
    solve_direct,
)
from .mesh import BoundaryPartition, Mesh, build_structured_mesh, read_mesh
from .quadrature import QuadratureRule, quadrature
from .spaces import (
    FieldVector,
    FunctionSpace,
    StressSpace,
    build_space,
    elliptic_projection_sigma,
)
from .timestepping import (
    ELEMENT_PAIRS,
    BiotSolver,
    DiscreteState,
    TimeGrid,
    build_spaces,
    run,
)
from .verification import (
    RateTable,
    convergence_rate,
    l2_error,
    l2_norm,
    postprocess_displacement,
    run_convergence_experiment,
    run_locking_experiment,
    run_temporal_order_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "BiotSolver",
    "BlockSystem",
    "BoundaryPartition",
    "DiscreteState",
    "ELEMENT_PAIRS",
    "FieldVector",
    "FunctionSpace",
    "ManufacturedCase",
    "MaterialParams",
    "Mesh",
    "MonolithicSystem",
    "QuadratureRule",
    "RateTable",
    "ReferenceElement",
    "SingularSystemError",
    "StressSpace",
    "TimeGrid",
    "apply_compliance",
    "assemble_block",
    "assemble_boundary_terms",
    "assemble_loads",
    "assemble_system",
    "build_space",
    "build_spaces",
    "build_structured_mesh",
    "compose_monolithic",
    "convergence_rate",
    "elliptic_projection_sigma",
    "eval_basis",
    "fixed_load_case",
    "l2_error",
    "l2_norm",
    "piola_map",
    "postprocess_displacement",
    "quadrature",
    "read_mesh",
    "run",
    "run_convergence_experiment",
    "run_locking_experiment",
    "run_temporal_order_experiment",
    "solve_direct",
    "standard_case",
]
