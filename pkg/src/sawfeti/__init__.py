"""Frequency-domain solver for periodically structured SAW device models.

The package truncates the semi-unbounded device with absorbing layers,
assembles complex symmetric piezoelectric finite element operators on
the four repeating subregion types, tears the domain along the periodic
interfaces, and solves the resulting block tridiagonal quasi-Toeplitz
multiplier system either directly (small cell counts) or through a
doubling-seeded Newton factorization with a Sherman-Morrison-Woodbury
block sweep (large cell counts).
"""

from .assembly import (
    SubregionSystem,
    assemble_electrode,
    assemble_piezo,
    dirichlet_lift,
)
from .config import ProblemConfig, RunConfig, load_run_config, modular_voltages
from .feti import (
    FieldSolution,
    InterfaceBlockSet,
    TraceMatrix,
    assemble_multiplier_system,
    build_systems,
    build_trace,
    interface_blocks,
    recover_fields,
    rhs_blocks,
    solve_saw,
)
from .geometry import (
    DampingSpec,
    GeometrySpec,
    SubregionMesh,
    build_side_block,
    build_unit_cell,
    damping,
    stretch,
)
from .linalg import (
    SingularMatrixError,
    dense_solve,
    frobenius_norm,
    sparse_factorize,
    sylvester_generalized_solve,
)
from .materials import MaterialSet, load_material, rotate_material
from .monolithic import GlobalSystem, assemble_monolithic, solve_monolithic
from .qtsolver import (
    IterationReport,
    QTFactorization,
    QTSystem,
    complete_factorization,
    double_method,
    double_newton,
    newton_qme,
    qt_dense_oracle,
    smw_solve,
)
from .scaling import ScaleSet, nondimensionalize, redimensionalize

__version__ = "0.1.0"

__all__ = [
    "DampingSpec", "FieldSolution", "GeometrySpec", "GlobalSystem",
    "InterfaceBlockSet", "IterationReport", "MaterialSet", "ProblemConfig",
    "QTFactorization", "QTSystem", "RunConfig", "ScaleSet",
    "SingularMatrixError", "SubregionMesh", "SubregionSystem", "TraceMatrix",
    "assemble_electrode", "assemble_monolithic", "assemble_multiplier_system",
    "assemble_piezo", "build_side_block", "build_systems", "build_trace",
    "build_unit_cell", "complete_factorization", "damping", "dense_solve",
    "dirichlet_lift", "double_method", "double_newton", "frobenius_norm",
    "interface_blocks", "load_material", "load_run_config",
    "modular_voltages", "newton_qme", "nondimensionalize", "qt_dense_oracle",
    "recover_fields", "redimensionalize", "rhs_blocks", "rotate_material",
    "smw_solve", "solve_monolithic", "solve_saw", "sparse_factorize",
    "stretch", "sylvester_generalized_solve",
]
