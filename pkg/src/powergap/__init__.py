"""Power-gap size estimates for inclusions in complex-admittivity conductors."""

from .errors import (
    DegenerateInput,
    DegenerateSweep,
    GateFailure,
    IncompatibleData,
    InvalidArgument,
    InvalidCoefficient,
    InvalidInput,
    InvalidMesh,
    InvalidRegime,
    NumericFailure,
    PowerGapError,
    SolverFailure,
)
from .fem import AdmittivityField, BoundaryCurrent, ComplexField, assemble_system, solve_neumann, solve_pair
from .geometry import InclusionMask, MeshTopology, boundary_chart, generate_mesh, inclusion_mask
from .power import compute_powers, identity_residuals

__version__ = "0.1.0"

__all__ = [
    "AdmittivityField",
    "BoundaryCurrent",
    "ComplexField",
    "DegenerateInput",
    "DegenerateSweep",
    "GateFailure",
    "IncompatibleData",
    "InclusionMask",
    "InvalidArgument",
    "InvalidCoefficient",
    "InvalidInput",
    "InvalidMesh",
    "InvalidRegime",
    "MeshTopology",
    "NumericFailure",
    "PowerGapError",
    "SolverFailure",
    "assemble_system",
    "boundary_chart",
    "compute_powers",
    "generate_mesh",
    "identity_residuals",
    "inclusion_mask",
    "solve_neumann",
    "solve_pair",
    "__version__",
]
