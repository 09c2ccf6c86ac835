"""Quasi-static phase-field fracture on quadrilateral meshes.

Staggered displacement / phase-field solver with an adaptive
stabilization (L-scheme) outer iteration, spectral tension-compression
stress split, and an irreversibility penalty.
"""

from .config import ConfigError, RunConfig, parse_config
from .driver import LSchemeConfig, StepReport, outer_iterate, run_loading_loop
from .fem import DofMap, FeSpace, Quadrature, apply_dirichlet, build_constraints
from .material import EigenPair2, MaterialParams, SymTensor2
from .mesh import (Mesh, MeshError, SlitSpec, generate_unit_square_mesh,
                   insert_slit, load_mesh, notched_unit_square, write_mesh)
from .postprocess import surface_load, write_series_csv, write_vtk
from .runner import run_simulation
from .subsolvers import (FieldState, NewtonReport, SingularSystemError,
                         SubsolverError, initial_state, newton_solve,
                         sparse_direct_solve)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "RunConfig", "parse_config",
    "LSchemeConfig", "StepReport", "outer_iterate", "run_loading_loop",
    "DofMap", "FeSpace", "Quadrature", "apply_dirichlet", "build_constraints",
    "EigenPair2", "MaterialParams", "SymTensor2",
    "Mesh", "MeshError", "SlitSpec", "generate_unit_square_mesh",
    "insert_slit", "load_mesh", "notched_unit_square", "write_mesh",
    "surface_load", "write_series_csv", "write_vtk",
    "run_simulation",
    "FieldState", "NewtonReport", "SingularSystemError", "SubsolverError",
    "initial_state", "newton_solve", "sparse_direct_solve",
    "__version__",
]
