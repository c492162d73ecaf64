"""Discrete de Rham complexes on polyhedral meshes, with mimetic Poincare
constructions, constructive inverses and a magnetostatics scheme."""
from .kernels import BACKEND
from .mesh import PolyMesh, gen_hex_mesh, gen_voided_cube_mesh, single_tet_mesh, load_mesh, validate_mesh
from .ddr import DDRComplex

__version__ = "0.1.0"
__all__ = ["BACKEND", "PolyMesh", "DDRComplex", "gen_hex_mesh", "gen_voided_cube_mesh",
           "single_tet_mesh", "load_mesh", "validate_mesh"]
