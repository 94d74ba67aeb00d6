"""1D P1 finite elements: meshes, banded assembly, projection, gradients, norms."""

from fem.mesh import Mesh1D, build_uniform_mesh, mesh_from_nodes
from fem.banded import BandedMatrix
from fem.fields import ElementGradient, FeField, evaluate, gradient
from fem.assembly import (
    assemble_mass_matrix,
    assemble_stiffness_matrix,
    gauss_rule,
    l2_error,
    l2_inner,
    l2_norm,
    l2_project,
    load_vector,
)

__all__ = [
    "Mesh1D", "build_uniform_mesh", "mesh_from_nodes", "BandedMatrix",
    "ElementGradient", "FeField", "evaluate", "gradient",
    "assemble_mass_matrix", "assemble_stiffness_matrix", "gauss_rule",
    "l2_error", "l2_inner", "l2_norm", "l2_project", "load_vector",
]
