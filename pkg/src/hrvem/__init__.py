"""Mixed stress-displacement virtual elements of arbitrary order for plane elasticity."""
from .analysis import EXACT, fit_rate, make_test, run_level
from .assembly import assemble, solve
from .element import VirtualElement
from .material import ElasticityField, plane_strain_isotropic
from .mesh import MeshFamily, PolygonMesh, generate_mesh, read_mesh, write_mesh

__all__ = ["EXACT", "ElasticityField", "MeshFamily", "PolygonMesh", "VirtualElement", "assemble",
           "fit_rate", "generate_mesh", "make_test", "plane_strain_isotropic", "read_mesh",
           "run_level", "solve", "write_mesh"]
__version__ = "0.1.0"
