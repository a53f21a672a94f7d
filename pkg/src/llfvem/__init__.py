"""Landau-Lifshitz dynamics with a vertex-centered finite volume element method
and a Gauss-Seidel projection time stepper."""

from .config import ConfigError, ExperimentConfig, build_config
from .harness import RunArtifacts, run
from .mesh import DualGeometry, MeshError, TriMesh, build_dual, build_rect_mesh
from .physics import DimensionlessParams, MaterialParams, nondimensionalize
from .stepper import Discretization, Simulation, gspm_step, picard_implicit_step

__all__ = [
    "ConfigError",
    "DimensionlessParams",
    "Discretization",
    "DualGeometry",
    "ExperimentConfig",
    "MaterialParams",
    "MeshError",
    "RunArtifacts",
    "Simulation",
    "TriMesh",
    "build_config",
    "build_dual",
    "build_rect_mesh",
    "gspm_step",
    "nondimensionalize",
    "picard_implicit_step",
    "run",
]
__version__ = "0.1.0"
