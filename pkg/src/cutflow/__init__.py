"""Cut-cell finite volume solver for two-material compressible flow.

A Cartesian grid is split by a vertex level set into polygonal subcells
whose geometric moments are evolved alongside the conserved state, with an
exact two-material Riemann flux on the interface and blended quadratic
reconstruction that keeps interfacial pressure equilibrium intact under
interface-position perturbations.
"""

from .eos import EosParams, NonPhysicalStateError
from .mesh import Grid, TopologyError, build_cut_cells
from .riemann import exact_interface_state
from .solver import SideBC, SolverConfig, TwoMaterialSolver

__all__ = [
    "EosParams",
    "Grid",
    "NonPhysicalStateError",
    "SideBC",
    "SolverConfig",
    "TopologyError",
    "TwoMaterialSolver",
    "build_cut_cells",
    "exact_interface_state",
]

__version__ = "0.1.0"
