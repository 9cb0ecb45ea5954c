"""Partitioned fluid-structure interaction solver with generalized Robin
interface coupling and one-leg theta time stepping in BE-FE form."""

from .mesh import Mesh, InterfaceMap, MeshError, build_rect_mesh, extract_interface
from .fem import Space, FieldCoeffs, TraceField
from .physics import SchemeParams, FluidState, SolidState, Loads, Discretization
from .coupling import run_transient, be_subiterate, IterationTrace, TimeSeriesResult

__all__ = [
    "Mesh",
    "InterfaceMap",
    "MeshError",
    "build_rect_mesh",
    "extract_interface",
    "Space",
    "FieldCoeffs",
    "TraceField",
    "SchemeParams",
    "FluidState",
    "SolidState",
    "Loads",
    "Discretization",
    "run_transient",
    "be_subiterate",
    "IterationTrace",
    "TimeSeriesResult",
]
