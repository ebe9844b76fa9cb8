"""One-dimensional finite-volume solver for mixed free-surface and
pressurized flow in closed pipes.

Modules: :mod:`geometry` (pipe profile and section integrals),
:mod:`closures` (pressure law, wave speeds, head and entropy),
:mod:`sources` (momentum source terms), :mod:`solver` (the finite-volume
engine), :mod:`diagnostics` and :mod:`cli` (config files, outputs,
command line).
"""

__version__ = "0.1.0"

from .closures import FlowState, FluidConstants  # noqa: E402
from .geometry import PipeProfile, build_profile, read_profile  # noqa: E402
from .solver import BoundaryCondition, Mesh, ProfileSpec, Region, SimConfig, Trajectory, run  # noqa: E402

__all__ = [
    "__version__",
    "FlowState",
    "FluidConstants",
    "PipeProfile",
    "build_profile",
    "read_profile",
    "BoundaryCondition",
    "Mesh",
    "ProfileSpec",
    "Region",
    "SimConfig",
    "Trajectory",
    "run",
]
