"""Finite element solver for unsteady Stokes flow coupled to a hinged Kirchhoff plate."""

__version__ = "0.1.0"

from ._accel import backend, set_backend
from .config import RunConfig, dump_config, parse_config
from .coupled import (
    CoupledProblem,
    CoupledState,
    CouplingConfig,
    Mode,
    advance,
    build_problem,
    fixed_point_step,
    fluid_step,
    initialize,
    monolithic_step,
    plate_step,
    step,
)
from .errors import (
    CompatibilityError,
    ConfigurationError,
    FSIError,
    InvalidArgumentError,
    InvalidMeshError,
    NoConvergenceError,
    OutOfDomainError,
    SingularSystemError,
    UndefinedRateError,
    UnsupportedDegreeError,
)
from .experiments import (
    ExperimentRecord,
    VibrationRecord,
    run_free_vibration,
    run_infsup_sweep,
    run_space_convergence,
    run_time_convergence,
)
from .mesh import build_box_fluid_mesh, extract_plate_mesh
from .mms import ExactSolution, error_norm, observed_rate
from .params import PhysicalParams
from .results import emit_results
from .spaces import build_space, interpolate

__all__ = [name for name in dir() if not name.startswith("_")]
