"""Mixed multiscale finite element solver for Darcy flow in thin domains.

Fine-grid RT0/P0 reference solves, interface snapshot spaces, spectral model
reduction and the projected coarse saddle-point solve, with an experiment
driver for error-versus-basis-count studies.
"""

from .mesh import (
    CoarsePartition,
    CoefficientField,
    FineMesh,
    MeshError,
    RoughChannelSpec,
    generate_rectangle,
    generate_rough_channel,
    load_mesh,
    make_coefficient,
    save_mesh,
)
from .fine import (
    FlowSolution,
    SaddleSystem,
    SolveError,
    assemble_fine,
    cell_velocities,
    evaluate_cell_velocity,
    solve_saddle,
)
from .snapshots import SnapshotError, SnapshotSet, build_snapshots, snapshot_matrix
from .spectral import (
    MultiscaleBasis,
    SpectralError,
    build_all,
    build_offline,
    local_spectral,
    select_basis,
)
from .coarse import (
    CoarseSolution,
    ProjectionOperator,
    assemble_coarse,
    estimate_infsup,
    make_projection,
    solve_coarse,
)
from .errors import (
    ErrorReport,
    pressure_error,
    theorem2_diagnostic,
    velocity_error,
)
from .config import ConfigError, ExperimentConfig, parse_config
from .runner import run_experiment

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
