"""Parameter-robust solver for coupled singularly perturbed parabolic reaction-diffusion systems."""

from .analysis import (
    ErrorTable,
    RateTable,
    SolveSettings,
    SpectralTable,
    TransitionOperator,
    assemble_transition,
    convergence_rates,
    double_mesh_error,
    error_table,
    refinement_ladder,
    spectral_radius,
    spectral_table,
    transition_for,
)
from .blocktri import BlockThomasFactor, BlockTridiagonal, SolverError, block_thomas_solve
from .mesh import (
    GeneralizedShishkinMesh,
    MeshConfig,
    build_mesh,
    mesh_generating_function,
    solve_l_star,
    transition_parameter,
)
from .scheme import (
    StencilWeights,
    assemble_lhs,
    assemble_q_operator,
    compute_weights,
    quadrature_weights,
    select_regime,
    stencil_weights_r,
    verify_positive_type,
)
from .stepper import EvolutionState, TimeGrid, Trajectory, cn_step, integrate
from .systems import (
    CoupledSystem,
    SystemDiagnostics,
    builtin_example,
    exponential_shift,
    validate_coupling,
)

__version__ = "0.1.0"
