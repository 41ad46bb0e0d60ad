"""Mixed finite-element solver for 2D incompressible flow with an
exponentially decaying memory term, plus a convergence-study harness."""

from .assembly import (
    OperatorSet,
    assemble_convection,
    assemble_divergence,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
)
from .elements import (
    FeSpace,
    QuadratureRule,
    ReferenceElement,
    build_space,
    interpolate,
    quadrature_rule,
    reference_element,
)
from .manufactured import ManufacturedCase, eval_exact, forcing, manufactured_case
from .memory_term import (
    MemoryAccumulator,
    ModelParams,
    accumulator_update,
    convolution_profile,
    direct_quadrature,
    kernel,
)
from .mesh import Mesh, build_unit_square_mesh, cell_geometry, mesh_to_text
from .sparselinalg import (
    Factorization,
    LinearSolverError,
    SaddleSystem,
    add_scaled,
    factorize,
    matvec,
    solve,
)
from .stepper import (
    MonitorRecord,
    PicardDivergenceError,
    SolveControls,
    StepperError,
    StepperState,
    TimeStepper,
    error_norms,
    project_initial_velocity,
    run,
    write_monitor_csv,
)
from .study import (
    LongtimeResult,
    RateTable,
    StabilityTable,
    StudyConfig,
    StudyError,
    compute_rates,
    run_longtime_study,
    run_spatial_study,
    run_stability_study,
    run_temporal_study,
    write_csv,
)

__version__ = "0.1.0"
