from .grid import Grid, ScalarField, gradient_field
from .boundary import BoundaryData, initial_field
from .flux import face_flux, divergence, discrete_energy, stencil
from .stepping import (
    SolverConfig,
    StepLog,
    RunResult,
    step_residual,
    solve_timestep,
    run_simulation,
    table_radius,
)
from .persist import save_run, load_run, load_manifest, write_snapshot, read_snapshot
