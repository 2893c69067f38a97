"""burstfit: recover ODE/DAE right-hand sides from many short trajectory
bursts by polynomial least-squares, robust l1, penalized, or streaming
sequential regression, with validation against the true dynamics and an
a-priori trajectory error bound."""

from ._kernels import BACKEND as kernel_backend
from .basis import BasisSpec, eval_basis, index_set, kernel_diag, sup_sqrt_kernel
from .domain import Domain, contains, sample_initial_states
from .dynamics import (DaeSystem, LearnedSystem, OdeSystem, builtin_system,
                       catalog_names, eval_learned, integrate_rk4)
from .data import (CorruptionSpec, DataPairing, NoiseSpec, TrajectoryBurst,
                   estimate_derivatives, exact_pairings, perturb,
                   synthesize_bursts)
from .regression import (CoefficientSet, ModelMatrix, assemble, fit_l1,
                         fit_l2, fit_lasso, fit_constraint_map)
from .sequential import Monitor, SaState, sa_run, sa_step
from .analysis import (BoundInputs, coefficient_error, gronwall_bound,
                       project, rhs_error, trajectory_error)
from .experiment import run_experiment, run_sweep
from .presets import list_presets, preset

__version__ = "0.1.0"
