"""Observer synthesis for nonlinear systems via LMI feasibility, with
certificate verification, coupled plant/observer simulation, and a
networked-SIR case study."""

from .system_model import (ContractViolation, DetectabilityReport,
                           NonlinearSystem, Nonlinearity, StateDomain,
                           build_nonlinearity, load_system, observer_matrices,
                           pbh_detectability, save_system, shift_stabilize)
from .lmi_core import (AffineMatrixExpr, Constraint, LmiProblem, LmiSolution,
                       MatrixVariable, SolverOptions, Term, evaluate,
                       residuals, solve_feasibility)
from .synthesis import (Certificate, Criterion, ObserverGains,
                        SynthesisResult, VerificationReport, build_lipschitz,
                        build_paramfree, build_quadratic_bound, extract_gains,
                        load_gains, rho_sweep, save_gains, synthesize,
                        verify_certificate)
from .param_estimation import (EstimationConfig, jacobian_selfcheck,
                               lipschitz_constant, quadratic_bound_diag)
from .simulation import (NoiseSpec, SimulationDivergence, Trajectory,
                         error_metrics, load_trajectory_csv,
                         save_trajectory_csv, simulate)
from .sir_model import (SirNetwork, SirState, build_system, load_network,
                        random_network, save_network, sir_vector_field)

__version__ = "0.1.0"
