"""Observer-based Dirichlet boundary control toolkit for the 1D heat equation.

Modules: modal (spectral data, reduced matrices), sdp (semidefinite
feasibility engine), synthesis (gain design, stability LMIs, Halanay rate),
sim (spectral closed-loop simulator), cli (command line front end).
"""

from .errors import (AnalysisError, AssumptionError, ConfigError,
                     HeatCtrlError, SimulationError, SynthesisError)
from .modal import (ModalModel, SystemConfig, check_assumption1, eigenpair,
                    eigenvalue, input_coeff, output_coeff, reduced_matrices,
                    select_N0, tail_bounds, tail_partial_sums)
from .sdp import (LmiProblem, SolveOptions, SolveOutcome, SolveStatus,
                  check_certificate, solve_feasibility)
from .sim import (Sampling, SimConfig, Trajectory, decay_rate_estimate,
                  h1_norm_sq, reconstruct_z, simulate_continuous,
                  simulate_sampled)
from .synthesis import (ClosedLoopMatrices, GainSet, LmiCertificate,
                        assemble_closed_loop, build_continuous_lmi,
                        build_sampled_lmis, certify_continuous,
                        certify_sampled, design_controller_gain, design_gains,
                        design_observer_gain, gains_from_vectors, halanay_rate,
                        max_feasible_tau_u, verify_gains)

__version__ = "0.1.0"
