"""Disturbance-aware prediction for discrete-time input-delayed linear systems.

The package covers the full design-and-evaluation loop: building the
extended plant-and-disturbance model, synthesizing the observer gain by
semidefinite programming, computing forecast-based predictions of the
delayed state, certifying analytic error bounds, and benchmarking against
classical and retention-based predictors in closed-loop simulation.
"""

from ._kernels import USING_NUMBA
from .bounds import (BoundReport, RunningL2, composite_bound, compute_mu,
                     compute_phi_j, compute_Yj, residual_sup, running_l2,
                     truncation_errors)
from .errors import ConfigError, DimensionError, InfeasibleError
from .lmi import (DesignCertificate, LmiConstraint, LmiProblem, VerificationReport,
                  assemble_design_problem, assemble_dstability, assemble_synthesis,
                  condensed_form, eigenvalue_report, solve_design, verify_certificate)
from .model import (AugmentedModel, DisturbanceSignal, PlantModel, build_augmented,
                    forward_difference, load_plant, newton_binomial,
                    newton_series_eval, plant_from_dict)
from .observer import (ObserverState, error_dynamics_step, observation_error_output,
                       observer_step)
from .predictors import (InputHistory, METHODS, PredictionRecord, PredictorGains,
                         compute_gains, predict_classical, predict_exact_oracle,
                         predict_proposed, predict_wu1, predict_wu2, records_to_csv)
from .simulate import (SimConfig, SimTrace, augmented_initial_state,
                       bounded_residual_samples, default_etahat0, make_disturbance,
                       run_closed_loop, run_comparison)

__version__ = "0.1.0"
