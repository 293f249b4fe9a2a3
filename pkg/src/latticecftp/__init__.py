"""Exact stationary-marginal sampling for rule-based lattice dynamics.

The engine draws perfect samples from the stationary law of finite-state
interacting particle systems on Z^d given by finite rule lists, including
perturbed dynamics handled through ambiguity locking and recursive
resolution of the resulting space-time dependency closure.
"""

__version__ = "0.1.0"

from .assembler import (AmbClosure, SampleResult, build_amb_closure,
                        global_consensus_value, resolve_all, sample_marginal,
                        sample_site)
from .diagnostics import (EstimateReport, check_bounds, estimate_g,
                          estimate_lambda, tail_curve)
from .errors import (BudgetExceeded, CapExceeded, CouplingViolation,
                     InvalidQuery, LatticeCftpError, MissingEValue,
                     ModelShapeMismatch, PositiveRatesMissing,
                     ScheduleIncomplete, SingularSystem, SupportMismatch,
                     UnsortedEvents, ValidationError, ZeroTotalRate)
from .event_field import Event, EventField, column_count_rate_check
from .exploration import (ExplorationTrace, FiniteFactorTheta, PollingTheta,
                          ThetaMap, VoterTheta, make_theta, readout_consensus,
                          readout_polling, readout_voter, run_exploration)
from .locking import Caps, CftpAmbOutcome, LockTree, explore_with_locking, \
    resolve_readout
from .model_io import load_model, model_from_dict, model_to_dict, \
    save_model_json
from .models import (Model, PatchConfig, Rule, StateSpace, apply_rule,
                     asymmetric_polling, build_model, epsilon, flow_replay,
                     independent_sites, kappa, noisy_voter, rn_ypr,
                     with_perturbation)
from .oracle import (ForwardPlan, empirical_distribution, forward_simulate,
                     forward_marginal_samples, torus_stationary, tv_distance)
