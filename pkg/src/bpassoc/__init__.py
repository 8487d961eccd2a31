"""Marginal association probabilities for multi-target tracking.

The main entry point is :func:`solve`, which runs scalar belief
propagation on a target-by-measurement weight matrix and stops once the
belief error is provably below a tolerance. :func:`exact_marginals` gives
the enumeration reference and :func:`cd_beliefs` the truncated
correlation-decay alternative.
"""

from .bp import (
    ContractionParams,
    ConvergenceReport,
    MessageState,
    beliefs_from_messages,
    compute_contraction_params,
    contraction_factor,
    full_bp,
    initial_state,
    iterate,
    iteration_bound_closed_form,
    iteration_bound_computable,
    message_distance,
    solve,
    solve_state,
    stopping_guarantee,
)
from .corrdecay import CdQuery, cd_beliefs, phi
from .errors import *  # noqa: F403
from .exact import ExactMarginals, average_max_error, exact_marginals, max_marginal_error
from .model import (
    BeliefTable,
    JointEvent,
    WeightMatrix,
    enumerate_events,
    event_table,
    event_weight,
    format_weight_matrix,
    read_weight_matrix,
    validate_weights,
)

__version__ = "0.1.0"
