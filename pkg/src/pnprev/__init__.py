"""Reversal potentials and permanent charges for two-species channel models.

The package solves the reduced zero-current system of a quasi-1D
electrodiffusion model with a single piecewise-constant permanent charge,
reconstructs the internal singular orbit, and cross-checks everything
against a finite-thickness boundary-value solver.
"""

from .bvp import BvpSolution, MeshControl, find_reversal_bvp, solve_bvp
from .errors import (
    BracketFailure,
    ConfigurationError,
    ConvergenceError,
    DegenerateProfileError,
    DegenerateSystemError,
    DomainError,
    InvalidProfileError,
    NoReversalChargeError,
    PnprevError,
)
from .geometry import (
    ChannelGeometry,
    ConstantProfile,
    FuncProfile,
    StepProfile,
    TableProfile,
    build_geometry,
    profile_from_spec,
    resistance_integral,
)
from .profile import InternalProfile, MatchingReport, matching_residual, reconstruct
from .reduced import (
    BathConditions,
    Partials,
    ReducedState,
    Transport,
    aux_g,
    b_of_a,
    g1,
    g2,
    partials,
    reduced_state,
    transport_from_theta,
)
from .solvers import (
    ReversalChargeResult,
    SolveResult,
    SweepRow,
    ghk_reversal,
    reversal_charge,
    reversal_potential,
    solve_a,
    solve_zero_current,
    sweep,
    vrev_small_q0,
    zero_current_flux,
)

__version__ = "0.1.0"
