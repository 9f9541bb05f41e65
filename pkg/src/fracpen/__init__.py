"""Penalized variational solver for the semiclassical fractional Schrodinger
equation ``eps^{2s}(-Delta)^s u + V u = |u|^{p-2} u`` with fast-decaying or
compactly supported potentials, plus checks of its quantitative predictions."""

from .energy import (
    EnergyBreakdown,
    EnergyContext,
    G_eps,
    g_eps,
    general_G_eps,
    general_g_eps,
    limiting_energy,
    nehari_project,
    penalized_energy,
    penalized_gradient,
)
from .errors import *  # noqa: F401,F403
from .fracops import (
    apply_fraclap_direct,
    apply_fraclap_spectral,
    gagliardo_nirenberg_quotient,
    gagliardo_seminorm_sq,
    hardy_quotient,
    kernel_constant,
)
from .grid import Field, Grid
from .model import (
    Ball,
    Box,
    ModelParams,
    NonlinearitySpec,
    PotentialSpec,
    check_assumption_A,
    check_nonlinearity_conditions,
    check_penalization_admissible,
    default_params,
    default_potential,
    evaluate_potential,
    penalization_potential,
    pure_power,
    rational_nonlinearity,
)
from .solver import (
    SolverConfig,
    SolverResult,
    epsilon_sweep,
    limiting_ground_state,
    penalized_solve,
    rescale_ground_state,
)

__version__ = "0.1.0"
