"""Optimal retirement with Gompertz mortality via the dual free-boundary problem.

The reduced dual stopping problem is solved on a reversed-time grid by the
recursive integration method; primal wealth boundaries, consumption and
portfolio policies are then recovered by convex duality.
"""

from .boundary import BoundarySolution, d_arguments, g_kernel, j_hat, solve_boundary
from .errors import *  # noqa: F401,F403
from .kernels import BACKEND
from .model import (
    DerivedConstants,
    GammaRegime,
    ModelParams,
    check_assumptions,
    derive_constants,
    dual_utility,
    growth_factor_N,
    initial_mortality,
    mortality_at,
    mortality_integral,
    q_factor,
)
from .oracle import LatticeSpec, OracleReport, lattice_solve, mc_evaluate
from .post_retirement import (
    QProfile,
    c_integral,
    post_retirement_consumption,
    post_retirement_value,
    q_reduced,
    q_reduced_x,
    q_reduced_xx,
)
from .primal import (
    PolicyOutput,
    PrimalState,
    dual_value_J,
    feedback_policies,
    invert_multiplier,
    j_tilde,
    primal_value,
    retired_value,
    wealth_boundary,
    wealth_from_multiplier,
    wealth_to_wage_ratio,
)

__version__ = "0.1.0"
