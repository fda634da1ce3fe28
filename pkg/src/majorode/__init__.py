"""Majorant boxes for countable ODE systems: construction, face
certification, truncated integration and periodic orbits."""
from .certify import (Certificate, check_initial_inclusion, check_lower, check_periodic_closure,
                      check_upper_nonneg, check_upper_symmetric)
from .errors import *  # noqa: F401,F403
from .majorant import (BernoulliMajorant, ClosedFormMajorant, MajorantFn, PdeMajorantSpec,
                       SequenceMajorant, SmoluchowskiBounds, TabulatedMajorant,
                       bernoulli_majorant, build_pde_majorant, build_smoluchowski_bounds,
                       example512_majorant, pde_weight_profile, q_factor, q_factor_exact)
from .periodic import PoincareResult, find_periodic, poincare_map
from .seqspace import (NONNEG, SYMMETRIC, Box, TailRule, TruncatedState, WeightProfile, in_box,
                       tail_norm_bound, weighted_norm)
from .solver import (PenaltyConfig, StepControl, Trajectory, dopri5, integrate_truncated,
                     penalty_rhs, solve_adaptive)
from .system import FunctionRhs, LinearRhs, RhsSystem

__version__ = "0.1.0"
