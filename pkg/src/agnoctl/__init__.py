"""Numerical laboratory for controlling dq = (a q + u) dt + dW at quadratic cost.

Subpackages by theme:

- lqr: closed-form optimal control and cost when the drift gain a is known
- filtering: sufficient statistics and posteriors for unknown a
- bellman: value-function PDE solver over (t, q, zeta1, zeta2)
- simulate: vectorized Euler-Maruyama batches of controlled paths
- regret: regret functionals, certificates, least-favorable-prior search
- extension: wrapping an interval strategy so it survives any real drift
- cli: the `agnoctl` experiment driver
"""

from .bellman import SolverGrid, ValueField, solve_bellman
from .errors import AgnoctlError, ConfigError, DivergenceError, FieldIOError
from .extension import ExtendedStrategy, ExtensionParams, extend_strategy, robust_interval_strategy
from .filtering import DiscretePrior, Posterior, SufficientStats, update_stats
from .lqr import ProblemSpec, known_a_control, known_a_expected_cost, riccati_gain
from .regret import (MinimaxConfig, MinimaxSolution, RegretKind, RegretValue,
                     dyadic_net, minimax_prior_search, regret, regret_profile,
                     worst_case_regret)
from .simulate import (CertaintyEquivalentStrategy, CostEstimate, FieldStrategy,
                       KnownAStrategy, Partition, Strategy, ZeroStrategy,
                       estimate_cost, estimate_cost_under_prior, run_batch)

__version__ = "0.1.0"
