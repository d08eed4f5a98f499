"""Single-resource revenue management with no-shows: exact overage laws,
offline acceptance solvers, online policies and a simulation harness."""

from .core import ArrivalSequence, Instance, InstanceError, make_instance, normalize
from .pbin import CountDistribution, dist_of, expected_overage, tail_prob
from .offline import (
    BudgetExceededError,
    IndexSolution,
    SolveContext,
    local_opt_check,
    objective,
    solve_global_ascent,
    solve_global_bruteforce,
    solve_index,
    solve_index_exhaustive,
)

__version__ = "0.1.0"
