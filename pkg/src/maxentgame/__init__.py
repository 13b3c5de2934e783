"""Maximum-entropy inference on finite spaces, read as a log-loss game.

The main entry points::

    from maxentgame import OutcomeSpace, RandomVariable, ConstraintSet, ConstraintSpec
    from maxentgame import MaxEntProblem, solve_maxent

Submodules: ``core`` (spaces, measures, variables), ``constraints``,
``solver``, ``game``, ``representation``, ``classify``, ``kelly``,
``problemfile`` and ``cli``.  ``kernels.BACKEND`` reports whether the
compiled kernels are in use.
"""

__version__ = "0.1.0"

from .config import DEFAULT, STRICT, SolverConfig
from .core import (
    Distribution,
    Measure,
    MeasureFamily,
    OutcomeSpace,
    RandomVariable,
    conditional_expectation,
    determines,
    entropy,
    expectation,
    expected_log_loss,
    log_loss,
    pushforward,
    pushforward_measure,
    uniform_measure_on_range,
)
from .constraints import (
    ConstraintSet,
    ConstraintSpec,
    DisjunctiveConstraint,
    condition,
    convex_hull,
    lp_extremize,
    support,
)
from .errors import *  # noqa: F401,F403
from .solver import (
    MaxEntProblem,
    MaxEntSolution,
    naive_maximin_union,
    solve_maxent,
    solve_minimax_union,
)
from .game import SaddleReport, equalizer_residual, verify_saddle, worst_case_loss
from .representation import (
    RepresentationShift,
    check_invariance,
    induce_problem,
    measure_to_uniform_space,
    validate_shift,
)
from .classify import ApplicationClass, ApplicationQuery, affine_test, calibration_test, classify, guess
from .kelly import KellyConfig, KellyReport, expected_growth_rate, simulate, worst_case_growth_strategy
from .kernels import BACKEND
