from dataclasses import dataclass, replace


@dataclass(frozen=True)
class SolverConfig:
    """Numerical tolerances shared by the LP engine and the MaxEnt solvers."""

    moment_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_newton_iter: int = 500
    max_fallback_iter: int = 500
    support_tol: float = 1e-10
    lp_pivot_tol: float = 1e-11
    lp_feas_tol: float = 1e-9
    lp_max_iter: int = 50_000
    rank_tol: float = 1e-10
    minimax_check_tol: float = 1e-6

    def strict(self):
        return replace(self, moment_tol=1e-10, gap_tol=1e-11)


DEFAULT = SolverConfig()
STRICT = DEFAULT.strict()

PROFILES = {"default": DEFAULT, "strict": STRICT}
