"""The log-loss game between Agent (picks Q) and Nature (picks P* in C).

Everything here is a numerical check of the saddle-point and equalizer
properties of the MaxEnt distribution, instance by instance.
"""

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT
from .constraints import DisjunctiveConstraint, lp_extremize
from .core import Distribution, _check_same_space, expected_log_loss, loss_vector
from .errors import ProbeOutsideConstraintSet
from .solver import naive_maximin_union, solve_maxent, solve_minimax_union

__all__ = [
    "SaddleReport",
    "worst_case_loss",
    "verify_saddle",
    "verify_saddle_union",
    "equalizer_residual",
    "coordinate_vertices",
    "sample_probes",
]

INF = float("inf")


@dataclass(frozen=True)
class SaddleReport:
    maximin: float
    minimax: float
    gap: float
    equalizer_spread: float
    worst_case_witness: Distribution
    solution: object = None
    vertex_losses: tuple = ()
    notes: tuple = field(default=())

    def to_dict(self):
        return {
            "maximin": self.maximin,
            "minimax": self.minimax,
            "gap": self.gap,
            "equalizer_spread": self.equalizer_spread,
            "worst_case_witness": self.worst_case_witness.probs.tolist(),
            "vertices": len(self.vertex_losses),
            "notes": list(self.notes),
        }


def worst_case_loss(Q, C, M):
    """``sup_{P* in C} E_{P*}[-ln(Q/M)]`` and a maximising ``P*``.

    Returns ``inf`` (with a witness charging a zero of ``Q``) when ``Q``
    vanishes somewhere on the support of ``C``.
    """
    _check_same_space(Q, C, M)
    loss = loss_vector(Q, M)
    bad = np.flatnonzero(~np.isfinite(loss) & C.support_mask())
    if bad.size:
        e = np.zeros(C.space.size)
        e[bad[0]] = 1.0
        _, witness = lp_extremize(C, e, "max")
        return INF, witness
    # outcomes where Q vanishes but C puts no mass carry no loss
    loss = np.where(np.isfinite(loss), loss, 0.0)
    value, witness = lp_extremize(C, loss, "max")
    return value, witness


def coordinate_vertices(C):
    """Vertices of ``C`` reached by maximising and minimising each coordinate."""
    n = C.space.size
    supp = C.support_mask()
    seen = {}
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        for sense in ("max", "min"):
            _, P = lp_extremize(C, e, sense)
            # LP round-off can leave ~1e-17 mass outside the support
            p = np.where(supp, P.probs, 0.0)
            P = Distribution(C.space, p / p.sum())
            seen.setdefault(tuple(np.round(P.probs, 12)), P)
    return list(seen.values())


def verify_saddle(problem, config=DEFAULT):
    """Compare the two game values at the MaxEnt distribution."""
    if isinstance(problem.constraints, DisjunctiveConstraint):
        return verify_saddle_union(problem.constraints, problem.measure, config)
    C, M = problem.constraints, problem.measure
    sol = solve_maxent(problem, config)
    Q = sol.distribution
    maximin = sol.entropy_value
    minimax, witness = worst_case_loss(Q, C, M)
    losses = tuple(expected_log_loss(P, Q, M) for P in coordinate_vertices(C))
    spread = max(losses) - min(losses)
    return SaddleReport(maximin, minimax, minimax - maximin, spread, witness, sol, losses)


def verify_saddle_union(D, M, config=DEFAULT):
    """Game values over a non-convex union of constraint sets.

    ``maximin`` is the best per-branch entropy (Nature restricted to the
    union); ``minimax`` is the worst-case loss of the hull solution.  The
    two differ whenever the union is not convex, and the report says so.
    """
    naive = naive_maximin_union(D, M, config)
    hull = solve_minimax_union(D, M, config)
    Q = hull.distribution
    best, witness, losses = -INF, None, []
    for b in D.feasible_branches:
        v, w = worst_case_loss(Q, b, M)
        if v > best:
            best, witness = v, w
        losses.extend(expected_log_loss(P, Q, M) for P in coordinate_vertices(b))
    spread = max(losses) - min(losses)
    notes = ("constraint set is a union of convex sets; the saddle theorem does not apply",)
    return SaddleReport(naive.entropy_value, best, best - naive.entropy_value, spread,
                        witness, hull, tuple(losses), notes)


def equalizer_residual(problem, probes, solution=None, tol=1e-8):
    """Largest deviation of a probe's expected loss under P^me from H_M(P^me)."""
    C, M = problem.constraints, problem.measure
    sol = solution or solve_maxent(problem)
    Q = sol.distribution
    worst = 0.0
    for P in probes:
        if not C.contains(P, tol):
            raise ProbeOutsideConstraintSet(f"probe {P!r} is not in the constraint set")
        worst = max(worst, abs(expected_log_loss(P, Q, M) - sol.entropy_value))
    return worst


def sample_probes(C, count=100, seed=0):
    """Hit-and-run members of ``C`` as distributions."""
    return [Distribution(C.space, p / p.sum()) for p in C.sample(count, seed=seed)]

